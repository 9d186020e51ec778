from .mesh import BoundaryTag, Mesh, MeshError, generate_rect_mesh, load_mesh, save_mesh
from .partition import (
    DEFAULT_BYTES_PER_ELEMENT,
    Method,
    Partitioning,
    PartitionStats,
    WorstCase,
    halo_lists,
    neighbor_count_violations,
    partition,
    partition_stats,
    write_stats_csv,
)

__all__ = [
    "DEFAULT_BYTES_PER_ELEMENT",
    "BoundaryTag",
    "Mesh",
    "MeshError",
    "Method",
    "PartitionStats",
    "Partitioning",
    "WorstCase",
    "generate_rect_mesh",
    "halo_lists",
    "load_mesh",
    "neighbor_count_violations",
    "partition",
    "partition_stats",
    "save_mesh",
    "write_stats_csv",
]
