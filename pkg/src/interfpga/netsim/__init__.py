from .events import (
    PS_PER_S,
    Event,
    EventKind,
    EventQueue,
    SchedulingError,
    serialization_ps,
    to_ps,
    to_seconds,
)
from .simulator import (
    CommandDescriptor,
    CommandHandle,
    Op,
    SimStats,
    Simulator,
    StreamRecord,
    TransportConfig,
    TransportKind,
    reassemble,
)

__all__ = [
    "PS_PER_S",
    "CommandDescriptor",
    "CommandHandle",
    "Event",
    "EventKind",
    "EventQueue",
    "Op",
    "SchedulingError",
    "SimStats",
    "Simulator",
    "StreamRecord",
    "TransportConfig",
    "TransportKind",
    "reassemble",
    "serialization_ps",
    "to_ps",
    "to_seconds",
]
