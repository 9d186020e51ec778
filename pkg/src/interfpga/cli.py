"""
Command-line front end.

Exit codes: 0 success, 1 configuration or usage error, 2 a runtime
invariant failed (halo mismatch, deadlock, non-finite state, ...).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .beff import BeffConfig, run_beff, run_size, write_beff_csv, write_model_error_csv
from .config import (
    ExperimentConfig,
    dump_config,
    load_config,
    override,
    parse_mode,
)
from .errors import ConfigurationError, InvariantViolation
from .mesh import Method, generate_rect_mesh, load_mesh, partition, partition_stats, save_mesh, write_stats_csv
from .perfmodel import buffered_peak_throughput, transfer_latency
from .presets import PRESETS

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as configuration errors (exit 1)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _method(name: str) -> Method:
    try:
        return Method(name)
    except ValueError:
        raise ConfigurationError(f"unknown partition method {name!r}; use rcb or bfs") from None


# -- beff -----------------------------------------------------------------


def cmd_beff(cfg: ExperimentConfig, out: Path, trace: bool) -> int:
    sec = cfg.beff
    cluster = cfg.cluster.resolve()
    mode = parse_mode(sec.mode) if sec.mode else None
    bcfg = BeffConfig(node_count=sec.nodes, message_sizes=sec.sizes, repetitions=sec.repetitions, mode=mode)
    result = run_beff(bcfg, cluster)
    write_beff_csv(result, out / "beff.csv")
    write_model_error_csv(result, out / "beff_model_error.csv")
    if trace:
        with open(out / "trace.txt", "w") as fh:
            for size in sec.sizes:
                _, sim = run_size(bcfg, cluster, size, trace=True)
                fh.write(f"# size {size}\n")
                fh.writelines(line + "\n" for line in sim.trace)
    first, last = result.rows[0], result.rows[-1]
    print(f"{cluster.name} {result.mode} nodes={sec.nodes}")
    print(f"  {first.size} B latency {first.latency * 1e6:.3f} us")
    print(f"  {last.size} B throughput {last.throughput / 1e9:.3f} GB/s")
    print(f"  b_eff {result.b_eff / 1e9:.3f} GB/s")
    bad = [r.size for r in result.rows if not r.within_tolerance]
    print(f"  model agreement: {'all sizes within tolerance' if not bad else f'outside tolerance at {bad}'}")
    return EXIT_OK


# -- swe ------------------------------------------------------------------


def _initial_state(mesh, name: str, depth: float):
    from .swe.solver import ElementState, bump_state, dam_break_state

    if name == "bump":
        return bump_state(mesh, depth=depth)
    if name == "dam-break":
        return dam_break_state(mesh, depth=depth)
    if name == "rest":
        return ElementState.at_rest(mesh.n_elements, depth)
    raise ConfigurationError(f"unknown initial state {name!r}; use bump, dam-break or rest")


def cmd_swe_solve(cfg: ExperimentConfig, out: Path, trace: bool) -> int:
    from .swe.distributed import DistributedSolver
    from .swe.scaling import write_snapshot_csv
    from .swe.solver import ReferenceSolver, SolverConfig, stable_dt

    sec = cfg.swe
    cluster = cfg.cluster.resolve()
    mesh = generate_rect_mesh(sec.nx, sec.ny, sec.sea_side, sec.cell_size)
    state = _initial_state(mesh, sec.initial, sec.sea_depth)
    scfg = SolverConfig(dt=1.0, g=sec.g, sea_depth=sec.sea_depth, tide_amplitude=sec.tide_amplitude,
                        tide_period=sec.tide_period)
    scfg = replace(scfg, dt=sec.dt if sec.dt is not None else stable_dt(mesh, state, scfg))
    pipe = _pipeline(cfg, cluster)
    if sec.steps < 0 or sec.snapshot_every < 0:
        raise ConfigurationError("steps and snapshot_every must be non-negative")
    solver = DistributedSolver(mesh, partition(mesh, sec.k, _method(sec.method)), state, scfg, cluster,
                               pipe=pipe, streamed_recv=sec.streamed_recv, trace=trace)
    rows = []
    for step in range(1, sec.steps + 1):
        for t in solver.step():
            rows.append([step, t.part, repr(t.compute_cycles), repr(t.arrival_cycles), repr(t.stall_cycles),
                         repr(t.drain_cycles), repr(t.fill_cycles), repr(t.total_cycles)])
        if sec.snapshot_every and step % sec.snapshot_every == 0:
            write_snapshot_csv(solver.gather(), out / f"snapshot_{step:06d}.csv")
    final = solver.gather()
    write_snapshot_csv(final, out / "state.csv")
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "part", "compute_cycles", "arrival_cycles", "stall_cycles",
                    "drain_cycles", "fill_cycles", "total_cycles"])
        w.writerows(rows)
    if trace:
        (out / "trace.txt").write_text("".join(line + "\n" for line in solver.sim.trace))
    print(f"solved {sec.steps} steps on {mesh.n_elements} elements, k={sec.k}, dt={scfg.dt:.6g} s")
    print(f"  mass {final.mass(mesh.areas):.12g}")
    if sec.check_oracle:
        ref = ReferenceSolver(mesh, state, scfg).run(sec.steps)
        if not final.bitwise_equal(ref):
            diff = float(np.max(np.abs(final.h - ref.h)))
            print(f"  oracle: MISMATCH, max |dh| = {diff:.3e}", file=sys.stderr)
            return EXIT_RUNTIME
        print("  oracle: bitwise match with the single-partition reference")
    return EXIT_OK


def _pipeline(cfg: ExperimentConfig, cluster):
    from .swe.timing import PipelineConfig

    p = cfg.pipeline
    return PipelineConfig(f=p.f or cluster.clock_hz, l_pipe=p.l_pipe, d_ext=p.d_ext,
                          flop_per_element=p.flop_per_element)


def cmd_swe_scaling(cfg: ExperimentConfig, out: Path, trace: bool) -> int:
    from .swe.scaling import ScalingKind, run_scaling_experiment, strong_mesh, weak_mesh, write_scaling_csv

    sec = cfg.scaling
    cluster = cfg.cluster.resolve()
    kind = ScalingKind(sec.kind) if sec.kind in ("weak", "strong") else None
    if kind is None:
        raise ConfigurationError(f"scaling kind must be weak or strong, got {sec.kind!r}")
    if kind is ScalingKind.WEAK:
        mesh_for = lambda k: weak_mesh(k, sec.elements_per_partition)  # noqa: E731
    else:
        fixed = strong_mesh(sec.strong_elements)
        mesh_for = lambda k: fixed  # noqa: E731
    rows = run_scaling_experiment(kind, sec.ks, cluster, _pipeline(cfg, cluster), mesh_for,
                                  _method(sec.method), sec.steps, sec.bytes_per_element)
    write_scaling_csv(rows, out / "scaling.csv")
    print(f"{kind.value} scaling, {cluster.name}")
    for r in rows:
        print(f"  k={r.k:3d} n_max={r.n_max:2d} {r.sim_flops / 1e12:8.4f} TFLOP/s "
              f"(model {r.model_flops / 1e12:.4f}) efficiency {r.efficiency:.3f} stall {r.stall_fraction:.3f}")
    return EXIT_OK


# -- model ----------------------------------------------------------------


def cmd_model(cfg: ExperimentConfig, out: Path, buffered_peak) -> int:
    if buffered_peak is not None:
        mem_bw, link_bw = buffered_peak
        try:
            peak = buffered_peak_throughput(mem_bw, link_bw)
        except ValueError as e:
            raise ConfigurationError(str(e)) from None
        print(f"{peak:.6g}")
        return EXIT_OK
    sec = cfg.model
    if not sec.sizes:
        raise ConfigurationError("model sweep needs at least one message size")
    if not sec.modes:
        raise ConfigurationError("model sweep needs at least one transfer mode")
    if any(s < 0 for s in sec.sizes):
        raise ConfigurationError("message sizes must be non-negative")
    cluster = cfg.cluster.resolve()
    modes = [parse_mode(m) for m in sec.modes]
    link = cluster.model_link
    with open(out / "model.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["size_bytes", "mode", "latency_s", "throughput_Bps"])
        for size in sec.sizes:
            for mode in modes:
                lat = transfer_latency(size, mode, link, cluster.sched, cluster.mem)
                w.writerow([size, str(mode), repr(lat), repr(size / lat)])
    print(f"wrote {len(sec.sizes) * len(modes)} rows to {out / 'model.csv'}")
    return EXIT_OK


# -- mesh -----------------------------------------------------------------


def _mesh_from(args, cfg: ExperimentConfig):
    if getattr(args, "mesh_file", None):
        return load_mesh(args.mesh_file)
    sec = cfg.mesh
    return generate_rect_mesh(sec.nx, sec.ny, sec.sea_side, sec.cell_size)


def cmd_mesh(args, cfg: ExperimentConfig, out: Path) -> int:
    sec = cfg.mesh
    if args.mesh_cmd == "generate":
        mesh = generate_rect_mesh(sec.nx, sec.ny, sec.sea_side, sec.cell_size)
        target = Path(args.output) if args.output else out / "mesh.txt"
        save_mesh(mesh, target)
        print(f"wrote {mesh.n_elements} triangles to {target}")
        return EXIT_OK
    mesh = _mesh_from(args, cfg)
    if args.mesh_cmd == "inspect":
        boundary = mesh.edge_elements[:, 1] < 0
        tags = mesh.edge_tags[boundary]
        print(f"vertices {len(mesh.vertices)}")
        print(f"triangles {mesh.n_elements}")
        print(f"edges {mesh.n_edges} (interior {int((~boundary).sum())}, land {int((tags == 1).sum())}, "
              f"sea {int((tags == 2).sum())})")
        print(f"area {float(mesh.areas.sum()):.6g}")
        return EXIT_OK
    p = partition(mesh, sec.k, _method(sec.method))
    stats, worst = partition_stats(p, mesh, sec.bytes_per_element, cfg.pipeline.d_ext)
    write_stats_csv(stats, out / "partition_stats.csv")
    with open(out / "assignment.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "part"])
        w.writerows(enumerate(p.assignment.tolist()))
    sizes = p.sizes()
    print(f"k={p.k} sizes {int(sizes.min())}..{int(sizes.max())} n_max={worst.n_max} "
          f"e_send_max={worst.e_send_max} e_recv_max={worst.e_recv_max} e_core_min={worst.e_core_min}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment config")
    common.add_argument("--preset", choices=sorted(PRESETS), help="cluster preset")
    common.add_argument("--out-dir", help="directory for CSV output (created if missing)")
    common.add_argument("--trace", action="store_true", help="write a simulator event trace")
    common.add_argument("--dump-config", action="store_true",
                        help="print the effective config with the preset expanded and exit")

    parser = _Parser(prog="interfpga", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("beff", parents=[common], help="effective-bandwidth ring benchmark")
    b.add_argument("--nodes", type=int)
    b.add_argument("--sizes", type=_int_list, help="comma-separated message sizes in bytes")
    b.add_argument("--repetitions", type=int)
    b.add_argument("--mode", help="transfer mode, e.g. streamed-pl or buffered-host")

    s = sub.add_parser("swe", help="shallow-water solver and scaling experiments")
    ssub = s.add_subparsers(dest="swe_cmd", required=True, parser_class=_Parser)
    solve = ssub.add_parser("solve", parents=[common], help="partitioned solve with halo exchange")
    for flag in ("--nx", "--ny", "--k", "--steps", "--snapshot-every"):
        solve.add_argument(flag, type=int)
    solve.add_argument("--dt", type=float)
    solve.add_argument("--method", choices=[m.value for m in Method])
    solve.add_argument("--initial", choices=["bump", "dam-break", "rest"])
    solve.add_argument("--sea-side", choices=["south", "east", "north", "west", "none"])
    solve.add_argument("--check-oracle", action="store_true", default=None,
                       help="compare bitwise against the single-partition reference")
    solve.add_argument("--streamed-recv", action="store_true", default=None,
                       help="receive into the stream in arrival order (shows the ordering hazard)")
    sc = ssub.add_parser("scaling", parents=[common], help="weak or strong scaling sweep")
    sc.add_argument("--kind", choices=["weak", "strong"])
    sc.add_argument("--ks", type=_int_list, help="comma-separated partition counts")
    sc.add_argument("--method", choices=[m.value for m in Method])
    sc.add_argument("--steps", type=int)
    sc.add_argument("--elements-per-partition", type=int)
    sc.add_argument("--strong-elements", type=int)

    m = sub.add_parser("model", parents=[common], help="evaluate the closed-form latency model")
    m.add_argument("--sizes", type=_int_list)
    m.add_argument("--modes", help="comma-separated transfer modes")
    m.add_argument("--buffered-peak", nargs=2, type=float, metavar=("MEM_BW", "LINK_BW"),
                   help="print the buffered peak throughput for two bandwidths in bytes/s")

    g = sub.add_parser("mesh", help="mesh generation, partitioning and inspection")
    gsub = g.add_subparsers(dest="mesh_cmd", required=True, parser_class=_Parser)
    gen = gsub.add_parser("generate", parents=[common])
    gen.add_argument("-o", "--output")
    part = gsub.add_parser("partition", parents=[common])
    part.add_argument("--k", type=int)
    part.add_argument("--method", choices=[m.value for m in Method])
    insp = gsub.add_parser("inspect", parents=[common])
    for p in (gen, part, insp):
        p.add_argument("--nx", type=int)
        p.add_argument("--ny", type=int)
        p.add_argument("--sea-side", choices=["south", "east", "north", "west", "none"])
    for p in (part, insp):
        p.add_argument("--mesh", dest="mesh_file", help="mesh file to read instead of generating one")
    return parser


def _sea_side(value):
    return None if value is None else ("" if value == "none" else value)


def apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    cluster = override(cfg.cluster, preset=get("preset"))
    cfg = replace(cfg, cluster=cluster, out_dir=get("out_dir") or cfg.out_dir)
    sea = _sea_side(get("sea_side"))
    if args.command == "beff":
        cfg = replace(cfg, beff=override(cfg.beff, nodes=get("nodes"), sizes=get("sizes"),
                                         repetitions=get("repetitions"), mode=get("mode")))
    elif args.command == "swe" and args.swe_cmd == "solve":
        swe = override(cfg.swe, nx=get("nx"), ny=get("ny"), k=get("k"), steps=get("steps"),
                       snapshot_every=get("snapshot_every"), dt=get("dt"), method=get("method"),
                       initial=get("initial"), check_oracle=get("check_oracle"),
                       streamed_recv=get("streamed_recv"))
        if sea is not None:
            swe = replace(swe, sea_side=sea or None)
        cfg = replace(cfg, swe=swe)
    elif args.command == "swe":
        cfg = replace(cfg, scaling=override(cfg.scaling, kind=get("kind"), ks=get("ks"),
                                            method=get("method"), steps=get("steps"),
                                            elements_per_partition=get("elements_per_partition"),
                                            strong_elements=get("strong_elements")))
    elif args.command == "model":
        modes = get("modes")
        cfg = replace(cfg, model=override(
            cfg.model, sizes=get("sizes"),
            modes=None if modes is None else tuple(x for x in modes.split(",") if x.strip())))
    elif args.command == "mesh":
        mesh = override(cfg.mesh, nx=get("nx"), ny=get("ny"), k=get("k"), method=get("method"))
        if sea is not None:
            mesh = replace(mesh, sea_side=sea or None)
        cfg = replace(cfg, mesh=mesh)
    return cfg


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = apply_flags(load_config(args.config), args)
    cfg.cluster.resolve()  # validate before doing any work
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "beff":
        return cmd_beff(cfg, out, args.trace)
    if args.command == "swe":
        if args.swe_cmd == "solve":
            return cmd_swe_solve(cfg, out, args.trace)
        return cmd_swe_scaling(cfg, out, args.trace)
    if args.command == "model":
        return cmd_model(cfg, out, args.buffered_peak)
    return cmd_mesh(args, cfg, out)


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"runtime invariant violated: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
