"""Command-line interface: simulate, sweep harnesses and consistency checks."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, mirrored_beam, parse_config
from .diagnostics import beam_metrics, cfl_sweep, convergence_harness, emit_outputs, \
    layer_sweep, limit_checks
from .marching import BlowUpError, march_one_ray, march_two_ray

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _floats(text: str):
    return [float(part) for part in text.split(",") if part.strip()]


def _print_rows(rows):
    if not rows:
        return
    keys = list(rows[0])
    print("\t".join(keys))
    for row in rows:
        print("\t".join(f"{row[k]:.6g}" if isinstance(row[k], float) else str(row[k])
                        for k in keys))


def _cmd_simulate(args) -> int:
    config = _load(args.config)
    state = march_one_ray(config) if len(config.beams) == 1 else march_two_ray(config)
    metrics = beam_metrics(state, config)
    out_dir = args.out or config.output_dir
    emit_outputs(state, metrics, out_dir)
    print(f"focusing_distance = {metrics.focusing_distance:.6g}")
    print(f"max_energy = {metrics.max_energy:.6g} at {metrics.max_location}")
    print(f"total_energy = {metrics.total_energy:.6g}")
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    config = _load(args.config)
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = convergence_harness(config, _floats(args.meshes), args.ref,
                               out_path=out_dir / "convergence.csv")
    _print_rows(rows)
    return EXIT_OK


def _cmd_cfl_sweep(args) -> int:
    config = _load(args.config)
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reference = None
    if args.ref_mesh:
        from dataclasses import replace

        from .config import GridSpec

        g = config.grid
        grid = GridSpec.from_lengths(args.ref_mesh, args.ref_mesh, g.length_x,
                                     g.length_y, g.y_origin, g.layer_width)
        reference = march_one_ray(replace(config, grid=grid))
    rows = cfl_sweep(config, _floats(args.cfls), args.order, args.limiter,
                     reference=reference, out_path=out_dir / "cfl_sweep.csv")
    _print_rows(rows)
    return EXIT_OK


def _cmd_layer_sweep(args) -> int:
    config = _load(args.config)
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = layer_sweep(config, _floats(args.b), _floats(args.beta),
                       out_path=out_dir / "layer_sweep.csv")
    _print_rows(rows)
    return EXIT_OK


def _cmd_two_ray(args) -> int:
    config = _load(args.config)
    if len(config.beams) == 1:
        from dataclasses import replace

        beam = config.beam
        if beam.ky <= 0:
            raise ConfigError("two-ray needs beam.ky > 0 (the mirror ray is derived)")
        config = replace(config, beams=(beam, mirrored_beam(beam, config.grid)))
    state = march_two_ray(config)
    metrics = beam_metrics(state, config)
    out_dir = args.out or config.output_dir
    emit_outputs(state, metrics, out_dir)
    print(f"max_energy = {metrics.max_energy:.6g} at {metrics.max_location}")
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def _cmd_limits_check(args) -> int:
    config = _load(args.config)
    checks = limit_checks(config)
    failed = 0
    for c in checks:
        verdict = "PASS" if c["ok"] else "FAIL"
        print(f"{verdict} {c['check']}: value={c['value']:.3e} tol={c['tolerance']:.1e}")
        failed += 0 if c["ok"] else 1
    return EXIT_OK if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltbeam",
        description="Split-step beam propagation in a tilted frame",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one config and write outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (defaults to output.dir)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("converge", help="mesh refinement study at fixed CFL")
    p.add_argument("--config", required=True)
    p.add_argument("--meshes", required=True, help="comma list, e.g. 1.6,0.8,0.4,0.2,0.1")
    p.add_argument("--ref", type=float, required=True, help="reference mesh size")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("cfl-sweep", help="vary CFL at fixed dy")
    p.add_argument("--config", required=True)
    p.add_argument("--cfls", required=True, help="comma list, e.g. 0.5,0.6,0.75,0.875,1")
    p.add_argument("--order", type=int, choices=(1, 2), required=True)
    p.add_argument("--limiter", choices=("vanleer", "clamped", "superbee"),
                   default="vanleer")
    p.add_argument("--ref-mesh", type=float, help="mesh of an extra reference run")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_cfl_sweep)

    p = sub.add_parser("layer-sweep", help="vary the absorbing strip parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--b", required=True, help="comma list of strip strengths")
    p.add_argument("--beta", required=True, help="comma list of grading factors")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_layer_sweep)

    p = sub.add_parser("two-ray", help="crossing-beam run (mirror ray derived if absent)")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_two_ray)

    p = sub.add_parser("limits-check", help="run the limiting-regime consistency suite")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_limits_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
