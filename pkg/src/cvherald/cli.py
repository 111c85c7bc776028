"""Command-line interface: preparations, gate runs, sweeps, optimization.

Results go to delimited files (header ``X,fidelity,success_probability``,
12 significant digits) plus a JSON manifest next to each output recording
the command, parameters and content hashes.  Exit codes: 0 success, 2 usage
error, 3 numerical failure (cutoff overflow, quadrature non-convergence,
too-narrow integration grid).

Figure rendering is off by default; ``--plot`` writes a PNG next to the
delimited output.  Worker count for sweeps comes from CVHERALD_WORKERS.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from importlib.metadata import PackageNotFoundError, version as pkg_version

import numpy as np

from .gates import NsgParams, nsg_process_fidelity
from .measurement import QuadratureConvergenceError
from .protocols import (
    GeneralPrepParams,
    GridTooNarrowError,
    PipelineParams,
    ResourceState,
    prep_single_photon_general,
)
from .states import ModeState, TruncationLossError
from .sweep import SweepRow, sweep_window, optimize_multistart

MANIFEST_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    TruncationLossError,
    QuadratureConvergenceError,
    GridTooNarrowError,
)


class UsageError(ValueError):
    pass


def _tool_version() -> str:
    try:
        return pkg_version("cvherald")
    except PackageNotFoundError:
        return "unknown"


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _write_csv(path: str, rows: list[SweepRow]) -> None:
    lines = ["X,fidelity,success_probability"]
    for r in rows:
        lines.append(f"{_fmt(r.window)},{_fmt(r.fidelity)},{_fmt(r.success_probability)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    out_path: str,
    command: str,
    params: dict,
    outputs: list[str],
    started: float,
    extra: dict | None = None,
) -> str:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "cvherald",
        "tool_version": _tool_version(),
        "command": command,
        "parameters": params,
        "outputs": [{"path": p, "sha256": _sha256(p)} for p in outputs],
        "wall_clock_s": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = out_path + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parse_sweep(spec: str) -> list[float]:
    try:
        lo_s, hi_s, n_s = spec.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError as exc:
        raise UsageError(f"bad --sweep spec {spec!r}; expected Xmin:Xmax:steps") from exc
    if n < 1 or lo <= 0 or hi <= lo:
        raise UsageError("--sweep needs 0 < Xmin < Xmax and steps >= 1")
    return list(np.linspace(lo, hi, n))


def _parse_resource(tokens: list[str]) -> tuple[str, object]:
    """Accept 'fock:N', 'coeffs:c0,c1,...' or 'coeffs c0,c1,...'."""
    spec = ":".join(tokens) if len(tokens) > 1 else tokens[0]
    if spec.startswith("fock:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad resource {spec!r}") from exc
        if n < 1:
            raise UsageError("fock resource needs N >= 1")
        return "fock", n
    if spec.startswith("coeffs:"):
        body = spec.split(":", 1)[1]
        try:
            coeffs = [float(c) for c in body.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad coefficients in {spec!r}") from exc
        if len(coeffs) < 2:
            raise UsageError("need at least two coefficients")
        return "coeffs", coeffs
    raise UsageError(f"unrecognized resource {spec!r}; use fock:N or coeffs:c0,c1,...")


def _window_grid(args) -> list[float]:
    if args.sweep is not None:
        if args.window is not None:
            raise UsageError("--window and --sweep are mutually exclusive")
        return _parse_sweep(args.sweep)
    if args.window is None:
        raise UsageError("one of --window or --sweep is required")
    if args.window <= 0:
        raise UsageError(
            "--window must be positive: a zero-width acceptance window is a "
            "zero-probability event"
        )
    return [args.window]


def _maybe_plot(args, rows: list[SweepRow], title: str) -> list[str]:
    if not getattr(args, "plot", False):
        return []
    from .plotting import render_sweep_figure

    path = args.out + ".png"
    render_sweep_figure(rows, path, title=title)
    return [path]


# ---------------------------------------------------------------------------
# subcommands


def cmd_prep_single_photon(args) -> int:
    started = time.time()
    kind, payload = _parse_resource(args.resource)
    grid = _window_grid(args)

    if kind == "fock" and payload == 2:
        base = PipelineParams(
            t_a=args.ta,
            t_b=args.tb,
            t_c=args.tc,
            window=grid[0],
            x3_nodes=args.x3_nodes,
            x3_limit=args.x3_limit,
            cutoff=args.cutoff,
        )
        rows = sweep_window("single_photon_prep", grid, base)
    else:
        if kind == "fock":
            amp = np.zeros(payload + 1)
            amp[payload] = 1.0
            resource = ResourceState(ModeState(amp))
            n_stages = payload - 1
        else:
            resource = ResourceState(ModeState(np.asarray(payload, dtype=complex)))
            n_stages = resource.top - 1
        rows = []
        for X in grid:
            t0 = time.perf_counter()
            params = GeneralPrepParams(
                stage_ts=(args.ta,) * n_stages,
                ff_t=args.tb,
                final_t=args.tc,
                window=X,
                ff_nodes=args.x3_nodes,
                ff_limit=args.x3_limit,
            )
            rho, p_s = prep_single_photon_general(resource, params)
            f = float(np.real(rho.entries[1, 1]))
            rows.append(SweepRow(X, f, p_s, (time.perf_counter() - t0) * 1e3))

    _write_csv(args.out, rows)
    outputs = [args.out] + _maybe_plot(args, rows, "single-photon preparation")
    _write_manifest(
        args.out,
        "prep-single-photon",
        {
            "resource": " ".join(args.resource),
            "t_a": args.ta,
            "t_b": args.tb,
            "t_c": args.tc,
            "windows": [r.window for r in rows],
            "x3_nodes": args.x3_nodes,
            "x3_limit": args.x3_limit,
            "cutoff": args.cutoff,
        },
        outputs,
        started,
    )
    for r in rows:
        print(f"X={_fmt(r.window)}  F={_fmt(r.fidelity)}  P_S={_fmt(r.success_probability)}")
    return EXIT_OK


def cmd_nsg(args) -> int:
    started = time.time()
    grid = _window_grid(args)
    extraction = PipelineParams(
        t_a=args.ta,
        t_b=args.tb,
        t_c=args.tc,
        window=grid[0],
        x3_nodes=args.x3_nodes,
        cutoff=args.cutoff,
    )
    base = NsgParams(window=grid[0], ancilla=args.ancilla, extraction=extraction)
    if len(grid) == 1:
        t0 = time.perf_counter()
        f, p_s = nsg_process_fidelity(base)
        rows = [SweepRow(grid[0], f, p_s, (time.perf_counter() - t0) * 1e3)]
    else:
        rows = sweep_window("nsg", grid, base)

    _write_csv(args.out, rows)
    outputs = [args.out] + _maybe_plot(args, rows, f"NSG gate ({args.ancilla} ancilla)")
    _write_manifest(
        args.out,
        "nsg",
        {
            "ancilla": args.ancilla,
            "t_a_gate": base.t_a_gate,
            "t_b_gate": base.t_b_gate,
            "extraction": {
                "t_a": args.ta,
                "t_b": args.tb,
                "t_c": args.tc,
                "x3_nodes": args.x3_nodes,
                "cutoff": args.cutoff,
            },
            "windows": [r.window for r in rows],
        },
        outputs,
        started,
    )
    for r in rows:
        print(f"X={_fmt(r.window)}  F={_fmt(r.fidelity)}  P_S={_fmt(r.success_probability)}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    started = time.time()
    if args.starts < 1:
        raise UsageError("--starts must be >= 1")
    result = optimize_multistart(n_starts=args.starts, seed=args.seed)
    payload = dataclasses.asdict(result)
    payload["trace"] = list(payload["trace"])
    payload["n_starts"] = args.starts
    payload["seed"] = args.seed
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        args.out,
        "optimize",
        {"starts": args.starts, "seed": args.seed},
        [args.out],
        started,
    )
    print(
        f"t_a={_fmt(result.t_a)}  t_b={_fmt(result.t_b)}  t_c={_fmt(result.t_c)}  "
        f"objective={_fmt(result.objective)}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvherald",
        description="Heralded photonic state preparation and gate simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_resource_ts=True):
        if with_resource_ts:
            p.add_argument("--ta", type=float, default=0.62)
            p.add_argument("--tb", type=float, default=0.79)
            p.add_argument("--tc", type=float, default=0.90)
        p.add_argument("--window", type=float, default=None, help="herald half-width X")
        p.add_argument("--sweep", default=None, metavar="XMIN:XMAX:STEPS")
        p.add_argument("--x3-nodes", type=int, default=81, dest="x3_nodes")
        p.add_argument("--x3-limit", type=float, default=6.0, dest="x3_limit")
        p.add_argument("--cutoff", type=int, default=8)
        p.add_argument("--out", required=True)
        p.add_argument("--plot", action="store_true", help="also render a PNG figure")

    p_prep = sub.add_parser(
        "prep-single-photon", help="extract a single photon from a resource state"
    )
    p_prep.add_argument(
        "--resource",
        nargs="+",
        default=["fock:2"],
        help="fock:N or coeffs:c0,c1,... (fock:2 runs the two-copy pipeline)",
    )
    add_common(p_prep)
    p_prep.set_defaults(func=cmd_prep_single_photon)

    p_nsg = sub.add_parser("nsg", help="run the nonlinear sign gate")
    p_nsg.add_argument("--ancilla", choices=("ideal", "extracted"), default="ideal")
    add_common(p_nsg)
    p_nsg.set_defaults(func=cmd_nsg)

    p_opt = sub.add_parser("optimize", help="optimize extraction transmittances")
    p_opt.add_argument("--starts", type=int, default=5)
    p_opt.add_argument("--seed", type=int, default=7)
    p_opt.add_argument("--out", required=True)
    p_opt.set_defaults(func=cmd_optimize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
