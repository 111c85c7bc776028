"""Window sweeps and transmittance optimization.

The optimizer maximizes the narrow-window success density of the two-photon
extraction: all four homodyne outcomes are taken sharp, with the resource
homodyne sitting at the no-displacement operating point (the larger root of
the two-photon position wavefunction, 1/sqrt(2)).  The output fidelity is
exactly 1 everywhere on the sharp manifold, so the density is the only thing
left to optimize; its maximum sits at (t_a, t_b, t_c) ~ (0.62, 0.79, 0.90).

The simplex search is deliberately self-contained (reflection 1, expansion 2,
contraction 1/2, shrink 1/2) with box clamping, so that runs are reproducible
bit-for-bit across library versions.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gates import NsgParams, nsg_process_fidelity
from .protocols import (
    PipelineParams,
    two_photon_pipeline_averaged,
    two_photon_pipeline_conditional,
)

X3_OPERATING_POINT = 1.0 / math.sqrt(2.0)

BOUNDS = (0.01, 0.99)


@dataclass(frozen=True)
class SweepRow:
    """One point of a window sweep."""

    window: float
    fidelity: float
    success_probability: float
    runtime_ms: float


@dataclass(frozen=True)
class OptimizationResult:
    t_a: float
    t_b: float
    t_c: float
    objective: float
    n_evaluations: int
    trace: tuple[float, ...] = field(default=())  # best objective so far, per iteration


def _sweep_point_single_photon(args) -> SweepRow:
    X, base = args
    t0 = time.perf_counter()
    params = PipelineParams(
        t_a=base.t_a,
        t_b=base.t_b,
        t_c=base.t_c,
        window=X,
        quad_order=base.quad_order,
        x3_limit=base.x3_limit,
        x3_nodes=base.x3_nodes,
        cutoff=base.cutoff,
    )
    rho, p_s = two_photon_pipeline_averaged(params)
    f = float(np.real(rho.entries[1, 1]))
    return SweepRow(X, f, p_s, (time.perf_counter() - t0) * 1e3)


def _sweep_point_nsg(args) -> SweepRow:
    X, base = args
    t0 = time.perf_counter()
    extraction = PipelineParams(
        t_a=base.extraction.t_a,
        t_b=base.extraction.t_b,
        t_c=base.extraction.t_c,
        window=X,
        quad_order=base.extraction.quad_order,
        x3_limit=base.extraction.x3_limit,
        x3_nodes=base.extraction.x3_nodes,
        cutoff=base.extraction.cutoff,
    )
    params = NsgParams(
        t_a_gate=base.t_a_gate,
        window=X,
        quad_order=base.quad_order,
        ancilla=base.ancilla,
        extraction=extraction,
    )
    f, p_s = nsg_process_fidelity(params)
    return SweepRow(X, f, p_s, (time.perf_counter() - t0) * 1e3)


def worker_count() -> int:
    """Parallel workers for sweeps, controlled by CVHERALD_WORKERS (default 1)."""
    raw = os.environ.get("CVHERALD_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"CVHERALD_WORKERS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError("CVHERALD_WORKERS must be >= 1")
    return n


def sweep_window(
    task: str,
    window_grid: Sequence[float],
    params: PipelineParams | NsgParams,
) -> list[SweepRow]:
    """Evaluate fidelity and success probability over a grid of half-widths.

    ``task`` selects the figure of merit: "single_photon_prep" runs the
    averaged two-photon extraction, "nsg" the gate's process fidelity.  The
    grid must be strictly increasing and positive.  Rows come back in grid
    order regardless of the worker count.
    """
    grid = [float(x) for x in window_grid]
    if not grid:
        raise ValueError("empty window grid")
    if any(x <= 0 for x in grid):
        raise ValueError("window half-widths must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("window grid must be strictly increasing")
    if task == "single_photon_prep":
        if not isinstance(params, PipelineParams):
            raise TypeError("single_photon_prep sweep needs PipelineParams")
        point = _sweep_point_single_photon
    elif task == "nsg":
        if not isinstance(params, NsgParams):
            raise TypeError("nsg sweep needs NsgParams")
        point = _sweep_point_nsg
    else:
        raise ValueError(f"unknown sweep task {task!r}")
    jobs = [(x, params) for x in grid]
    n = worker_count()
    if n == 1 or len(jobs) == 1:
        return [point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
        return list(pool.map(point, jobs))


# ---------------------------------------------------------------------------
# transmittance optimization


def extraction_density_objective(ts: Sequence[float], cutoff: int = 5) -> float:
    """Sharp success density of the extraction at the operating point."""
    t_a, t_b, t_c = ts
    try:
        params = PipelineParams(t_a=t_a, t_b=t_b, t_c=t_c, window=0.0, cutoff=cutoff)
        _, density = two_photon_pipeline_conditional(X3_OPERATING_POINT, params)
    except (ValueError, ArithmeticError):
        return -math.inf
    return density


def _clamp(x: np.ndarray) -> np.ndarray:
    return np.clip(x, BOUNDS[0], BOUNDS[1])


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    step: float = 0.05,
    diameter_tol: float = 1e-4,
    max_iter: int = 500,
) -> tuple[np.ndarray, float, list[float], int]:
    """Maximize ``f`` over the clamped box with a plain simplex search.

    Coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
    Stops when the simplex diameter falls below ``diameter_tol``.  Non-finite
    objective values are treated as -inf, which the simplex walks away from.
    Returns (best point, best value, best-so-far trace, evaluation count).
    """
    n = x0.size
    evals = 0

    def fx(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        v = f(x)
        return v if math.isfinite(v) else -math.inf

    simplex = [_clamp(np.asarray(x0, dtype=float))]
    for i in range(n):
        v = simplex[0].copy()
        v[i] = v[i] + step if v[i] + step <= BOUNDS[1] else v[i] - step
        simplex.append(_clamp(v))
    values = [fx(v) for v in simplex]
    trace: list[float] = []

    for _ in range(max_iter):
        order = np.argsort(values)[::-1]  # best first
        simplex = [simplex[k] for k in order]
        values = [values[k] for k in order]
        trace.append(values[0])
        diameter = max(
            float(np.max(np.abs(a - b))) for a in simplex for b in simplex
        )
        if diameter < diameter_tol:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]

        reflected = _clamp(centroid + (centroid - worst))
        f_r = fx(reflected)
        if f_r > values[0]:
            expanded = _clamp(centroid + 2.0 * (centroid - worst))
            f_e = fx(expanded)
            if f_e > f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r > values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue
        contracted = _clamp(centroid + 0.5 * (worst - centroid))
        f_c = fx(contracted)
        if f_c > values[-1]:
            simplex[-1], values[-1] = contracted, f_c
            continue
        best = simplex[0]
        for k in range(1, n + 1):
            simplex[k] = _clamp(best + 0.5 * (simplex[k] - best))
            values[k] = fx(simplex[k])

    order = np.argsort(values)[::-1]
    best = simplex[order[0]]
    return best, values[order[0]], trace, evals


def optimize_transmittances(
    start: Sequence[float] | None = None,
    objective: Callable[[np.ndarray], float] | None = None,
) -> OptimizationResult:
    """Single simplex run from ``start`` (defaults to the box center)."""
    obj = objective or extraction_density_objective
    x0 = np.asarray(start if start is not None else [0.5, 0.5, 0.5], dtype=float)
    best, value, trace, evals = nelder_mead(obj, x0)
    return OptimizationResult(
        t_a=float(best[0]),
        t_b=float(best[1]),
        t_c=float(best[2]),
        objective=float(value),
        n_evaluations=evals,
        trace=tuple(trace),
    )


def optimize_multistart(
    n_starts: int = 5,
    seed: int = 7,
    objective: Callable[[np.ndarray], float] | None = None,
) -> OptimizationResult:
    """Best of several simplex runs from seeded quasi-random starts."""
    if n_starts < 1:
        raise ValueError("need at least one start")
    rng = np.random.default_rng(seed)
    lo, hi = 0.2, 0.95
    starts = lo + (hi - lo) * rng.random((n_starts, 3))
    results = [optimize_transmittances(s, objective=objective) for s in starts]
    return max(results, key=lambda r: r.objective)
