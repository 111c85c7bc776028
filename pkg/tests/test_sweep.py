import numpy as np
import pytest

from cvherald.gates import NsgParams
from cvherald.protocols import PipelineParams
from cvherald.sweep import (
    X3_OPERATING_POINT,
    extraction_density_objective,
    nelder_mead,
    optimize_multistart,
    optimize_transmittances,
    sweep_window,
)

PAPER_OPTIMUM = (0.62, 0.79, 0.90)


def fast_params(X):
    return PipelineParams(window=X, cutoff=5, x3_nodes=41)


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        sweep_window("single_photon_prep", [], fast_params(0.1))
    with pytest.raises(ValueError):
        sweep_window("single_photon_prep", [0.2, 0.1], fast_params(0.1))
    with pytest.raises(ValueError):
        sweep_window("single_photon_prep", [0.0, 0.1], fast_params(0.1))
    with pytest.raises(ValueError):
        sweep_window("bogus", [0.1], fast_params(0.1))


def test_sweep_singleton_sharp_limit():
    rows = sweep_window("single_photon_prep", [1e-3], fast_params(1e-3))
    assert len(rows) == 1
    assert rows[0].fidelity > 0.999


def test_sweep_tradeoff_trend():
    grid = [0.05, 0.2, 0.35, 0.5]
    rows = sweep_window("single_photon_prep", grid, fast_params(0.05))
    fids = [r.fidelity for r in rows]
    probs = [r.success_probability for r in rows]
    assert all(a > b for a, b in zip(fids, fids[1:]))
    assert all(a < b for a, b in zip(probs, probs[1:]))


def test_sweep_nsg_task():
    rows = sweep_window(
        "nsg",
        [0.1, 0.3],
        NsgParams(window=0.1, ancilla="ideal"),
    )
    assert rows[0].fidelity > rows[1].fidelity
    assert rows[0].success_probability < rows[1].success_probability


def test_objective_maximal_near_paper_point():
    at_paper = extraction_density_objective(PAPER_OPTIMUM)
    at_center = extraction_density_objective((0.5, 0.5, 0.5))
    assert at_paper > at_center


def test_objective_invalid_point_is_neg_inf():
    assert extraction_density_objective((1.5, 0.5, 0.5)) == -np.inf


def test_nelder_mead_on_quadratic():
    f = lambda x: -float(np.sum((x - 0.3) ** 2))
    best, val, trace, evals = nelder_mead(f, np.array([0.7, 0.7, 0.7]))
    assert np.max(np.abs(best - 0.3)) < 1e-3
    assert evals == len(trace) or evals > 0
    # best-so-far trace never decreases
    assert all(b >= a - 1e-15 for a, b in zip(trace, trace[1:]))


def test_nelder_mead_clamps_to_box():
    f = lambda x: float(np.sum(x))  # optimum at the upper corner
    best, _, _, _ = nelder_mead(f, np.array([0.5, 0.5, 0.5]))
    assert np.all(best <= 0.99 + 1e-12)


def test_optimizer_recovers_paper_optimum():
    result = optimize_transmittances((0.5, 0.5, 0.5))
    assert abs(result.t_a - PAPER_OPTIMUM[0]) < 0.02
    assert abs(result.t_b - PAPER_OPTIMUM[1]) < 0.02
    assert abs(result.t_c - PAPER_OPTIMUM[2]) < 0.02
    assert result.objective >= extraction_density_objective(PAPER_OPTIMUM) - 1e-6


def test_optimizer_restart_is_fixed_point():
    first = optimize_transmittances((0.5, 0.5, 0.5))
    second = optimize_transmittances((first.t_a, first.t_b, first.t_c))
    assert abs(second.t_a - first.t_a) < 1e-3
    assert abs(second.t_b - first.t_b) < 1e-3
    assert abs(second.t_c - first.t_c) < 1e-3


def test_multistart_deterministic():
    a = optimize_multistart(2, seed=13)
    b = optimize_multistart(2, seed=13)
    assert a == b


def test_operating_point_value():
    assert X3_OPERATING_POINT == pytest.approx(2**-0.5)
