import math

import numpy as np
import pytest

from cvherald.measurement import (
    QuadratureKind,
    Window,
    collapse_windowed,
    collapse_windows,
    epr_project_ideal,
    epr_project_physical,
    hermite_function_table,
    overlap_p,
    overlap_x,
    project_fock,
    project_sharp,
)
from cvherald.states import (
    MultiModeState,
    apply_beam_splitter,
    make_fock,
    tensor_product,
)

X = QuadratureKind.AMPLITUDE_X
P = QuadratureKind.PHASE_P


def test_overlap_orthonormality():
    """The position wavefunctions of |n> are orthonormal, n, m <= 10."""
    xs = np.linspace(-12, 12, 6001)
    tab = hermite_function_table(11, xs)
    gram = np.trapezoid(tab[:, :, None] * tab[:, None, :], xs, axis=0)
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_overlap_p_phase_convention():
    for n in range(6):
        assert overlap_p(n, 0.37) == pytest.approx((1j**n) * overlap_x(n, 0.37))


def test_sharp_projection_density_normalizes():
    """The squared projected norm is the outcome density; it integrates to 1."""
    state = tensor_product([("m", make_fock(3, 3))])
    xs = np.linspace(-10, 10, 4001)
    dens = np.array(
        [project_sharp(state, "m", X, float(v)).norm() ** 2 for v in xs]
    )
    assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-10)


def test_project_fock_picks_component():
    amps = np.zeros((3, 2), dtype=complex)
    amps[2, 1] = 0.8
    amps[1, 0] = 0.6
    state = MultiModeState(amps, ("a", "b"))
    out = project_fock(state, "a", 2)
    assert out.amps[1] == pytest.approx(0.8)
    assert out.amps[0] == 0.0


def test_window_probability_monotone_in_half_width():
    state = tensor_product([("m", make_fock(1, 1)), ("n", make_fock(0, 1))])
    widths = [0.05, 0.1, 0.3, 0.8, 2.0]
    probs = []
    for w in widths:
        _, p = collapse_windowed(state, "m", X, Window(0.0, w, 16))
        probs.append(p)
    assert all(b > a for a, b in zip(probs, probs[1:]))
    # a window covering the whole line accepts everything
    _, p_all = collapse_windowed(state, "m", X, Window(0.0, 12.0, 120))
    assert p_all == pytest.approx(1.0, abs=1e-8)


def test_collapse_windows_escalation_matches_high_order():
    state = tensor_product([("m", make_fock(2, 2)), ("n", make_fock(1, 2))])
    steps = [("m", X, 0.1, 0.2, 8), ("n", P, 0.0, 0.2, 8)]
    rho_a, p_a = collapse_windows(state, steps, escalate=True)
    steps_hi = [("m", X, 0.1, 0.2, 64), ("n", P, 0.0, 0.2, 64)]
    rho_b, p_b = collapse_windows(state, steps_hi, escalate=False)
    assert p_a == pytest.approx(p_b, rel=1e-8)
    assert np.max(np.abs(rho_a.entries - rho_b.entries)) < 1e-8


def test_epr_projection_ideal_contracts_diagonal():
    amps = np.zeros((3, 3, 2), dtype=complex)
    amps[0, 0, 1] = 0.5
    amps[2, 2, 1] = 0.25
    amps[1, 0, 0] = 0.33  # off-diagonal in the projected pair: dropped
    state = MultiModeState(amps, ("a", "b", "c"))
    out = epr_project_ideal(state, ("a", "b"))
    assert out.amps[1] == pytest.approx(0.75)
    assert out.amps[0] == 0.0


def test_epr_physical_converges_to_ideal():
    """Balanced splitter + tight x/p windows realizes sum_n <n,n| up to a constant."""
    rng = np.random.default_rng(11)
    amps = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
    for i in range(3):
        for j in range(3):
            if i + j > 2:  # keep the pair inside the beam-splitter box
                amps[i, j, :] = 0
    state = MultiModeState(amps, ("a", "b", "c")).normalized()
    ideal = epr_project_ideal(state, ("a", "b"))
    w = Window(0.0, 1e-4, 8)
    rho, prob = epr_project_physical(state, ("a", "b"), w, w)
    vec = ideal.amps / np.linalg.norm(ideal.amps)
    overlap = float(np.real(vec.conj() @ rho.entries @ vec) / np.trace(rho.entries).real)
    assert overlap == pytest.approx(1.0, abs=1e-6)


def test_epr_physical_constant_is_inverse_sqrt_pi():
    """At x = p = 0 the sharp double homodyne equals sum_n <n,n| / sqrt(pi)."""
    state = tensor_product([("a", make_fock(1, 3)), ("b", make_fock(1, 3)), ("c", make_fock(0, 1))])
    mixed = apply_beam_splitter(state, ("a", "b"), 1 / math.sqrt(2))
    v = project_sharp(mixed, "a", X, 0.0)
    v = project_sharp(v, "b", P, 0.0)
    ideal = epr_project_ideal(state, ("a", "b"))
    ratio = v.amps[0] / ideal.amps[0]
    assert abs(ratio - 1 / math.sqrt(math.pi)) < 1e-12


def test_window_validation():
    with pytest.raises(ValueError):
        Window(0.0, -0.1)
    with pytest.raises(ValueError):
        Window(0.0, 0.1, 0)
