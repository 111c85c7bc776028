import math

import numpy as np
import pytest

from cvherald.states import (
    BeamSplitterSpec,
    ModeState,
    MultiModeState,
    TruncationLossError,
    apply_beam_splitter,
    apply_displacement,
    apply_phase,
    coherent_state,
    displacement_matrix,
    fidelity_with_pure,
    make_fock,
    partial_trace,
    pure_density,
    tensor_product,
)


def test_fock_state_basics():
    psi = make_fock(3, 5)
    assert psi.cutoff == 5
    assert psi.norm() == 1.0
    assert psi.amp[3] == 1.0
    with pytest.raises(ValueError):
        make_fock(6, 5)


def test_coherent_state_is_normalized_and_poissonian():
    alpha = 0.7 - 0.3j
    psi = coherent_state(alpha, 25)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    # photon-number distribution must be Poisson with mean |alpha|^2
    probs = np.abs(psi.amp) ** 2
    mean = float(np.sum(np.arange(26) * probs))
    assert mean == pytest.approx(abs(alpha) ** 2, abs=1e-10)


def test_beam_splitter_single_photon_convention():
    """First label of the pair is the transmitted port."""
    t = 0.6
    r = math.sqrt(1 - t * t)
    state = tensor_product([("i", make_fock(1, 1)), ("j", make_fock(0, 1))])
    out = apply_beam_splitter(state, ("i", "j"), t)
    assert out.amps[1, 0] == pytest.approx(t)
    assert out.amps[0, 1] == pytest.approx(r)

    state = tensor_product([("i", make_fock(0, 1)), ("j", make_fock(1, 1))])
    out = apply_beam_splitter(state, ("i", "j"), t)
    assert out.amps[0, 1] == pytest.approx(t)
    assert out.amps[1, 0] == pytest.approx(-r)


def test_beam_splitter_two_photon_binomial():
    t = 0.62
    r = math.sqrt(1 - t * t)
    state = tensor_product([("i", make_fock(2, 2)), ("j", make_fock(0, 2))])
    out = apply_beam_splitter(state, ("i", "j"), t)
    expect = {
        (2, 0): t**2,
        (1, 1): math.sqrt(2) * t * r,
        (0, 2): r**2,
    }
    for (m, n), v in expect.items():
        assert out.amps[m, n] == pytest.approx(v, abs=1e-14)


def test_hong_ou_mandel_dip():
    state = tensor_product([("i", make_fock(1, 2)), ("j", make_fock(1, 2))])
    out = apply_beam_splitter(state, ("i", "j"), 1 / math.sqrt(2))
    assert abs(out.amps[1, 1]) < 1e-14
    assert abs(out.amps[2, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-14)


def test_beam_splitter_preserves_norm_on_random_state():
    rng = np.random.default_rng(3)
    amps = rng.normal(size=(4, 5, 4)) + 1j * rng.normal(size=(4, 5, 4))
    # keep total photon number inside the box: zero the risky corner
    amps[2:, :, :] = 0
    amps[:, 3:, :] = 0
    state = MultiModeState(amps, ("a", "b", "c")).normalized()
    out = apply_beam_splitter(state, ("b", "a"), 0.77)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


def test_beam_splitter_truncation_loss_raises():
    state = tensor_product([("i", make_fock(3, 3)), ("j", make_fock(3, 3))])
    with pytest.raises(TruncationLossError):
        apply_beam_splitter(state, ("i", "j"), 1 / math.sqrt(2))


def test_displacement_of_vacuum_is_coherent():
    alpha = 0.4 + 0.2j
    state = tensor_product([("m", make_fock(0, 20))])
    out = apply_displacement(state, "m", alpha)
    ref = coherent_state(alpha, 20)
    assert np.max(np.abs(out.amps - ref.amp)) < 1e-12


def test_displacement_matrix_first_column_is_coherent():
    alpha = 0.8 - 0.5j
    d = displacement_matrix(alpha, 12)
    ref = coherent_state(alpha, 11)
    assert np.max(np.abs(d[:, 0] - ref.amp)) < 1e-10


def test_phase_rotation():
    psi = ModeState(np.array([1.0, 1.0, 1.0]) / math.sqrt(3))
    state = tensor_product([("m", psi)])
    out = apply_phase(state, "m", math.pi / 2)
    phases = np.exp(1j * math.pi / 2 * np.arange(3)) / math.sqrt(3)
    assert np.max(np.abs(out.amps - phases)) < 1e-14


def test_partial_trace_of_product_state():
    a = coherent_state(0.5, 14)
    b = make_fock(1, 14)
    state = tensor_product([("a", a), ("b", b)])
    rho = pure_density(state)
    red = partial_trace(rho, keep=("a",))
    assert red.trace() == pytest.approx(1.0, abs=1e-10)
    expect = np.outer(a.amp, a.amp.conj())
    assert np.max(np.abs(red.entries - expect)) < 1e-12


def test_fidelity_with_pure():
    rho = pure_density(make_fock(1, 3))
    assert fidelity_with_pure(rho, make_fock(1, 3)) == pytest.approx(1.0)
    assert fidelity_with_pure(rho, make_fock(0, 3)) == pytest.approx(0.0, abs=1e-15)


def test_beam_splitter_spec_reflectance():
    bs = BeamSplitterSpec(0.8)
    assert bs.r == pytest.approx(0.6)
    with pytest.raises(ValueError):
        BeamSplitterSpec(1.2)


def test_tensor_product_label_collision():
    with pytest.raises(ValueError):
        tensor_product([("m", make_fock(0, 1)), ("m", make_fock(0, 1))])
