import math

import numpy as np
import pytest

from cvherald.gates import (
    GATE_T,
    NsgParams,
    ProcessProbe,
    nsg_circuit,
    nsg_ideal_reference,
    nsg_process_fidelity,
    partner_transmittance,
)
from cvherald.protocols import PipelineParams
from cvherald.states import ModeState


def random_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        yield ModeState(c / np.linalg.norm(c))


def test_transmittance_scalars():
    assert GATE_T**2 == pytest.approx((3 - math.sqrt(2)) / 7, abs=1e-15)
    p = NsgParams()
    assert p.t_b_gate == pytest.approx(p.t_a_gate / (1 - 2 * p.t_a_gate**2), abs=1e-15)


def test_partner_transmittance_domain():
    with pytest.raises(ValueError):
        partner_transmittance(0.9)


def test_inconsistent_partner_rejected():
    with pytest.raises(ValueError):
        NsgParams(t_b_gate=0.5)


def test_gate_flips_two_photon_sign():
    for psi in random_inputs(20, seed=4):
        out, lam = nsg_circuit(psi)
        ref = nsg_ideal_reference(*psi.amp)
        assert np.max(np.abs(out.amp - ref.amp)) < 1e-12
        assert abs(lam - GATE_T) < 1e-12


def test_success_amplitude_input_independent():
    lams = []
    for n in range(3):
        amp = np.zeros(3)
        amp[n] = 1.0
        _, lam = nsg_circuit(ModeState(amp))
        lams.append(lam)
    assert abs(lams[0] - lams[1]) < 1e-12
    assert abs(lams[0] - lams[2]) < 1e-12


def test_gate_rejects_high_fock_input():
    with pytest.raises(ValueError):
        nsg_circuit(ModeState(np.array([0.0, 0.0, 0.0, 1.0])))


def test_probe_states_orthogonality():
    probe = ProcessProbe()
    inner = np.vdot(probe.state.amps, probe.target.amps)
    assert inner == pytest.approx(1 / 3, abs=1e-12)


def test_process_fidelity_ideal_sharp():
    f, p = nsg_process_fidelity(NsgParams())
    assert f == pytest.approx(1.0, abs=1e-12)
    assert p == pytest.approx(GATE_T**2, abs=1e-12)


def test_process_fidelity_windowed_ideal_converges():
    f_narrow, _ = nsg_process_fidelity(NsgParams(window=1e-3))
    assert f_narrow > 0.999
    f_wide, _ = nsg_process_fidelity(NsgParams(window=0.3))
    assert f_wide < f_narrow


def test_windowed_circuit_density_matrix():
    psi = ModeState(np.array([1.0, 1.0, 1.0]) / math.sqrt(3))
    rho, p = nsg_circuit(psi, NsgParams(window=0.05))
    assert p > 0
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    target = nsg_ideal_reference(*psi.amp).amp
    vec = np.zeros(rho.entries.shape[0], dtype=complex)
    vec[:3] = target
    overlap = float(np.real(vec.conj() @ rho.entries @ vec))
    assert overlap > 0.99


def test_extracted_ancilla_fidelity_trend():
    fids = []
    for X in (0.05, 0.2):
        params = NsgParams(
            window=X,
            ancilla="extracted",
            extraction=PipelineParams(window=X, cutoff=5, x3_nodes=41),
        )
        f, p = nsg_process_fidelity(params)
        assert p > 0
        fids.append(f)
    assert fids[0] > 0.98
    assert fids[0] > fids[1]
