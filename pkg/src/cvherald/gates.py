"""The nonlinear sign gate built from beam splitters and heralds.

Circuit (signal s, ancilla photon a, ancilla vacuum v):

    BS(s, a; t_gate)  ->  BS(s, v; t_partner)  ->  phase pi on s,
    herald: one photon on a, vacuum on v.

With t_gate^2 = (3 - sqrt(2))/7 and t_partner = t_gate / (1 - 2 t_gate^2)
the heralded map on the signal is exactly diag(1, 1, -1) with an
input-independent success amplitude t_gate (success probability ~ 0.23).
The phase-pi dressing realizes the negative effective transmittance
t_gate/(2 t_gate^2 - 1) the herald algebra requires.

The vacuum herald is an exact Fock projection (a Gaussian measurement);
the single-photon herald is either an exact Fock projection (ideal mode)
or the physical construction: a balanced beam splitter against a
single-photon-like mode followed by finite x- and p-windows, with the
photon drawn either from an ideal source or from the two-photon
extraction pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measurement import QuadratureKind, collapse_windows, project_fock, project_sharp
from .protocols import PipelineParams, two_photon_pipeline_averaged
from .states import (
    DensityMatrix,
    DimensionMismatchError,
    ModeState,
    MultiModeState,
    apply_beam_splitter,
    apply_phase,
    make_fock,
    tensor_product,
)

_X = QuadratureKind.AMPLITUDE_X
_P = QuadratureKind.PHASE_P

GATE_T = math.sqrt((3.0 - math.sqrt(2.0)) / 7.0)


def partner_transmittance(t: float) -> float:
    denom = 1.0 - 2.0 * t * t
    if denom <= 0:
        raise ValueError("need 1 - 2 t^2 > 0 for the partner splitter")
    return t / denom


@dataclass(frozen=True)
class NsgParams:
    """Gate transmittances, herald windows and the single-photon source."""

    t_a_gate: float = GATE_T
    t_b_gate: float | None = None
    window: float = 0.0  # half-width of the single-photon-projection windows
    quad_order: int = 8
    ancilla: str = "ideal"  # "ideal" or "extracted"
    extraction: PipelineParams = field(default_factory=lambda: PipelineParams(window=0.05))

    def __post_init__(self):
        tb = partner_transmittance(self.t_a_gate)
        if self.t_b_gate is None:
            object.__setattr__(self, "t_b_gate", tb)
        elif abs(self.t_b_gate - tb) > 1e-12:
            raise ValueError(
                f"t_b_gate = {self.t_b_gate} violates t/(1 - 2t^2) = {tb}"
            )
        if not 0.0 < self.t_b_gate < 1.0:
            raise ValueError("partner transmittance must lie in (0, 1)")
        if self.ancilla not in ("ideal", "extracted"):
            raise ValueError("ancilla must be 'ideal' or 'extracted'")


@dataclass(frozen=True)
class ProcessProbe:
    """Maximally entangled probe and its image under the ideal gate."""

    cutoff: int = 2

    @property
    def state(self) -> MultiModeState:
        return self._build((1.0, 1.0, 1.0))

    @property
    def target(self) -> MultiModeState:
        return self._build((1.0, 1.0, -1.0))

    def _build(self, signs) -> MultiModeState:
        c = self.cutoff
        amps = np.zeros((c + 1, c + 1), dtype=complex)
        for n, s in enumerate(signs):
            amps[n, n] = s / math.sqrt(3.0)
        return MultiModeState(amps, ("ref", "s"))


def nsg_ideal_reference(c0: complex, c1: complex, c2: complex, *rest) -> ModeState:
    """The defining action: flip the sign of the two-photon amplitude."""
    if rest and max(abs(complex(r)) for r in rest) > 0:
        raise DimensionMismatchError("gate is defined on levels 0..2 only")
    return ModeState(np.array([c0, c1, -c2], dtype=complex))


def _ancilla_components(params: NsgParams) -> tuple[list[tuple[float, ModeState]], float]:
    """Pure components (weight, state) of the single-photon source and its
    preparation success probability (1 for the ideal source)."""
    if params.ancilla == "ideal":
        return [(1.0, make_fock(1, 1))], 1.0
    rho, p_ext = two_photon_pipeline_averaged(params.extraction)
    vals, vecs = np.linalg.eigh(rho.entries)
    comps = []
    for w, v in zip(vals[::-1], vecs.T[::-1]):
        if w > 1e-13:
            top = int(np.max(np.nonzero(np.abs(v) > 1e-13)[0], initial=0))
            comps.append((float(w), ModeState(v[: top + 1])))
    return comps, p_ext


def _gate_circuit(state: MultiModeState, params: NsgParams) -> MultiModeState:
    state = apply_beam_splitter(state, ("s", "a"), params.t_a_gate)
    state = apply_beam_splitter(state, ("s", "v"), params.t_b_gate)
    return apply_phase(state, "s", math.pi)


def _heralded_ideal(state: MultiModeState, params: NsgParams) -> MultiModeState:
    """Sharp Fock heralds <1|_a <0|_v on the circuit output."""
    out = _gate_circuit(state, params)
    out = project_fock(out, "a", 1)
    return project_fock(out, "v", 0)


def nsg_circuit(
    input_state: ModeState, params: NsgParams | None = None
) -> tuple[ModeState, complex] | tuple[DensityMatrix, float]:
    """Run the gate on a single-mode input.

    Ideal mode (ideal ancilla, window 0): returns the normalized output and
    the complex success amplitude, which is input-independent.  Windowed
    mode: returns the normalized conditional density matrix on the signal
    and the herald probability (times the ancilla preparation probability
    for the extracted source).
    """
    params = params or NsgParams()
    if input_state.cutoff > 2 and np.max(np.abs(input_state.amp[3:])) > 0:
        raise DimensionMismatchError("gate is defined on levels 0..2 only")
    amp = np.zeros(3, dtype=complex)
    amp[: input_state.amp.size] = input_state.amp[:3]
    sig = ModeState(amp)

    if params.ancilla == "ideal" and params.window == 0.0:
        state = tensor_product(
            [("s", sig.padded(3)), ("a", make_fock(1, 3)), ("v", make_fock(0, 3))]
        )
        out = _heralded_ideal(state, params)
        vec = out.amps[:3]
        ref = nsg_ideal_reference(*sig.amp).amp
        k = int(np.argmax(np.abs(ref)))
        lam = vec[k] / ref[k]
        normalized = ModeState(vec / lam)
        return normalized, complex(lam)

    rho, prob = _heralded_windowed(sig, params)
    return rho.normalized(), prob


def _heralded_windowed(sig: ModeState, params: NsgParams) -> tuple[DensityMatrix, float]:
    """Windowed single-photon herald on a single-mode input.

    The circuit ancilla and the projection photon are independent copies of
    the configured source; mixed sources enter through their eigenvector
    decomposition (the heralded operator is linear in each of them).
    """
    comps, p_ext = _ancilla_components(params)
    n_sources = 2  # circuit ancilla + projection photon
    anc_cut = max(c.cutoff for _, c in comps)
    s_cut, ae_cut = _mode_cuts(anc_cut)

    dim = None
    rho_acc = None
    p_acc = 0.0
    for w_a, anc_a in comps:
        for w_e, anc_e in comps:
            state = tensor_product(
                [
                    ("s", sig.padded(s_cut)),
                    ("a", anc_a.padded(ae_cut)),
                    ("v", make_fock(0, s_cut)),
                    ("e", anc_e.padded(ae_cut)),
                ]
            )
            state = _gate_circuit(state, params)
            state = project_fock(state, "v", 0)
            state = apply_beam_splitter(state, ("a", "e"), 1.0 / math.sqrt(2.0))
            rho_term, p_term = _photon_window_herald(state, params)
            weight = w_a * w_e
            if rho_acc is None:
                dim = rho_term.shape[0]
                rho_acc = np.zeros((dim, dim), dtype=complex)
            rho_acc += weight * rho_term
            p_acc += weight * p_term
    return (
        DensityMatrix(rho_acc, ("s",), (dim,)),
        p_acc * p_ext**n_sources,
    )


def _mode_cuts(anc_cut: int) -> tuple[int, int]:
    """Cutoffs large enough that no splitter loses photons off the grid.

    The signal carries at most 2 photons and can absorb the circuit ancilla;
    the a/e pair can end up holding the signal's photons plus both ancillas.
    """
    return 2 + anc_cut, 2 + 2 * anc_cut


def _photon_window_herald(
    state: MultiModeState, params: NsgParams
) -> tuple[np.ndarray, float]:
    """Project the mixed (a, e) pair onto the x = 0, p = 0 windows.

    Returns the unnormalized conditional operator on the remaining modes and
    the herald probability (a density when the half-width is zero).
    """
    if params.window == 0.0:
        v = project_sharp(state, "a", _X, 0.0)
        v = project_sharp(v, "e", _P, 0.0)
        vec = v.amps.reshape(-1)
        return np.outer(vec, vec.conj()), float(np.vdot(vec, vec).real)
    steps = [
        ("a", _X, 0.0, params.window, params.quad_order),
        ("e", _P, 0.0, params.window, params.quad_order),
    ]
    rho_dm, p = collapse_windows(state, steps, escalate=False)
    return rho_dm.entries, p


def nsg_process_fidelity(params: NsgParams | None = None) -> tuple[float, float]:
    """Process fidelity <Phi'|rho|Phi'> of the heralded gate and its success
    probability, evaluated on one arm of the maximally entangled probe."""
    params = params or NsgParams()
    probe = ProcessProbe()
    target = probe.target

    if params.ancilla == "ideal" and params.window == 0.0:
        state = _probe_circuit_input(probe, params, make_fock(1, 1), None)
        out = _heralded_ideal(state, params)
        vec = out.amps.reshape(-1)
        p = float(np.vdot(vec, vec).real)
        tvec = _embed(target.amps, out.amps.shape)
        f = float(abs(np.vdot(tvec, vec)) ** 2 / p)
        return f, p

    comps, p_ext = _ancilla_components(params)
    rho_acc = None
    p_acc = 0.0
    for w_a, anc_a in comps:
        for w_e, anc_e in comps:
            state = _probe_circuit_input(probe, params, anc_a, anc_e)
            state = _gate_circuit(state, params)
            state = project_fock(state, "v", 0)
            state = apply_beam_splitter(state, ("a", "e"), 1.0 / math.sqrt(2.0))
            rho_term, p_term = _photon_window_herald(state, params)
            weight = w_a * w_e
            if rho_acc is None:
                rho_acc = np.zeros_like(rho_term)
            rho_acc += weight * rho_term
            p_acc += weight * p_term
    s_dim = rho_acc.shape[0] // target.amps.shape[0]
    tvec = _embed(target.amps, (target.amps.shape[0], s_dim))
    f = float(np.real(tvec.conj() @ rho_acc @ tvec) / np.trace(rho_acc).real)
    return f, p_acc * p_ext**2


def _embed(amps: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Zero-pad a tensor into a larger grid and flatten it."""
    out = np.zeros(shape, dtype=complex)
    out[tuple(slice(0, s) for s in amps.shape)] = amps
    return out.reshape(-1)


def _probe_circuit_input(
    probe: ProcessProbe,
    params: NsgParams,
    anc_a: ModeState,
    anc_e: ModeState | None,
) -> MultiModeState:
    """Probe on (ref, s) tensored with the gate's ancilla modes."""
    anc_cut = anc_a.cutoff if anc_e is None else max(anc_a.cutoff, anc_e.cutoff)
    s_cut, ae_cut = _mode_cuts(anc_cut)
    amps = probe.state.amps
    pad = np.zeros((amps.shape[0], s_cut + 1), dtype=complex)
    pad[:, : amps.shape[1]] = amps
    state = MultiModeState(pad, ("ref", "s"))
    parts = [
        ("a", anc_a.padded(ae_cut if anc_e is not None else s_cut)),
        ("v", make_fock(0, s_cut)),
    ]
    if anc_e is not None:
        parts.append(("e", anc_e.padded(ae_cut)))
    extra = tensor_product(parts)
    joined = np.tensordot(state.amps, extra.amps, axes=0)
    return MultiModeState(joined, state.labels + extra.labels)
