"""State-engineering protocols: vacuum removal, generalized photon
subtraction, and heralded single-photon preparation.

The workhorse is the five-mode two-photon scheme: a pair of |2> states, four
beam splitters, a feed-forward displacement driven by the x quadrature of
mode 3, and three heralding homodyne windows (x2 = 0, p4 = 0, x5 at an
x3-dependent target).  In the limit of vanishing window width every herald
combination leaves mode 1 exactly in |1>.

Feed-forward displacements here are always real.  A real displacement
commutes through the balanced beam splitter into (i) a shift of the x-window
center on the partner mode and (ii) a pure phase on the p-measured mode that
cancels inside the POVM.  The simulation uses that identity instead of a
Fock-space displacement operator, which keeps the computation exact at small
cutoffs for arbitrarily large feed-forward amplitudes; the explicit
displacement operator is retained in the states module and the equivalence
is covered by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .measurement import (
    QuadratureKind,
    Window,
    collapse_windows,
    hermite_function_table,
    project_sharp,
)
from .states import (
    BeamSplitterSpec,
    DensityMatrix,
    DimensionMismatchError,
    ModeState,
    MultiModeState,
    apply_beam_splitter,
    apply_phase,
    displace_mode_state,
    make_fock,
    tensor_product,
)

_X = QuadratureKind.AMPLITUDE_X
_P = QuadratureKind.PHASE_P


class DegenerateResourceError(ValueError):
    """The vacuum-removal displacement degenerates to alpha = 0; use feed-forward."""


class GridTooNarrowError(ValueError):
    """The x3 integration grid does not cover the outcome density."""


@dataclass(frozen=True)
class ResourceState:
    """Normalized resource with finite Fock support 0..N and nonzero top level."""

    psi: ModeState

    def __post_init__(self):
        amp = self.psi.amp
        if abs(amp[-1]) == 0.0:
            raise ValueError("top Fock amplitude must be nonzero")
        n = np.linalg.norm(amp)
        if abs(n - 1.0) > 1e-9:
            object.__setattr__(self, "psi", ModeState(amp / n))

    @property
    def top(self) -> int:
        return self.psi.cutoff


@dataclass(frozen=True)
class PipelineParams:
    """Everything the five-mode two-photon scheme is parameterized by."""

    t_a: float = 0.62
    t_b: float = 0.79
    t_c: float = 0.90
    window: float = 0.05  # shared herald half-width X; 0 selects the sharp path
    quad_order: int = 8
    x3_limit: float = 6.0
    x3_nodes: int = 81
    cutoff: int = 8
    quad_check: bool = False  # escalate window quadrature and fail loudly

    def __post_init__(self):
        for name in ("t_a", "t_b", "t_c"):
            t = getattr(self, name)
            if not 0.0 < t < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {t}")
        if self.window < 0:
            raise ValueError("window half-width must be nonnegative")
        if self.x3_nodes < 41:
            raise ValueError("x3 grid needs at least 41 nodes")
        if self.cutoff < 4:
            raise ValueError("cutoff must hold the full four-photon sector")

    def r(self, name: str) -> float:
        t = getattr(self, name)
        return math.sqrt(1.0 - t * t)


@dataclass(frozen=True)
class HeraldRecord:
    """Targets and success weight of one herald combination of the pipeline."""

    x3_value: float
    x5_target: float
    success_density: float
    x2_target: float = 0.0
    p4_target: float = 0.0

    def __post_init__(self):
        if self.success_density < 0:
            raise ValueError("success density must be nonnegative")


# ---------------------------------------------------------------------------
# vacuum removal


def solve_vacuum_removal_displacement(
    psi: ResourceState, tol: float = 1e-10
) -> tuple[complex, list[complex]]:
    """Displacement amplitude with <0|D(alpha)|psi> = 0.

    Returns the root of smallest modulus (ties broken by smallest phase in
    [0, 2 pi)) together with the full root list.  A resource whose only root
    is alpha = 0 with N >= 2 (e.g. |N> itself) cannot be fixed by
    displacement and raises DegenerateResourceError.
    """
    c = psi.psi.amp
    n = psi.top
    if n < 1:
        raise ValueError("resource must have N >= 1")
    # polynomial in z = -alpha*: sum_k c_k z^k / sqrt(k!)
    coeffs = np.array([c[k] / math.sqrt(math.factorial(k)) for k in range(n + 1)])
    roots_z = np.roots(coeffs[::-1])
    roots = [complex(-np.conj(z)) for z in roots_z]
    roots.sort(key=lambda a: (abs(a), math.atan2(a.imag, a.real) % (2 * math.pi)))
    if all(abs(a) < tol for a in roots) and n >= 2:
        raise DegenerateResourceError(
            "sole displacement root is alpha = 0; use the feed-forward variant"
        )
    return roots[0], roots


def remove_vacuum_displace(psi: ResourceState, cutoff: int | None = None) -> ModeState:
    """Displace the resource so its vacuum amplitude vanishes (d1 stays nonzero).

    Among the vacuum-killing roots, the smallest-modulus one whose displaced
    state keeps a nonzero single-photon amplitude is used.
    """
    _, roots = solve_vacuum_removal_displacement(psi)
    for alpha in roots:
        phi = displace_mode_state(psi.psi, alpha, cutoff=cutoff)
        if abs(phi.amp[0]) < 1e-9 and (phi.cutoff < 1 or abs(phi.amp[1]) > 1e-9):
            return phi.normalized()
    raise DegenerateResourceError(
        "no displacement root leaves a nonzero single-photon amplitude"
    )


def hermite_roots(n: int) -> np.ndarray:
    """Real roots of the physicists' Hermite polynomial H_n, ascending."""
    if n < 1:
        raise ValueError("need n >= 1")
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return np.sort(np.polynomial.hermite.hermroots(coeffs))


def feedforward_alpha(n: int, x3: float, bs: BeamSplitterSpec | float) -> float:
    """Feed-forward displacement removing the vacuum term of a measured |N>.

    Picks the Hermite root x~ of H_N nearest the measured value (ties toward
    the larger root, which reproduces alpha = (r/t)(sqrt(2) x3 - 1) at N = 2)
    and returns alpha = sqrt(2) r (x3 - x~) / t.
    """
    if n < 2:
        raise ValueError("feed-forward vacuum removal applies for N >= 2")
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    r = math.sqrt(1.0 - t * t)
    roots = hermite_roots(n)
    dist = np.abs(roots - x3)
    best = dist.min()
    candidates = roots[dist <= best + 1e-12]
    xt = float(candidates.max())
    return math.sqrt(2.0) * r * (x3 - xt) / t


def remove_vacuum_feedforward(
    n: int, bs: BeamSplitterSpec | float, x3: float, cutoff: int | None = None
) -> ModeState:
    """Vacuum-free state produced from |N> by beam splitter, homodyne and D(alpha).

    Implements the measured-and-displaced resource for an arbitrary homodyne
    value x3; the output is normalized with zero vacuum amplitude.
    """
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    r = math.sqrt(1.0 - t * t)
    d = _measured_resource_coeffs(n, t, x3)
    alpha = feedforward_alpha(n, x3, t)
    phi = displace_mode_state(ModeState(d), alpha, cutoff=cutoff)
    return phi.normalized()


def _measured_resource_coeffs(n: int, t: float, x3: float) -> np.ndarray:
    """Coefficients sqrt(C(N,k)) t^k r^(N-k) <x3|N-k> of the pre-displacement state."""
    r = math.sqrt(1.0 - t * t)
    tab = hermite_function_table(n + 1, np.asarray(x3, dtype=float))
    d = np.array(
        [
            math.sqrt(math.comb(n, k)) * t**k * r ** (n - k) * tab[n - k]
            for k in range(n + 1)
        ],
        dtype=complex,
    )
    return d


# ---------------------------------------------------------------------------
# generalized photon subtraction


def photon_subtract_analytic(
    chi: ModeState, phi: ModeState, bs: BeamSplitterSpec | float
) -> ModeState:
    """Remove the top Fock level of chi using the vacuum-free ancilla phi.

    Output coefficients (unnormalized):
        b'_m = sum_{k=m+1}^{M} d_{k-m} b_k sqrt(C(k, m)) t^m r^(k-m).
    """
    m_top = chi.cutoff
    if m_top < 1:
        raise DimensionMismatchError("input must have support above the vacuum")
    if abs(phi.amp[0]) > 1e-9:
        raise ValueError("ancilla must be vacuum-free (d0 = 0)")
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    r = math.sqrt(1.0 - t * t)
    b = chi.amp
    d = phi.amp
    out = np.zeros(m_top, dtype=complex)
    for m in range(m_top):
        acc = 0.0 + 0.0j
        for k in range(m + 1, m_top + 1):
            if k - m <= phi.cutoff:
                acc += d[k - m] * b[k] * math.sqrt(math.comb(k, m)) * t**m * r ** (k - m)
        out[m] = acc
    return ModeState(out)


def photon_subtract_simulated(
    chi: ModeState,
    phi: ModeState,
    bs: BeamSplitterSpec | float,
    window_x: Window,
    window_p: Window,
    quad_check: bool = False,
) -> tuple[DensityMatrix, float]:
    """Full three-mode simulation of the subtraction setup with finite windows.

    chi meets vacuum on the subtraction beam splitter; the reflected mode and
    the ancilla phi then pass the balanced beam splitter and are heralded by
    the x- and p-windows (the physical EPR projection).  Converges to the
    analytic coefficients as both half-widths shrink.
    """
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    danc = phi.cutoff + chi.cutoff  # the balanced splitter can pool both
    state = tensor_product(
        [
            ("sig", chi.padded(max(chi.cutoff, 1))),
            ("ref", make_fock(0, danc)),
            ("anc", phi.padded(danc)),
        ]
    )
    state = apply_beam_splitter(state, ("sig", "ref"), t)
    state = apply_beam_splitter(state, ("ref", "anc"), 1.0 / math.sqrt(2.0))
    steps = [
        ("ref", _X, window_x.center, window_x.half_width, window_x.quad_order),
        ("anc", _P, window_p.center, window_p.half_width, window_p.quad_order),
    ]
    return collapse_windows(state, steps, escalate=quad_check)


# ---------------------------------------------------------------------------
# final vacuum cancellation


def vacuum_cancel_x(a0: float, a1: float, bs: BeamSplitterSpec | float) -> float:
    """Homodyne value that cancels the vacuum term by destructive interference."""
    if a1 == 0:
        raise ValueError("single-photon amplitude must be nonzero")
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    r = math.sqrt(1.0 - t * t)
    if r == 0:
        raise ValueError("transmittance 1 leaves nothing to interfere with")
    return -a0 / (math.sqrt(2.0) * r * a1)


def final_vacuum_cancellation(
    psi1: ModeState, bs: BeamSplitterSpec | float, x: float
) -> ModeState:
    """Mix a0|0> + a1|1> with vacuum and project the reflected mode on <x|.

    Returns the unnormalized conditional state, proportional to
    (a0 + sqrt(2) x r a1)|0> + t a1 |1>; at x = -a0/(sqrt(2) r a1) it is |1>
    after normalization.
    """
    if psi1.cutoff < 1 or abs(psi1.amp[1]) == 0:
        raise ValueError("input needs a nonzero single-photon amplitude")
    if psi1.cutoff > 1 and np.max(np.abs(psi1.amp[2:])) > 1e-12:
        raise DimensionMismatchError("input must be supported on levels 0..1")
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    state = tensor_product([("m", ModeState(psi1.amp[:2])), ("v", make_fock(0, 1))])
    state = apply_beam_splitter(state, ("m", "v"), t)
    out = project_sharp(state, "v", _X, x)
    return ModeState(out.amps)


# ---------------------------------------------------------------------------
# the five-mode two-photon pipeline


def herald_x5(x3: float, params: PipelineParams) -> float:
    """Mode-5 homodyne target that completes the vacuum cancellation."""
    t_a, t_b, t_c = params.t_a, params.t_b, params.t_c
    r_a, r_b, r_c = params.r("t_a"), params.r("t_b"), params.r("t_c")
    denom = t_a * r_a * t_b * r_c * 2.0 * math.sqrt(2.0)
    if denom == 0:
        raise ValueError("transmittances must keep t and r away from 0")
    return -r_b * (t_a**2 + 2.0 * (x3 * math.sqrt(2.0) - 1.0) * r_a**2) / denom


def pipeline_alpha(x3: float, params: PipelineParams) -> float:
    """Feed-forward displacement of the pipeline, alpha = (r_a/t_a)(sqrt2 x3 - 1)."""
    return params.r("t_a") / params.t_a * (x3 * math.sqrt(2.0) - 1.0)


def _pipeline_state(params: PipelineParams) -> MultiModeState:
    """|2,0,0,2,0> pushed through all four beam splitters.

    The beam splitters commute with the mode-3 measurement and with the
    (virtual) feed-forward displacement, so they are applied up front.
    """
    c = params.cutoff
    state = tensor_product(
        [
            (1, make_fock(2, c)),
            (2, make_fock(0, c)),
            (3, make_fock(0, c)),
            (4, make_fock(2, c)),
            (5, make_fock(0, c)),
        ]
    )
    state = apply_beam_splitter(state, (4, 3), params.t_a)
    state = apply_beam_splitter(state, (1, 2), params.t_b)
    state = apply_beam_splitter(state, (2, 4), 1.0 / math.sqrt(2.0))
    state = apply_beam_splitter(state, (1, 5), params.t_c)
    return state


def _conditional_from_state(
    state4: MultiModeState, x3: float, params: PipelineParams
) -> tuple[np.ndarray, float]:
    """Unnormalized mode-1 operator and herald density for a fixed x3.

    ``state4`` is the prepared state already contracted against <x3| on mode
    3.  The physical heralds are x2 = 0 (after the real displacement, hence
    an x window at center alpha on the undisplaced state), p4 = 0 and
    x5 = herald_x5(x3).
    """
    alpha = pipeline_alpha(x3, params)
    x5 = herald_x5(x3, params)
    if params.window == 0.0:
        v = state4
        for mode, kind, val in ((2, _X, alpha), (4, _P, 0.0), (5, _X, x5)):
            v = project_sharp(v, mode, kind, val)
        vec = v.amps
        return np.outer(vec, vec.conj()), float(np.vdot(vec, vec).real)
    X, order = params.window, params.quad_order
    steps = [
        (2, _X, alpha, X, order),
        (4, _P, 0.0, X, order),
        (5, _X, x5, X, order),
    ]
    rho, prob = collapse_windows(state4, steps, escalate=params.quad_check)
    return rho.entries, prob


def two_photon_pipeline_conditional(
    x3: float, params: PipelineParams
) -> tuple[DensityMatrix, float]:
    """Normalized conditional state of mode 1 and the success density at x3."""
    state = _pipeline_state(params)
    state4 = project_sharp(state, 3, _X, x3)
    rho, dens = _conditional_from_state(state4, x3, params)
    if dens <= 0:
        raise ValueError(f"zero success density at x3 = {x3}")
    dim = rho.shape[0]
    return DensityMatrix(rho / np.trace(rho).real, (1,), (dim,)), dens


def pipeline_herald_record(x3: float, params: PipelineParams) -> HeraldRecord:
    _, dens = two_photon_pipeline_conditional(x3, params)
    return HeraldRecord(x3_value=x3, x5_target=herald_x5(x3, params), success_density=dens)


def _x3_grid(params: PipelineParams) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(params.x3_nodes)
    return params.x3_limit * nodes, params.x3_limit * weights


def two_photon_pipeline_averaged(
    params: PipelineParams,
) -> tuple[DensityMatrix, float]:
    """Average the conditional states over the x3 outcome (fixed-order sum).

    Returns the normalized mode-1 state and the total success probability
    (a success *density* when window = 0, finite and window-independent to
    first order; this is the quantity the transmittance optimizer maximizes).
    """
    state = _pipeline_state(params)
    xs, ws = _x3_grid(params)
    dim = state.amps.shape[0]
    rho_acc = np.zeros((dim, dim), dtype=complex)
    p_acc = 0.0
    densities = np.empty(xs.size)
    for idx in range(xs.size):
        state4 = project_sharp(state, 3, _X, float(xs[idx]))
        rho, dens = _conditional_from_state(state4, float(xs[idx]), params)
        rho_acc += ws[idx] * rho
        p_acc += ws[idx] * dens
        densities[idx] = dens
    peak = float(densities.max())
    boundary = float(max(densities[0], densities[-1]))
    if peak <= 0:
        raise ValueError("success density vanished on the whole grid")
    if boundary > 1e-8 * peak:
        raise GridTooNarrowError(
            f"x3 grid boundary density {boundary:.3e} exceeds 1e-8 of the peak "
            f"{peak:.3e}; widen x3_limit"
        )
    return DensityMatrix(rho_acc / np.trace(rho_acc).real, (1,), (dim,)), p_acc


def pipeline_sharp_fidelity(x3: float, params: PipelineParams) -> float:
    """<1|rho1(x3)|1> of the analytic sharp path at a single x3 node."""
    sharp = replace(params, window=0.0)
    rho, _ = two_photon_pipeline_conditional(x3, sharp)
    return float(rho.entries[1, 1].real)


# ---------------------------------------------------------------------------
# general single-photon preparation


@dataclass(frozen=True)
class GeneralPrepParams:
    """Stage layout for preparing |1> from N copies of an arbitrary resource."""

    stage_ts: tuple[float, ...] = ()  # N-1 subtraction beam splitters
    final_t: float = 0.90
    ff_t: float = 0.62  # vacuum-removal splitter for degenerate (|N>) resources
    window: float = 0.0  # shared herald half-width; 0 selects the sharp path
    quad_order: int = 8
    ff_x3: tuple[float, ...] | None = None  # fixed sharp x3 values per stage
    ff_limit: float = 6.0
    ff_nodes: int = 41  # integration grid for feed-forward outcomes (windowed)
    ancilla_cutoff: int | None = None


def _general_prep_plan(resource: ResourceState, params: GeneralPrepParams):
    """Analytic preparation chain: ancillas, stage targets, final herald.

    Returns (degenerate, phi_fn, chain_fn) where for the feed-forward path
    phi_fn maps a tuple of measured stage values to the per-stage ancillas.
    """
    n = resource.top
    if len(params.stage_ts) != max(0, n - 1):
        raise ValueError(f"need {n - 1} stage transmittances for N = {n}")
    try:
        solve_vacuum_removal_displacement(resource)
        degenerate = False
    except DegenerateResourceError:
        degenerate = True
    if degenerate and np.max(np.abs(resource.psi.amp[:-1])) > 1e-12:
        raise NotImplementedError(
            "feed-forward vacuum removal is implemented for pure |N> resources"
        )
    return degenerate


def _chain_targets(
    resource: ResourceState,
    params: GeneralPrepParams,
    ancillas: Sequence[ModeState],
) -> tuple[np.ndarray, float, float]:
    """Run the analytic subtraction chain; return (final a, phase, herald x)."""
    chi = resource.psi
    for t_s, phi in zip(params.stage_ts, ancillas):
        chi = photon_subtract_analytic(chi, phi, t_s)
    a = chi.amp
    if abs(a[1]) == 0:
        raise ValueError("subtraction chain lost the single-photon amplitude")
    ratio = a[0] / a[1] if abs(a[0]) > 0 else 0.0
    if abs(np.imag(ratio)) <= 1e-12 * max(1.0, abs(ratio)):
        # a real amplitude ratio needs no phase shifter; the x-quadrature
        # cancellation handles either sign directly
        theta = 0.0
    else:
        theta = float(np.angle(a[0]) - np.angle(a[1]))
    a_phased = a * np.exp(1j * theta * np.arange(a.size))
    ratio = (a_phased[0] / a_phased[1]).real
    x_star = -ratio / (math.sqrt(2.0) * math.sqrt(1.0 - params.final_t**2))
    return a_phased, theta, x_star


def prep_single_photon_general(
    resource: ResourceState, params: GeneralPrepParams
) -> tuple[DensityMatrix, float]:
    """Chain N-1 photon subtractions and the final vacuum cancellation.

    Non-degenerate resources use displacement-based vacuum removal for every
    ancilla copy; a pure |N> resource uses the feed-forward variant, whose
    measured values are either fixed (sharp path) or integrated over a
    Gauss-Legendre grid (finite windows).  Returns the normalized state of
    the surviving mode and the success probability (density in the sharp
    path and per feed-forward outcome).
    """
    n = resource.top
    degenerate = _general_prep_plan(resource, params)
    n_stages = n - 1

    # --- mode layout and circuit unitaries -------------------------------
    main_cut = max(n, 2)
    parts: list[tuple] = [("m", resource.psi.padded(main_cut))]
    if degenerate:
        # a stage pair can pool the main state's n photons with the ancilla's
        anc_cut = (
            params.ancilla_cutoff if params.ancilla_cutoff is not None else 2 * n
        )
    else:
        phi0 = remove_vacuum_displace(resource, cutoff=None)
        tail_cut = phi0.cutoff
        while tail_cut > n + 2 and abs(phi0.amp[tail_cut]) ** 2 < 1e-14:
            tail_cut -= 1
        anc_cut = (
            params.ancilla_cutoff if params.ancilla_cutoff is not None else tail_cut
        )
        phi0 = ModeState(phi0.amp[: anc_cut + 1]).normalized()
    for s in range(n_stages):
        parts.append((f"c{s}", make_fock(0, anc_cut)))
        if degenerate:
            parts.append((f"a{s}", make_fock(n, anc_cut)))
            parts.append((f"f{s}", make_fock(0, anc_cut)))
        else:
            parts.append((f"a{s}", phi0))
    parts.append(("v", make_fock(0, main_cut)))
    state = tensor_product(parts)

    for s in range(n_stages):
        if degenerate:
            state = apply_beam_splitter(state, (f"a{s}", f"f{s}"), params.ff_t)
        state = apply_beam_splitter(state, ("m", f"c{s}"), params.stage_ts[s])
        state = apply_beam_splitter(state, (f"c{s}", f"a{s}"), 1.0 / math.sqrt(2.0))

    if not degenerate:
        _, theta, _ = _chain_targets(resource, params, [phi0] * n_stages)
        if theta != 0.0:
            state = apply_phase(state, "m", theta)
    state = apply_beam_splitter(state, ("m", "v"), params.final_t)

    # --- feed-forward outcome handling -----------------------------------
    if degenerate:
        if params.window == 0.0:
            ff_values = [params.ff_x3 if params.ff_x3 is not None else (0.3,) * n_stages]
            ff_weights = [1.0]
        else:
            nodes, weights = np.polynomial.legendre.leggauss(params.ff_nodes)
            axes = [params.ff_limit * nodes] * n_stages
            grid = np.meshgrid(*axes, indexing="ij")
            ff_values = list(zip(*(g.reshape(-1) for g in grid)))
            wgrid = np.meshgrid(*([params.ff_limit * weights] * n_stages), indexing="ij")
            ff_weights = list(np.prod(np.stack([w.reshape(-1) for w in wgrid]), axis=0))
    else:
        ff_values = [()]
        ff_weights = [1.0]

    dim = main_cut + 1
    rho_acc = np.zeros((dim, dim), dtype=complex)
    p_acc = 0.0
    for values, weight in zip(ff_values, ff_weights):
        st = state
        alphas = []
        ancillas = []
        for s, x3 in enumerate(values):
            st = project_sharp(st, f"f{s}", _X, float(x3))
            alphas.append(feedforward_alpha(n, float(x3), params.ff_t))
            ancillas.append(remove_vacuum_feedforward(n, params.ff_t, float(x3)))
        if degenerate:
            _, _, x_star = _chain_targets(resource, params, ancillas)
        else:
            _, _, x_star = _chain_targets(resource, params, [phi0] * n_stages)
        steps = []
        for s in range(n_stages):
            center = alphas[s] if degenerate else 0.0
            steps.append((f"c{s}", _X, center, params.window, params.quad_order))
            steps.append((f"a{s}", _P, 0.0, params.window, params.quad_order))
        steps.append(("v", _X, x_star, params.window, params.quad_order))
        if params.window == 0.0:
            v = st
            for mode, kind, center, _, _ in steps:
                v = project_sharp(v, mode, kind, center)
            vec = v.amps
            rho_acc += weight * np.outer(vec, vec.conj())
            p_acc += weight * float(np.vdot(vec, vec).real)
        else:
            rho, prob = collapse_windows(st, steps, escalate=False)
            rho_acc += weight * rho.entries
            p_acc += weight * prob
    tr = float(np.trace(rho_acc).real)
    if tr <= 0:
        raise ValueError("preparation heralds have zero weight")
    return DensityMatrix(rho_acc / tr, ("m",), (dim,)), p_acc
