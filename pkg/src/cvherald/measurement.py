"""Quadrature projections and homodyne post-selection.

Quadrature convention: x = (a + a^dag)/sqrt(2), so the position wavefunction
of the Fock state |n> is

    <x|n> = H_n(x) e^(-x^2/2) / (pi^(1/4) sqrt(n! 2^n)),

evaluated by the stable two-term recurrence.  The phase-quadrature overlap is
fixed to <p|n> = i^n <x=p|n>; this choice is what makes the balanced-beam-
splitter + (x=0, p=0) double homodyne of two modes equal the projection onto
sum_n <n,n| with one global constant (checked by tests).

Finite acceptance windows are POVM elements integral |x=xi+q><xi+q| dq over
q in [-X, X]; they are evaluated by Gauss-Legendre quadrature with order
escalation until two successive orders agree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .states import (
    DensityMatrix,
    DimensionMismatchError,
    ModeLabel,
    MultiModeState,
)


class QuadratureConvergenceError(RuntimeError):
    """Window quadrature did not converge under order escalation."""


class QuadratureKind(enum.Enum):
    AMPLITUDE_X = "x"
    PHASE_P = "p"


@dataclass(frozen=True)
class Window:
    """Finite homodyne acceptance interval [center - X, center + X]."""

    center: float
    half_width: float
    quad_order: int = 8

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("window half-width must be nonnegative")
        if self.quad_order < 1:
            raise ValueError("quadrature order must be >= 1")


def overlap_x(n: int, x: float | np.ndarray) -> float | np.ndarray:
    """<x|n> via the Hermite-function recurrence (stable up to n ~ 60)."""
    if n < 0:
        raise ValueError("photon number must be nonnegative")
    x = np.asarray(x, dtype=float)
    vec = hermite_function_table(n + 1, x)
    out = vec[..., n]
    return float(out) if out.ndim == 0 else out


def hermite_function_table(dim: int, x: np.ndarray) -> np.ndarray:
    """Array of <x|n> for n = 0..dim-1, shape x.shape + (dim,)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (dim,))
    out[..., 0] = np.pi ** (-0.25) * np.exp(-(x**2) / 2)
    if dim > 1:
        out[..., 1] = math.sqrt(2.0) * x * out[..., 0]
    for n in range(2, dim):
        out[..., n] = (
            math.sqrt(2.0 / n) * x * out[..., n - 1]
            - math.sqrt((n - 1) / n) * out[..., n - 2]
        )
    return out


def overlap_p(n: int, p: float | np.ndarray) -> complex | np.ndarray:
    """<p|n> = i^n <x=p|n> under the Fourier convention <x|p> = e^(-ipx)/sqrt(2 pi)."""
    val = overlap_x(n, p)
    return (1j**n) * val


def quadrature_vector(kind: QuadratureKind, value: float | np.ndarray, dim: int) -> np.ndarray:
    """Row(s) of overlaps <value|n>, n = 0..dim-1, for contraction against a mode."""
    tab = hermite_function_table(dim, np.asarray(value, dtype=float))
    if kind is QuadratureKind.PHASE_P:
        return tab * (1j ** np.arange(dim))
    return tab.astype(complex)


# ---------------------------------------------------------------------------
# sharp projections


def _contract_mode(state: MultiModeState, mode: ModeLabel, vec: np.ndarray) -> MultiModeState:
    ax = state.axis(mode)
    amps = np.tensordot(vec, state.amps, axes=(0, ax))
    labels = tuple(l for l in state.labels if l != mode)
    if not labels:
        amps = amps.reshape(())
    return MultiModeState(amps, labels)


def project_sharp(
    state: MultiModeState, mode: ModeLabel, kind: QuadratureKind, value: float
) -> MultiModeState:
    """Contract one mode against <value|; the result is unnormalized.

    The squared norm of the result is the outcome probability density at
    ``value`` (times the squared norm of the input).
    """
    dim = state.amps.shape[state.axis(mode)]
    vec = quadrature_vector(kind, value, dim)
    return _contract_mode(state, mode, vec)


def project_fock(state: MultiModeState, mode: ModeLabel, n: int) -> MultiModeState:
    """Contract one mode against <n| (exact photon-number projection)."""
    dim = state.amps.shape[state.axis(mode)]
    if n >= dim:
        raise DimensionMismatchError(f"photon number {n} exceeds cutoff {dim - 1}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return _contract_mode(state, mode, vec)


# ---------------------------------------------------------------------------
# windowed POVMs

WindowStep = tuple[ModeLabel, QuadratureKind, float, float, int]
# (mode, kind, center, half_width, quad_order)


def _gauss_legendre(center: float, half_width: float, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return center + half_width * nodes, half_width * weights


def _windowed_outer(
    state: MultiModeState, steps: Sequence[WindowStep]
) -> tuple[np.ndarray, tuple[ModeLabel, ...], tuple[int, ...], float]:
    """Unnormalized conditional density operator after windowed homodynes.

    All windows are expanded in Gauss-Legendre nodes; every node combination
    is a sharp projection, and the conditional operator is the weighted sum
    of their outer products.  Returns (rho, labels, dims, probability).
    """
    tensor = state.amps
    labels = list(state.labels)
    node_weights: list[np.ndarray] = []
    for mode, kind, center, half_width, order in steps:
        ax = len(node_weights) + labels.index(mode)  # node axes sit in front
        dim = tensor.shape[ax]
        xs, ws = _gauss_legendre(center, half_width, order)
        U = quadrature_vector(kind, xs, dim)  # (order, dim)
        tensor = np.tensordot(U, np.moveaxis(tensor, ax, 0), axes=(1, 0))
        # node axis replaces the mode axis and is moved to the front
        tensor = np.moveaxis(tensor, 0, len(node_weights))
        labels.remove(mode)
        node_weights.append(ws)
    k = len(node_weights)
    rem_dims = tensor.shape[k:]
    d = int(np.prod(rem_dims)) if rem_dims else 1
    V = tensor.reshape(-1, d)
    W = np.array(1.0)
    for ws in node_weights:
        W = np.multiply.outer(W, ws)
    W = W.reshape(-1)
    rho = (V.T * W) @ V.conj()
    prob = float(np.sum(W * np.einsum("ij,ij->i", V, V.conj()).real))
    return rho, tuple(labels), rem_dims, prob


def collapse_windows(
    state: MultiModeState,
    steps: Sequence[WindowStep],
    rtol: float = 1e-8,
    escalate: bool = True,
) -> tuple[DensityMatrix, float]:
    """Apply several windowed homodyne POVMs to a pure state at once.

    Quadrature orders escalate (doubling twice) until the probability and the
    conditional operator agree between successive orders to ``rtol``; failure
    to converge raises QuadratureConvergenceError rather than passing silently.
    Returns the *unnormalized* conditional operator and its trace (the joint
    success probability).
    """
    rho, labels, dims, prob = _windowed_outer(state, steps)
    if escalate:
        for factor in (2, 4):
            bigger = [(m, k, c, hw, o * factor) for (m, k, c, hw, o) in steps]
            rho2, _, _, prob2 = _windowed_outer(state, bigger)
            scale = max(abs(prob2), float(np.max(np.abs(rho2))), 1e-300)
            if (
                abs(prob2 - prob) <= rtol * max(1.0, abs(prob2))
                and float(np.max(np.abs(rho2 - rho))) <= rtol * max(1.0, scale)
            ):
                return DensityMatrix(rho2, labels, dims), prob2
            rho, prob = rho2, prob2
        raise QuadratureConvergenceError(
            "window quadrature did not stabilize under order escalation; "
            "raise quad_order or shrink the window"
        )
    return DensityMatrix(rho, labels, dims), prob


def collapse_windowed(
    state: MultiModeState,
    mode: ModeLabel,
    kind: QuadratureKind,
    window: Window,
    rtol: float = 1e-8,
) -> tuple[DensityMatrix, float]:
    """Windowed homodyne collapse of one mode.

    Returns the unnormalized conditional density matrix on the remaining
    modes together with its trace, the outcome probability.  The probability
    tends to 0 as the half-width does.
    """
    if window.half_width == 0.0:
        proj = project_sharp(state, mode, kind, window.center)
        return _outer_density(proj), float(proj.norm() ** 2)
    step = (mode, kind, window.center, window.half_width, window.quad_order)
    return collapse_windows(state, [step], rtol=rtol)


# ---------------------------------------------------------------------------
# EPR projection


def epr_project_ideal(
    state: MultiModeState, modes: tuple[ModeLabel, ModeLabel]
) -> MultiModeState:
    """Contract two equal-cutoff modes against sum_n <n|<n| (unnormalized)."""
    i, j = modes
    ax_i, ax_j = state.axis(i), state.axis(j)
    if state.amps.shape[ax_i] != state.amps.shape[ax_j]:
        raise DimensionMismatchError("EPR projection requires equal cutoffs")
    amps = np.trace(state.amps, axis1=ax_i, axis2=ax_j)
    labels = tuple(l for l in state.labels if l not in (i, j))
    if not labels:
        amps = np.asarray(amps).reshape(())
    return MultiModeState(np.asarray(amps), labels)


def epr_project_physical(
    state: MultiModeState,
    modes: tuple[ModeLabel, ModeLabel],
    window_x: Window,
    window_p: Window,
    rtol: float = 1e-8,
) -> tuple[DensityMatrix, float]:
    """Fig.-style EPR projection: balanced beam splitter then x- and p-windows.

    The x window sits on the first mode and the p window on the second; as
    both half-widths shrink the renormalized result converges to the ideal
    sum_n <n,n| contraction.
    """
    from .states import apply_beam_splitter  # local import to avoid a cycle

    mixed = apply_beam_splitter(state, modes, 1.0 / math.sqrt(2.0))
    steps = [
        (modes[0], QuadratureKind.AMPLITUDE_X, window_x.center, window_x.half_width, window_x.quad_order),
        (modes[1], QuadratureKind.PHASE_P, window_p.center, window_p.half_width, window_p.quad_order),
    ]
    return collapse_windows(mixed, steps, rtol=rtol)


def _outer_density(state: MultiModeState) -> DensityMatrix:
    """|state><state| as a DensityMatrix; tolerates a fully-measured (0-mode) state."""
    v = state.amps.reshape(-1)
    dims = state.amps.shape if state.amps.shape else (1,)
    labels = state.labels if state.labels else ("scalar",)
    return DensityMatrix(np.outer(v, v.conj()), labels, dims)
