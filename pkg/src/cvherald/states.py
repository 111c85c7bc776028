"""Truncated Fock-space states and the Gaussian unitaries acting on them.

Single modes are plain complex amplitude vectors indexed by photon number,
multimode states are complex tensors with one axis per labelled mode.  All
operations are pure: they return new objects and never mutate their inputs,
so states can be shared freely across parallel sweep workers.

Conventions fixed here and relied on everywhere else:

* beam splitter (modes i, j, amplitude transmittance t, r = sqrt(1 - t^2)):
  creation operators transform as
      a_i^dag -> t a_i^dag + r a_j^dag,
      a_j^dag -> t a_j^dag - r a_i^dag,
  so a single photon in mode i splits as t|1,0> + r|0,1> and
  |N,0> -> sum_k sqrt(C(N,k)) t^k r^(N-k) |k, N-k>.
* displacement D(alpha) = exp(alpha a^dag - alpha* a), evaluated by
  exponentiating the truncated generator with generous headroom.

Truncation is never silent: any operation that would push more than
``tail_tol`` of squared norm past a mode's cutoff raises TruncationLossError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

TAIL_TOL = 1e-10

ModeLabel = int | str


class TruncationLossError(RuntimeError):
    """An operation lost more norm past a Fock cutoff than the tail tolerance."""


class DimensionMismatchError(ValueError):
    """Operands live on incompatible truncated spaces."""


@dataclass(frozen=True)
class ModeState:
    """Pure state of a single mode: amplitudes over photon numbers 0..cutoff."""

    amp: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amp, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise DimensionMismatchError("amplitudes must be a nonempty 1-d vector")
        object.__setattr__(self, "amp", a)

    @property
    def cutoff(self) -> int:
        return self.amp.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalized(self) -> "ModeState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return ModeState(self.amp / n)

    def padded(self, cutoff: int) -> "ModeState":
        if cutoff < self.cutoff:
            raise DimensionMismatchError("padding cannot shrink the cutoff")
        out = np.zeros(cutoff + 1, dtype=complex)
        out[: self.amp.size] = self.amp
        return ModeState(out)


def make_fock(n: int, cutoff: int) -> ModeState:
    """Photon-number eigenstate |n> on a mode truncated at ``cutoff``."""
    if n < 0:
        raise ValueError(f"photon number must be nonnegative, got {n}")
    if n > cutoff:
        raise ValueError(f"photon number {n} exceeds cutoff {cutoff}")
    amp = np.zeros(cutoff + 1, dtype=complex)
    amp[n] = 1.0
    return ModeState(amp)


def coherent_state(alpha: complex, cutoff: int) -> ModeState:
    """Truncated coherent state; amplitudes e^(-|a|^2/2) a^n / sqrt(n!)."""
    n = np.arange(cutoff + 1)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, cutoff + 1)))))
    amp = np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.exp(0.5 * log_fact)
    return ModeState(amp.astype(complex))


@dataclass(frozen=True)
class MultiModeState:
    """Pure state of several labelled modes as a complex amplitude tensor."""

    amps: np.ndarray
    labels: tuple[ModeLabel, ...]

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=complex)
        if a.ndim != len(self.labels):
            raise DimensionMismatchError(
                f"tensor rank {a.ndim} does not match {len(self.labels)} labels"
            )
        if len(set(self.labels)) != len(self.labels):
            raise DimensionMismatchError("mode labels must be unique")
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(d - 1 for d in self.amps.shape)

    def axis(self, label: ModeLabel) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionMismatchError(f"no mode labelled {label!r}") from None

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "MultiModeState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return MultiModeState(self.amps / n, self.labels)

    def mode_state(self, label: ModeLabel) -> ModeState:
        """Single-mode amplitudes, valid only when the state is a product."""
        if len(self.labels) != 1:
            raise DimensionMismatchError("mode_state requires a single-mode state")
        return ModeState(self.amps)


def tensor_product(parts: Sequence[tuple[ModeLabel, ModeState]]) -> MultiModeState:
    """Tensor single-mode states together in the given label order."""
    if not parts:
        raise ValueError("need at least one mode")
    amps = np.array(1.0, dtype=complex)
    labels = []
    for label, st in parts:
        amps = np.tensordot(amps, st.amp, axes=0)
        labels.append(label)
    return MultiModeState(amps, tuple(labels))


def attach_vacuum(state: MultiModeState, label: ModeLabel, cutoff: int) -> MultiModeState:
    """Append a fresh vacuum mode with the given cutoff."""
    vac = make_fock(0, cutoff)
    amps = np.tensordot(state.amps, vac.amp, axes=0)
    return MultiModeState(amps, state.labels + (label,))


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Lossless beam splitter fixed by its real amplitude transmittance."""

    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.t}")

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t * self.t))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian operator on the (flattened) truncated space of some modes."""

    entries: np.ndarray
    labels: tuple[ModeLabel, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        d = int(np.prod(self.dims))
        if e.shape != (d, d):
            raise DimensionMismatchError(f"entries must be {d}x{d}, got {e.shape}")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(self.dims))

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def normalized(self) -> "DensityMatrix":
        tr = self.trace()
        if tr <= 0.0:
            raise ValueError("cannot normalize a trace-zero operator")
        return DensityMatrix(self.entries / tr, self.labels, self.dims)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.entries + self.entries.conj().T) / 2)[0])


def pure_density(state: MultiModeState | ModeState) -> DensityMatrix:
    if isinstance(state, ModeState):
        v = state.amp
        return DensityMatrix(np.outer(v, v.conj()), (0,), (v.size,))
    v = state.amps.reshape(-1)
    return DensityMatrix(np.outer(v, v.conj()), state.labels, state.amps.shape)


# ---------------------------------------------------------------------------
# beam splitter


def _bs_pair_matrix(t: float, di: int, dj: int) -> np.ndarray:
    """Exact Fock matrix of the beam splitter on two modes of dims di, dj.

    Rows run over the extended output grid (de, de) with de = di + dj - 1,
    so no output amplitude is ever discarded here; truncation back to the
    caller's box happens in apply_beam_splitter where the loss is measured.
    """
    r = math.sqrt(max(0.0, 1.0 - t * t))
    de = di + dj - 1
    lf = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, de + 1)))))  # log n!
    B = np.zeros((de * de, di * dj))
    for m in range(di):
        for n in range(dj):
            s = m + n
            for k in range(s + 1):
                l = s - k
                amp = 0.0
                for p in range(max(0, k - n), min(k, m) + 1):
                    q = k - p
                    term = (
                        math.comb(m, p)
                        * math.comb(n, q)
                        * t ** (p + n - q)
                        * r ** (m - p)
                        * (-r) ** q
                    )
                    amp += term
                amp *= math.exp(0.5 * (lf[k] + lf[l] - lf[m] - lf[n]))
                B[k * de + l, m * dj + n] = amp
    return B


def apply_beam_splitter(
    state: MultiModeState,
    modes: tuple[ModeLabel, ModeLabel],
    bs: BeamSplitterSpec | float,
    tail_tol: float = TAIL_TOL,
) -> MultiModeState:
    """Mix two modes on a beam splitter; the first label is the transmitted port.

    Raises TruncationLossError when the photon-number-conserving output leaks
    more than ``tail_tol`` of squared norm past either cutoff.
    """
    i, j = modes
    if i == j:
        raise DimensionMismatchError("beam splitter needs two distinct modes")
    t = bs.t if isinstance(bs, BeamSplitterSpec) else float(bs)
    ax_i, ax_j = state.axis(i), state.axis(j)
    di = state.amps.shape[ax_i]
    dj = state.amps.shape[ax_j]
    de = di + dj - 1

    moved = np.moveaxis(state.amps, (ax_i, ax_j), (-2, -1))
    lead = moved.shape[:-2]
    flat = moved.reshape(-1, di * dj)
    B = _bs_pair_matrix(t, di, dj)
    out = flat @ B.T  # (lead, de*de)
    out = out.reshape(lead + (de, de))

    in_norm2 = float(np.vdot(flat, flat).real)
    box = out[..., :di, :dj]
    box_norm2 = float(np.vdot(box, box).real)
    loss = max(0.0, in_norm2 - box_norm2)
    if in_norm2 > 0 and loss > tail_tol * in_norm2:
        raise TruncationLossError(
            f"beam splitter on modes {modes} lost {loss / in_norm2:.3e} of norm "
            f"past cutoffs ({di - 1}, {dj - 1}); increase the cutoffs"
        )
    res = np.moveaxis(box, (-2, -1), (ax_i, ax_j))
    return MultiModeState(res, state.labels)


# ---------------------------------------------------------------------------
# displacement and phase


def displacement_matrix(alpha: complex, dim: int, headroom: int | None = None) -> np.ndarray:
    """Truncated matrix of D(alpha) on ``dim`` levels.

    The generator alpha a^dag - alpha* a is exponentiated on an extended
    space whose size grows with |alpha| so the retained block is accurate;
    the extended exponential is exactly unitary, and the returned block is
    its top-left dim x dim corner.
    """
    a = complex(alpha)
    if headroom is None:
        headroom = max(8, int(math.ceil(abs(a) ** 2 + 6 * abs(a))))
    n_ext = dim + headroom
    sq = np.sqrt(np.arange(1, n_ext))
    low = np.diag(sq, -1)  # a^dag in Fock basis
    G = a * low - np.conj(a) * low.T
    D = expm(G)
    return D[:dim, :dim]


def apply_displacement(
    state: MultiModeState,
    mode: ModeLabel,
    alpha: complex,
    tail_tol: float = TAIL_TOL,
) -> MultiModeState:
    """Coherently displace one mode by alpha, erroring on cutoff overflow."""
    if alpha == 0:
        return state
    ax = state.axis(mode)
    dim = state.amps.shape[ax]
    a = complex(alpha)
    headroom = max(8, int(math.ceil(abs(a) ** 2 + 6 * abs(a))))
    n_ext = dim + headroom
    D = displacement_matrix(a, n_ext, headroom=0)
    # embed the mode axis in the extended space, displace, then truncate back
    moved = np.moveaxis(state.amps, ax, -1)
    out = moved @ D[:, :dim].T  # (..., n_ext)
    in_norm2 = float(np.vdot(moved, moved).real)
    box = out[..., :dim]
    loss = max(0.0, in_norm2 - float(np.vdot(box, box).real))
    if in_norm2 > 0 and loss > tail_tol * in_norm2:
        raise TruncationLossError(
            f"displacement by {alpha!r} lost {loss / in_norm2:.3e} of norm past "
            f"cutoff {dim - 1}; increase the cutoff"
        )
    return MultiModeState(np.moveaxis(box, -1, ax), state.labels)


def displace_mode_state(psi: ModeState, alpha: complex, cutoff: int | None = None) -> ModeState:
    """D(alpha)|psi> as a single-mode state, truncated at ``cutoff``."""
    dim_in = psi.amp.size
    a = complex(alpha)
    if cutoff is None:
        cutoff = dim_in - 1 + max(8, int(math.ceil(abs(a) ** 2 + 6 * abs(a))))
    n_ext = max(cutoff + 1, dim_in) + max(8, int(math.ceil(abs(a) ** 2 + 6 * abs(a))))
    D = displacement_matrix(a, n_ext, headroom=0)
    full = D[:, :dim_in] @ psi.amp
    return ModeState(full[: cutoff + 1])


def apply_phase(state: MultiModeState, mode: ModeLabel, theta: float) -> MultiModeState:
    """Phase shift: the amplitude at photon number n gains e^(i n theta)."""
    ax = state.axis(mode)
    dim = state.amps.shape[ax]
    phases = np.exp(1j * theta * np.arange(dim))
    shape = [1] * state.amps.ndim
    shape[ax] = dim
    return MultiModeState(state.amps * phases.reshape(shape), state.labels)


# ---------------------------------------------------------------------------
# density-matrix utilities


def partial_trace(
    obj: MultiModeState | DensityMatrix, keep: Iterable[ModeLabel]
) -> DensityMatrix:
    """Trace out all modes except ``keep`` (order of ``keep`` is preserved)."""
    keep = tuple(keep)
    if not keep:
        raise DimensionMismatchError("keep set must be nonempty")
    if isinstance(obj, MultiModeState):
        obj = pure_density(obj)
    for k in keep:
        if k not in obj.labels:
            raise DimensionMismatchError(f"no mode labelled {k!r}")
    dims = obj.dims
    n = len(dims)
    rho = obj.entries.reshape(dims + dims)
    # contract the traced modes pairwise
    traced = [lbl for lbl in obj.labels if lbl not in keep]
    labels = list(obj.labels)
    for lbl in traced:
        pos = labels.index(lbl)
        m = len(labels)
        rho = np.trace(rho, axis1=pos, axis2=pos + m)
        labels.pop(pos)
    # reorder remaining modes to match `keep`
    m = len(labels)
    perm = [labels.index(k) for k in keep]
    rho = rho.transpose(perm + [p + m for p in perm])
    new_dims = tuple(dims[obj.labels.index(k)] for k in keep)
    d = int(np.prod(new_dims))
    return DensityMatrix(rho.reshape(d, d), keep, new_dims)


def fidelity_with_pure(
    rho: DensityMatrix, target: ModeState | MultiModeState
) -> float:
    """<target| rho |target> for a normalized rho and pure target."""
    if isinstance(target, ModeState):
        v = target.amp
        if v.size != rho.entries.shape[0]:
            raise DimensionMismatchError(
                f"target dim {v.size} does not match rho dim {rho.entries.shape[0]}"
            )
    else:
        if target.amps.shape != rho.dims:
            raise DimensionMismatchError(
                f"target dims {target.amps.shape} do not match rho dims {rho.dims}"
            )
        v = target.amps.reshape(-1)
    return float(np.real(v.conj() @ rho.entries @ v))
