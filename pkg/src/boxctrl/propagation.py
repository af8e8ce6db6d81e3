"""Time evolution generated by piecewise-defined wall-motion profiles.

Two propagators are provided. The *auxiliary* one integrates the bilinear
model with a piecewise-constant amplitude v(t),

    H(v) = stiffness / ell0^2 - (v / ell0) * coupling,

exactly, one matrix exponential per piece (eigendecompositions are cached per
amplitude value). The *transformed-frame* one integrates the model driven by a
piecewise-linear profile f(t),

    H(t) = stiffness / (ell0 + lam*f)^2 - (df/dt / (ell0 + lam*f)) * coupling,

with a second-order exponential midpoint rule on each linear piece; pieces
with zero slope reduce to diagonal phase evolution and are taken exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import WallCollision
from .operators import (
    DEFAULT_DIM,
    MotionParams,
    SpectralState,
    _check_dim,
    dirichlet_eigenvalues,
    interaction_matrix,
)

__all__ = [
    "PiecewiseControl",
    "Propagator",
    "propagate_auxiliary",
    "propagate_transformed",
    "evolve_moving_box",
    "trajectory",
    "plus_norm",
    "minus_norm",
]

#: substeps per linear piece when no explicit step size is requested
DEFAULT_SUBSTEPS = 64


@dataclass(frozen=True)
class PiecewiseControl:
    """A piecewise control signal on a time grid.

    ``kind`` is ``"constant"`` for a step amplitude (one value per piece) or
    ``"linear"`` for a continuous-in-pieces profile, where ``values`` has two
    columns: the offset at the start of the piece and the slope on it. The
    profile may jump between pieces; each piece is evaluated from its own
    offset.
    """

    breakpoints: np.ndarray
    kind: str
    values: np.ndarray

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.kind == "constant":
            if vals.shape != (bp.size - 1,):
                raise ValueError("constant control needs one value per piece")
        elif self.kind == "linear":
            if vals.shape != (bp.size - 1, 2):
                raise ValueError("linear control needs (offset, slope) per piece")
        else:
            raise ValueError(f"unknown control kind {self.kind!r}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        self.breakpoints.setflags(write=False)
        self.values.setflags(write=False)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[float], total_time: float,
                        t_start: float = 0.0) -> "PiecewiseControl":
        """Step control with equal-length pieces covering [t_start, t_start+T]."""
        amps = np.asarray(amplitudes, dtype=float)
        if total_time <= 0:
            raise ValueError("total time must be positive")
        bp = t_start + np.linspace(0.0, total_time, amps.size + 1)
        return cls(bp, "constant", amps)

    @property
    def t_start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def t_end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def n_pieces(self) -> int:
        return self.breakpoints.size - 1

    def _piece_index(self, t: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(k, 0, self.n_pieces - 1)

    def value(self, t):
        """Signal value at time t (vectorized); right-continuous at jumps."""
        tt = np.asarray(t, dtype=float)
        k = self._piece_index(tt)
        if self.kind == "constant":
            out = self.values[k]
        else:
            out = self.values[k, 0] + self.values[k, 1] * (tt - self.breakpoints[k])
        return out if tt.ndim else float(out)

    def rate(self, t):
        """Rate of change at time t: slope for linear pieces, the amplitude
        itself for a step control (it prescribes the slope of the lifted
        profile)."""
        tt = np.asarray(t, dtype=float)
        k = self._piece_index(tt)
        out = self.values[k] if self.kind == "constant" else self.values[k, 1]
        return out if tt.ndim else float(out)

    def max_rate(self) -> float:
        col = self.values if self.kind == "constant" else self.values[:, 1]
        return float(np.abs(col).max())

    def end_value(self) -> float:
        """Signal value at the final time (limit from the left)."""
        if self.kind == "constant":
            return float(self.values[-1])
        o, s = self.values[-1]
        return float(o + s * (self.breakpoints[-1] - self.breakpoints[-2]))

    def range(self) -> tuple[float, float]:
        """Tight (min, max) of the signal over the whole horizon."""
        if self.kind == "constant":
            return float(self.values.min()), float(self.values.max())
        lengths = np.diff(self.breakpoints)
        starts = self.values[:, 0]
        ends = starts + self.values[:, 1] * lengths
        return float(min(starts.min(), ends.min())), float(max(starts.max(), ends.max()))

    def pieces(self) -> Iterator[tuple[float, float, np.ndarray]]:
        """Yield (t_left, t_right, piece data) over all pieces."""
        for k in range(self.n_pieces):
            yield (float(self.breakpoints[k]), float(self.breakpoints[k + 1]),
                   self.values[k])

    def clipped(self, t_span: tuple[float, float]) -> Iterator[tuple[float, float, np.ndarray]]:
        """Yield pieces intersected with [t_span[0], t_span[1]].

        For linear pieces the offset is re-based so it refers to the clipped
        left endpoint.
        """
        a, b = float(t_span[0]), float(t_span[1])
        if b < a:
            raise ValueError("time span must satisfy t_from <= t_to")
        eps = 1e-12 * max(1.0, abs(self.t_end))
        if a < self.t_start - eps or b > self.t_end + eps:
            raise ValueError("time span exceeds the control's horizon")
        for t0, t1, val in self.pieces():
            lo, hi = max(t0, a), min(t1, b)
            if hi - lo <= eps:
                continue
            if self.kind == "constant":
                yield lo, hi, val
            else:
                off = val[0] + val[1] * (lo - t0)
                yield lo, hi, np.array([off, val[1]])


@dataclass(frozen=True)
class Propagator:
    """Unitary for the interval [t_from, t_to] in the reference eigenbasis."""

    matrix: np.ndarray
    t_from: float
    t_to: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("propagator matrix must be square")
        if self.t_to < self.t_from:
            raise ValueError("propagator must run forward in time")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(coeffs, dtype=complex)

    def after(self, earlier: "Propagator") -> "Propagator":
        """Composite running ``earlier`` first, then this propagator."""
        if abs(self.t_from - earlier.t_to) > 1e-9 * max(1.0, abs(self.t_to)):
            raise ValueError(
                f"cannot chain: earlier ends at {earlier.t_to}, this starts at {self.t_from}"
            )
        return Propagator(self.matrix @ earlier.matrix, earlier.t_from, self.t_to)

    def dagger(self) -> "Propagator":
        return Propagator(self.matrix.conj().T, self.t_from, self.t_to)

    def unitarity_defect(self) -> float:
        g = self.matrix.conj().T @ self.matrix
        return float(np.abs(g - np.eye(self.dim)).max())


# --------------------------------------------------------------------------
# scale norms

def _as_coeffs(state) -> np.ndarray:
    if isinstance(state, SpectralState):
        return state.coeffs
    return np.asarray(state, dtype=complex)


def plus_norm(state) -> float:
    """Norm with weights (E_j + 1): sqrt(sum (E_j + 1) |c_j|^2).

    Finite for every truncated vector; dominates the plain norm.
    """
    c = _as_coeffs(state)
    w = dirichlet_eigenvalues(c.size) + 1.0
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def minus_norm(state) -> float:
    """Norm with weights 1/(E_j + 1): sqrt(sum |c_j|^2 / (E_j + 1))."""
    c = _as_coeffs(state)
    w = dirichlet_eigenvalues(c.size) + 1.0
    return float(np.sqrt(np.sum(np.abs(c) ** 2 / w)))


# --------------------------------------------------------------------------
# auxiliary model: exact piecewise-constant evolution

def _params_key(params: MotionParams) -> tuple[float, float, float]:
    return (params.lam, params.delta, params.ell0)


@lru_cache(maxsize=4096)
def _aux_eig(dim: int, lam: float, delta: float, ell0: float,
             v: float) -> tuple[np.ndarray, np.ndarray]:
    params = MotionParams(lam=lam, delta=delta, ell0=ell0)
    ham = np.diag(dirichlet_eigenvalues(dim)) / ell0 ** 2 \
        - (v / ell0) * interaction_matrix(params, dim).matrix
    w, q = np.linalg.eigh(ham)
    w.setflags(write=False)
    q.setflags(write=False)
    return w, q


def _aux_step(dim: int, params: MotionParams, v: float, dt: float) -> np.ndarray:
    if v == 0.0:
        phases = np.exp(-1j * dt * dirichlet_eigenvalues(dim) / params.ell0 ** 2)
        return np.diag(phases)
    w, q = _aux_eig(dim, *_params_key(params), float(v))
    return (q * np.exp(-1j * dt * w)) @ q.conj().T


def propagate_auxiliary(params: MotionParams, v: PiecewiseControl,
                        t_span: tuple[float, float] | None = None,
                        dim: int = DEFAULT_DIM) -> Propagator:
    """Exact propagator for the step-amplitude model over ``t_span``.

    ``v`` must be a ``"constant"``-kind control. The default span is the whole
    horizon of ``v``. One exponential per (clipped) piece; repeated amplitude
    values reuse a cached eigendecomposition.
    """
    dim = _check_dim(dim)
    if v.kind != "constant":
        raise ValueError("auxiliary propagation expects a step (constant-kind) control")
    span = (v.t_start, v.t_end) if t_span is None else (float(t_span[0]), float(t_span[1]))
    mat = np.eye(dim, dtype=complex)
    for lo, hi, amp in v.clipped(span):
        mat = _aux_step(dim, params, float(amp), hi - lo) @ mat
    return Propagator(mat, span[0], span[1])


# --------------------------------------------------------------------------
# transformed frame: exponential midpoint on linear pieces

def _length_guard(params: MotionParams, f_lo: float, f_hi: float) -> None:
    ell_lo = params.ell0 + params.lam * f_lo
    ell_hi = params.ell0 + params.lam * f_hi
    if min(ell_lo, ell_hi) <= 0.0:
        raise WallCollision(
            f"box length reaches {min(ell_lo, ell_hi):.3g} (profile range "
            f"[{min(f_lo, f_hi):.3g}, {max(f_lo, f_hi):.3g}])"
        )


def propagate_transformed(params: MotionParams, f: PiecewiseControl,
                          t_span: tuple[float, float] | None = None,
                          step: float | None = None,
                          dim: int = DEFAULT_DIM) -> Propagator:
    """Propagator for the piecewise-linear profile ``f`` over ``t_span``.

    Zero-slope pieces evolve exactly (the generator is diagonal there). Pieces
    with nonzero slope use the exponential midpoint rule with substep length
    at most ``step`` (default: piece length / 64). Raises
    :class:`WallCollision` if the box length would close anywhere on the span.
    """
    dim = _check_dim(dim)
    if f.kind != "linear":
        raise ValueError("transformed-frame propagation expects a linear-kind profile")
    if step is not None and step <= 0:
        raise ValueError("step must be positive")
    span = (f.t_start, f.t_end) if t_span is None else (float(t_span[0]), float(t_span[1]))

    stiff = dirichlet_eigenvalues(dim)
    coupling = interaction_matrix(params, dim).matrix
    mat = np.eye(dim, dtype=complex)

    for lo, hi, (off, slope) in f.clipped(span):
        dt = hi - lo
        _length_guard(params, off, off + slope * dt)
        if slope == 0.0:
            ell = params.ell0 + params.lam * off
            mat = np.diag(np.exp(-1j * dt * stiff / ell ** 2)) @ mat
            continue
        n_sub = DEFAULT_SUBSTEPS if step is None else max(1, int(np.ceil(dt / step)))
        h = dt / n_sub
        for i in range(n_sub):
            f_mid = off + slope * (i + 0.5) * h
            ell = params.ell0 + params.lam * f_mid
            ham = np.diag(stiff / ell ** 2) - (slope / ell) * coupling
            w, q = np.linalg.eigh(ham)
            mat = (q * np.exp(-1j * h * w)) @ q.conj().T @ mat
    return Propagator(mat, span[0], span[1])


def evolve_moving_box(params: MotionParams, f: PiecewiseControl,
                      state: SpectralState, step: float | None = None) -> SpectralState:
    """Evolve a state through the whole profile, tracking the box geometry.

    The input state must be referenced to the geometry the profile starts
    from; the output is referenced to the geometry at the final time.
    """
    start_geo = params.geometry_at(float(f.value(f.t_start)))
    if not state.geometry.close_to(start_geo, tol=1e-9):
        raise ValueError(
            f"state is referenced to {state.geometry}, but the profile starts at {start_geo}"
        )
    prop = propagate_transformed(params, f, step=step, dim=state.dim)
    return SpectralState(prop.apply(state.coeffs), params.geometry_at(f.end_value()))


def trajectory(params: MotionParams, f: PiecewiseControl, coeffs: np.ndarray,
               times: Sequence[float], step: float | None = None) -> np.ndarray:
    """Coefficient vectors at the requested times (sorted, within the horizon).

    Returns an array of shape (len(times), dim); row k is the state at
    ``times[k]`` given ``coeffs`` at the start of the profile.
    """
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("need a non-empty 1-D array of times")
    if np.any(np.diff(ts) < 0):
        raise ValueError("times must be sorted")
    psi = np.asarray(coeffs, dtype=complex).copy()
    dim = psi.size
    out = np.empty((ts.size, dim), dtype=complex)
    cursor = f.t_start
    for k, t in enumerate(ts):
        if t > cursor:
            psi = propagate_transformed(params, f, (cursor, float(t)),
                                        step=step, dim=dim).apply(psi)
            cursor = float(t)
        out[k] = psi
    return out
