"""Spectral analysis of the driven box: gap coincidences and their removal.

The perturbed generator H(eta) = stiffness + eta * coupling has real-analytic
eigenvalue curves. Approximate controllability along the consecutive-mode
chain needs (a) every chain link coupled and (b) no *resonance*: no spectral
gap of a chain pair may coincide with the gap of any other coupled pair. At
eta = 0 the gaps are integer multiples of pi^2 and coincidences are exact
integer identities; a small eta generically splits them — except when the
perturbation shifts the whole spectrum uniformly, which is exactly the
pure-momentum case (no dilation weight).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateMatching
from .operators import (
    MotionParams,
    _check_dim,
    dirichlet_eigenvalues,
    interaction_matrix,
)

__all__ = [
    "SpectrumCurve",
    "ResonanceReport",
    "find_resonances_at_zero",
    "spectrum_vs_eta",
    "second_derivative_formula",
    "certify_chain",
    "scan_for_nonresonant_eta",
]

#: continuation step for eigenpair tracking between eta values
TRACK_STEP = 0.01

#: an overlap assignment is trusted only if the winner beats the runner-up by this
OVERLAP_GAP = 0.1


@dataclass(frozen=True)
class SpectrumCurve:
    """Labeled eigenvalue curves over a coupling-strength grid.

    Row k of ``eigenvalues`` holds the spectrum at ``eta_grid[k]``; column j
    follows one analytic curve (matched by eigenvector overlap, not by
    sorting, so curves may cross).
    """

    eta_grid: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.eta_grid, dtype=float)
        e = np.asarray(self.eigenvalues, dtype=float)
        if e.shape[0] != g.size:
            raise ValueError("one spectrum row per grid point required")
        object.__setattr__(self, "eta_grid", g)
        object.__setattr__(self, "eigenvalues", e)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[1]

    def curve(self, j: int) -> np.ndarray:
        """Eigenvalue curve of mode j (1-based label at eta = start)."""
        return self.eigenvalues[:, j - 1]


@dataclass(frozen=True)
class ResonanceReport:
    """Gap coincidences among coupled pairs at one coupling strength.

    Each quadruple (s1, s2, t1, t2) records |E_s2 - E_s1| = |E_t2 - E_t1|
    within ``tolerance``, with (s1, s2) a chain pair and (t1, t2) a coupled
    pair that is not the same pair in either order. ``broken_links`` lists
    chain pairs whose coupling fell below the tolerance (connectivity
    failures, reported by certification).
    """

    quadruples: tuple[tuple[int, int, int, int], ...]
    eta: float
    tolerance: float
    broken_links: tuple[tuple[int, int], ...] = field(default=())

    @property
    def clean(self) -> bool:
        return not self.quadruples and not self.broken_links


def find_resonances_at_zero(dim: int, max_index: int) -> ResonanceReport:
    """Exact integer search for gap coincidences of the unperturbed spectrum.

    Chain gaps are (s+1)^2 - s^2 = 2s+1; a coincidence needs integers
    t1 < t2 <= max_index with t2^2 - t1^2 = 2s+1, excluding the chain pair
    itself. Solved by factoring 2s+1 = d*e (d < e, both odd automatically):
    t2 = (d+e)/2, t1 = (e-d)/2.
    """
    dim = _check_dim(dim)
    if not 2 <= max_index <= dim:
        raise ValueError(f"max_index must lie in 2..{dim}, got {max_index}")
    found: list[tuple[int, int, int, int]] = []
    for s in range(1, max_index):
        gap = 2 * s + 1
        d = 1
        while d * d < gap:
            if gap % d == 0:
                e = gap // d
                t2 = (d + e) // 2
                t1 = (e - d) // 2
                if 1 <= t1 and t2 <= max_index and (t1, t2) != (s, s + 1):
                    found.append((s, s + 1, t1, t2))
            d += 2
        # d*d == gap would need t1 = 0; never a valid pair
    found.sort()
    return ResonanceReport(tuple(found), eta=0.0, tolerance=0.0)


def _tracked_eigensystem(params: MotionParams, eta_grid: np.ndarray, dim: int):
    """Eigenvalues and eigenvectors along the grid, labels carried by overlap.

    Yields (eta, eigenvalues, eigenvectors) with columns ordered so that
    column j continues the curve labeled j at the first grid point. Raises
    :class:`DegenerateMatching` when the winning overlap does not beat the
    runner-up by :data:`OVERLAP_GAP`.
    """
    ham0 = np.diag(dirichlet_eigenvalues(dim))
    coupling = interaction_matrix(params, dim).matrix
    q_prev: np.ndarray | None = None
    for eta in eta_grid:
        if eta == 0.0:
            w = dirichlet_eigenvalues(dim).copy()
            q = np.eye(dim, dtype=complex)
        else:
            w, q = np.linalg.eigh(ham0 + eta * coupling)
        if q_prev is not None:
            overlap = np.abs(q_prev.conj().T @ q)
            rows, cols = linear_sum_assignment(-overlap)
            order = np.empty(dim, dtype=int)
            order[rows] = cols
            picked = overlap[np.arange(dim), order]
            masked = overlap.copy()
            masked[np.arange(dim), order] = -1.0
            runner_up = masked.max(axis=1)
            worst = float((picked - runner_up).min())
            if worst < OVERLAP_GAP:
                j = int((picked - runner_up).argmin())
                raise DegenerateMatching(
                    f"curve matching ambiguous near eta={eta:.6g} for label "
                    f"{j + 1} (overlap margin {worst:.3f} < {OVERLAP_GAP}); "
                    "refine the eta grid"
                )
            w = w[order]
            q = q[:, order]
        q_prev = q
        yield float(eta), w, q


def spectrum_vs_eta(params: MotionParams, eta_grid, dim: int) -> SpectrumCurve:
    """Labeled eigenvalue curves of stiffness + eta * coupling on a grid."""
    dim = _check_dim(dim)
    grid = np.asarray(eta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("need a non-empty 1-D eta grid")
    rows = np.empty((grid.size, dim))
    for k, (_, w, _) in enumerate(_tracked_eigensystem(params, grid, dim)):
        rows[k] = w
    return SpectrumCurve(grid, rows)


def second_derivative_formula(params: MotionParams, j: int) -> float:
    """Closed-form eta^2 coefficient of the eigenvalue curve E_j(eta).

    This is the Taylor coefficient (half the second derivative): the
    first-order term vanishes because the coupling has empty diagonal. For a
    pure momentum drive it is -delta^2/4 for every mode — a uniform shift.
    """
    if j < 1:
        raise ValueError("mode index must be >= 1")
    lam, delta = params.lam, params.delta
    return lam ** 2 / (8.0 * j ** 2 * np.pi ** 2) - lam ** 2 / 48.0 - delta ** 2 / 4.0


def _continuation_grid(eta: float) -> np.ndarray:
    if eta == 0.0:
        return np.array([0.0])
    steps = max(2, int(np.ceil(abs(eta) / TRACK_STEP)))
    return np.linspace(0.0, eta, steps + 1)


def certify_chain(params: MotionParams, eta: float, dim: int, max_index: int,
                  tol: float = 1e-8) -> tuple[bool, ResonanceReport]:
    """Check the consecutive-mode chain at one coupling strength.

    Certifies that (a) every chain link (j, j+1), j < max_index, has coupling
    magnitude above ``tol`` in the eta-tracked eigenbasis, and (b) no chain
    gap coincides (within ``tol``) with the gap of any other coupled pair
    inside ``max_index``. Labels are carried from eta = 0 by eigenvector
    continuation. Only consecutive-pair chains are supported — they are the
    canonical connectedness route here. Returns (certified, report); the
    report carries the violations when certification fails.
    """
    dim = _check_dim(dim)
    if not 2 <= max_index <= dim // 2:
        raise ValueError(
            f"max_index must lie in 2..{dim // 2} (needs a 2x truncation buffer), "
            f"got {max_index}"
        )
    for _, w, q in _tracked_eigensystem(params, _continuation_grid(eta), dim):
        pass
    coupling = interaction_matrix(params, dim).matrix
    v_tracked = np.abs(q.conj().T @ coupling @ q)[:max_index, :max_index]
    energies = w[:max_index]

    broken = tuple(
        (j, j + 1) for j in range(1, max_index)
        if v_tracked[j - 1, j] <= tol
    )

    chain_gaps = np.abs(np.diff(energies))  # gap of (s, s+1) at index s-1
    a_idx, b_idx = np.triu_indices(max_index, k=1)
    coupled = v_tracked[a_idx, b_idx] > tol
    pair_gaps = np.abs(energies[b_idx] - energies[a_idx])

    quadruples: list[tuple[int, int, int, int]] = []
    for s in range(1, max_index):
        hits = np.flatnonzero(
            coupled & (np.abs(pair_gaps - chain_gaps[s - 1]) < tol)
        )
        for h in hits:
            t1, t2 = int(a_idx[h]) + 1, int(b_idx[h]) + 1
            if (t1, t2) != (s, s + 1):
                quadruples.append((s, s + 1, t1, t2))
    quadruples.sort()
    report = ResonanceReport(tuple(quadruples), eta=float(eta), tolerance=float(tol),
                             broken_links=broken)
    return report.clean, report


def scan_for_nonresonant_eta(params: MotionParams, eta_max: float, grid_size: int,
                             dim: int, max_index: int,
                             tol: float = 1e-8) -> float | None:
    """Smallest strictly positive grid point where the chain certifies.

    Scans eta = eta_max * k / grid_size for k = 1..grid_size and returns the
    first value passing :func:`certify_chain`, or None when the whole grid
    fails (reported as not-found — never as proof that no such eta exists).
    """
    if eta_max <= 0:
        raise ValueError("eta_max must be positive")
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    for k in range(1, grid_size + 1):
        eta = eta_max * k / grid_size
        ok, _ = certify_chain(params, eta, dim, max_index, tol=tol)
        if ok:
            return float(eta)
    return None
