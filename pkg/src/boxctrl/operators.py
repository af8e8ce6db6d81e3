"""Spectral building blocks for a particle in a hard-walled 1-D box.

Everything is expressed in the eigenbasis of the reference box: the interval
[-1/2, 1/2] with Dirichlet walls, unit mass convention m = 1/2 and hbar = 1,
so the stiffness eigenvalues are (j*pi)^2 and the eigenfunctions are
sqrt(2) * sin(j*pi*(x + 1/2)), j = 1, 2, ...

A box of length ``ell`` centered at ``d`` is handled by rescaling: the frame
map carries coefficients between the eigenbases of two such boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "DEFAULT_DIM",
    "BoxGeometry",
    "MotionParams",
    "SpectralState",
    "HermitianOperator",
    "dirichlet_eigenvalues",
    "momentum_matrix",
    "dilation_matrix",
    "interaction_matrix",
    "frame_map",
    "frame_map_deficiency",
    "parity_projector",
]

DEFAULT_DIM = 32


def _check_dim(dim: int) -> int:
    if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool):
        raise TypeError(f"basis size must be an integer, got {type(dim).__name__}")
    if dim < 2:
        raise ValueError(f"basis size must be at least 2, got {dim}")
    return int(dim)


@dataclass(frozen=True)
class BoxGeometry:
    """Length and center of a hard-walled interval."""

    length: float
    center: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.length) or not np.isfinite(self.center):
            raise ValueError("box geometry must be finite")
        if self.length <= 0.0:
            raise ValueError(f"box length must be positive, got {self.length}")

    @property
    def walls(self) -> tuple[float, float]:
        """Positions of the left and right wall."""
        h = 0.5 * self.length
        return (self.center - h, self.center + h)

    def close_to(self, other: "BoxGeometry", tol: float = 1e-9) -> bool:
        return (
            abs(self.length - other.length) <= tol * max(1.0, abs(self.length))
            and abs(self.center - other.center) <= tol * max(1.0, abs(self.length))
        )


@dataclass(frozen=True)
class MotionParams:
    """Weights tying the box geometry to a single scalar profile f(t).

    The instantaneous geometry is length = ell0 + lam * f(t) and center
    = d0 + delta * f(t); ``rate_bound`` is the strict bound on |df/dt|.
    """

    lam: float
    delta: float
    ell0: float = 1.0
    d0: float = 0.0
    rate_bound: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lam", "delta", "ell0", "d0", "rate_bound"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.ell0 <= 0.0:
            raise ValueError(f"reference length must be positive, got {self.ell0}")
        if self.rate_bound <= 0.0:
            raise ValueError(f"rate bound must be positive, got {self.rate_bound}")

    def geometry_at(self, f_value: float) -> BoxGeometry:
        """Box geometry when the profile sits at ``f_value`` (walls must be open)."""
        return BoxGeometry(self.ell0 + self.lam * f_value, self.d0 + self.delta * f_value)

    @property
    def rest_geometry(self) -> BoxGeometry:
        return BoxGeometry(self.ell0, self.d0)


class SpectralState:
    """Coefficient vector in the reference eigenbasis, tagged with its box.

    The coefficients describe the wavefunction after mapping the physical box
    onto the reference interval; ``geometry`` records which physical box that
    is. Coefficients are stored as a complex copy of whatever is passed in.
    """

    __slots__ = ("coeffs", "geometry")

    def __init__(self, coeffs: np.ndarray, geometry: BoxGeometry | None = None):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("state needs a 1-D coefficient vector of length >= 2")
        self.coeffs = c.copy()
        self.geometry = geometry if geometry is not None else BoxGeometry(1.0, 0.0)

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "SpectralState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return SpectralState(self.coeffs / n, self.geometry)

    @classmethod
    def basis_mode(cls, j: int, dim: int, geometry: BoxGeometry | None = None) -> "SpectralState":
        """The j-th eigenmode (1-based) as a coefficient vector of size dim."""
        dim = _check_dim(dim)
        if not 1 <= j <= dim:
            raise ValueError(f"mode index {j} outside 1..{dim}")
        c = np.zeros(dim, dtype=complex)
        c[j - 1] = 1.0
        return cls(c, geometry)

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        return f"SpectralState(dim={self.dim}, geometry={self.geometry!r})"


@dataclass(frozen=True)
class HermitianOperator:
    """A matrix asserted Hermitian at construction, with a short label."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        dev = np.abs(m - m.conj().T).max() if m.size else 0.0
        if dev > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, coeffs: np.ndarray) -> float:
        c = np.asarray(coeffs, dtype=complex)
        return float(np.real(np.vdot(c, self.matrix @ c)))


def dirichlet_eigenvalues(dim: int) -> np.ndarray:
    """Stiffness eigenvalues (j*pi)^2 for j = 1..dim on the reference box."""
    dim = _check_dim(dim)
    j = np.arange(1, dim + 1, dtype=float)
    return (j * np.pi) ** 2


@lru_cache(maxsize=64)
def _coupling_tables(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Momentum and dilation matrices in the reference eigenbasis (cached).

    Both are purely imaginary and Hermitian. Off the diagonal, with
    b(j, l) = 2*j*l / (l^2 - j^2):

    * momentum couples opposite-parity modes (odd j + l):
      P[j, l] = 1j * b(j, l) * (1 - (-1)**(j + l))
    * the symmetrized x*p couples same-parity modes (even j + l, j != l):
      D[j, l] = -0.5j * b(j, l) * (1 + (-1)**(j + l))

    The sign conventions are pinned by direct quadrature against the basis
    functions (see the operator tests).
    """
    idx = np.arange(1, dim + 1)
    jj, ll = np.meshgrid(idx, idx, indexing="ij")
    num = 2.0 * jj * ll
    den = (ll ** 2 - jj ** 2).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(jj == ll, 0.0, num / np.where(jj == ll, 1.0, den))
    sign = (-1.0) ** (jj + ll)
    mom = 1j * base * (1.0 - sign)
    dil = -0.5j * base * (1.0 + sign)
    mom.setflags(write=False)
    dil.setflags(write=False)
    return mom, dil


def momentum_matrix(dim: int) -> HermitianOperator:
    """Matrix of p = -i d/dx in the reference eigenbasis.

    Couples modes of opposite parity only; entries are purely imaginary.
    """
    dim = _check_dim(dim)
    return HermitianOperator(_coupling_tables(dim)[0], label="momentum")


def dilation_matrix(dim: int) -> HermitianOperator:
    """Matrix of the symmetrized product (x*p + p*x)/2 in the reference basis.

    Couples distinct modes of equal parity only; entries are purely imaginary.
    """
    dim = _check_dim(dim)
    return HermitianOperator(_coupling_tables(dim)[1], label="dilation")


def interaction_matrix(params: MotionParams, dim: int) -> HermitianOperator:
    """Control coupling lam * (x*p sym) + delta * p for the given motion weights."""
    dim = _check_dim(dim)
    mom, dil = _coupling_tables(dim)
    return HermitianOperator(params.lam * dil + params.delta * mom, label="interaction")


def parity_projector(dim: int, even: bool = True) -> np.ndarray:
    """Projector onto even (or odd) modes about the box center.

    Mode j has parity (-1)**(j+1): j = 1, 3, 5, ... are even about the center.
    Returns a real diagonal matrix.
    """
    dim = _check_dim(dim)
    j = np.arange(1, dim + 1)
    keep = (j % 2 == 1) if even else (j % 2 == 0)
    return np.diag(keep.astype(float))


def _overlap_block(src: BoxGeometry, dst: BoxGeometry, dim: int) -> np.ndarray:
    """Overlap integrals <chi_l(dst), chi_j(src)> over the walls' intersection.

    chi_j for a box (ell, d) is sqrt(2/ell) * sin(j*pi*((x - d)/ell + 1/2)) on
    its own interval and zero outside. Each entry reduces to integrals of
    cos(c*x + phase), which are evaluated in the cancellation-safe product form
    2*sin(c*h)/c = 2*h*sinc(c*h/pi) around the midpoint of the intersection.
    """
    lo = max(src.walls[0], dst.walls[0])
    hi = min(src.walls[1], dst.walls[1])
    if hi <= lo:
        return np.zeros((dim, dim))
    mid = 0.5 * (hi + lo)
    h = 0.5 * (hi - lo)

    j = np.arange(1, dim + 1, dtype=float)
    alpha = j * np.pi / src.length                      # source wavenumbers
    pa = j * np.pi * (0.5 - src.center / src.length)    # source phases
    beta = j * np.pi / dst.length
    pb = j * np.pi * (0.5 - dst.center / dst.length)

    # rows: destination index l, columns: source index j
    cm = alpha[None, :] - beta[:, None]
    cp = alpha[None, :] + beta[:, None]
    fm = pa[None, :] - pb[:, None]
    fp = pa[None, :] + pb[:, None]

    def cos_integral(c: np.ndarray, phase: np.ndarray) -> np.ndarray:
        # integral of cos(c*x + phase) over [mid - h, mid + h]
        return 2.0 * h * np.sinc(c * h / np.pi) * np.cos(c * mid + phase)

    block = 0.5 * (cos_integral(cm, fm) - cos_integral(cp, fp))
    return block * (2.0 / np.sqrt(src.length * dst.length))


def frame_map(src: BoxGeometry, dst: BoxGeometry, dim: int) -> np.ndarray:
    """Matrix carrying coefficients from the src-box basis to the dst-box basis.

    Column j holds the expansion of the j-th src eigenmode over the first
    ``dim`` dst eigenmodes. The map is exactly unitary only in the full
    (infinite) basis; truncation leaks norm whenever the boxes differ, and
    :func:`frame_map_deficiency` quantifies the per-column loss. Boxes whose
    interiors do not overlap give the zero matrix.
    """
    dim = _check_dim(dim)
    out = _overlap_block(src, dst, dim).astype(complex)
    return out


def frame_map_deficiency(map_matrix: np.ndarray) -> np.ndarray:
    """Per-column norm loss 1 - ||column||^2 of a truncated frame map."""
    m = np.asarray(map_matrix)
    return 1.0 - np.sum(np.abs(m) ** 2, axis=0)
