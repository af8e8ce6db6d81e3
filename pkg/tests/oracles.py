"""Independent reference computations the test suite trusts.

Nothing here imports the package's numerics beyond plain data types: matrix
elements come from brute-force Gauss-Legendre quadrature, time evolution from
a high-order adaptive Runge-Kutta integration of the Schrodinger system, gap
coincidences from an exhaustive triple loop, and curvatures from finite
differences. Slow and dumb on purpose.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

RTOL = 1e-11
ATOL = 1e-13


def gauss_rule(n_nodes: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped from [-1, 1] to [lo, hi]."""
    x, w = leggauss(n_nodes)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return mid + half * x, half * w


def reference_modes(dim: int, x: np.ndarray) -> np.ndarray:
    """phi_j(x) = sqrt(2) sin(j pi (x + 1/2)) on [-1/2, 1/2], rows j = 1..dim."""
    j = np.arange(1, dim + 1)[:, None]
    return np.sqrt(2.0) * np.sin(j * np.pi * (x[None, :] + 0.5))


def reference_mode_derivatives(dim: int, x: np.ndarray) -> np.ndarray:
    j = np.arange(1, dim + 1)[:, None]
    return np.sqrt(2.0) * j * np.pi * np.cos(j * np.pi * (x[None, :] + 0.5))


def quad_momentum(dim: int, n_nodes: int | None = None) -> np.ndarray:
    """<phi_j, -i d/dx phi_l> by quadrature; exact up to the rule's degree."""
    n = n_nodes if n_nodes is not None else max(256, 4 * dim)
    x, w = gauss_rule(n, -0.5, 0.5)
    phi = reference_modes(dim, x)
    dphi = reference_mode_derivatives(dim, x)
    return -1j * (phi * w) @ dphi.T


def quad_dilation(dim: int, n_nodes: int | None = None) -> np.ndarray:
    """<phi_j, (x p + p x)/2 phi_l> by quadrature.

    Acting to the right: (x p + p x)/2 = -i (x d/dx + 1/2).
    """
    n = n_nodes if n_nodes is not None else max(256, 4 * dim)
    x, w = gauss_rule(n, -0.5, 0.5)
    phi = reference_modes(dim, x)
    dphi = reference_mode_derivatives(dim, x)
    acted = x[None, :] * dphi + 0.5 * phi
    return -1j * (phi * w) @ acted.T


def box_modes(dim: int, x: np.ndarray, length: float, center: float) -> np.ndarray:
    """Eigenmodes of a box (length, center), zero outside its own walls."""
    j = np.arange(1, dim + 1)[:, None]
    xi = (x[None, :] - center) / length + 0.5
    vals = np.sqrt(2.0 / length) * np.sin(j * np.pi * xi)
    inside = (xi >= 0.0) & (xi <= 1.0)
    return np.where(inside, vals, 0.0)


def quad_frame_map(src_len: float, src_cen: float, dst_len: float, dst_cen: float,
                   dim: int, n_nodes: int = 4096) -> np.ndarray:
    """Overlap matrix <chi_l(dst), chi_j(src)>, rows l, columns j."""
    lo = max(src_cen - 0.5 * src_len, dst_cen - 0.5 * dst_len)
    hi = min(src_cen + 0.5 * src_len, dst_cen + 0.5 * dst_len)
    if hi <= lo:
        return np.zeros((dim, dim))
    x, w = gauss_rule(n_nodes, lo, hi)
    src = box_modes(dim, x, src_len, src_cen)
    dst = box_modes(dim, x, dst_len, dst_cen)
    return (dst * w) @ src.T


# --------------------------------------------------------------------------
# time evolution references

def _stiffness(dim: int) -> np.ndarray:
    j = np.arange(1, dim + 1, dtype=float)
    return (j * np.pi) ** 2


def _coupling(lam: float, delta: float, dim: int) -> np.ndarray:
    """Interaction matrix rebuilt from the quadrature oracles."""
    return lam * quad_dilation(dim) + delta * quad_momentum(dim)


def rk_auxiliary(lam: float, delta: float, ell0: float, amplitudes, durations,
                 psi0: np.ndarray) -> np.ndarray:
    """Integrate the step-amplitude model with DOP853, piece by piece."""
    psi = np.asarray(psi0, dtype=complex)
    dim = psi.size
    stiff = np.diag(_stiffness(dim)) / ell0 ** 2
    coup = _coupling(lam, delta, dim)
    for amp, dt in zip(amplitudes, durations):
        ham = stiff - (amp / ell0) * coup

        def rhs(t, y, h=ham):
            return -1j * (h @ y)

        sol = solve_ivp(rhs, (0.0, dt), psi, method="DOP853", rtol=RTOL, atol=ATOL)
        psi = sol.y[:, -1]
    return psi


def rk_transformed(lam: float, delta: float, ell0: float, pieces,
                   psi0: np.ndarray) -> np.ndarray:
    """Integrate the profile-driven model; ``pieces`` = (duration, offset, slope)."""
    psi = np.asarray(psi0, dtype=complex)
    dim = psi.size
    stiff = _stiffness(dim)
    coup = _coupling(lam, delta, dim)
    for dt, off, slope in pieces:
        def rhs(t, y, off=off, slope=slope):
            ell = ell0 + lam * (off + slope * t)
            ham = np.diag(stiff / ell ** 2) - (slope / ell) * coup
            return -1j * (ham @ y)

        sol = solve_ivp(rhs, (0.0, dt), psi, method="DOP853", rtol=RTOL, atol=ATOL)
        psi = sol.y[:, -1]
    return psi


# --------------------------------------------------------------------------
# integer search and curvature references

def brute_quadruples(max_index: int) -> list[tuple[int, int, int, int]]:
    """All (s, s+1, t1, t2) with (s+1)^2 - s^2 = t2^2 - t1^2, exhaustively."""
    out = []
    for s in range(1, max_index):
        gap = 2 * s + 1
        for t1 in range(1, max_index):
            for t2 in range(t1 + 1, max_index + 1):
                if t2 * t2 - t1 * t1 == gap and (t1, t2) != (s, s + 1):
                    out.append((s, s + 1, t1, t2))
    out.sort()
    return out


def fd_curvature(lam: float, delta: float, j: int, dim: int = 64,
                 h: float = 1e-2) -> float:
    """eta^2 coefficient of E_j(eta) by central finite differences.

    Valid for small h and low j, where sorted eigenvalues follow the analytic
    curves (the unperturbed gaps dwarf the perturbation).
    """
    stiff = np.diag(_stiffness(dim))
    coup = _coupling(lam, delta, dim)

    def level(eta: float) -> float:
        return float(np.linalg.eigvalsh(stiff + eta * coup)[j - 1])

    return (level(h) - 2.0 * level(0.0) + level(-h)) / (2.0 * h * h)
