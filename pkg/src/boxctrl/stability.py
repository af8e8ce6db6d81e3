"""Constants and checks for the propagator-stability machinery.

The moving-wall generator is a two-term family H(t) = f0(t) * stiffness +
f1(t) * coupling with f0 bounded away from zero. Relative form bounds on the
coupling give a chain of explicit constants — M, mu, b(eps), m, K, c and
finally L — under which the difference of two members' propagators is
controlled by the L1 distance of their coefficient functions. This module
computes those constants from the proof-side formulas (they are loose by
design) and evaluates both sides of the bound segment by segment.

Coefficient bookkeeping is exact: on every smooth piece the profile is
linear, so f0 = 1/ell^2 and f1 = -slope/ell are monotone with closed-form
antiderivatives, and all L1 norms reduce to endpoint evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import WallCollision
from .operators import (
    MotionParams,
    _check_dim,
    dirichlet_eigenvalues,
    interaction_matrix,
)
from .propagation import (
    PiecewiseControl,
    minus_norm,
    plus_norm,
    propagate_auxiliary,
    propagate_transformed,
)
from .control import lift_control

__all__ = [
    "StabilityConstants",
    "CoefficientFamily",
    "StabilityCheck",
    "ConvergenceStudy",
    "form_bound_constants",
    "interaction_form_bound",
    "compute_constants",
    "verify_stability_bound",
    "lifting_convergence_study",
]

#: reference weight of the stiffness term in the abstract machinery
NU = 1.0


def form_bound_constants(epsilon: float) -> dict[str, tuple[float, float]]:
    """Relative form bounds (a, b) of the two coupling blocks vs the stiffness.

    For any eps > 0 and any state psi in the form domain,

        |<psi, p psi>|      <= eps <psi, stiffness psi> + 1/(4 eps) ||psi||^2
        |<psi, x.p psi>|    <= eps <psi, stiffness psi> + 1/(16 eps) ||psi||^2

    The momentum bound is Young's inequality on |2 Im<psi', psi>|; the
    dilation bound repeats it with the extra factor sup|x| = 1/2 on the
    reference box absorbed quadratically (hence the 1/16).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return {
        "momentum": (epsilon, 1.0 / (4.0 * epsilon)),
        "dilation": (epsilon, 1.0 / (16.0 * epsilon)),
    }


def interaction_form_bound(params: MotionParams, epsilon: float) -> float:
    """Offset b(eps) with |<psi, V psi>| <= eps <psi, stiffness psi> + b ||psi||^2.

    Splitting the eps budget optimally between the two blocks of
    V = lam * (x.p) + delta * p (Cauchy-Schwarz on the two Young terms) gives
    b(eps) = (|lam|/4 + |delta|/2)^2 / eps, with b = 0 for a vanishing
    interaction.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    amplitude = abs(params.lam) / 4.0 + abs(params.delta) / 2.0
    return amplitude ** 2 / epsilon


@dataclass(frozen=True)
class StabilityConstants:
    """The proof-side constant chain, kept together with its epsilon."""

    M: float
    mu: float
    b_eps: float
    m: float
    K: float
    c: float
    L: float
    epsilon: float
    deriv_sup: float

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("leading coefficient bound mu must be positive")
        if self.c < 1.0:
            raise ValueError("norm-equivalence constant c must be >= 1")
        if self.K < 1.0:
            raise ValueError("form bound K must be >= 1")
        if self.L < self.c ** 8 * (1.0 - 1e-12):
            raise ValueError("L must dominate c^8")


@dataclass(frozen=True)
class _Piece:
    """One smooth piece of one family member's coefficient pair.

    The profile on [t0, t1] is f(t) = f_off + f_slope*(t - t0) unless the
    piece is frozen (auxiliary member: the profile stays at f_off while the
    slope still drives the coupling term). Coefficients:

        f0(t) = 1 / ell(t)^2,   f1(t) = -f_slope / ell(t),
        ell(t) = ell0 + lam * profile(t)

    Both are monotone on the piece, so ranges and derivative L1 norms come
    from the endpoints.
    """

    t0: float
    t1: float
    f_off: float
    f_slope: float
    frozen: bool
    ell0: float
    lam: float

    def _ell(self, t):
        prof = self.f_off if self.frozen else self.f_off + self.f_slope * (np.asarray(t) - self.t0)
        return self.ell0 + self.lam * prof

    def ell_endpoints(self) -> tuple[float, float]:
        return float(self._ell(self.t0)), float(self._ell(self.t1))

    def check_open(self) -> None:
        if min(self.ell_endpoints()) <= 0.0:
            raise WallCollision(f"box closes on piece [{self.t0}, {self.t1}]")

    def f0(self, t):
        return 1.0 / self._ell(t) ** 2

    def f1(self, t):
        ell = self._ell(t)
        return -self.f_slope / ell

    def ranges(self) -> tuple[tuple[float, float], tuple[float, float]]:
        ends = (self.t0, self.t1)
        r0 = sorted(float(self.f0(t)) for t in ends)
        r1 = sorted(float(self.f1(t)) for t in ends)
        return (r0[0], r0[1]), (r1[0], r1[1])

    def deriv_l1(self) -> tuple[float, float]:
        """Exact L1 norms of (df0/dt, df1/dt) on the piece (monotonicity)."""
        if self.frozen:
            return 0.0, 0.0
        d0 = abs(float(self.f0(self.t1)) - float(self.f0(self.t0)))
        d1 = abs(float(self.f1(self.t1)) - float(self.f1(self.t0)))
        return d0, d1

    def antiderivatives(self, t: float) -> tuple[float, float]:
        """Antiderivative values (F0, F1) at time t within the piece."""
        ell = float(self._ell(t))
        rate = 0.0 if self.frozen else self.lam * self.f_slope  # d ell / dt
        if rate == 0.0:
            return t / ell ** 2, -self.f_slope * t / ell
        return -1.0 / (rate * ell), -self.f_slope * np.log(ell) / rate


def _pieces_from_step_control(params: MotionParams, v: PiecewiseControl) -> tuple[_Piece, ...]:
    out = []
    for t0, t1, amp in v.pieces():
        out.append(_Piece(t0, t1, 0.0, float(amp), True, params.ell0, params.lam))
    return tuple(out)


def _pieces_from_profile(params: MotionParams, f: PiecewiseControl) -> tuple[_Piece, ...]:
    out = []
    for t0, t1, (off, slope) in f.pieces():
        out.append(_Piece(t0, t1, float(off), float(slope), False, params.ell0, params.lam))
    return tuple(out)


class CoefficientFamily:
    """Coefficient functions of a family of generators sharing one drive.

    Member 0 is the auxiliary system (profile frozen at zero, step amplitude
    driving the coupling); member n >= 1 is the n-fold lifted sawtooth
    profile. All members share the time horizon of the drive.
    """

    def __init__(self, params: MotionParams, v: PiecewiseControl,
                 refinements: Iterable[int]):
        if v.kind != "constant":
            raise ValueError("the family is generated by a step (constant-kind) drive")
        self.params = params
        self.drive = v
        self.members: dict[int, tuple[_Piece, ...]] = {}
        for n in refinements:
            if n < 0:
                raise ValueError("refinement labels must be >= 0 (0 = auxiliary)")
            if n in self.members:
                continue
            if n == 0:
                pieces = _pieces_from_step_control(params, v)
            else:
                pieces = _pieces_from_profile(params, lift_control(v, n))
            for p in pieces:
                p.check_open()
            self.members[n] = pieces

    def labels(self) -> tuple[int, ...]:
        return tuple(self.members)

    def breakpoints(self, label: int) -> np.ndarray:
        ps = self.members[label]
        return np.array([p.t0 for p in ps] + [ps[-1].t1])

    def coefficient_values(self, label: int, t: float) -> tuple[float, float]:
        """(f0, f1) of one member at time t (right-continuous at breakpoints)."""
        ps = self.members[label]
        for p in ps:
            if p.t0 <= t < p.t1:
                return float(p.f0(t)), float(p.f1(t))
        last = ps[-1]
        return float(last.f0(t)), float(last.f1(t))

    def assemble(self, label: int, t: float, dim: int) -> np.ndarray:
        """Generator matrix f0(t) * stiffness + f1(t) * coupling at time t."""
        dim = _check_dim(dim)
        f0, f1 = self.coefficient_values(label, t)
        return f0 * np.diag(dirichlet_eigenvalues(dim)) \
            + f1 * interaction_matrix(self.params, dim).matrix

    # ---- family-wide extrema -------------------------------------------

    def sup_abs(self) -> float:
        top = 0.0
        for ps in self.members.values():
            for p in ps:
                (l0, h0), (l1, h1) = p.ranges()
                top = max(top, abs(l0), abs(h0), abs(l1), abs(h1))
        return top

    def inf_leading(self) -> float:
        bot = np.inf
        for ps in self.members.values():
            for p in ps:
                (l0, _), _ = p.ranges()
                bot = min(bot, l0)
        return float(bot)

    def deriv_l1_sup(self) -> float:
        """Largest per-piece L1 norm of a coefficient derivative in the family."""
        top = 0.0
        for ps in self.members.values():
            for p in ps:
                d0, d1 = p.deriv_l1()
                top = max(top, d0, d1)
        return top

    # ---- pairwise coefficient distance ---------------------------------

    def _cover(self, label: int, lo: float, hi: float) -> Iterable[tuple[float, float, _Piece]]:
        for p in self.members[label]:
            a, b = max(p.t0, lo), min(p.t1, hi)
            if b - a > 1e-15 * max(1.0, hi):
                yield a, b, p

    def gap_l1(self, label_a: int, label_b: int, lo: float, hi: float) -> float:
        """Exact sum over i of integral_{lo}^{hi} |f_i^a - f_i^b| dt.

        Within each common smooth sub-piece the two integrand differences
        change sign at most once each (the underlying lengths are linear in
        t), so splitting at those roots makes every contribution the absolute
        increment of closed-form antiderivatives.
        """
        bounds = sorted(
            {lo, hi}
            | {t for t in self.breakpoints(label_a) if lo < t < hi}
            | {t for t in self.breakpoints(label_b) if lo < t < hi}
        )
        total = 0.0
        for a, b in zip(bounds[:-1], bounds[1:]):
            pa = next(p for x, y, p in self._cover(label_a, a, b))
            pb = next(p for x, y, p in self._cover(label_b, a, b))
            cuts = {a, b}
            for root in _difference_roots(pa, pb, a, b):
                cuts.add(root)
            pts = sorted(cuts)
            for u, w in zip(pts[:-1], pts[1:]):
                fa0u, fa1u = pa.antiderivatives(u)
                fa0w, fa1w = pa.antiderivatives(w)
                fb0u, fb1u = pb.antiderivatives(u)
                fb0w, fb1w = pb.antiderivatives(w)
                total += abs((fa0w - fa0u) - (fb0w - fb0u))
                total += abs((fa1w - fa1u) - (fb1w - fb1u))
        return total


def _difference_roots(pa: _Piece, pb: _Piece, lo: float, hi: float) -> list[float]:
    """Interior sign-change points of f0^a - f0^b and f1^a - f1^b on (lo, hi).

    f0^a - f0^b vanishes where the lengths agree; f1^a - f1^b where
    sa * ell_b - sb * ell_a does. Both conditions are linear in t.
    """
    roots = []
    # ell(t) = alpha + beta * t on the piece
    def linear(p: _Piece) -> tuple[float, float]:
        beta = 0.0 if p.frozen else p.lam * p.f_slope
        alpha = float(p._ell(p.t0)) - beta * p.t0
        return alpha, beta

    aa, ab = linear(pa)
    ba, bb = linear(pb)
    # lengths equal
    if ab != bb:
        t = (ba - aa) / (ab - bb)
        if lo < t < hi:
            roots.append(t)
    # sa * ell_b(t) - sb * ell_a(t) = 0
    sa, sb = pa.f_slope, pb.f_slope
    num0 = sa * ba - sb * aa
    num1 = sa * bb - sb * ab
    if num1 != 0.0:
        t = -num0 / num1
        if lo < t < hi:
            roots.append(t)
    return roots


def compute_constants(family: CoefficientFamily, epsilon: float = 0.5) -> StabilityConstants:
    """Evaluate the constant chain of the propagator-comparison estimate.

    With M the sup of |coefficients|, mu the inf of the leading one, and the
    interaction's form bound b(.), the chain is

        b_eps = b(eps * mu / (nu * M)),  m = M * b_eps,
        K = max(1, eps, b(eps)),
        c = max(M + mu*eps, 1 + 2m, 1/(mu*(1-eps)), 1),
        L = c^8 * exp(2 c^2 K (nu + 1) * D),

    where D is the largest per-piece L1 norm of a coefficient derivative.
    Constant-coefficient families get D = 0 and hence L = c^8 exactly.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    big_m = family.sup_abs()
    mu = family.inf_leading()
    if mu <= 0.0:
        raise ValueError("leading coefficient must stay positive (box open)")
    if big_m <= 0.0:
        raise ValueError("degenerate family: all coefficients vanish")
    b_eps = interaction_form_bound(family.params, epsilon * mu / (NU * big_m))
    m = big_m * b_eps
    big_k = max(1.0, epsilon, interaction_form_bound(family.params, epsilon))
    c = max(big_m + mu * epsilon, 1.0 + 2.0 * m, 1.0 / (mu * (1.0 - epsilon)), 1.0)
    d_sup = family.deriv_l1_sup()
    big_l = c ** 8 * float(np.exp(2.0 * c ** 2 * big_k * (NU + 1.0) * d_sup))
    return StabilityConstants(M=big_m, mu=mu, b_eps=b_eps, m=m, K=big_k, c=c,
                              L=big_l, epsilon=epsilon, deriv_sup=d_sup)


@dataclass(frozen=True)
class StabilityCheck:
    """Per-segment evaluation of the stability inequality."""

    segment_starts: np.ndarray
    segment_ends: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    constants: StabilityConstants

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs))

    def __iter__(self):
        # allows: lhs, rhs = verify_stability_bound(...)
        yield self.lhs
        yield self.rhs


def _member_propagator(params: MotionParams, v: PiecewiseControl, label: int,
                       span: tuple[float, float], dim: int,
                       step: float | None) -> np.ndarray:
    if label == 0:
        return propagate_auxiliary(params, v, t_span=span, dim=dim).matrix
    return propagate_transformed(params, lift_control(v, label), t_span=span,
                                 step=step, dim=dim).matrix


def verify_stability_bound(params: MotionParams, v: PiecewiseControl, n: int,
                           m_refine: int, psi, *, dim: int | None = None,
                           epsilon: float = 0.5,
                           step: float | None = None) -> StabilityCheck:
    """Evaluate both sides of the stability inequality segment by segment.

    Members ``n`` and ``m_refine`` label lifting refinements (0 means the
    auxiliary system). On each segment of the two members' common breakpoint
    refinement the left side is the minus-norm of the propagator difference
    applied to ``psi`` and the right side is L * plus_norm(psi) times the
    exact L1 distance of the coefficient pairs. Equal labels give the trivial
    all-zero check.
    """
    coeffs = np.asarray(getattr(psi, "coeffs", psi), dtype=complex)
    if dim is None:
        dim = coeffs.size
    dim = _check_dim(dim)
    if coeffs.size != dim:
        raise ValueError("state size does not match the requested basis size")

    if n == m_refine:
        span = np.array([v.t_start]), np.array([v.t_end])
        zero = np.zeros(1)
        family = CoefficientFamily(params, v, (n,))
        constants = compute_constants(family, epsilon)
        return StabilityCheck(span[0], span[1], zero, zero.copy(), constants)

    family = CoefficientFamily(params, v, (n, m_refine))
    constants = compute_constants(family, epsilon)
    bounds = np.array(sorted(
        set(family.breakpoints(n)) | set(family.breakpoints(m_refine))
    ))
    p_plus = plus_norm(coeffs)

    lhs = np.empty(bounds.size - 1)
    rhs = np.empty(bounds.size - 1)
    for k, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        ua = _member_propagator(params, v, n, (float(a), float(b)), dim, step)
        ub = _member_propagator(params, v, m_refine, (float(a), float(b)), dim, step)
        lhs[k] = minus_norm((ua - ub) @ coeffs)
        rhs[k] = constants.L * p_plus * family.gap_l1(n, m_refine, float(a), float(b))
    return StabilityCheck(bounds[:-1], bounds[1:], lhs, rhs, constants)


@dataclass(frozen=True)
class ConvergenceStudy:
    """Minus-norm lifting errors against the auxiliary evolution."""

    refinements: tuple[int, ...]
    errors: np.ndarray

    @property
    def slope(self) -> float | None:
        """Fitted log-log slope; None when an error vanishes (exact match)."""
        if np.any(self.errors <= 0.0):
            return None
        fit = np.polyfit(np.log(np.asarray(self.refinements, dtype=float)),
                         np.log(self.errors), 1)
        return float(fit[0])

    def rows(self) -> list[tuple[int, float]]:
        return [(n, float(e)) for n, e in zip(self.refinements, self.errors)]


def lifting_convergence_study(params: MotionParams, v: PiecewiseControl, psi0,
                              n_list: Sequence[int], *, dim: int | None = None,
                              step: float | None = None) -> ConvergenceStudy:
    """Tabulate minus-norm lifting errors for increasing refinements."""
    ns = tuple(int(n) for n in n_list)
    if not ns or any(b <= a for a, b in zip(ns[:-1], ns[1:])):
        raise ValueError("n_list must be non-empty and strictly increasing")
    coeffs = np.asarray(getattr(psi0, "coeffs", psi0), dtype=complex)
    if dim is None:
        dim = coeffs.size
    ref = propagate_auxiliary(params, v, dim=dim).apply(coeffs)
    errors = np.empty(len(ns))
    for k, n in enumerate(ns):
        lifted = propagate_transformed(params, lift_control(v, n), step=step,
                                       dim=dim).apply(coeffs)
        errors[k] = minus_norm(lifted - ref)
    return ConvergenceStudy(ns, errors)
