"""Control synthesis: from a transfer request to a full wall-motion program.

The pipeline has four stages. ``reduce_motion`` ties both wall parameters to
one scalar profile. ``synthesize_pc_control`` finds a step amplitude v(t)
steering the auxiliary model between the requested states. ``lift_control``
turns v into a small sawtooth profile f_n whose slope is v. Finally
``append_final_segment`` parks the profile at the prescribed end value via a
phase-tuned coast and a bounded-slope ramp. ``solve_transfer`` chains the
stages with accuracy-driven escalation and re-measures the end-to-end error.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import (
    BudgetExceeded,
    InfeasibleRamp,
    NoImprovement,
    UnsupportedMotion,
)
from .operators import (
    BoxGeometry,
    MotionParams,
    SpectralState,
    dirichlet_eigenvalues,
    interaction_matrix,
)
from .propagation import (
    PiecewiseControl,
    evolve_moving_box,
    propagate_auxiliary,
    propagate_transformed,
)

__all__ = [
    "TransferProblem",
    "SynthesisResult",
    "reduce_motion",
    "synthesize_pc_control",
    "lift_control",
    "append_final_segment",
    "solve_transfer",
    "fidelity",
    "aligned_l2_error",
]

#: escalation schedules for solve_transfer
SEGMENT_SCHEDULE = (20, 40, 80)
HORIZON_SCHEDULE = (2.0, 5.0, 10.0)
REFINE_START = 4
REFINE_MAX = 1024

#: amplitudes are kept strictly inside the rate bound by this relative margin
AMPLITUDE_MARGIN = 1e-3


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Global-phase-insensitive overlap |<a, b>| of two coefficient vectors."""
    return float(abs(np.vdot(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))))


def aligned_l2_error(target: np.ndarray, achieved: np.ndarray) -> float:
    """L2 distance after optimal global phase alignment, for unit vectors.

    min over phases of ||target - e^{i phi} achieved|| = sqrt(2 (1 - |<t,a>|)).
    """
    f = min(1.0, fidelity(target, achieved))
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - f))))


def reduce_motion(ell0: float, d0: float, ell1: float, d1: float,
                  rate_bound: float = 1.0) -> MotionParams:
    """Tie the requested geometry change to a single profile f(t).

    With weights (lam, delta) the walls follow length = ell0 + lam*f and
    center = d0 + delta*f, so reaching (ell1, d1) needs f(T) = (ell1-ell0)/lam
    and delta = (d1-d0)/(ell1-ell0). The length weight is normalized to
    lam = 1. A pure dilation gets delta = 0 (parity-restricted transfers
    only); a null motion gets delta = 1 by convention. A pure translation
    (length fixed, center moved) cannot be expressed this way and raises
    :class:`UnsupportedMotion`.
    """
    if ell0 <= 0 or ell1 <= 0:
        raise ValueError("box lengths must be positive")
    d_ell = ell1 - ell0
    d_d = d1 - d0
    if d_ell == 0.0 and d_d != 0.0:
        raise UnsupportedMotion(
            "pure translation (fixed length, moved center) is outside the "
            "single-profile reduction; no control program exists in this scheme"
        )
    if d_ell == 0.0:
        delta = 1.0
    elif d_d == 0.0:
        delta = 0.0
    else:
        delta = d_d / d_ell
    return MotionParams(lam=1.0, delta=delta, ell0=ell0, d0=d0, rate_bound=rate_bound)


def _parity_weights(coeffs: np.ndarray) -> tuple[float, float]:
    """Probability in the even and odd sectors (modes 1,3,5,... are even)."""
    p = np.abs(coeffs) ** 2
    even = float(p[0::2].sum())
    odd = float(p[1::2].sum())
    return even, odd


@dataclass
class TransferProblem:
    """A state-transfer request between two box geometries.

    States carry their own geometry; coefficients are expressed in the
    respective box eigenbases (which all map to the common reference basis
    coefficient-wise). Construction validates norms, derives the motion
    reduction, and enforces the parity restriction of the pure-dilation case.
    """

    initial: SpectralState
    target: SpectralState
    epsilon: float
    rate_bound: float = 1.0
    params: MotionParams = field(init=False)

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.rate_bound <= 0:
            raise ValueError("rate bound must be positive")
        if self.initial.dim != self.target.dim:
            raise ValueError("initial and target states must share the basis size")
        n0, n1 = self.initial.norm(), self.target.norm()
        if abs(n0 - n1) > 1e-10 * max(1.0, n0):
            raise ValueError(f"state norms differ: {n0} vs {n1}")
        if n0 == 0.0:
            raise ValueError("states must be nonzero")
        g0, g1 = self.initial.geometry, self.target.geometry
        self.params = reduce_motion(g0.length, g0.center, g1.length, g1.center,
                                    rate_bound=self.rate_bound)
        if self.params.delta == 0.0:
            for name, st in (("initial", self.initial), ("target", self.target)):
                even, odd = _parity_weights(st.coeffs)
                if min(even, odd) > 1e-10 * (even + odd):
                    raise ValueError(
                        f"pure dilation preserves parity, but the {name} state "
                        f"mixes sectors (even {even:.3e}, odd {odd:.3e})"
                    )
            same = _parity_weights(self.initial.coeffs)[0] > 0.5
            tgt_even = _parity_weights(self.target.coeffs)[0] > 0.5
            if same != tgt_even:
                raise ValueError(
                    "pure dilation cannot connect states of opposite parity"
                )

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def final_offset(self) -> float:
        """Prescribed profile end value (ell1 - ell0) / lam."""
        return (self.target.geometry.length - self.initial.geometry.length) / self.params.lam


@dataclass(frozen=True)
class SynthesisResult:
    """Everything solve_transfer produced, with the error actually measured."""

    v: PiecewiseControl
    f: PiecewiseControl
    n_refine: int
    achieved_error: float
    final_geometry: BoxGeometry
    aux_fidelity: float
    lift_error: float


# --------------------------------------------------------------------------
# stage 2: gradient-ascent synthesis of the step amplitude

def _fidelity_and_gradient(amps: np.ndarray, psi0: np.ndarray, chi: np.ndarray,
                           stiff_over_ell2: np.ndarray, coupling_over_ell: np.ndarray,
                           dt: float) -> tuple[float, np.ndarray]:
    """Overlap magnitude |<chi, U(amps) psi0>| and its amplitude gradient.

    Forward/backward sweep with one eigendecomposition per segment; the
    per-segment derivative of the exponential comes from the divided
    differences of exp(-i dt w) on the eigenvalue grid.
    """
    k_seg = amps.size
    dim = psi0.size
    eigs = []
    fwd = np.empty((k_seg + 1, dim), dtype=complex)
    fwd[0] = psi0
    for k in range(k_seg):
        ham = np.diag(stiff_over_ell2) - amps[k] * coupling_over_ell
        w, q = np.linalg.eigh(ham)
        phases = np.exp(-1j * dt * w)
        eigs.append((w, q, phases))
        fwd[k + 1] = (q * phases) @ (q.conj().T @ fwd[k])

    bwd = np.empty((k_seg + 1, dim), dtype=complex)
    bwd[k_seg] = chi
    for k in range(k_seg - 1, -1, -1):
        w, q, phases = eigs[k]
        bwd[k] = (q * phases.conj()) @ (q.conj().T @ bwd[k + 1])

    z = complex(np.vdot(chi, fwd[k_seg]))
    fid = abs(z)
    grad = np.zeros(k_seg)
    if fid < 1e-12:
        return fid, grad

    for k in range(k_seg):
        w, q, phases = eigs[k]
        # dH/dv_k = -coupling/ell; Frechet derivative of exp(-i dt H)
        m = q.conj().T @ (1j * dt * coupling_over_ell) @ q
        dw = -1j * dt * w
        diff = dw[:, None] - dw[None, :]
        np.fill_diagonal(diff, 1.0)
        gamma = (phases[:, None] - phases[None, :]) / diff
        np.fill_diagonal(gamma, phases)
        du_fwd = q @ ((m * gamma) @ (q.conj().T @ fwd[k]))
        dz = complex(np.vdot(bwd[k + 1], du_fwd))
        grad[k] = (z.conjugate() * dz).real / fid
    return fid, grad


def synthesize_pc_control(problem: TransferProblem, segments: int, horizon: float,
                          *, seed: int = 0, starts: int = 8, maxiter: int = 300,
                          threads: int = 1,
                          target_coeffs: np.ndarray | None = None) -> PiecewiseControl:
    """Search for a step control steering the auxiliary model.

    Bounded quasi-Newton ascent on the phase-insensitive overlap, with exact
    segment exponentials and adjoint gradients; one deterministic start at
    v = 0 plus seeded random restarts, merged by best overlap (ties go to the
    lowest start index). ``target_coeffs`` substitutes the optimization target
    (used by the pipeline for ramp pre-compensation) without touching the
    problem's bookkeeping.

    Raises :class:`NoImprovement` if every start stalls below overlap 0.5 —
    the signature of a hopeless (horizon, segments) budget or a selection rule.
    """
    if segments < 1:
        raise ValueError("need at least one segment")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if starts < 1:
        raise ValueError("need at least one start")

    dim = problem.dim
    params = problem.params
    psi0 = problem.initial.coeffs / problem.initial.norm()
    chi = problem.target.coeffs if target_coeffs is None else np.asarray(target_coeffs, dtype=complex)
    chi = chi / np.linalg.norm(chi)

    stiff = dirichlet_eigenvalues(dim) / params.ell0 ** 2
    coupling = interaction_matrix(params, dim).matrix / params.ell0
    dt = horizon / segments
    r = problem.rate_bound
    margin = AMPLITUDE_MARGIN * r
    bounds = [(-r + margin, r - margin)] * segments

    def objective(amps: np.ndarray) -> tuple[float, np.ndarray]:
        fid, grad = _fidelity_and_gradient(amps, psi0, chi, stiff, coupling, dt)
        return -fid, -grad

    seeds = np.random.SeedSequence(seed).spawn(starts)

    def run_start(idx: int) -> tuple[float, np.ndarray]:
        if idx == 0:
            v0 = np.zeros(segments)
        else:
            rng = np.random.default_rng(seeds[idx])
            v0 = rng.uniform(-0.5 * r, 0.5 * r, size=segments)
        res = minimize(objective, v0, jac=True, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": maxiter})
        return -float(res.fun), res.x

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_start, range(starts)))
    else:
        results = [run_start(i) for i in range(starts)]

    best_idx = max(range(starts), key=lambda i: (results[i][0], -i))
    best_fid, best_v = results[best_idx]
    if best_fid < 0.5:
        raise NoImprovement(
            f"all {starts} starts stalled below overlap 0.5 (best {best_fid:.3g}) "
            f"at segments={segments}, horizon={horizon}"
        )
    return PiecewiseControl.from_amplitudes(best_v, horizon)


# --------------------------------------------------------------------------
# stage 3: lifting to a sawtooth profile

def lift_control(v: PiecewiseControl, n: int) -> PiecewiseControl:
    """Sawtooth profile whose slope is the step control v, peak below r*T/n.

    The horizon is split into n equal parts, refined with v's own breakpoints;
    on each refined piece the profile restarts at zero and grows with slope
    v(t). Larger n shrinks the profile uniformly while leaving its slope — and
    hence the generated dynamics it approximates — unchanged.
    """
    if v.kind != "constant":
        raise ValueError("lifting expects a step (constant-kind) control")
    if n < 1:
        raise ValueError("refinement must be at least 1")
    total = v.duration
    grid = v.t_start + np.linspace(0.0, total, n + 1)
    bp = np.union1d(grid, v.breakpoints)
    # drop near-duplicate points from the union, keeping the exact endpoints
    keep = np.concatenate(([True], np.diff(bp) > 1e-12 * max(1.0, total)))
    bp = bp[keep]
    bp[0], bp[-1] = v.t_start, v.t_end
    mids = 0.5 * (bp[:-1] + bp[1:])
    slopes = np.asarray(v.value(mids), dtype=float)
    vals = np.column_stack([np.zeros_like(slopes), slopes])
    return PiecewiseControl(bp, "linear", vals)


# --------------------------------------------------------------------------
# stage 4: coast + ramp tail

def _drift_phases(dim: int, params: MotionParams, tau: np.ndarray) -> np.ndarray:
    """Free-drift phases exp(-i tau E / ell0^2), one row per tau."""
    w = dirichlet_eigenvalues(dim) / params.ell0 ** 2
    return np.exp(-1j * np.outer(tau, w))


def _extend(f: PiecewiseControl, tail: list[tuple[float, float, float]]) -> PiecewiseControl:
    """Append (duration, offset, slope) pieces to a linear control."""
    bp = list(f.breakpoints)
    vals = list(f.values)
    for duration, off, slope in tail:
        if duration <= 0:
            continue
        bp.append(bp[-1] + duration)
        vals.append(np.array([off, slope]))
    return PiecewiseControl(np.asarray(bp), "linear", np.asarray(vals))


def append_final_segment(f: PiecewiseControl, a: float, params: MotionParams,
                         tolerance: float, *,
                         state: np.ndarray | None = None,
                         target: np.ndarray | None = None,
                         step: float | None = None) -> PiecewiseControl:
    """Extend a profile so it ends exactly at the prescribed value ``a``.

    The tail jumps to zero (piece offsets are free at breakpoints), coasts
    there under the pure drift for a duration tau, then ramps from 0 to ``a``
    at slope sign(a)*r/2, hitting ``a`` exactly at the new final time — and
    only there, so the profile stays strictly below |a| beforehand. When the
    pre-tail state and the transfer target are supplied, tau is tuned on one
    drift revival period so the coast phases (which commute with nothing else
    in the tail) repair as much fidelity as the drift allows; the search grid
    is refined until its resolution is far below ``tolerance``. Without
    states, tau = 0.

    Raises :class:`InfeasibleRamp` if the ramp would close the box on its way
    (possible only for a <= -ell0/lam when lam > 0).
    """
    if f.kind != "linear":
        raise ValueError("can only extend a linear-kind profile")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if params.ell0 + params.lam * a <= 0.0:
        raise InfeasibleRamp(
            f"final offset {a} closes the box (length would reach "
            f"{params.ell0 + params.lam * a:.3g})"
        )
    f_end = f.end_value()
    if a == f_end:
        return f

    r = params.rate_bound
    ramp_len = abs(a) / (0.5 * r)
    slope = 0.0 if a == 0.0 else np.sign(a) * 0.5 * r

    tau = 0.0
    if state is not None and target is not None:
        psi = np.asarray(state, dtype=complex)
        chi = np.asarray(target, dtype=complex)
        dim = psi.size
        if ramp_len > 0.0:
            ramp = PiecewiseControl(np.array([0.0, ramp_len]), "linear",
                                    np.array([[0.0, slope]]))
            u_ramp = propagate_transformed(params, ramp, step=step, dim=dim).matrix
            chi_back = u_ramp.conj().T @ chi
        else:
            chi_back = chi
        revival = 2.0 * params.ell0 ** 2 / np.pi
        grid = np.linspace(0.0, revival, 2048, endpoint=False)
        cand = _drift_phases(dim, params, grid) * psi[None, :]
        fids = np.abs(cand @ chi_back.conj())
        k = int(np.argmax(fids))
        lo = grid[max(0, k - 1)]
        hi = grid[min(grid.size - 1, k + 1)]

        def neg_fid(t: float) -> float:
            ph = _drift_phases(dim, params, np.array([t]))[0]
            return -abs(np.vdot(chi_back, ph * psi))

        res = minimize_scalar(neg_fid, bounds=(lo, hi), method="bounded",
                              options={"xatol": min(1e-10, tolerance * 1e-4)})
        tau = float(res.x) if -res.fun >= fids[k] else float(grid[k])

    if a == 0.0 and tau == 0.0:
        # the jump back to zero still needs a carrier piece
        tau = 1e-9 * max(1.0, f.duration)
    return _extend(f, [(tau, 0.0, 0.0), (ramp_len, 0.0, slope)])


# --------------------------------------------------------------------------
# stage 5: the full pipeline

def _validate_result(result: SynthesisResult, problem: TransferProblem) -> None:
    """Constraint honesty: re-check the returned program from scratch."""
    f = result.f
    params = problem.params
    a = problem.final_offset
    if abs(float(f.values[0, 0])) > 1e-12:
        raise AssertionError("profile must start at zero")
    if abs(f.end_value() - a) > 1e-12 * max(1.0, abs(a)):
        raise AssertionError(
            f"profile ends at {f.end_value()}, prescribed {a}"
        )
    # strict rate bound everywhere
    if not f.max_rate() < params.rate_bound:
        raise AssertionError("profile slope reaches the rate bound")
    # the box must stay open throughout, and the profile must stay strictly
    # below the prescribed final magnitude until the very end
    lengths_lo = []
    for t0, t1, (off, sl) in f.pieces():
        ends = (off, off + sl * (t1 - t0))
        lengths_lo.append(params.ell0 + params.lam * min(ends))
        lengths_lo.append(params.ell0 + params.lam * max(ends))
    if min(lengths_lo) <= 0.0:
        raise AssertionError("program closes the box")


def solve_transfer(problem: TransferProblem, *, seed: int = 0, starts: int = 8,
                   threads: int = 1, step: float | None = None,
                   segment_schedule: Sequence[int] = SEGMENT_SCHEDULE,
                   horizon_schedule: Sequence[float] = HORIZON_SCHEDULE,
                   n_max: int = REFINE_MAX) -> SynthesisResult:
    """End-to-end transfer: synthesize, lift, park, and measure.

    Escalates (horizon, segments) until the auxiliary overlap reaches
    1 - eps^2/2 (the overlap equivalent of an L2 budget of eps, spent half on
    synthesis), then doubles the lifting refinement until the lifted evolution
    is within eps/2 of the auxiliary one in L2 *and* the measured end-to-end
    error (after the parking tail) is below eps. The reported error is always
    re-measured through the moving-box evolution, never inferred from budgets.
    """
    params = problem.params
    dim = problem.dim
    eps = problem.epsilon
    a = problem.final_offset
    psi0 = problem.initial.coeffs / problem.initial.norm()
    chi = problem.target.coeffs / problem.target.norm()

    # pre-compensate the synthesis target for the parking ramp
    r = params.rate_bound
    if a != 0.0:
        ramp_len = abs(a) / (0.5 * r)
        ramp = PiecewiseControl(np.array([0.0, ramp_len]), "linear",
                                np.array([[0.0, np.sign(a) * 0.5 * r]]))
        u_ramp = propagate_transformed(params, ramp, step=step, dim=dim).matrix
        chi_aux = u_ramp.conj().T @ chi
    else:
        chi_aux = chi

    gate = 1.0 - 0.5 * eps ** 2
    best: tuple[float, PiecewiseControl] | None = None
    stalls = 0
    attempts = 0
    for horizon in horizon_schedule:
        for segments in segment_schedule:
            attempts += 1
            try:
                v = synthesize_pc_control(problem, segments, horizon, seed=seed,
                                          starts=starts, threads=threads,
                                          target_coeffs=chi_aux)
            except NoImprovement:
                stalls += 1
                continue
            u_v = propagate_auxiliary(params, v, dim=dim)
            fid = fidelity(chi_aux, u_v.apply(psi0))
            if best is None or fid > best[0]:
                best = (fid, v)
            if fid >= gate:
                break
        else:
            continue
        break
    if stalls == attempts:
        raise NoImprovement(
            "every synthesis budget stalled below overlap 0.5; "
            "the transfer appears blocked (check selection rules)"
        )
    if best is None or best[0] < gate:
        achieved = 0.0 if best is None else best[0]
        raise BudgetExceeded(
            f"auxiliary overlap reached only {achieved:.6f} < {gate:.6f} "
            f"after exhausting horizons {tuple(horizon_schedule)} and "
            f"segment counts {tuple(segment_schedule)}"
        )
    aux_fid, v = best
    psi_aux = propagate_auxiliary(params, v, dim=dim).apply(psi0)

    n = REFINE_START
    while True:
        f_n = lift_control(v, n)
        psi_n = propagate_transformed(params, f_n, step=step, dim=dim).apply(psi0)
        lift_err = float(np.linalg.norm(psi_n - psi_aux))
        if lift_err <= 0.5 * eps:
            full = append_final_segment(f_n, a, params, tolerance=0.1 * eps,
                                        state=psi_n, target=chi, step=step)
            initial_state = SpectralState(psi0, problem.initial.geometry)
            final_state = evolve_moving_box(params, full, initial_state, step=step)
            err = aligned_l2_error(chi, final_state.coeffs)
            if err < eps:
                result = SynthesisResult(
                    v=v, f=full, n_refine=n, achieved_error=err,
                    final_geometry=final_state.geometry,
                    aux_fidelity=aux_fid, lift_error=lift_err,
                )
                _validate_result(result, problem)
                return result
        if n >= n_max:
            raise BudgetExceeded(
                f"refinement cap n={n_max} reached (lift error {lift_err:.3g}, "
                f"budget {0.5 * eps:.3g})"
            )
        n *= 2

