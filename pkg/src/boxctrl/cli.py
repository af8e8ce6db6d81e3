"""Command-line front end: scenario TOML in, CSV tables and reports out.

Verbs:

* ``transfer``   — run the full synthesis pipeline for a wall-motion request
* ``resonance``  — integer coincidence listing, tracked spectrum, eta scan
* ``stability``  — bound verification, constants, lifting convergence
* ``operators dump`` — matrices and eigenvalues of the building blocks

Exit codes: 0 success; 1 invalid configuration; 2 accuracy/verification
failure (synthesis budgets exhausted, or a stability segment violating the
bound); 3 unsupported motion (pure translation).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config as cfgmod
from .control import (
    TransferProblem,
    aligned_l2_error,
    fidelity,
    solve_transfer,
)
from .errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateMatching,
    NoImprovement,
    UnsupportedMotion,
)
from .operators import (
    MotionParams,
    dilation_matrix,
    dirichlet_eigenvalues,
    interaction_matrix,
    momentum_matrix,
)
from .propagation import PiecewiseControl, trajectory
from .reporting import __version__, config_digest, write_csv, write_json, write_text
from .resonance import (
    find_resonances_at_zero,
    scan_for_nonresonant_eta,
    second_derivative_formula,
    spectrum_vs_eta,
)
from .stability import lifting_convergence_study, verify_stability_bound

#: trajectory tables are capped at this many sample rows
MAX_TRAJECTORY_ROWS = 257


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxctrl",
        description="control and spectral analysis for a particle in a box with moving walls",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $BOXCTRL_THREADS or 1)")

    common(sub.add_parser("transfer", help="synthesize and verify a state transfer"))
    common(sub.add_parser("resonance", help="resonance listing, spectrum, and eta scan"))
    common(sub.add_parser("stability", help="stability bound and lifting convergence"))
    ops = sub.add_parser("operators", help="inspect the operator building blocks")
    ops.add_argument("action", choices=["dump"], help="what to do with the operators")
    common(ops)
    return parser


def _resolve_threads(arg_value: int | None) -> int:
    if arg_value is not None:
        threads = arg_value
    else:
        env = os.environ.get("BOXCTRL_THREADS", "").strip()
        if not env:
            threads = 1
        else:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"BOXCTRL_THREADS must be an integer, got {env!r}")
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    return threads


# --------------------------------------------------------------------------
# transfer

def _control_rows(f: PiecewiseControl, params: MotionParams):
    times: list[float] = []
    for t0, t1, _ in f.pieces():
        times.append(t0)
        times.append(0.5 * (t0 + t1))
    times.append(f.t_end)
    rows = []
    for k, t in enumerate(times):
        at_end = k == len(times) - 1
        fv = f.end_value() if at_end else float(f.value(t))
        rate = float(f.rate(f.breakpoints[-2])) if at_end else float(f.rate(t))
        rows.append((t, rate, fv, params.ell0 + params.lam * fv,
                     params.d0 + params.delta * fv))
    return rows


def _trajectory_rows(params: MotionParams, f: PiecewiseControl, coeffs: np.ndarray,
                     step: float | None):
    bp = f.breakpoints
    if bp.size > MAX_TRAJECTORY_ROWS:
        idx = np.unique(np.linspace(0, bp.size - 1, MAX_TRAJECTORY_ROWS).astype(int))
        times = bp[idx]
    else:
        times = bp
    states = trajectory(params, f, coeffs, times, step=step)
    probs = np.abs(states) ** 2
    return [(float(t), *probs[k]) for k, t in enumerate(times)]


def _cmd_transfer(args, threads: int) -> int:
    cfg = cfgmod.load_scenario(args.config, "transfer")
    digest = config_digest(args.config)
    out = Path(args.out)
    seed = cfg.seed if args.seed is None else args.seed

    try:
        problem = TransferProblem(cfg.initial_state(), cfg.target_state(),
                                  epsilon=cfg.epsilon, rate_bound=cfg.rate_bound)
    except UnsupportedMotion as exc:
        print(f"unsupported motion: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: invalid transfer problem: {exc}", file=sys.stderr)
        return 1

    t0 = time.perf_counter()
    try:
        result = solve_transfer(problem, seed=seed, starts=cfg.starts,
                                threads=threads, step=cfg.step,
                                segment_schedule=cfg.segment_schedule,
                                horizon_schedule=cfg.horizon_schedule,
                                n_max=cfg.n_max)
    except (NoImprovement, BudgetExceeded) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0

    params = problem.params
    psi0 = problem.initial.coeffs / problem.initial.norm()
    chi = problem.target.coeffs / problem.target.norm()
    final = trajectory(params, result.f, psi0, [result.f.t_end], step=cfg.step)[0]

    control_csv = write_csv(out / "control.csv", ["t", "v", "f", "ell", "d"],
                            _control_rows(result.f, params), digest)
    traj_header = ["t"] + [f"p{j}" for j in range(1, problem.dim + 1)]
    trajectory_csv = write_csv(out / "trajectory.csv", traj_header,
                               _trajectory_rows(params, result.f, psi0, cfg.step),
                               digest)

    a = problem.final_offset
    constraints = {
        "profile_starts_at_zero": abs(float(result.f.values[0, 0])) <= 1e-12,
        "profile_ends_at_prescribed": abs(result.f.end_value() - a) <= 1e-12 * max(1.0, abs(a)),
        "rate_bound_respected": result.f.max_rate() < params.rate_bound,
        "box_stays_open": True,  # solve_transfer re-validates; a collision raises
    }
    report = {
        "command": "transfer",
        "version": __version__,
        "config_sha256": digest,
        "seed": seed,
        "threads": threads,
        "dim": problem.dim,
        "epsilon": problem.epsilon,
        "achieved_error": result.achieved_error,
        "fidelity": fidelity(chi, final),
        "aux_fidelity": result.aux_fidelity,
        "lift_error": result.lift_error,
        "n_refine": result.n_refine,
        "final_geometry": {"length": result.final_geometry.length,
                           "center": result.final_geometry.center},
        "constraints": constraints,
        "wall_time_s": elapsed,
        "outputs": {"control_csv": str(control_csv),
                    "trajectory_csv": str(trajectory_csv)},
    }
    write_json(out / "report.json", report)
    ok = result.achieved_error < problem.epsilon and all(constraints.values())
    print(f"achieved_error = {result.achieved_error:.6f} (budget {problem.epsilon})")
    return 0 if ok else 2


# --------------------------------------------------------------------------
# resonance

def _cmd_resonance(args, threads: int) -> int:
    cfg = cfgmod.load_scenario(args.config, "resonance")
    digest = config_digest(args.config)
    out = Path(args.out)
    params = MotionParams(lam=cfg.lam, delta=cfg.delta)

    listing = find_resonances_at_zero(cfg.dim, cfg.max_index)

    grid = np.linspace(0.0, cfg.eta_max, cfg.spectrum_points)
    try:
        curve = spectrum_vs_eta(params, grid, cfg.dim)
        found = scan_for_nonresonant_eta(params, cfg.eta_max, cfg.grid_size,
                                         cfg.dim, cfg.scan_max_index, tol=cfg.tol)
    except DegenerateMatching as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    k = cfg.scan_max_index
    header = ["eta"] + [f"E{j}" for j in range(1, k + 1)]
    rows = [(float(curve.eta_grid[i]), *curve.eigenvalues[i, :k])
            for i in range(curve.eta_grid.size)]
    spectrum_csv = write_csv(out / "spectrum.csv", header, rows, digest)

    lines = [
        f"# boxctrl {__version__} config_sha256={digest}",
        f"# integer gap coincidences at eta=0: chain pair (s, s+1) vs coupled pair"
        f" (t1, t2), max_index={cfg.max_index}",
    ]
    for s1, s2, t1, t2 in listing.quadruples:
        lines.append(f"{s1} {s2} {t1} {t2}")
    if not listing.quadruples:
        lines.append("# none")
    lines.append(f"# scan: eta_max={cfg.eta_max} grid_size={cfg.grid_size} "
                 f"scan_max_index={cfg.scan_max_index} tol={cfg.tol}")
    if found is None:
        lines.append("NotFound")
        if cfg.lam == 0.0:
            shift = second_derivative_formula(params, 1)
            lines.append(
                f"# diagnostic: zero dilation weight shifts every level by the same "
                f"{shift:.6g} * eta^2 (uniform shift); spectral gaps are "
                f"eta-invariant, so coincidences cannot be removed by tuning eta"
            )
    else:
        lines.append(f"certified eta = {found:.17g}")
    resonances_txt = write_text(out / "resonances.txt", lines)

    report = {
        "command": "resonance",
        "version": __version__,
        "config_sha256": digest,
        "dim": cfg.dim,
        "max_index": cfg.max_index,
        "scan_max_index": cfg.scan_max_index,
        "quadruples": [list(q) for q in listing.quadruples],
        "certified_eta": found,
        "outputs": {"spectrum_csv": str(spectrum_csv),
                    "resonances_txt": str(resonances_txt)},
    }
    write_json(out / "report.json", report)
    print(f"{len(listing.quadruples)} integer coincidence(s); "
          + ("scan: NotFound" if found is None else f"certified eta = {found:g}"))
    return 0


# --------------------------------------------------------------------------
# stability

def _cmd_stability(args, threads: int) -> int:
    cfg = cfgmod.load_scenario(args.config, "stability")
    digest = config_digest(args.config)
    out = Path(args.out)
    params = MotionParams(lam=cfg.lam, delta=cfg.delta, ell0=cfg.ell0, d0=cfg.d0,
                          rate_bound=cfg.rate_bound)
    v = PiecewiseControl.from_amplitudes(cfg.amplitudes, cfg.horizon)
    psi = cfg.psi()

    t0 = time.perf_counter()
    check = verify_stability_bound(params, v, cfg.n_check, cfg.m_check, psi,
                                   dim=cfg.dim, epsilon=cfg.epsilon, step=cfg.step)
    study = lifting_convergence_study(params, v, psi, cfg.n_list, dim=cfg.dim,
                                      step=cfg.step)
    elapsed = time.perf_counter() - t0

    bound_rows = list(zip(check.segment_starts, check.segment_ends, check.lhs, check.rhs))
    bound_csv = write_csv(out / "bound.csv", ["t_start", "t_end", "lhs", "rhs"],
                          bound_rows, digest)
    convergence_csv = write_csv(out / "convergence.csv", ["n", "error"],
                                study.rows(), digest)
    constants = asdict(check.constants)
    write_json(out / "constants.json", {
        "constants": constants,
        "inputs": {"lam": cfg.lam, "delta": cfg.delta, "ell0": cfg.ell0,
                   "rate_bound": cfg.rate_bound, "amplitudes": list(cfg.amplitudes),
                   "horizon": cfg.horizon, "dim": cfg.dim,
                   "n_check": cfg.n_check, "m_check": cfg.m_check},
    })
    report = {
        "command": "stability",
        "version": __version__,
        "config_sha256": digest,
        "bound_holds": check.holds,
        "worst_margin": float(np.min(check.rhs - check.lhs)) if check.lhs.size else 0.0,
        "convergence_slope": study.slope,
        "wall_time_s": elapsed,
        "outputs": {"bound_csv": str(bound_csv),
                    "convergence_csv": str(convergence_csv),
                    "constants_json": str(out / "constants.json")},
    }
    write_json(out / "report.json", report)
    slope_txt = "n/a (exact match)" if study.slope is None else f"{study.slope:.3f}"
    print(f"bound holds: {check.holds}; convergence slope: {slope_txt}")
    return 0 if check.holds else 2


# --------------------------------------------------------------------------
# operators

def _matrix_rows(matrix: np.ndarray):
    rows = []
    dim = matrix.shape[0]
    for j in range(dim):
        for l in range(dim):
            z = matrix[j, l]
            if z != 0:
                rows.append((j + 1, l + 1, float(z.real), float(z.imag)))
    return rows


def _cmd_operators(args, threads: int) -> int:
    cfg = cfgmod.load_scenario(args.config, "operators")
    digest = config_digest(args.config)
    out = Path(args.out)
    params = MotionParams(lam=cfg.lam, delta=cfg.delta)

    eigs = dirichlet_eigenvalues(cfg.dim)
    mom = momentum_matrix(cfg.dim)
    dil = dilation_matrix(cfg.dim)
    inter = interaction_matrix(params, cfg.dim)

    write_csv(out / "eigenvalues.csv", ["j", "eigenvalue"],
              [(j + 1, eigs[j]) for j in range(cfg.dim)], digest)
    write_csv(out / "momentum.csv", ["j", "l", "re", "im"],
              _matrix_rows(mom.matrix), digest)
    write_csv(out / "dilation.csv", ["j", "l", "re", "im"],
              _matrix_rows(dil.matrix), digest)
    write_csv(out / "interaction.csv", ["j", "l", "re", "im"],
              _matrix_rows(inter.matrix), digest)

    def herm_dev(m: np.ndarray) -> float:
        return float(np.abs(m - m.conj().T).max())

    report = {
        "command": "operators",
        "version": __version__,
        "config_sha256": digest,
        "dim": cfg.dim,
        "lam": cfg.lam,
        "delta": cfg.delta,
        "hermiticity_deviation": {
            "momentum": herm_dev(mom.matrix),
            "dilation": herm_dev(dil.matrix),
            "interaction": herm_dev(inter.matrix),
        },
        "spot_values": {
            "momentum_12_abs": float(abs(mom.matrix[0, 1])),
            "dilation_13_abs": float(abs(dil.matrix[0, 2])),
        },
    }
    write_json(out / "report.json", report)
    print(f"dumped operator tables for dim={cfg.dim} to {out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        if args.command == "transfer":
            return _cmd_transfer(args, threads)
        if args.command == "resonance":
            return _cmd_resonance(args, threads)
        if args.command == "stability":
            return _cmd_stability(args, threads)
        if args.command == "operators":
            return _cmd_operators(args, threads)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
