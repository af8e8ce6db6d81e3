"""Propagators against a high-order Runge-Kutta reference, plus the control
containers they consume."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxctrl import (
    BoxGeometry,
    MotionParams,
    PiecewiseControl,
    Propagator,
    SpectralState,
    WallCollision,
    dirichlet_eigenvalues,
    evolve_moving_box,
    minus_norm,
    plus_norm,
    propagate_auxiliary,
    propagate_transformed,
    trajectory,
)

from oracles import rk_auxiliary, rk_transformed

PARAMS = MotionParams(lam=1.0, delta=1.0)


def ground(dim: int) -> np.ndarray:
    c = np.zeros(dim, dtype=complex)
    c[0] = 1.0
    return c


class TestPiecewiseControl:
    def test_from_amplitudes_grid(self):
        v = PiecewiseControl.from_amplitudes([1.0, -1.0, 0.5], 3.0)
        npt.assert_allclose(v.breakpoints, [0.0, 1.0, 2.0, 3.0])
        assert v.n_pieces == 3
        assert v.duration == pytest.approx(3.0)

    def test_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            PiecewiseControl(np.array([0.0, 0.0, 1.0]), "constant", np.array([1.0, 2.0]))
        with pytest.raises(ValueError, match="one value per piece"):
            PiecewiseControl(np.array([0.0, 1.0]), "constant", np.array([1.0, 2.0]))
        with pytest.raises(ValueError, match="offset, slope"):
            PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([1.0]))
        with pytest.raises(ValueError, match="kind"):
            PiecewiseControl(np.array([0.0, 1.0]), "cubic", np.array([1.0]))

    def test_value_right_continuous(self):
        v = PiecewiseControl.from_amplitudes([1.0, 2.0], 2.0)
        assert v.value(1.0) == 2.0
        assert v.value(0.999999) == 1.0

    def test_linear_value_and_rate(self):
        f = PiecewiseControl(np.array([0.0, 1.0, 2.0]), "linear",
                             np.array([[0.0, 0.5], [0.5, -0.5]]))
        assert f.value(0.5) == pytest.approx(0.25)
        assert f.value(1.5) == pytest.approx(0.25)
        assert f.rate(0.5) == 0.5
        assert f.rate(1.5) == -0.5
        assert f.end_value() == pytest.approx(0.0)
        assert f.max_rate() == 0.5

    def test_range_is_tight(self):
        f = PiecewiseControl(np.array([0.0, 1.0, 3.0]), "linear",
                             np.array([[0.0, 1.0], [1.0, -1.0]]))
        lo, hi = f.range()
        assert lo == pytest.approx(-1.0)
        assert hi == pytest.approx(1.0)

    def test_vectorized_value(self):
        v = PiecewiseControl.from_amplitudes([1.0, 3.0], 2.0)
        npt.assert_array_equal(v.value(np.array([0.2, 1.7])), [1.0, 3.0])

    def test_clipped_rebases_offset(self):
        f = PiecewiseControl(np.array([0.0, 2.0]), "linear", np.array([[0.0, 1.0]]))
        [(lo, hi, val)] = list(f.clipped((0.5, 1.5)))
        assert (lo, hi) == (0.5, 1.5)
        npt.assert_allclose(val, [0.5, 1.0])

    def test_clipped_rejects_outside_span(self):
        v = PiecewiseControl.from_amplitudes([1.0], 1.0)
        with pytest.raises(ValueError, match="horizon"):
            list(v.clipped((0.0, 2.0)))

    def test_arrays_are_read_only(self):
        v = PiecewiseControl.from_amplitudes([1.0], 1.0)
        with pytest.raises(ValueError):
            v.breakpoints[0] = 5.0


class TestPropagatorAlgebra:
    def test_after_requires_adjacency(self):
        u1 = Propagator(np.eye(2, dtype=complex), 0.0, 1.0)
        u2 = Propagator(np.eye(2, dtype=complex), 2.0, 3.0)
        with pytest.raises(ValueError, match="chain"):
            u2.after(u1)

    def test_composition_matches_full_span(self):
        v = PiecewiseControl.from_amplitudes([0.6, -0.4, 0.2], 1.5)
        full = propagate_auxiliary(PARAMS, v, dim=10)
        first = propagate_auxiliary(PARAMS, v, t_span=(0.0, 0.7), dim=10)
        second = propagate_auxiliary(PARAMS, v, t_span=(0.7, 1.5), dim=10)
        chained = second.after(first)
        assert np.abs(chained.matrix - full.matrix).max() < 1e-12
        assert chained.t_from == 0.0 and chained.t_to == 1.5

    def test_dagger_inverts(self):
        v = PiecewiseControl.from_amplitudes([0.9], 1.0)
        u = propagate_auxiliary(PARAMS, v, dim=8)
        assert np.abs(u.dagger().matrix @ u.matrix - np.eye(8)).max() < 1e-12


class TestScaleNorms:
    def test_plus_norm_anchor(self):
        assert plus_norm(ground(6)) == pytest.approx(np.sqrt(np.pi ** 2 + 1.0))

    def test_minus_norm_anchor(self):
        assert minus_norm(ground(6)) == pytest.approx(1.0 / np.sqrt(np.pi ** 2 + 1.0))

    def test_accepts_spectral_state(self):
        s = SpectralState.basis_mode(1, 6)
        assert plus_norm(s) == plus_norm(s.coeffs)

    def test_plus_dominates_plain(self):
        rng = np.random.default_rng(3)
        c = rng.normal(size=12) + 1j * rng.normal(size=12)
        assert plus_norm(c) >= np.linalg.norm(c)
        assert minus_norm(c) <= np.linalg.norm(c)


class TestAuxiliaryPropagation:
    def test_zero_amplitude_is_free_drift(self):
        v = PiecewiseControl.from_amplitudes([0.0], 0.7)
        u = propagate_auxiliary(PARAMS, v, dim=6)
        want = np.diag(np.exp(-1j * 0.7 * dirichlet_eigenvalues(6)))
        assert np.abs(u.matrix - want).max() < 1e-12

    def test_against_rk_reference(self):
        v = PiecewiseControl.from_amplitudes([0.4, -0.3], 1.0)
        psi = propagate_auxiliary(PARAMS, v, dim=8).apply(ground(8))
        ref = rk_auxiliary(1.0, 1.0, 1.0, [0.4, -0.3], [0.5, 0.5], ground(8))
        assert np.linalg.norm(psi - ref) < 1e-9

    def test_scaled_reference_length(self):
        p = MotionParams(lam=1.0, delta=0.5, ell0=2.0)
        v = PiecewiseControl.from_amplitudes([0.8], 0.6)
        psi = propagate_auxiliary(p, v, dim=8).apply(ground(8))
        ref = rk_auxiliary(1.0, 0.5, 2.0, [0.8], [0.6], ground(8))
        assert np.linalg.norm(psi - ref) < 1e-9

    def test_rejects_linear_kind(self):
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, 0.1]]))
        with pytest.raises(ValueError, match="constant"):
            propagate_auxiliary(PARAMS, f, dim=4)

    def test_unitarity(self):
        v = PiecewiseControl.from_amplitudes([0.5, -0.9, 0.2, 0.7], 2.0)
        assert propagate_auxiliary(PARAMS, v, dim=16).unitarity_defect() < 1e-9


class TestTransformedPropagation:
    def test_flat_profile_matches_drift(self):
        f = PiecewiseControl(np.array([0.0, 0.5, 1.0]), "linear",
                             np.array([[0.0, 0.0], [0.0, 0.0]]))
        u = propagate_transformed(PARAMS, f, dim=6)
        want = np.diag(np.exp(-1j * 1.0 * dirichlet_eigenvalues(6)))
        assert np.abs(u.matrix - want).max() < 1e-12

    def test_against_rk_reference(self):
        f = PiecewiseControl(np.array([0.0, 0.5, 1.0]), "linear",
                             np.array([[0.0, 0.3], [0.15, -0.3]]))
        psi = propagate_transformed(PARAMS, f, step=1e-3, dim=8).apply(ground(8))
        ref = rk_transformed(1.0, 1.0, 1.0,
                             [(0.5, 0.0, 0.3), (0.5, 0.15, -0.3)], ground(8))
        assert np.linalg.norm(psi - ref) < 5e-7

    def test_second_order_step_convergence(self):
        f = PiecewiseControl(np.array([0.0, 0.5, 1.0]), "linear",
                             np.array([[0.0, 0.3], [0.15, -0.3]]))
        ref = rk_transformed(1.0, 1.0, 1.0,
                             [(0.5, 0.0, 0.3), (0.5, 0.15, -0.3)], ground(8))
        errs = [
            np.linalg.norm(propagate_transformed(PARAMS, f, step=s, dim=8).apply(ground(8)) - ref)
            for s in (4e-3, 2e-3, 1e-3)
        ]
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        assert all(3.5 < r < 4.5 for r in ratios), ratios

    def test_wall_collision_detected(self):
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, -1.2]]))
        with pytest.raises(WallCollision):
            propagate_transformed(PARAMS, f, dim=4)

    def test_unitarity(self):
        f = PiecewiseControl(np.array([0.0, 0.4, 1.0]), "linear",
                             np.array([[0.0, 0.9], [0.36, -0.6]]))
        assert propagate_transformed(PARAMS, f, dim=16).unitarity_defect() < 1e-9

    def test_partial_span(self):
        # a fixed substep keeps the integration grids of the split and the
        # full run aligned; the default (64 substeps per clipped piece) would
        # differ by the midpoint rule's own O(h^2)
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, 0.2]]))
        u_all = propagate_transformed(PARAMS, f, step=1e-3, dim=6)
        u_a = propagate_transformed(PARAMS, f, t_span=(0.0, 0.3), step=1e-3, dim=6)
        u_b = propagate_transformed(PARAMS, f, t_span=(0.3, 1.0), step=1e-3, dim=6)
        assert np.abs(u_b.after(u_a).matrix - u_all.matrix).max() < 1e-12


def test_parity_sector_preserved_without_translation():
    """With no center motion, even and odd sectors never mix."""
    p = MotionParams(lam=1.0, delta=0.0)
    rng = np.random.default_rng(11)
    v = PiecewiseControl.from_amplitudes(rng.uniform(-0.9, 0.9, 20), 4.0)
    out = propagate_auxiliary(p, v, dim=32).apply(ground(32))
    odd_weight = float(np.sum(np.abs(out[1::2]) ** 2))
    assert odd_weight <= 1e-10


class TestMovingBoxEvolution:
    def test_geometry_mismatch_rejected(self):
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, 0.5]]))
        state = SpectralState.basis_mode(1, 8, BoxGeometry(2.0, 0.0))
        with pytest.raises(ValueError, match="referenced"):
            evolve_moving_box(PARAMS, f, state)

    def test_tracks_final_geometry(self):
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, 0.5]]))
        state = SpectralState.basis_mode(1, 8, BoxGeometry(1.0, 0.0))
        out = evolve_moving_box(PARAMS, f, state)
        assert out.geometry.length == pytest.approx(1.5)
        assert out.geometry.center == pytest.approx(0.5)
        assert out.norm() == pytest.approx(1.0, abs=1e-9)


class TestTrajectory:
    def test_matches_direct_propagation(self):
        f = PiecewiseControl(np.array([0.0, 0.5, 1.0]), "linear",
                             np.array([[0.0, 0.4], [0.2, -0.4]]))
        times = [0.0, 0.25, 0.5, 1.0]
        rows = trajectory(PARAMS, f, ground(8), times, step=1e-3)
        for t, row in zip(times, rows):
            direct = propagate_transformed(PARAMS, f, t_span=(0.0, t), step=1e-3,
                                           dim=8).apply(ground(8))
            assert np.linalg.norm(row - direct) < 1e-12

    def test_requires_sorted_times(self):
        f = PiecewiseControl(np.array([0.0, 1.0]), "linear", np.array([[0.0, 0.1]]))
        with pytest.raises(ValueError, match="sorted"):
            trajectory(PARAMS, f, ground(4), [0.5, 0.2])


@settings(max_examples=20, deadline=None)
@given(amps=st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6),
       total=st.floats(0.1, 3.0))
def test_step_propagators_conserve_norm(amps, total):
    v = PiecewiseControl.from_amplitudes(amps, total)
    u = propagate_auxiliary(PARAMS, v, dim=10)
    assert u.unitarity_defect() < 1e-9
    psi = u.apply(ground(10))
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-9)
