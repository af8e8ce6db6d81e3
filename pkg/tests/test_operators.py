"""Matrix building blocks against quadrature and closed-form anchors."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxctrl import (
    BoxGeometry,
    HermitianOperator,
    MotionParams,
    SpectralState,
    dilation_matrix,
    dirichlet_eigenvalues,
    frame_map,
    frame_map_deficiency,
    interaction_matrix,
    momentum_matrix,
    parity_projector,
)

from oracles import quad_dilation, quad_frame_map, quad_momentum


class TestEigenvalues:
    def test_values(self):
        npt.assert_allclose(dirichlet_eigenvalues(4),
                            [np.pi ** 2, 4 * np.pi ** 2, 9 * np.pi ** 2, 16 * np.pi ** 2],
                            rtol=1e-15)

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            dirichlet_eigenvalues(1)
        with pytest.raises(TypeError):
            dirichlet_eigenvalues(3.0)


class TestCouplingMatrices:
    def test_momentum_spot_value(self):
        # b(1,2) = 4/3, parity factor 2 -> entry 8i/3
        p = momentum_matrix(6).matrix
        npt.assert_allclose(p[0, 1], 8j / 3, atol=1e-15)
        assert abs(p[0, 1]) == pytest.approx(8 / 3, abs=1e-14)

    def test_dilation_spot_value(self):
        # b(1,3) = 3/4, parity factor 2, prefactor -1/2 -> entry -3i/4
        d = dilation_matrix(6).matrix
        npt.assert_allclose(d[0, 2], -0.75j, atol=1e-15)

    def test_momentum_against_quadrature(self):
        got = momentum_matrix(50).matrix
        ref = quad_momentum(50)
        assert np.abs(got - ref).max() < 1e-10

    def test_dilation_against_quadrature(self):
        got = dilation_matrix(50).matrix
        ref = quad_dilation(50)
        assert np.abs(got - ref).max() < 1e-10

    def test_modulus_closed_form(self):
        """Entry moduli are 2 j l |1 -+ (-1)^(j+l)| / |l^2 - j^2| off-diagonal."""
        dim = 12
        p = np.abs(momentum_matrix(dim).matrix)
        d = np.abs(dilation_matrix(dim).matrix)
        for j in range(1, dim + 1):
            for l in range(1, dim + 1):
                if j == l:
                    assert p[j - 1, l - 1] == 0.0
                    assert d[j - 1, l - 1] == 0.0
                    continue
                base = 2.0 * j * l / abs(l ** 2 - j ** 2)
                sign = (-1) ** (j + l)
                npt.assert_allclose(p[j - 1, l - 1], base * abs(1 - sign), atol=1e-13)
                npt.assert_allclose(d[j - 1, l - 1], 0.5 * base * abs(1 + sign), atol=1e-13)

    def test_exact_hermiticity(self):
        for op in (momentum_matrix(40), dilation_matrix(40)):
            m = op.matrix
            assert np.abs(m - m.conj().T).max() == 0.0

    def test_parity_selection(self):
        """Momentum couples opposite parity only; dilation equal parity only."""
        dim = 10
        j = np.arange(1, dim + 1)
        odd_sum = (j[:, None] + j[None, :]) % 2 == 1
        p = momentum_matrix(dim).matrix
        d = dilation_matrix(dim).matrix
        assert np.all(p[~odd_sum] == 0)
        assert np.all(d[odd_sum] == 0)

    def test_interaction_is_weighted_sum(self):
        params = MotionParams(lam=0.7, delta=-1.3)
        got = interaction_matrix(params, 8).matrix
        want = 0.7 * dilation_matrix(8).matrix - 1.3 * momentum_matrix(8).matrix
        npt.assert_array_equal(got, want)

    def test_purely_imaginary(self):
        assert np.all(momentum_matrix(9).matrix.real == 0)
        assert np.all(dilation_matrix(9).matrix.real == 0)


def test_parity_projector_partition():
    even = parity_projector(7, even=True)
    odd = parity_projector(7, even=False)
    npt.assert_array_equal(even + odd, np.eye(7))
    npt.assert_array_equal(np.diag(even), [1, 0, 1, 0, 1, 0, 1])


def test_hermitian_operator_rejects_asymmetric():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="Hermitian"):
        HermitianOperator(bad)


def test_hermitian_operator_expectation():
    op = HermitianOperator(np.diag([1.0, 2.0, 3.0]))
    c = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    assert op.expectation(c) == pytest.approx(1.5)


class TestGeometry:
    def test_walls(self):
        g = BoxGeometry(2.0, 1.0)
        assert g.walls == (0.0, 2.0)

    def test_rejects_closed_box(self):
        with pytest.raises(ValueError):
            BoxGeometry(0.0, 0.0)
        with pytest.raises(ValueError):
            BoxGeometry(-1.0)

    def test_close_to(self):
        g = BoxGeometry(1.0, 0.0)
        assert g.close_to(BoxGeometry(1.0 + 1e-12, 1e-12))
        assert not g.close_to(BoxGeometry(1.1, 0.0))

    def test_motion_params_geometry(self):
        p = MotionParams(lam=1.0, delta=0.5, ell0=1.0, d0=0.0)
        g = p.geometry_at(1.0)
        assert g.length == pytest.approx(2.0)
        assert g.center == pytest.approx(0.5)
        assert p.rest_geometry == BoxGeometry(1.0, 0.0)

    def test_motion_params_validation(self):
        with pytest.raises(ValueError):
            MotionParams(lam=1.0, delta=0.0, ell0=0.0)
        with pytest.raises(ValueError):
            MotionParams(lam=1.0, delta=0.0, rate_bound=0.0)


class TestSpectralState:
    def test_basis_mode(self):
        s = SpectralState.basis_mode(2, 5)
        npt.assert_array_equal(s.coeffs, [0, 1, 0, 0, 0])
        assert s.norm() == 1.0

    def test_mode_bounds(self):
        with pytest.raises(ValueError):
            SpectralState.basis_mode(0, 5)
        with pytest.raises(ValueError):
            SpectralState.basis_mode(6, 5)

    def test_copies_input(self):
        c = np.array([1.0, 0.0])
        s = SpectralState(c)
        c[0] = 5.0
        assert s.coeffs[0] == 1.0

    def test_normalized(self):
        s = SpectralState(np.array([3.0, 4.0]))
        assert s.normalized().norm() == pytest.approx(1.0)
        with pytest.raises(ValueError):
            SpectralState(np.array([0.0, 0.0])).normalized()


class TestFrameMap:
    def test_identity_geometry(self):
        g = BoxGeometry(1.0, 0.0)
        m = frame_map(g, g, 16)
        assert np.abs(m - np.eye(16)).max() < 1e-12

    def test_against_quadrature(self):
        m = frame_map(BoxGeometry(1.0, 0.0), BoxGeometry(2.0, 1.0), 20)
        ref = quad_frame_map(1.0, 0.0, 2.0, 1.0, 20)
        assert np.abs(m - ref).max() < 1e-10

    def test_shifted_overlap_against_quadrature(self):
        m = frame_map(BoxGeometry(1.5, -0.2), BoxGeometry(0.9, 0.3), 15)
        ref = quad_frame_map(1.5, -0.2, 0.9, 0.3, 15)
        assert np.abs(m - ref).max() < 1e-10

    def test_disjoint_boxes_give_zero(self):
        m = frame_map(BoxGeometry(1.0, 0.0), BoxGeometry(1.0, 5.0), 8)
        assert np.all(m == 0)

    def test_deficiency_identity(self):
        g = BoxGeometry(1.0, 0.0)
        dfc = frame_map_deficiency(frame_map(g, g, 10))
        assert np.abs(dfc).max() < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(
        src_len=st.floats(0.5, 3.0),
        src_cen=st.floats(-1.0, 1.0),
        dst_len=st.floats(0.5, 3.0),
        dst_cen=st.floats(-1.0, 1.0),
    )
    def test_columns_never_exceed_unit_norm(self, src_len, src_cen, dst_len, dst_cen):
        """Truncation can only lose norm: every column satisfies ||col|| <= 1."""
        m = frame_map(BoxGeometry(src_len, src_cen), BoxGeometry(dst_len, dst_cen), 12)
        dfc = frame_map_deficiency(m)
        assert np.all(dfc >= -1e-9)

    def test_transpose_symmetry(self):
        """Real overlaps: mapping src->dst is the transpose of dst->src."""
        a, b = BoxGeometry(1.0, 0.0), BoxGeometry(1.7, 0.4)
        npt.assert_allclose(frame_map(a, b, 14), frame_map(b, a, 14).T, atol=1e-13)
