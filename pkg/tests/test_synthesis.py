"""Inverse-eigenvalue synthesis tests.

Everything is cross-checked against the package's own bisection eigensolver
and, where independent, against numpy.linalg / sympy oracles.
"""

import json

import numpy as np
import pytest
import sympy

from syncforge.synthesis import (
    Feasibility3x3,
    SpectrumSpec,
    SynthesisError,
    TridiagonalLaplacian,
    bidiagonal_optimal_laplacian,
    diag2trid,
    diffusive_laplacian,
    diffusive_spectrum,
    matrix_from_json,
    matrix_from_matrix_market,
    matrix_to_json,
    matrix_to_matrix_market,
    place_eigenvalues,
    symmetric_3x3_feasible,
    symmetric_3x3_matrix,
    synthesize,
    trid_zero_row_sum,
)
from syncforge.tridiag import TridiagonalMatrix, eigenvalues, null_vector


def random_laplacian_spectrum(rng, n, hi=100.0):
    vals = np.concatenate(([0.0], np.sort(rng.uniform(hi / 200.0, hi, n - 1))))
    while np.any(np.diff(vals) <= 0.0):
        vals[1:] = np.sort(rng.uniform(hi / 200.0, hi, n - 1))
    return SpectrumSpec(vals)


class TestSpectrumSpec:
    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SpectrumSpec([0.0, 1.0, 1.0])

    def test_laplacian_validity(self):
        assert SpectrumSpec([0.0, 1.0]).laplacian_valid
        assert not SpectrumSpec([1.0, 2.0]).laplacian_valid


class TestPlaceEigenvalues:
    def test_linear(self):
        spec = place_eigenvalues("linear", (1.0, 10.0), 4)
        np.testing.assert_allclose(spec.values, [0.0, 1.0, 4.0, 7.0, 10.0])

    def test_chebyshev_two_points(self):
        spec = place_eigenvalues("chebyshev", (1.0, 10.0), 2)
        c = np.cos(np.pi / 4.0)
        expected = [0.0, 1.0 + 9.0 * (1.0 - c) / 2.0, 1.0 + 9.0 * (1.0 + c) / 2.0]
        np.testing.assert_allclose(spec.values, expected, atol=1e-12)
        np.testing.assert_allclose(spec.values[1:], [2.31802, 8.68198], atol=1e-5)

    def test_linear_63_points(self):
        spec = place_eigenvalues("linear", (0.5, 3.0), 63)
        assert spec.values.size == 64
        assert spec.values[1] == 0.5 and spec.values[-1] == 3.0
        np.testing.assert_allclose(np.diff(spec.values[1:]), 2.5 / 62.0)

    def test_chebyshev_inside_interval(self):
        spec = place_eigenvalues("chebyshev", (1.0, 50.0), 127)
        pts = spec.values[1:]
        assert pts.min() > 1.0 and pts.max() < 50.0
        assert np.all(np.diff(pts) > 0.0)

    def test_rejects_bad_interval(self):
        with pytest.raises(ValueError):
            place_eigenvalues("linear", (0.0, 10.0), 4)
        with pytest.raises(ValueError):
            place_eigenvalues("linear", (1.0, 10.0), 0)
        with pytest.raises(ValueError, match="strategy"):
            place_eigenvalues("geometric", (1.0, 10.0), 4)


class TestDiag2Trid:
    def test_spectrum_zero_two(self):
        s = diag2trid(SpectrumSpec([0.0, 2.0]))
        np.testing.assert_allclose(s.to_dense(), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)

    def test_spectrum_zero_one_three(self):
        s = diag2trid(SpectrumSpec([0.0, 1.0, 3.0]))
        assert np.all(s.super < 0.0) and np.all(s.diag > 0.0)
        np.testing.assert_array_equal(s.sub, s.super)
        np.testing.assert_allclose(eigenvalues(s), [0.0, 1.0, 3.0], atol=1e-10)

    def test_no_zero_eigenvalue_allowed(self):
        s = diag2trid(SpectrumSpec([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(eigenvalues(s), [1.0, 2.0, 3.0], atol=1e-10)

    def test_diag_positive_when_spectrum_has_zero(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            spec = random_laplacian_spectrum(rng, int(rng.integers(2, 40)))
            s = diag2trid(spec)
            assert np.all(s.diag > 0.0)
            assert np.all(s.super < 0.0)

    def test_custom_q_preserves_spectrum(self):
        rng = np.random.default_rng(8)
        q = rng.uniform(0.2, 1.0, 5)
        q /= np.linalg.norm(q)
        s = diag2trid(SpectrumSpec([0.0, 1.0, 2.0, 4.0, 8.0]), q=q)
        np.testing.assert_allclose(eigenvalues(s), [0.0, 1.0, 2.0, 4.0, 8.0], atol=1e-10)

    def test_rejects_bad_q(self):
        spec = SpectrumSpec([0.0, 1.0, 2.0])
        with pytest.raises(ValueError, match="unit"):
            diag2trid(spec, q=np.array([1.0, 1.0, 1.0]))
        with pytest.raises(ValueError, match="zero component"):
            diag2trid(spec, q=np.array([0.0, 0.0, 1.0]))

    def test_rejects_single_eigenvalue(self):
        with pytest.raises(ValueError, match="at least 2"):
            diag2trid(SpectrumSpec([0.0]))


class TestTridZeroRowSum:
    def test_fixed_point_two_by_two(self):
        s = TridiagonalMatrix([1.0, 1.0], [-1.0], [-1.0])
        lap, report = trid_zero_row_sum(s)
        np.testing.assert_allclose(report.alphas, [1.0])
        np.testing.assert_array_equal(lap.matrix.to_dense(), s.to_dense())

    def test_diffusive_fixed_point(self):
        t = diffusive_laplacian(1.0, 4)[0].matrix
        lap, report = trid_zero_row_sum(t)
        np.testing.assert_allclose(report.alphas, np.ones(3), atol=1e-12)
        np.testing.assert_allclose(lap.matrix.to_dense(), t.to_dense(), atol=1e-12)

    def test_zero_one_three(self):
        s = diag2trid(SpectrumSpec([0.0, 1.0, 3.0]))
        lap, report = trid_zero_row_sum(s)
        m = lap.matrix
        assert np.abs(m.apply(np.ones(3))).max() <= 1e-12 * m.inf_norm()
        np.testing.assert_allclose(eigenvalues(m), [0.0, 1.0, 3.0], atol=1e-10)
        assert np.all(m.sub < 0.0) and np.all(m.super < 0.0)
        v = null_vector(s)
        np.testing.assert_allclose(report.alphas, v[1:] / v[:-1], rtol=1e-9)

    def test_report_similarity_recovers_matrix(self):
        s = diag2trid(SpectrumSpec([0.0, 2.0, 5.0, 9.0]))
        lap, report = trid_zero_row_sum(s)
        d = report.similarity
        assert d[0] == 1.0
        np.testing.assert_allclose(d[1:] / d[:-1], report.alphas, rtol=1e-14)
        rebuilt = np.diag(1.0 / d) @ s.to_dense() @ np.diag(d)
        np.testing.assert_allclose(lap.matrix.to_dense(), rebuilt, rtol=1e-9, atol=1e-12)

    def test_rejects_nonsingular_input(self):
        t = TridiagonalMatrix([2.0, 2.0], [-1.0], [-1.0])
        with pytest.raises(SynthesisError, match="not 0 plus positives"):
            trid_zero_row_sum(t)

    def test_rejects_asymmetric_input(self):
        t = TridiagonalMatrix([1.0, 1.0], [-0.5], [-2.0])
        with pytest.raises(ValueError, match="symmetric"):
            trid_zero_row_sum(t)


class TestSynthesize:
    def test_two_nodes(self):
        lap, _ = synthesize(SpectrumSpec([0.0, 2.0]))
        np.testing.assert_allclose(
            lap.matrix.to_dense(), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-14
        )

    def test_round_trip_random(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            spec = random_laplacian_spectrum(rng, int(rng.integers(2, 65)))
            lap, report = synthesize(spec)
            m = lap.matrix
            dev = np.abs(eigenvalues(m) - spec.values).max()
            assert dev <= 1e-9 * spec.values.max()
            assert np.abs(m.apply(np.ones(m.n))).max() <= 1e-11 * m.inf_norm()
            assert np.all(m.diag > 1e-13 * m.inf_norm())
            assert np.all(m.sub < -1e-13 * m.inf_norm())
            assert np.all(m.super < -1e-13 * m.inf_norm())
            assert np.all(report.alphas > 0.0)
            assert report.offdiag_sign_ok and report.diag_positive_ok

    def test_null_vector_aligned_with_ones(self):
        lap, _ = synthesize(SpectrumSpec([0.0, 0.7, 2.2, 9.5]))
        v = null_vector(lap.matrix)
        np.testing.assert_allclose(v, np.full(4, 0.5), atol=1e-10)

    def test_entry_bound_linear_32(self):
        lap, _ = synthesize(place_eigenvalues("linear", (1.0, 10.0), 31))
        assert np.abs(lap.matrix.to_dense()).max() < 6.2

    def test_entry_bound_chebyshev_128(self):
        lap, _ = synthesize(place_eigenvalues("chebyshev", (1.0, 50.0), 127))
        assert np.abs(lap.matrix.to_dense()).max() < 27.0

    def test_asymmetric_when_3x3_infeasible(self):
        # (1, 2) violates the symmetric-existence inequality, so the
        # synthesized matrix cannot be symmetric
        lap, _ = synthesize(SpectrumSpec([0.0, 1.0, 2.0]))
        m = lap.matrix
        assert np.abs(m.sub - m.super).max() > 1e-10
        np.testing.assert_allclose(eigenvalues(m), [0.0, 1.0, 2.0], atol=1e-10)

    def test_rejects_non_laplacian_spectrum(self):
        with pytest.raises(ValueError, match="0 followed by positive"):
            synthesize(SpectrumSpec([1.0, 2.0]))


class TestDiffusive:
    def test_n3(self):
        lap, spec = diffusive_laplacian(1.0, 3)
        np.testing.assert_allclose(spec.values, [0.0, 1.0, 3.0], atol=1e-14)
        np.testing.assert_allclose(eigenvalues(lap.matrix), spec.values, atol=1e-12)

    def test_sigma_scaling(self):
        _, spec = diffusive_laplacian(2.0, 3)
        np.testing.assert_allclose(spec.values, [0.0, 2.0, 6.0], atol=1e-13)

    def test_n4_closed_form(self):
        lap, spec = diffusive_laplacian(1.0, 4)
        np.testing.assert_allclose(
            spec.values, [0.0, 2.0 - np.sqrt(2.0), 2.0, 2.0 + np.sqrt(2.0)], atol=1e-14
        )
        np.testing.assert_allclose(eigenvalues(lap.matrix), spec.values, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 7, 33, 128])
    def test_closed_form_matches_solver(self, n):
        lap, spec = diffusive_laplacian(2.5, n)
        np.testing.assert_allclose(eigenvalues(lap.matrix), spec.values, atol=1e-10)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            diffusive_laplacian(0.0, 4)


class TestBidiagonal:
    def test_explicit_three_nodes(self):
        m = bidiagonal_optimal_laplacian(2.0, 3)
        np.testing.assert_array_equal(
            m.to_dense(), [[2.0, -2.0, 0.0], [0.0, 2.0, -2.0], [0.0, 0.0, 0.0]]
        )
        np.testing.assert_array_equal(m.apply(np.ones(3)), np.zeros(3))

    @pytest.mark.parametrize("lam", [2.0, 8.0])
    def test_scaled_shape(self, lam):
        m = bidiagonal_optimal_laplacian(lam, 5)
        np.testing.assert_array_equal(m.diag[:-1], np.full(4, lam))
        assert m.diag[-1] == 0.0
        np.testing.assert_array_equal(m.super, np.full(4, -lam))
        np.testing.assert_array_equal(m.sub, np.zeros(4))

    def test_row_sums_exactly_zero(self):
        for lam in (0.3, 1.7, 11.0):
            m = bidiagonal_optimal_laplacian(lam, 6)
            np.testing.assert_array_equal(m.apply(np.ones(6)), np.zeros(6))

    def test_char_poly_multiplicity_symbolic(self):
        # det(x I - L) = x (x - lam)^(N-1), checked exactly
        lam_sym, x = sympy.Rational(2), sympy.Symbol("x")
        for n in (2, 3, 4, 5):
            m = bidiagonal_optimal_laplacian(2.0, n)
            dense = sympy.Matrix(m.to_dense().astype(int))
            char = (x * sympy.eye(n) - dense).det()
            assert sympy.expand(char - x * (x - lam_sym) ** (n - 1)) == 0

    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            bidiagonal_optimal_laplacian(-1.0, 4)


class TestSymmetric3x3:
    def test_equality_case_is_diffusive(self):
        res = symmetric_3x3_feasible(1.0, 3.0)
        assert res.feasible
        assert len(res.solutions) == 1
        x, y = res.solutions[0]
        assert (x, y) == (1.0, 1.0)
        t = symmetric_3x3_matrix(x, y)
        np.testing.assert_array_equal(
            t.to_dense(), diffusive_laplacian(1.0, 3)[0].matrix.to_dense()
        )

    def test_one_two_infeasible(self):
        res = symmetric_3x3_feasible(1.0, 2.0)
        assert not res.feasible
        assert res.solutions == []

    def test_one_four_both_branches(self):
        res = symmetric_3x3_feasible(1.0, 4.0)
        assert res.feasible and len(res.solutions) == 2
        for x, y in res.solutions:
            t = symmetric_3x3_matrix(x, y)
            np.testing.assert_allclose(eigenvalues(t), [0.0, 1.0, 4.0], atol=1e-10)

    def test_solution_pairs_are_swaps(self):
        res = symmetric_3x3_feasible(0.5, 9.0)
        (x1, y1), (x2, y2) = res.solutions
        assert x1 == pytest.approx(y2) and y1 == pytest.approx(x2)

    def test_rejects_bad_ordering(self):
        with pytest.raises(ValueError):
            symmetric_3x3_feasible(3.0, 1.0)


class TestSerialization:
    def test_json_round_trip_bit_exact(self):
        rng = np.random.default_rng(55)
        lap, _ = synthesize(random_laplacian_spectrum(rng, 12))
        text = matrix_to_json(lap.matrix)
        back = matrix_from_json(text)
        np.testing.assert_array_equal(back.diag, lap.matrix.diag)
        np.testing.assert_array_equal(back.sub, lap.matrix.sub)
        np.testing.assert_array_equal(back.super, lap.matrix.super)

    def test_json_schema_fields(self):
        t = TridiagonalMatrix([1.0, 1.0], [-1.0], [-1.0])
        obj = json.loads(matrix_to_json(t))
        assert set(obj) == {"n", "diag", "sub", "super"}
        assert obj["n"] == 2

    def test_matrix_market_round_trip(self):
        rng = np.random.default_rng(66)
        lap, _ = synthesize(random_laplacian_spectrum(rng, 9))
        text = matrix_to_matrix_market(lap.matrix)
        assert text.startswith("%%MatrixMarket matrix coordinate real general")
        back = matrix_from_matrix_market(text)
        np.testing.assert_array_equal(back.to_dense(), lap.matrix.to_dense())

    def test_laplacian_validate_catches_broken_file(self):
        t = TridiagonalMatrix([1.0, 2.0], [-1.0], [-1.0])  # row sums not zero
        with pytest.raises(ValueError, match="row sums"):
            TridiagonalLaplacian(t, "file").validate()
