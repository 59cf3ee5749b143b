import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfxbo.quadrature import (
    QuadratureError,
    QuadratureRule,
    RecurrenceCoeffs,
    eval_orthopoly,
    gauss_hermite,
    gauss_legendre,
    golub_welsch,
    grid_inner_product,
    hermite_coeffs,
    integrate,
    legendre_coeffs,
    read_rule_csv,
    stieltjes_coeffs,
    symmetric_tridiagonal_eig,
    write_rule_csv,
)
from cfxbo.validate import hermite_moment, legendre_moment

SQRT2PI = math.sqrt(2.0 * math.pi)


def trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


class TestCoefficients:
    def test_hermite_jacobi_n3(self):
        c = hermite_coeffs(3)
        assert c.alpha.tolist() == [0.0, 0.0, 0.0]
        assert np.allclose(c.offdiag, [1.0, math.sqrt(2.0)], rtol=0, atol=1e-15)
        J = c.jacobi()
        assert J[1].tolist() == pytest.approx([1.0, 0.0, math.sqrt(2.0)])

    def test_single_node_jacobi(self):
        assert hermite_coeffs(1).jacobi().tolist() == [[0.0]]

    def test_hermite_orthogonality(self):
        x = np.linspace(-12, 12, 1_000_001)
        phi = np.exp(-x * x / 2) / SQRT2PI
        c = hermite_coeffs(5)
        val = trapezoid(eval_orthopoly(c, 2, x) * eval_orthopoly(c, 3, x) * phi, x)
        assert abs(val) < 1e-10

    def test_legendre_orthogonality(self):
        x = np.linspace(-1, 1, 1_000_001)
        c = legendre_coeffs(5)
        assert abs(trapezoid(eval_orthopoly(c, 2, x) * eval_orthopoly(c, 4, x), x)) < 1e-10

    def test_validation(self):
        with pytest.raises(ValueError):
            RecurrenceCoeffs([0.0, 0.0], [-1.0], 1.0)
        with pytest.raises(ValueError):
            RecurrenceCoeffs([0.0, 0.0], [1.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            RecurrenceCoeffs([0.0], [], 0.0)
        with pytest.raises(ValueError):
            hermite_coeffs(0)

    @pytest.mark.parametrize("n", [1, 4, 9])
    def test_stieltjes_recovers_hermite(self, n):
        x = np.linspace(-14, 14, 200_001)
        w = np.exp(-x * x / 2) * (x[1] - x[0])
        c = stieltjes_coeffs(grid_inner_product(x, w), n)
        ref = hermite_coeffs(n)
        assert np.allclose(c.alpha, ref.alpha, atol=1e-8)
        assert np.allclose(c.beta, ref.beta, rtol=1e-8, atol=1e-8)
        assert c.mu0 == pytest.approx(SQRT2PI, rel=1e-8)

    @pytest.mark.parametrize("n", [1, 4, 8])
    def test_stieltjes_recovers_legendre(self, n):
        rule = gauss_legendre(40)
        c = stieltjes_coeffs(grid_inner_product(rule.nodes, rule.weights), n)
        ref = legendre_coeffs(n)
        assert np.allclose(c.alpha, ref.alpha, atol=1e-8)
        assert np.allclose(c.beta, ref.beta, rtol=1e-8)

    def test_stieltjes_first_alpha_is_mean(self):
        x = np.array([0.0, 1.0, 3.0])
        w = np.array([1.0, 2.0, 1.0])
        c = stieltjes_coeffs(grid_inner_product(x, w), 1)
        assert c.alpha[0] == pytest.approx((0 + 2 + 3) / 4)

    def test_stieltjes_degenerate_measure(self):
        # two support points cannot carry three orthogonal polynomials
        with pytest.raises(QuadratureError):
            stieltjes_coeffs(grid_inner_product(np.array([0.0, 1.0]), np.array([1.0, 1.0])), 3)


class TestRules:
    def test_legendre_two_point(self):
        r = gauss_legendre(2)
        assert r.nodes == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)], abs=1e-15)
        assert r.weights == pytest.approx([1.0, 1.0], abs=1e-14)

    def test_legendre_one_point(self):
        r = gauss_legendre(1)
        assert r.nodes.tolist() == [0.0] and r.weights[0] == pytest.approx(2.0, rel=1e-15)

    def test_hermite_three_point(self):
        r = gauss_hermite(3)
        assert r.nodes == pytest.approx([-math.sqrt(3), 0.0, math.sqrt(3)], abs=1e-14)
        assert r.weights == pytest.approx([SQRT2PI / 6, 2 * SQRT2PI / 3, SQRT2PI / 6], rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 64, 128, 256])
    def test_against_numpy(self, n):
        x, w = np.polynomial.hermite_e.hermegauss(n)
        r = gauss_hermite(n)
        assert np.allclose(r.nodes, x, rtol=0, atol=1e-11 * max(1, np.abs(x).max()))
        big = w > 1e-200 * w.max()
        assert np.allclose(r.weights[big], w[big], rtol=1e-9, atol=1e-13 * w.max())
        xl, wl = np.polynomial.legendre.leggauss(n)
        rl = gauss_legendre(n)
        assert np.allclose(rl.nodes, xl, atol=1e-13)
        assert np.allclose(rl.weights, wl, rtol=1e-11)

    @pytest.mark.parametrize("family", ["hermite", "legendre"])
    @pytest.mark.parametrize("n", range(1, 65))
    def test_positive_sorted_mass(self, family, n):
        r = gauss_hermite(n) if family == "hermite" else gauss_legendre(n)
        assert np.all(r.weights > 0.0)
        assert np.all(np.diff(r.nodes) > 0.0)
        assert np.sum(r.weights) == pytest.approx(r.mass, rel=1e-12)

    @pytest.mark.parametrize("n", range(1, 11))
    def test_exactness(self, n):
        for make, moment in ((gauss_hermite, hermite_moment), (gauss_legendre, legendre_moment)):
            r = make(n)
            for k in range(2 * n):
                exact = moment(k)
                got = integrate(r, lambda x, k=k: x ** k)
                assert got == pytest.approx(exact, rel=1e-10, abs=1e-10 * abs(moment(k + (k % 2))))

    def test_integrate_examples(self):
        assert integrate(gauss_hermite(8), lambda x: x * x) == pytest.approx(SQRT2PI, rel=1e-13)
        assert integrate(gauss_legendre(5), lambda x: x ** 9) == pytest.approx(0.0, abs=1e-15)

    def test_integrate_scalar_callable(self):
        assert integrate(gauss_legendre(4), lambda x: math.cos(x)) == pytest.approx(2 * math.sin(1), rel=1e-6)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_error_theorem(self, n):
        # error on x^{2n} equals ||p_n||^2 for the monic p_n
        for make, coeffs, moment in ((gauss_hermite, hermite_coeffs, hermite_moment),
                                     (gauss_legendre, legendre_coeffs, legendre_moment)):
            c = coeffs(n + 1)
            err = moment(2 * n) - integrate(make(n), lambda x: x ** (2 * n))
            norm2 = c.mu0 * math.prod(c.beta[:n])
            assert err == pytest.approx(norm2, rel=1e-9)

    @pytest.mark.parametrize("n", [3, 7, 12])
    def test_nodes_are_roots(self, n):
        for make, coeffs, support in ((gauss_hermite, hermite_coeffs, np.linspace(-6, 6, 2001)),
                                      (gauss_legendre, legendre_coeffs, np.linspace(-1, 1, 2001))):
            c = coeffs(n + 1)
            r = make(n)
            scale = np.max(np.abs(eval_orthopoly(c, n, support)))
            assert np.max(np.abs(eval_orthopoly(c, n, r.nodes))) <= 1e-9 * scale

    def test_legendre_weight_cross_check(self):
        # w_i = 2 / ((1 - x_i^2) P_n'(x_i)^2)
        n = 9
        r = gauss_legendre(n)
        dP = np.polynomial.legendre.Legendre.basis(n).deriv()(r.nodes)
        assert np.allclose(r.weights, 2.0 / ((1 - r.nodes ** 2) * dP ** 2), rtol=1e-12)

    def test_scaled(self):
        r = gauss_legendre(6).scaled(0.0, 3.0)
        assert integrate(r, lambda x: x ** 2) == pytest.approx(9.0, rel=1e-14)
        assert r.mass == pytest.approx(3.0)

    def test_golub_welsch_order(self):
        with pytest.raises(ValueError):
            golub_welsch(hermite_coeffs(3), 4)


class TestEigensolver:
    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_dense(self, n, seed):
        rng = np.random.default_rng(seed)
        d = rng.normal(size=n)
        e = rng.uniform(0.1, 2.0, size=n - 1)
        vals, first = symmetric_tridiagonal_eig(d, e)
        T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
        ref_vals, ref_vecs = np.linalg.eigh(T)
        assert np.allclose(vals, ref_vals, atol=1e-12 * max(1, np.abs(ref_vals).max()))
        assert np.allclose(first ** 2, ref_vecs[0] ** 2, atol=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            symmetric_tridiagonal_eig([1.0, 2.0], [1.0, 1.0])


class TestEvalOrthopoly:
    def test_hermite_cubic(self):
        assert eval_orthopoly(hermite_coeffs(5), 3, 2.0) == pytest.approx(2.0)

    def test_legendre_at_one(self):
        for k in range(8):
            assert eval_orthopoly(legendre_coeffs(8), k, 1.0) == pytest.approx(1.0, rel=1e-13)

    def test_hermite_quartic(self):
        x = np.random.default_rng(0).normal(size=20)
        assert np.allclose(eval_orthopoly(hermite_coeffs(5), 4, x), x ** 4 - 6 * x ** 2 + 3)


class TestCsv:
    def test_round_trip(self):
        r = gauss_hermite(10)
        buf = io.StringIO()
        write_rule_csv(r, buf)
        text = buf.getvalue()
        assert text.splitlines()[0].startswith("# mass=")
        assert text.splitlines()[1] == "node,weight"
        back = read_rule_csv(io.StringIO(text))
        assert np.array_equal(back.nodes, r.nodes) and np.array_equal(back.weights, r.weights)
        assert back.mass == r.mass

    def test_single_node(self):
        buf = io.StringIO()
        write_rule_csv(gauss_hermite(1), buf)
        x, w = buf.getvalue().splitlines()[2].split(",")
        assert float(x) == 0.0 and float(w) == pytest.approx(SQRT2PI, rel=1e-15)

    def test_rule_type(self):
        assert isinstance(read_rule_csv(io.StringIO("node,weight\n0,1\n")), QuadratureRule)
