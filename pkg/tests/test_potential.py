import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfxbo.potential import (
    INV_E,
    Branch,
    PotentialKind,
    PotentialSpec,
    ep_derivative,
    ep_value,
    lambert_w,
    superlevel_roots,
    target_membership,
    unit_roots,
)
from scipy.optimize import brentq

SEP01 = PotentialSpec(PotentialKind.SEP, 0.0, 1.0)


def bisect_w(c, lo, hi):
    return brentq(lambda w: w * math.exp(w) - c, lo, hi, xtol=1e-15, rtol=1e-15)


class TestLambertW:
    def test_zero(self):
        assert lambert_w(Branch.K0, 0.0) == 0.0

    def test_branch_point(self):
        assert lambert_w(0, -INV_E) == pytest.approx(-1.0, abs=1e-7)
        assert lambert_w(-1, -INV_E) == pytest.approx(-1.0, abs=1e-7)

    def test_lower_branch_against_bisection(self):
        ref = bisect_w(-0.1, -50.0, -1.0)
        assert lambert_w(-1, -0.1) == pytest.approx(ref, rel=1e-13)
        assert ref == pytest.approx(-3.5772, abs=1e-4)

    @pytest.mark.parametrize("c", [1e-300, 1e-8, 0.5, 1.0, math.e, 1e3, 1e100])
    def test_principal_positive(self, c):
        w = lambert_w(0, c)
        assert w * math.exp(w) == pytest.approx(c, rel=1e-13)

    def test_omega_constant(self):
        assert lambert_w(0, 1.0) == pytest.approx(0.5671432904097838, rel=1e-15)

    @pytest.mark.parametrize("branch,c", [(0, -0.5), (-1, -0.5), (-1, 0.0), (-1, 0.3), (0, math.nan)])
    def test_domain_errors(self, branch, c):
        with pytest.raises(ValueError):
            lambert_w(branch, c)

    def test_bad_branch(self):
        with pytest.raises(ValueError):
            lambert_w(1, 0.1)

    @given(st.floats(min_value=-INV_E, max_value=1e6))
    @settings(max_examples=300, deadline=None)
    def test_round_trip_principal(self, c):
        w = lambert_w(0, c)
        assert w >= -1.0
        assert w * math.exp(w) == pytest.approx(c, rel=1e-12, abs=1e-300)

    @given(st.floats(min_value=-INV_E, max_value=-1e-300))
    @settings(max_examples=300, deadline=None)
    def test_round_trip_lower(self, c):
        w = lambert_w(-1, c)
        assert w <= -1.0
        assert w * math.exp(w) == pytest.approx(c, rel=1e-12)

    @pytest.mark.parametrize("delta", [1e-16, 1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 0.05])
    def test_near_branch_point(self, delta):
        c = -INV_E + delta
        for k in (0, -1):
            w = lambert_w(k, c)
            lo, hi = (-1.0, 0.0) if k == 0 else (-60.0, -1.0)
            assert w * math.exp(w) == pytest.approx(c, rel=1e-12)
            if delta > 1e-9:
                assert w == pytest.approx(bisect_w(c, lo, hi), abs=1e-9)


class TestEpValue:
    def test_known_values(self):
        assert ep_value(SEP01, 0.0) == 0.0
        assert ep_value(SEP01, 2.0) == pytest.approx(4.0 * math.exp(-4.0), rel=1e-15)

    @pytest.mark.parametrize("kind", list(PotentialKind))
    def test_center_zero(self, kind):
        assert ep_value(PotentialSpec(kind, 0.3, 0.7), 0.3) == 0.0

    def test_peak(self):
        spec = PotentialSpec("SEP", 1.5, 0.25)
        assert ep_value(spec, 1.75) == pytest.approx(INV_E, rel=1e-15)
        assert ep_value(spec, 1.25) == pytest.approx(INV_E, rel=1e-15)

    def test_rectified(self):
        assert ep_value(PotentialSpec("AEP+", 0.0, 1.0), -5.0) == 0.0
        assert ep_value(PotentialSpec("AEP-", 0.0, 1.0), 5.0) == 0.0

    def test_extreme_outputs_do_not_overflow(self):
        with np.errstate(over="raise", invalid="raise"):
            assert ep_value(SEP01, np.array([1e200, -1e200])).tolist() == [0.0, 0.0]

    def test_array_in_array_out(self):
        out = ep_value(SEP01, np.linspace(-3, 3, 7))
        assert out.shape == (7,)

    @given(st.floats(-50, 50), st.floats(0.01, 10), st.floats(-100, 100))
    def test_bounds_and_decomposition(self, c, w, y):
        sep = ep_value(PotentialSpec("SEP", c, w), y)
        plus = ep_value(PotentialSpec("AEP+", c, w), y)
        minus = ep_value(PotentialSpec("AEP-", c, w), y)
        assert 0.0 <= sep <= INV_E
        assert sep == pytest.approx(plus + minus, abs=1e-300)

    @given(st.floats(-50, 50), st.floats(0.01, 10), st.floats(0, 100))
    def test_sep_symmetry(self, c, w, d):
        spec = PotentialSpec("SEP", c, w)
        assert ep_value(spec, c + d) == pytest.approx(ep_value(spec, c - d), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("kind", list(PotentialKind))
    def test_derivative_matches_differences(self, kind):
        spec = PotentialSpec(kind, 0.2, 0.8)
        h = 1e-6
        for y in np.linspace(-2.0, 2.0, 41):
            if abs(y - 0.2) < 1e-3:
                continue
            fd = (ep_value(spec, y + h) - ep_value(spec, y - h)) / (2 * h)
            assert ep_derivative(spec, y) == pytest.approx(fd, abs=1e-8)


class TestPotentialSpec:
    @pytest.mark.parametrize("text,kind", [("AEP+", "AEP_PLUS"), ("aep-", "AEP_MINUS"), ("aep_plus", "AEP_PLUS"),
                                           ("SEP", "SEP"), ("AEP_MINUS", "AEP_MINUS")])
    def test_parse(self, text, kind):
        assert PotentialKind.parse(text) is PotentialKind(kind)

    def test_parse_unknown(self):
        with pytest.raises(ValueError):
            PotentialKind.parse("gaussian")

    @pytest.mark.parametrize("width", [0.0, -1.0, math.inf, math.nan])
    def test_width_positive(self, width):
        with pytest.raises(ValueError):
            PotentialSpec("SEP", 0.0, width)

    def test_from_target(self):
        spec = PotentialSpec.from_target("AEP-", 0.93, 0.5)
        assert spec.width == pytest.approx(0.43)
        assert ep_value(spec, 0.5) == pytest.approx(INV_E)

    def test_from_target_wrong_side(self):
        with pytest.raises(ValueError):
            PotentialSpec.from_target("AEP-", 0.3, 0.5)
        with pytest.raises(ValueError):
            PotentialSpec.from_target("AEP+", 0.3, 0.1)


class TestSuperlevel:
    def test_peak_level_degenerates(self):
        s = superlevel_roots(SEP01, INV_E)
        assert len(s.intervals) == 2
        for (lo, hi), ref in zip(s.intervals, (-1.0, 1.0)):
            assert lo == pytest.approx(ref, abs=1e-7) and hi == pytest.approx(ref, abs=1e-7)

    def test_scaled_one_sided(self):
        (lo, hi), = superlevel_roots(PotentialSpec("AEP+", 0.0, 2.0), INV_E).intervals
        assert lo == pytest.approx(2.0, abs=1e-7) and hi == pytest.approx(2.0, abs=1e-7)

    def test_endpoints_hit_level(self):
        s = superlevel_roots(SEP01, 0.1)
        r0 = math.sqrt(-lambert_w(0, -0.1))
        r1 = math.sqrt(-lambert_w(-1, -0.1))
        assert s.intervals == ((-r1, -r0), (r0, r1))
        for lo, hi in s.intervals:
            assert ep_value(SEP01, lo) == pytest.approx(0.1, abs=1e-12)
            assert ep_value(SEP01, hi) == pytest.approx(0.1, abs=1e-12)

    def test_tiny_level(self):
        assert unit_roots(0.0) == (0.0, math.inf)
        assert unit_roots(1e-301) == (0.0, math.inf)

    def test_invalid_level(self):
        with pytest.raises(ValueError):
            superlevel_roots(SEP01, 0.5)
        with pytest.raises(ValueError):
            superlevel_roots(SEP01, 0.0)

    @given(st.floats(1e-300, INV_E))
    @settings(max_examples=300)
    def test_root_ordering(self, level):
        r0, r1 = unit_roots(level)
        assert 0.0 <= r0 <= 1.0 <= r1

    def test_roots_converge_to_one(self):
        r0, r1 = unit_roots(INV_E * (1 - 1e-12))
        assert abs(r0 - 1) < 1e-5 and abs(r1 - 1) < 1e-5

    @pytest.mark.parametrize("kind,count", [("SEP", 2), ("AEP+", 1), ("AEP-", 1)])
    def test_interval_count(self, kind, count):
        s = superlevel_roots(PotentialSpec(kind, 0.0, 1.0), 0.2)
        assert len(s.intervals) == count
        flat = [v for iv in s.intervals for v in iv]
        assert flat == sorted(flat)


class TestMembership:
    def test_maximiser_in_target(self):
        assert target_membership(SEP01, INV_E, 0.0, 1.0)

    def test_center_not_in_target(self):
        assert not target_membership(SEP01, INV_E, 0.0, 0.0)

    def test_grid(self):
        ys = np.arange(-5.0, 5.0, 1e-3)
        got = np.array([target_membership(SEP01, 0.2, 0.5, y) for y in ys])
        assert np.array_equal(got, ep_value(SEP01, ys) >= 0.1)

    def test_consistent_with_intervals(self):
        rng = np.random.default_rng(0)
        kinds = list(PotentialKind)
        for _ in range(10_000):
            spec = PotentialSpec(kinds[rng.integers(3)], rng.normal(), rng.uniform(0.1, 3))
            level = rng.uniform(1e-4, INV_E)
            y = spec.center + spec.width * rng.uniform(-4, 4)
            inside = superlevel_roots(spec, level).contains(y)
            rho = ep_value(spec, y)
            if abs(rho - level) > 1e-12:
                assert target_membership(spec, level, 0.0, y) == inside

    def test_bad_args(self):
        with pytest.raises(ValueError):
            target_membership(SEP01, 0.5, 0.1, 0.0)
        with pytest.raises(ValueError):
            target_membership(SEP01, 0.2, 1.0, 0.0)
