import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvpairing import expr as ex
from bvpairing.measure1d import (
    BorelSet,
    CantorComponent,
    Interval,
    Measure,
    PiecewisePrimitive,
    TestFunction,
    cantor_cdf,
    cantor_cdf_array,
    measure_combine,
    measure_dominates,
    measure_eval,
    measure_pair,
    measure_tv,
)

DOM = (-1.0, 2.0)


def lebesgue01():
    return Measure(DOM, ac=PiecewisePrimitive([-1.0, 0.0, 1.0, 2.0], [ex.Const(0.0), ex.Const(1.0), ex.Const(0.0)]))


def cantor01(w=1.0):
    return Measure(DOM, cantor=[CantorComponent(w, 0.0, 1.0)])


def mixed():
    ac = PiecewisePrimitive([-1.0, 0.5, 2.0], [ex.Poly([0.0, 1.0]), ex.Sin(ex.Var())])
    return Measure(DOM, ac=ac, atoms={0.25: 2.0, 1.5: -1.0}, cantor=[CantorComponent(-0.7, 0.0, 1.0)])


class TestEval:
    def test_uniform_density(self):
        assert measure_eval(lebesgue01(), Interval.closed(0.0, 0.5)) == pytest.approx(0.5, abs=1e-14)

    def test_cantor_third(self):
        assert measure_eval(cantor01(), Interval.closed(0.0, 1 / 3)) == pytest.approx(0.5, abs=1e-14)

    def test_atom_mass(self):
        mu = Measure(DOM, atoms={0.0: 2.0})
        assert measure_eval(mu, Interval.point(0.0)) == 2.0
        assert measure_eval(mu, Interval.open(0.0, 1.0)) == 0.0

    def test_cantor_part_ignores_points(self):
        mu = cantor01(3.0)
        for p in (0.0, 1 / 3, 0.25, 1.0):
            assert measure_eval(mu, Interval.point(p)) == 0.0

    @given(st.lists(st.floats(-0.99, 1.99), min_size=1, max_size=7, unique=True))
    @settings(max_examples=40, deadline=None)
    def test_finite_additivity(self, cuts):
        mu = mixed()
        pts = sorted(set(cuts))
        edges = [-0.99] + pts + [1.99]
        edges = sorted(set(edges))
        pieces = []
        for i, (a, b) in enumerate(zip(edges, edges[1:])):
            pieces.append(Interval(a, b, i == 0, False))
            pieces.append(Interval.point(b))
        whole = measure_eval(mu, Interval.closed(edges[0], edges[-1]))
        parts = math.fsum(measure_eval(mu, p) for p in pieces)
        assert abs(whole - parts) <= 1e-12

    def test_union_of_disjoint(self):
        mu = mixed()
        S = BorelSet.of(Interval.open(-0.5, 0.2), Interval.closed(0.3, 1.6))
        direct = measure_eval(mu, S)
        assert direct == pytest.approx(measure_eval(mu, Interval.open(-0.5, 0.2)) + measure_eval(mu, Interval.closed(0.3, 1.6)), abs=1e-12)


class TestPair:
    def test_dirac(self):
        phi = TestFunction.bump(0.1, 0.5)
        assert measure_pair(Measure.dirac(DOM, 0.0), phi) == pytest.approx(phi.value(0.0), abs=1e-15)

    def test_cantor_against_stieltjes_sum(self):
        phi = TestFunction.bump(0.4, 0.9, order=3)
        xs = np.linspace(-0.5, 1.3, 400001)
        mids = 0.5 * (xs[1:] + xs[:-1])
        c = cantor_cdf_array(xs)
        vals = phi.value(mids)
        ref = float(np.sum(vals * np.diff(c)))
        assert measure_pair(cantor01(), phi, tol=1e-10) == pytest.approx(ref, abs=1e-6)

    def test_cantor_odd_about_centre_vanishes(self):
        plus = TestFunction.bump(0.3, 0.4)
        minus = TestFunction.bump(0.7, 0.4)
        assert measure_pair(cantor01(), plus) == pytest.approx(measure_pair(cantor01(), minus), abs=1e-10)

    def test_density_against_quadrature(self):
        mu = Measure(DOM, ac=PiecewisePrimitive([-1.0, 0.0, 1.0, 2.0], [ex.Const(0.0), ex.Poly([0.0, 2.0]), ex.Const(0.0)]))
        phi = TestFunction.bump(0.5, 0.8)
        xs = np.linspace(0.0, 1.0, 200001)
        vals = phi.value(xs) * 2 * xs
        ref = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(xs)))
        assert measure_pair(mu, phi, tol=1e-13) == pytest.approx(ref, abs=1e-9)

    def test_bound_by_total_variation(self):
        mu = mixed()
        tv, _, _ = measure_tv(mu)
        for phi in (TestFunction.bump(0.5, 1.0), TestFunction.bump(0.2, 0.9, height=-2.0), TestFunction.bump(1.0, 0.8, order=3)):
            a, b = phi.support
            lhs = abs(measure_pair(mu, phi))
            rhs = phi.sup() * measure_eval(tv, Interval.closed(a, b))
            assert lhs <= rhs + 1e-10


class TestTV:
    def test_negative_atom(self):
        tv, pos, neg = measure_tv(Measure(DOM, atoms={0.0: -3.0}))
        assert tv.atoms == {0.0: 3.0}
        assert pos.atoms == {}
        assert neg.atoms == {0.0: 3.0}

    def test_sign_density(self):
        mu = Measure((0.0, 1.0), ac=PiecewisePrimitive([0.0, 0.5, 1.0], [ex.Const(-1.0), ex.Const(1.0)]))
        tv, _, _ = measure_tv(mu)
        assert measure_eval(tv, Interval.open(0.0, 1.0)) == pytest.approx(1.0, abs=1e-14)

    def test_cantor_weight(self):
        tv, _, _ = measure_tv(cantor01(-2.0))
        assert measure_eval(tv, Interval.open(-1.0, 2.0)) == pytest.approx(2.0, abs=1e-14)

    @given(st.floats(-0.9, 1.9), st.floats(0.01, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_jordan(self, a, w):
        mu = mixed()
        _, pos, neg = measure_tv(mu)
        S = Interval.closed(a, min(a + w, 1.95))
        assert measure_eval(pos, S) - measure_eval(neg, S) == pytest.approx(measure_eval(mu, S), abs=1e-12)


class TestCombine:
    def test_cancel(self):
        d = Measure.dirac(DOM, 0.0)
        assert measure_combine([(1.0, d), (-1.0, d)]).is_zero()

    def test_scale(self):
        assert measure_eval(measure_combine([(2.0, lebesgue01())]), Interval.open(0.0, 1.0)) == pytest.approx(2.0)

    def test_restrict(self):
        mu = measure_combine([(1.0, Measure.dirac(DOM, 0.0)), (1.0, Measure.dirac(DOM, 1.0))])
        assert mu.restrict(BorelSet.of(Interval.point(0.0))).atoms == {0.0: 1.0}


class TestCantorCdf:
    def test_unit_values(self):
        assert cantor_cdf(1 / 3) == 0.5
        assert cantor_cdf(Fraction(1, 4)) == pytest.approx(1 / 3, abs=1e-16)
        assert cantor_cdf(0.25) == pytest.approx(1 / 3, abs=1e-15)
        assert cantor_cdf(0.0) == 0.0

    def test_exact_rational(self):
        assert cantor_cdf(Fraction(1, 4), precision=80) == pytest.approx(1 / 3, abs=1e-16)

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, x):
        assert cantor_cdf(1.0 - x) == pytest.approx(1.0 - cantor_cdf(x), abs=1e-9)

    def test_monotone_and_flat_on_gaps(self):
        xs = np.linspace(0.0, 1.0, 20001)
        ys = cantor_cdf_array(xs)
        assert np.all(np.diff(ys) >= -1e-15)
        gap = np.linspace(1 / 3 + 1e-9, 2 / 3 - 1e-9, 101)
        assert np.ptp(cantor_cdf_array(gap)) == 0.0
        assert np.all(cantor_cdf_array(gap) == 0.5)

    def test_array_matches_scalar(self):
        xs = np.random.default_rng(3).uniform(-0.2, 1.2, 5000)
        assert np.array_equal(cantor_cdf_array(xs), np.array([cantor_cdf(float(x)) for x in xs]))


class TestDominates:
    def test_examples(self):
        d1, d2 = Measure.dirac(DOM, 0.0), Measure.dirac(DOM, 0.0, 2.0)
        samples = [BorelSet.of(Interval.point(0.0)), BorelSet.of(Interval.open(-0.5, 0.5))]
        assert measure_dominates(d2, d1, samples)
        assert not measure_dominates(d1, d2, samples)
        leb, half = Measure.lebesgue(DOM), Measure.lebesgue(DOM, density=0.5)
        assert measure_dominates(leb, half, [BorelSet.of(Interval.open(-0.5, 1.5))])


class TestIntervals:
    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Interval(1.0, 1.0, True, False)

    def test_borel_merge(self):
        S = BorelSet.of(Interval(0.0, 1.0, False, True), Interval.open(1.0, 2.0))
        assert len(S.parts) == 1
