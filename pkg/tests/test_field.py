import numpy as np
import pytest

from bvpairing import expr as ex
from bvpairing.bv1d import BVFunction
from bvpairing.errors import InvalidCantorOverlap, TRangeError
from bvpairing.field import (
    Field,
    TensorTerm,
    field_B,
    field_composite,
    field_div_Bt,
    field_div_bt,
    field_F,
    field_sigma,
    field_traces,
)
from bvpairing.measure1d import CantorComponent, Interval, measure_eval

from conftest import sign_field


def tensor_s5():
    dom = (-2.0, 2.5)
    A1 = BVFunction(dom, -1.0, None, [(0.0, 2.0)])
    A2 = BVFunction(dom, -1.0, None, [(0.5, 2.0)])
    g2 = ex.Clamp(ex.Var("t"), -1.0, 1.0)
    return Field(dom, [TensorTerm(ex.Const(1.0), A1), TensorTerm(g2, A2)], T=3.0, kind="tensor")


class TestPrimitive:
    def test_linear_sign(self, s2_field):
        assert field_B(s2_field, 0.0, "right", 2.0) == pytest.approx(2.0)
        assert field_B(s2_field, 0.0, "left", 2.0) == pytest.approx(-2.0)

    def test_zero_level(self, s3_field):
        for x in (-1.0, 0.0, 1.3):
            assert field_B(s3_field, x, "right", 0.0) == 0.0

    def test_nonlinear_vanishes_at_one(self, s3_field):
        assert field_B(s3_field, 0.0, "right", 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_t_range(self, s2_field):
        with pytest.raises(TRangeError):
            field_B(s2_field, 0.0, "right", 2.5)


class TestDivergence:
    def test_b_at_zero(self, s3_field):
        assert field_div_bt(s3_field, 0.0).atoms == {0.0: pytest.approx(2.0)}

    def test_b_vanishes(self, s3_field):
        assert field_div_bt(s3_field, 0.5).is_zero()

    def test_B_linear(self, s2_field):
        assert field_div_Bt(s2_field, 1.0).atoms == {0.0: pytest.approx(2.0)}

    def test_B_nonlinear_at_one(self, s3_field):
        mu = field_div_Bt(s3_field, 1.0)
        assert all(abs(w) < 1e-15 for w in mu.atoms.values())

    def test_B_at_zero_level(self, s3_field):
        assert field_div_Bt(s3_field, 0.0).is_zero()

    def test_autonomous(self):
        fd = Field((-1.0, 1.0), [], b0=ex.Cos(ex.Var("t")), T=3.0, kind="autonomous")
        assert field_div_bt(fd, 0.3).is_zero()

    def test_B_is_integral_of_b(self, s3_field):
        ts = np.linspace(0.0, 0.8, 801)
        vals = [field_div_bt(s3_field, float(t)).atoms.get(0.0, 0.0) for t in ts]
        trap = float(np.sum(0.5 * (np.array(vals[1:]) + np.array(vals[:-1]))) * (ts[1] - ts[0]))
        assert trap == pytest.approx(field_div_Bt(s3_field, 0.8).atoms[0.0], abs=1e-5)


class TestSigma:
    def test_linear(self, s2_field):
        sys = field_sigma(s2_field)
        assert sys.sigma.atoms == {0.0: pytest.approx(2.0)}
        assert sys.f(sys.locate(0.0), 0.4) == pytest.approx(1.0)
        assert field_F(sys, 0.0, 0.7) == pytest.approx(0.7)

    def test_nonlinear(self, s3_field):
        sys = field_sigma(s3_field)
        assert sys.sigma.atoms == {0.0: pytest.approx(2.0)}
        assert field_F(sys, 0.0, 0.5) == pytest.approx(0.25)
        for t in np.linspace(0.0, 1.0, 11):
            assert field_F(sys, 0.0, float(t)) == pytest.approx(t - t * t, abs=1e-14)

    def test_two_atoms(self):
        sys = field_sigma(tensor_s5())
        assert sys.sigma.atoms == {0.0: pytest.approx(2.0), 0.5: pytest.approx(2.0)}
        ts = np.linspace(-3.0, 3.0, 25)
        assert np.allclose(sys.f(sys.locate(0.0), ts), 1.0)
        assert np.allclose(sys.f(sys.locate(0.5), ts), np.clip(ts, -1.0, 1.0))

    def test_envelope_properties(self):
        sys = field_sigma(tensor_s5())
        ts = np.linspace(-3.0, 3.0, 61)
        for x in (0.0, 0.5):
            part = sys.locate(x)
            assert np.all(np.abs(sys.f(part, ts)) <= 1.0 + 1e-14)
            assert float(sys.F(part, np.array(0.0))) == 0.0
            F = sys.F(part, ts)
            assert np.all(np.abs(np.diff(F)) <= np.diff(ts) + 1e-14)

    def test_t_range(self, s2_field):
        with pytest.raises(TRangeError):
            field_F(field_sigma(s2_field), 0.0, 3.0)


class TestTraces:
    def test_sign(self, s2_field):
        tb = field_traces(s2_field, 0.0, 1)
        t = np.linspace(0.0, 1.0, 5)
        assert np.allclose(tb.beta_i(t), t) and np.allclose(tb.beta_e(t), -t)
        assert np.allclose(tb.gamma_i(t), 1.0) and np.allclose(tb.gamma_e(t), -1.0)

    def test_smooth_point(self, s2_field):
        tb = field_traces(s2_field, 0.5, 1)
        assert float(tb.gamma_i(0.3)) == float(tb.gamma_e(0.3)) == 1.0

    def test_nonlinear(self, s3_field):
        tb = field_traces(s3_field, 0.0, 1)
        t = np.linspace(-1.0, 2.0, 13)
        g = 1.0 - 2.0 * np.clip(t, 0.0, 1.0)
        assert np.allclose(tb.gamma_i(t), g) and np.allclose(tb.gamma_e(t), -g)

    def test_trace_jump_is_atom(self, s3_field):
        tb = field_traces(s3_field, 0.0, 1)
        for t in np.linspace(-2.0, 2.0, 9):
            atom = measure_eval(field_div_Bt(s3_field, float(t)), Interval.point(0.0))
            assert float(tb.beta_i(t) - tb.beta_e(t)) == pytest.approx(atom, abs=1e-14)

    def test_lipschitz(self, s3_field):
        tb = field_traces(s3_field, 0.0, 1)
        t = np.linspace(-2.0, 2.0, 401)
        assert np.all(np.abs(np.diff(tb.beta_i(t))) <= tb.lipschitz() * np.diff(t) + 1e-14)

    def test_normal_checked(self, s2_field):
        with pytest.raises(ValueError):
            field_traces(s2_field, 0.0, 0)


class TestComposite:
    def test_linear(self, s2_field, chi01):
        v = field_composite(s2_field, chi01)
        assert float(v.left(0.0)) == pytest.approx(0.0)
        assert float(v.right(0.0)) == pytest.approx(1.0)
        assert v.div_point(0.0) == pytest.approx(1.0)

    def test_nonlinear(self, s3_field, chi01):
        v = field_composite(s3_field, chi01)
        assert float(v.right(0.0)) == pytest.approx(0.0, abs=1e-15)
        assert v.div_point(0.0) == pytest.approx(0.0, abs=1e-15)

    def test_zero_field(self, chi01):
        fd = Field((-2.0, 2.0), [], T=2.0, kind="separated")
        v = field_composite(fd, chi01)
        assert v.div_point(0.0) == 0.0 and v.div_point(1.0) == 0.0

    def test_traces_match_composite(self, s3_field, chi01):
        v = field_composite(s3_field, chi01)
        for x0 in (0.0, 1.0):
            j = chi01.jump_at(x0)
            tb = field_traces(s3_field, x0, j.nu)
            assert j.nu * float(getattr(v, tb.inner_side)(x0)) == pytest.approx(float(tb.beta_i(j.u_i)), abs=1e-12)
            assert j.nu * float(getattr(v, tb.outer_side)(x0)) == pytest.approx(float(tb.beta_e(j.u_e)), abs=1e-12)

    def test_weak_and_structural_agree(self, s3_field, chi01, bump0):
        v = field_composite(s3_field, chi01)
        assert v.weak_pair(bump0) == pytest.approx(v.structural_pair(bump0), abs=1e-9)

    def test_needs_headroom(self, s2_field):
        u = BVFunction((-2.0, 2.0), 0.0, None, [(0.0, 1.5)])
        with pytest.raises(TRangeError):
            field_composite(s2_field, u)


def test_overlapping_cantor_supports_rejected():
    dom = (-1.0, 2.0)
    A1 = BVFunction(dom, 0.0, None, [], [CantorComponent(1.0, 0.0, 1.0)])
    A2 = BVFunction(dom, 0.0, None, [], [CantorComponent(1.0, 0.5, 1.5)])
    with pytest.raises(InvalidCantorOverlap):
        Field(dom, [TensorTerm(ex.Const(1.0), A1), TensorTerm(ex.Const(1.0), A2)], T=2.0)


def test_sign_field_helper_matches_fixture(scenario):
    sc = scenario("s2_sign_linear")
    ours = sign_field()
    for t in (-1.0, 0.5, 1.7):
        for side in ("left", "right"):
            assert field_B(sc.field, 0.0, side, t) == field_B(ours, 0.0, side, t)
