import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bvpairing import expr as ex
from bvpairing.bv1d import BVFunction, bv_derivative
from bvpairing.errors import SelectionMismatch
from bvpairing.field import Field, TensorTerm, field_traces
from bvpairing.measure1d import Interval, TestFunction, measure_eval, measure_tv
from bvpairing.pairing import (
    Selection,
    pairing_densities,
    pairing_external,
    pairing_internal,
    pairing_L,
    pairing_match_external,
    pairing_match_internal,
    pairing_standard,
    pairing_V,
    weak_form,
)

LAMBDAS = [0.0, 0.25, 0.5, 1.0]


class TestInternal:
    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_linear_atoms(self, s2_field, chi01, lam):
        pm = pairing_internal(s2_field, chi01, Selection.const(chi01, lam))
        assert pm.atom(0.0) == pytest.approx(1 - 2 * lam, abs=1e-12)
        assert pm.atom(1.0) == pytest.approx(-1.0, abs=1e-12)

    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_nonlinear_atoms(self, s3_field, chi01, lam):
        pm = pairing_internal(s3_field, chi01, Selection.const(chi01, lam))
        assert pm.atom(0.0) == pytest.approx(-2 * lam * (1 - lam), abs=1e-12)

    def test_autonomous_is_divergence_of_primitive(self):
        dom = (-1.0, 1.5)
        fd = Field(dom, [], b0=ex.Cos(ex.Var("t")), T=3.0, kind="autonomous")
        u = BVFunction(dom, 0.5, None, [(0.0, 1.0), (0.8, -0.7)])
        ref = pairing_internal(fd, u, Selection.const(u, 0.0))
        for lam in (0.3, 1.0):
            pm = pairing_internal(fd, u, Selection.const(u, lam))
            for x in (0.0, 0.8):
                assert pm.atom(x) == pytest.approx(ref.atom(x), abs=1e-14)
        assert ref.atom(0.0) == pytest.approx(np.sin(1.5) - np.sin(0.5), abs=1e-14)

    def test_atom_is_zeta(self, s3_field, chi01):
        for lam in np.linspace(0.0, 1.0, 11):
            pm = pairing_internal(s3_field, chi01, Selection.const(chi01, float(lam)))
            tb = field_traces(s3_field, 0.0, 1)
            assert pm.atom(0.0) == pytest.approx(float(tb.zeta(lam, 0.0, 1.0)), abs=1e-12)

    def test_selection_must_cover_jumps(self, s2_field, chi01):
        with pytest.raises(SelectionMismatch):
            pairing_internal(s2_field, chi01, Selection.from_map({0.0: 0.5}))


class TestExternal:
    @pytest.mark.parametrize("Lam", LAMBDAS)
    def test_nonlinear_atom_vanishes(self, s3_field, chi01, Lam):
        pm = pairing_external(s3_field, chi01, Selection.const(chi01, Lam))
        assert pm.atom(0.0) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("Lam", LAMBDAS)
    def test_linear_matches_internal(self, s2_field, chi01, Lam):
        ext = pairing_external(s2_field, chi01, Selection.const(chi01, Lam))
        assert ext.atom(0.0) == pytest.approx(1 - 2 * Lam, abs=1e-12)

    def test_standard_is_half(self, s3_field, chi01):
        a = pairing_standard(s3_field, chi01)
        b = pairing_external(s3_field, chi01, Selection.const(chi01, 0.5))
        assert a.atom(0.0) == b.atom(0.0)

    def test_agree_off_jumps(self, s3_field, chi01):
        pms = [
            pairing_internal(s3_field, chi01, Selection.const(chi01, 0.3)),
            pairing_external(s3_field, chi01, Selection.const(chi01, 0.8)),
            pairing_L(s3_field, chi01)[0],
            pairing_V(s3_field, chi01)[0],
        ]
        for E in (Interval.open(0.1, 0.9), Interval.open(-1.5, -0.2), Interval.open(1.05, 1.9)):
            vals = [pm.eval(E) for pm in pms]
            assert max(vals) - min(vals) <= 1e-10


class TestL:
    def test_nonlinear(self, s3_field, chi01):
        pm, wit = pairing_L(s3_field, chi01)
        assert pm.atom(0.0) == pytest.approx(-0.5, abs=1e-9)
        assert wit.at(0.0) == pytest.approx(0.5, abs=1e-9)

    def test_linear(self, s2_field, chi01):
        pm, wit = pairing_L(s2_field, chi01)
        assert pm.atom(0.0) == pytest.approx(-1.0, abs=1e-9)
        assert wit.at(0.0) == pytest.approx(1.0, abs=1e-9)

    def test_minimal_on_nonnegative(self, s3_field, chi01, bump0):
        L = pairing_L(s3_field, chi01)[0].pair(bump0)
        for lam in np.linspace(0.0, 1.0, 11):
            assert L <= pairing_internal(s3_field, chi01, Selection.const(chi01, float(lam))).pair(bump0) + 1e-10

    def test_atom_is_min_zeta(self, s3_field, chi01):
        tb = field_traces(s3_field, 0.0, 1)
        s = np.linspace(0.0, 1.0, 100001)
        assert pairing_L(s3_field, chi01)[0].atom(0.0) == pytest.approx(float(np.min(tb.zeta(s, 0.0, 1.0))), abs=1e-9)


class TestV:
    def test_nonlinear(self, s3_field, chi01):
        pm, sel, theta = pairing_V(s3_field, chi01)
        assert pm.atom(0.0) == pytest.approx(0.0, abs=1e-10)
        assert theta[0.0] == pytest.approx(0.0, abs=1e-10)
        assert sel.at(0.0) == 0.0

    def test_linear(self, s2_field, chi01):
        pm, sel, _ = pairing_V(s2_field, chi01)
        assert pm.atom(0.0) == pytest.approx(0.0, abs=1e-10)
        assert sel.at(0.0) == pytest.approx(0.5, abs=1e-10)

    def test_shifted_sign(self, s2v_field, chi01):
        pm, sel, theta = pairing_V(s2v_field, chi01)
        assert pm.atom(0.0) == pytest.approx(1.0, abs=1e-10)
        assert sel.at(0.0) == pytest.approx(1.0, abs=1e-10)
        assert theta[0.0] == pytest.approx(1.0, abs=1e-10)

    def test_setwise_minimal(self, s2v_field, chi01):
        V = pairing_V(s2v_field, chi01)[0]
        for lam in np.linspace(0.0, 1.0, 11):
            pm = pairing_internal(s2v_field, chi01, Selection.const(chi01, float(lam)))
            for E in (Interval.closed(-0.5, 0.5), Interval.closed(0.5, 1.5), Interval.closed(-1.5, 1.5)):
                assert abs(V.eval(Interval.point(0.0))) <= abs(pm.eval(Interval.point(0.0))) + 1e-12
                assert V.total_variation(E) <= pm.total_variation(E) + 1e-10


class TestMatch:
    @pytest.mark.parametrize("Lam", [0.0, 0.5, 1.0])
    def test_linear_identity(self, s2_field, chi01, Lam):
        sel, R = pairing_match_external(s2_field, chi01, Selection.const(chi01, Lam))
        assert sel.at(0.0) == pytest.approx(Lam, abs=1e-11)
        assert all(abs(r) <= 1e-10 for r in R.values())

    def test_nonlinear_smallest_root(self, s3_field, chi01):
        sel, R = pairing_match_external(s3_field, chi01, Selection.const(chi01, 1.0))
        assert sel.at(0.0) == pytest.approx(0.0, abs=1e-11)
        assert R[0.0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("Lam", [0.0, 0.5, 1.0])
    def test_matched_pairings_coincide(self, s3_field, chi01, Lam):
        L = Selection.const(chi01, Lam)
        sel, _ = pairing_match_external(s3_field, chi01, L)
        ext = pairing_external(s3_field, chi01, L)
        assert pairing_internal(s3_field, chi01, sel).atom(0.0) == pytest.approx(ext.atom(0.0), abs=1e-10)

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_reverse_residual_bound(self, lam):
        from conftest import nonlinear_g, sign_field
        fd = sign_field(g=nonlinear_g())
        u = BVFunction((-2.0, 2.0), 0.0, None, [(0.0, 1.0), (1.0, -1.0)])
        _, R = pairing_match_internal(fd, u, Selection.const(u, lam))
        assert all(abs(r) <= 1.0 + 1e-12 for r in R.values())


class TestWeakForm:
    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
    def test_internal(self, s3_field, chi01, lam):
        pm = pairing_internal(s3_field, chi01, Selection.const(chi01, lam))
        for phi in (TestFunction.bump(0.0, 0.75), TestFunction.bump(0.3, 1.0), TestFunction.bump(0.5, 1.4, order=3)):
            assert pm.pair(phi) == pytest.approx(weak_form(pm, phi), abs=1e-9)

    def test_cantor(self, s4_field, cantor_u):
        pm = pairing_internal(s4_field, cantor_u, Selection.const(cantor_u, 0.5))
        phi = TestFunction.bump(0.5, 0.9)
        assert pm.pair(phi) == pytest.approx(weak_form(pm, phi), abs=1e-7)


class TestTVBound:
    def test_random_intervals(self, s3_field, chi01):
        rng = np.random.default_rng(7)
        pm = pairing_L(s3_field, chi01)[0]
        tv = measure_tv(bv_derivative(chi01))[0]
        for _ in range(30):
            a, b = np.sort(rng.uniform(-1.9, 1.9, 2))
            E = Interval.closed(float(a), float(b))
            assert abs(pm.eval(E)) <= s3_field.b_sup * measure_eval(tv, E) + 1e-10


class TestDensities:
    def test_linear_jump_density(self, s2_field, chi01):
        for lam in (0.0, 0.3, 1.0):
            pm = pairing_internal(s2_field, chi01, Selection.const(chi01, lam))
            rep = pairing_densities(s2_field, chi01, pm)
            j0 = next(j for j in rep.jumps if j.x == 0.0)
            assert j0.theta == pytest.approx(1 - 2 * lam, abs=1e-12)
            assert j0.formula == pytest.approx(j0.atom, abs=1e-12)

    def test_cantor_total(self, s4_field, cantor_u):
        pm = pairing_internal(s4_field, cantor_u, Selection.const(cantor_u, 0.5))
        assert pm.eval(Interval.open(-0.5, 1.5)) == pytest.approx(0.5, abs=1e-6)
        rep = pairing_densities(s4_field, cantor_u, pm, samples=[0.25, 0.75])
        for s in rep.cantor_samples:
            assert s["prediction"] == pytest.approx(float(cantor_u.approx(s["x"])), abs=1e-9)

    def test_smooth_chain_rule(self):
        dom = (-1.0, 1.0)
        from bvpairing.measure1d import PiecewisePrimitive
        A = BVFunction(dom, -1.0, PiecewisePrimitive([-1.0, 1.0], [ex.Const(1.0)]))
        fd = Field(dom, [TensorTerm(ex.Cos(ex.Var("t")), A)], T=3.0, kind="separated")
        u = BVFunction(dom, 0.0, PiecewisePrimitive([-1.0, 1.0], [ex.Poly([0.5, 0.0, 1.0])]))
        pm = pairing_internal(fd, u, Selection.const(u, 0.5))
        xs = np.linspace(-0.9, 0.9, 7)
        expected = np.cos(u.approx(xs)) * np.asarray(A.approx(xs)) * (0.5 + xs ** 2)
        assert np.allclose(pm.ac_density(xs), expected, atol=1e-12)
