import pytest

from bvpairing.bv1d import BVFunction
from bvpairing.cli import parse_scenario
from bvpairing.errors import JumpsTooClose
from bvpairing.measure1d import PiecewisePrimitive
from bvpairing import expr as ex
from bvpairing.pairing import Selection
from bvpairing.verify import (
    ApproxSequence,
    converged,
    fitted_rate,
    gen_cl_sequence,
    run_check,
    trailing_liminf,
)

SUITE = ["s1_autonomous", "s2_sign_linear", "s3_sign_nonlinear", "s4_cantor", "s5_tensor", "s6_smooth"]
CORE = ["representation", "gauss_green", "coarea"]

ZERO_FIELD = """
name = "zero_field"
[domain]
lo = -2.0
hi = 2.0
[field]
kind = "separated"
T = 2.0
terms = []
[u]
jumps = [{ x = 0.0, size = 1.0 }, { x = 1.0, size = -1.0 }]
[selections]
half = 0.5
[phi]
bump0 = { kind = "bump", center = 0.0, radius = 0.75 }
[sets]
left = [[-1.0, 0.5]]
"""

CONSTANT_U = """
name = "constant_u"
[domain]
lo = -2.0
hi = 2.0
[field]
kind = "separated"
T = 2.0
terms = [{ g = { op = "clamp", arg = "t", lo = 0.0, hi = 1.0 }, A = { base = -1.0, jumps = [{ x = 0.0, size = 2.0 }] } }]
[u]
base = 0.7
[phi]
bump0 = { kind = "bump", center = 0.0, radius = 0.75 }
"""


def _write(tmp_path, text, name="sc.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSequence:
    def test_ramp_preserves_variation(self, chi01):
        un = gen_cl_sequence(chi01, Selection.const(chi01, 0.5), 10)
        assert un.total_variation() == pytest.approx(2.0, abs=1e-12)
        assert float(un.approx(0.0)) == pytest.approx(0.5)
        assert float(un.approx(-0.1)) == pytest.approx(0.0, abs=1e-14)
        assert float(un.approx(0.1)) == pytest.approx(1.0, abs=1e-14)
        assert not un.jumps

    def test_lambda_zero_hits_lower_value(self, chi01):
        un = gen_cl_sequence(chi01, Selection.const(chi01, 0.0), 10)
        assert float(un.approx(0.0)) == 0.0

    def test_smooth_unchanged(self):
        u = BVFunction((-1.0, 1.0), 0.0, PiecewisePrimitive([-1.0, 1.0], [ex.Poly([1.0, 0.5])]))
        assert gen_cl_sequence(u, Selection.from_map({}), 64) is u

    def test_close_jumps(self):
        u = BVFunction((-2.0, 2.0), 0.0, None, [(0.0, 1.0), (0.5, -1.0)])
        with pytest.raises(JumpsTooClose):
            gen_cl_sequence(u, Selection.const(u, 0.5), 8)
        gen_cl_sequence(u, Selection.const(u, 0.5), 16)

    def test_certificates(self, s3_field, chi01):
        seq = ApproxSequence(chi01, Selection.const(chi01, 0.3), s3_field)
        prev = None
        for n in (8, 64, 512):
            c = seq.certificate(n)
            assert c["pr_margin"] >= 0.0
            assert c["dominated"]
            assert c["strict_gap"] <= 1e-12
            assert c["l1"] <= 2.0 / n
            if prev is not None:
                assert c["l1"] < prev
            prev = c["l1"]


class TestEstimators:
    def test_liminf_extrapolates_first_order_bias(self):
        ns = [2 ** k for k in range(3, 15)]
        vals = [-0.5 + 1.0 / n for n in ns]
        assert trailing_liminf(vals, ns) == pytest.approx(-0.5, abs=1e-10)

    def test_liminf_oscillating_falls_back_to_minimum(self):
        ns = [2 ** k for k in range(3, 11)]
        vals = [(-1) ** k * 0.1 for k in range(len(ns))]
        assert trailing_liminf(vals, ns) == pytest.approx(-0.1)

    def test_liminf_without_ladder(self):
        assert trailing_liminf([5.0, 4.0, 3.0, 2.0, 3.0, 2.5]) == 2.0

    def test_rate(self):
        ns = [2 ** k for k in range(3, 15)]
        assert fitted_rate(ns, [1.0 / n for n in ns]) == pytest.approx(1.0)

    def test_converged(self):
        assert converged([1.0 + 4.0 ** -k for k in range(10)], 1.0)
        assert not converged([1.0, 1.5, 1.0 + 1e-6], 1.0)


@pytest.mark.parametrize("fixture", SUITE)
@pytest.mark.parametrize("check", CORE)
def test_core_checks_pass(scenario, fixture, check):
    res = run_check(scenario(fixture), {"name": check, "id": check})
    assert res.status == "ok", res.residuals
    assert res.passed


def test_gauss_green_hand_values(scenario):
    res = run_check(scenario("s2_sign_linear"), {"name": "gauss_green", "id": "gauss_green"})
    cases = res.details["catalog_sets"]
    for key, sides in cases.items():
        if key.endswith("/left_of_jump"):
            for name in ("internal_interior", "internal_closure"):
                assert sides[name]["lhs"] == pytest.approx(1.0, abs=1e-12)
                assert sides[name]["rhs"] == pytest.approx(1.0, abs=1e-12)
        if key.endswith("/on_jump"):
            for name, want in (("internal_interior", 0.0), ("internal_closure", 1.0)):
                assert sides[name]["lhs"] == pytest.approx(want, abs=1e-12)
                assert sides[name]["rhs"] == pytest.approx(want, abs=1e-12)


def test_negative_coarea_gap(scenario):
    res = run_check(scenario("s3_sign_nonlinear"), {"name": "coarea_negative", "lambda": "half", "phi": "bump0",
                                                     "expected_gap": 0.5, "id": "coarea_negative"})
    assert res.passed
    assert res.details["gap"] == pytest.approx(0.5, abs=1e-3)


def test_converse_gap(scenario):
    res = run_check(scenario("s3_sign_nonlinear"), {"name": "lsc_converse", "lambda": "zero", "phi": "bump0",
                                                     "expected_gap": 0.5, "id": "lsc_converse"})
    assert res.passed
    assert res.details["gap"] == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("fixture", ["s2_sign_linear", "s3_sign_nonlinear"])
def test_lsc_and_relaxation(scenario, fixture):
    sc = scenario(fixture)
    for check in ("lsc_L", "relaxation", "recovery"):
        res = run_check(sc, {"name": check, "id": check})
        assert res.passed, (check, res.residuals)


def test_relaxation_values(scenario):
    s2 = run_check(scenario("s2_sign_linear"), {"name": "relaxation", "id": "relaxation"})
    s3 = run_check(scenario("s3_sign_nonlinear"), {"name": "relaxation", "id": "relaxation"})
    assert s2.details["grid_min"] == pytest.approx(-1.0, abs=1e-4)
    assert s3.details["grid_min"] == pytest.approx(-0.5, abs=1e-4)
    assert s3.details["attained_by"] == "lambda=0.5"


def test_zero_field_everything_vanishes(tmp_path):
    sc = parse_scenario(_write(tmp_path, ZERO_FIELD))
    for check in ("representation", "gauss_green", "coarea", "relaxation", "misc"):
        res = run_check(sc, {"name": check, "id": check})
        assert res.passed, (check, res.residuals)
    gg = run_check(sc, {"name": "gauss_green", "id": "gauss_green"})
    for sides in gg.details["catalog_sets"].values():
        for lhs_rhs in sides.values():
            assert lhs_rhs["lhs"] == 0.0 and lhs_rhs["rhs"] == 0.0
    relax = run_check(sc, {"name": "relaxation", "id": "relaxation"})
    assert all(abs(v["limit"]) <= 1e-15 for v in relax.details["sequences"].values())


def test_constant_u_functionals_vanish(tmp_path):
    sc = parse_scenario(_write(tmp_path, CONSTANT_U))
    for check in ("lsc_L", "lsc_V", "recovery", "representation"):
        res = run_check(sc, {"name": check, "id": check})
        assert res.status in ("ok", "skipped"), (check, res.residuals)
        assert res.passed
    lsc = run_check(sc, {"name": "lsc_L", "id": "lsc_L"})
    if lsc.status == "ok":
        assert lsc.details["value_L"] == pytest.approx(0.0, abs=1e-14)


def test_checks_are_deterministic(scenario):
    a = run_check(scenario("s5_tensor"), {"name": "misc", "id": "misc"})
    b = run_check(scenario("s5_tensor"), {"name": "misc", "id": "misc"})
    assert a.residuals == b.residuals
