import csv
import json

import pytest
from click.testing import CliRunner

from bvpairing.cli import fixture_path, main, parse_scenario, run_suite, dumps
from bvpairing.errors import ScenarioParseError, ScenarioValidationError


@pytest.fixture
def runner():
    return CliRunner()


def s2():
    return str(fixture_path("s2_sign_linear"))


class TestRun:
    def test_pass_exit_zero(self, runner, tmp_path):
        out = tmp_path / "r.json"
        res = runner.invoke(main, ["run", s2(), "--only", "coarea,gauss_green", "--report", str(out)])
        assert res.exit_code == 0, res.output
        rep = json.loads(out.read_text())
        assert rep["pass"] is True
        assert rep["scenario"] == "s2_sign_linear"
        assert sorted(c["id"] for c in rep["checks"]) == ["coarea", "gauss_green"]
        assert "timing_s" not in json.dumps(rep)

    def test_failure_exit_two(self, runner):
        res = runner.invoke(main, ["run", s2(), "--only", "recovery", "--tol-scale", "1e-30"])
        assert res.exit_code == 2

    def test_unknown_check(self, runner):
        res = runner.invoke(main, ["run", s2(), "--only", "nonsense"])
        assert res.exit_code == 1

    def test_missing_file(self, runner, tmp_path):
        res = runner.invoke(main, ["run", str(tmp_path / "absent.toml")])
        assert res.exit_code == 1

    def test_syntax_error_reports_line(self, runner, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text('name = "x"\n[domain\nlo = 1\n')
        res = runner.invoke(main, ["run", str(p)])
        assert res.exit_code == 1
        assert "line 2" in res.output

    def test_t_range_violation(self, runner, tmp_path):
        text = fixture_path("s2_sign_linear").read_text().replace("T = 2.0", "T = 1.5")
        p = tmp_path / "t.toml"
        p.write_text(text)
        res = runner.invoke(main, ["run", str(p)])
        assert res.exit_code == 1
        assert "VALIDATION_ERROR" in res.output

    def test_timing_opt_in(self, runner, tmp_path):
        out = tmp_path / "r.json"
        runner.invoke(main, ["run", s2(), "--only", "coarea", "--timing", "--report", str(out)])
        assert "timing_s" in out.read_text()

    def test_recovery_csv(self, runner, tmp_path):
        res = runner.invoke(main, ["run", s2(), "--only", "recovery", "--csv", str(tmp_path)])
        assert res.exit_code == 0, res.output
        files = sorted(tmp_path.glob("recovery__*.csv"))
        assert files
        with files[0].open() as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["n"]) for r in rows] == [2 ** k for k in range(3, 15)]
        assert set(rows[0]) == {"n", "value", "abs_error"}


class TestScenarioFiles:
    def test_strict_rejects_unknown(self, tmp_path):
        p = tmp_path / "x.toml"
        p.write_text('mystery = 1\n' + fixture_path("s2_sign_linear").read_text())
        parse_scenario(p)
        with pytest.raises((ScenarioParseError, ScenarioValidationError)) as err:
            parse_scenario(p, strict=True)
        assert "mystery" in str(err.value)

    def test_bad_expression_has_path(self, tmp_path):
        text = fixture_path("s3_sign_nonlinear").read_text().replace('"clamp"', '"clampz"', 1)
        p = tmp_path / "x.toml"
        p.write_text(text)
        with pytest.raises(ScenarioParseError) as err:
            parse_scenario(p)
        assert "field.terms[0].g" in str(err.value)

    def test_headroom_validation(self, tmp_path):
        text = fixture_path("s2_sign_linear").read_text().replace("T = 2.0", "T = 1.5")
        p = tmp_path / "x.toml"
        p.write_text(text)
        with pytest.raises(ScenarioValidationError):
            parse_scenario(p)

    def test_seed_override(self):
        assert parse_scenario(fixture_path("s2_sign_linear"), seed=99).seed == 99

    @pytest.mark.parametrize("name", ["s1_autonomous", "s3_sign_nonlinear", "s4_cantor", "s6_smooth"])
    def test_normalize_round_trip(self, runner, tmp_path, name):
        first = tmp_path / "a.toml"
        second = tmp_path / "b.toml"
        assert runner.invoke(main, ["normalize", str(fixture_path(name)), "-o", str(first)]).exit_code == 0
        assert runner.invoke(main, ["normalize", str(first), "-o", str(second)]).exit_code == 0
        assert first.read_text() == second.read_text()
        a = parse_scenario(fixture_path(name))
        b = parse_scenario(first)
        xs = [a.domain[0] + (a.domain[1] - a.domain[0]) * k / 37 for k in range(1, 37)]
        assert [float(a.u.approx(x)) for x in xs] == [float(b.u.approx(x)) for x in xs]

    def test_fixtures_listed(self, runner):
        res = runner.invoke(main, ["fixtures"])
        assert res.exit_code == 0
        assert "s4_cantor" in res.output


def test_suite_jobs_do_not_change_report():
    one, _ = run_suite(jobs=1, only=["coarea", "gauss_green"])
    many, _ = run_suite(jobs=4, only=["coarea", "gauss_green"])
    assert dumps(one) == dumps(many)
    assert one["pass"]
    assert [s["scenario"] for s in one["scenarios"]] == [
        "s1_autonomous", "s2_sign_linear", "s3_sign_nonlinear", "s4_cantor", "s5_tensor", "s6_smooth"]
