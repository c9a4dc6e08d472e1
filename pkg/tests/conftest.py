import pytest

from bvpairing import expr as ex
from bvpairing.bv1d import BVFunction
from bvpairing.cli import fixture_path, parse_scenario
from bvpairing.field import Field, TensorTerm
from bvpairing.measure1d import CantorComponent, TestFunction


def sign_field(base=-1.0, g=None, domain=(-2.0, 2.0), T=2.0):
    A = BVFunction(domain, base, None, [(0.0, 2.0)])
    return Field(domain, [TensorTerm(g if g is not None else ex.Const(1.0), A)], T=T, kind="separated")


def nonlinear_g():
    # 1 - 2 clamp(t, 0, 1)
    return ex.Affine(-2.0, 1.0, ex.Clamp(ex.Var("t"), 0.0, 1.0))


@pytest.fixture(scope="session")
def chi01():
    return BVFunction((-2.0, 2.0), 0.0, None, [(0.0, 1.0), (1.0, -1.0)])


@pytest.fixture(scope="session")
def s2_field():
    return sign_field()


@pytest.fixture(scope="session")
def s3_field():
    return sign_field(g=nonlinear_g())


@pytest.fixture(scope="session")
def s2v_field():
    return sign_field(base=1.0)


@pytest.fixture(scope="session")
def cantor_u():
    return BVFunction((-0.5, 1.5), 0.0, None, [], [CantorComponent(1.0, 0.0, 1.0)])


@pytest.fixture(scope="session")
def s4_field(cantor_u):
    return Field((-0.5, 1.5), [TensorTerm(ex.Const(1.0), cantor_u)], T=2.0, kind="separated")


@pytest.fixture(scope="session")
def bump0():
    return TestFunction.bump(0.0, 0.75, name="bump0")


@pytest.fixture
def scenario():
    """Fresh scenario by fixture name (checks mutate nothing, but caches are per object)."""

    def load(name, **kw):
        return parse_scenario(fixture_path(name), **kw)

    return load


_criteria: dict[int, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and report.when == "call":
        k = int(report.nodeid.rsplit("_", 1)[1])
        _criteria[k] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    from test_acceptance import TITLES

    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        terminalreporter.write_line(f"criterion {k:2d} [{TITLES[k]}]: {_criteria[k]}")
