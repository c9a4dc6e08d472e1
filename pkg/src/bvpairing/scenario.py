"""Scenario tables: validation into live objects and normalization back to plain data.

A scenario is a nested dict (the parsed TOML document).  ``Scenario.from_spec``
turns it into a field, a BV function and the named catalogs of selections,
test functions and sets, raising ``ValueError`` (malformed node, carries a
key path) or ``ScenarioValidationError`` (well-formed but violates an
invariant).  ``normalize_spec`` returns the canonical form that ``emit`` writes.
"""

from __future__ import annotations

import copy
import math
import zlib
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import expr as ex
from .bv1d import BVFunction, FinitePerimeterSet, bv_from_spec
from .errors import InvalidCantorOverlap, PairingError, ScenarioValidationError
from .field import FIELD_KINDS, Field, TensorTerm, check_cantor_supports
from .measure1d import PiecewisePrimitive, TestFunction
from .pairing import Selection, pairing_L, pairing_V

SCHEMA_VERSION = 1
TOP_KEYS = {"name", "description", "seed", "domain", "field", "u", "selections", "phi", "sets", "checks",
            "tolerances", "output", "schema_version"}


class SpecError(ValueError):
    """Malformed node; ``path`` locates it inside the document."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(path, "expected a number")
    v = float(v)
    if not math.isfinite(v):
        raise SpecError(path, "expected a finite number")
    return v


def _table(v, path: str) -> dict:
    if not isinstance(v, dict):
        raise SpecError(path, "expected a table")
    return v


def _expr(spec, path: str) -> ex.Expr:
    try:
        return ex.from_spec(spec, path)
    except ValueError as err:
        raise SpecError(path, str(err).split(": ", 1)[-1]) from None


def _bv(spec, domain, path: str) -> BVFunction:
    try:
        return bv_from_spec(_table(spec, path), domain, path)
    except SpecError:
        raise
    except PairingError as err:
        raise ScenarioValidationError("monotone-certificate", f"{path}: {err}") from None
    except ValueError as err:
        raise SpecError(path, str(err).split(": ", 1)[-1] if str(err).startswith(path) else str(err)) from None


# ---------------------------------------------------------------------------
# test functions and selections
# ---------------------------------------------------------------------------


def phi_from_spec(spec: dict, name: str, path: str) -> TestFunction:
    spec = _table(spec, path)
    kind = spec.get("kind", "bump")
    if kind == "bump":
        extra = set(spec) - {"kind", "center", "radius", "height", "order", "normalize_at"}
        if extra:
            raise SpecError(path, f"unexpected keys {sorted(extra)}")
        center = _num(spec.get("center"), f"{path}.center")
        radius = _num(spec.get("radius"), f"{path}.radius")
        order = spec.get("order", 2)
        if isinstance(order, bool) or not isinstance(order, int) or order < 2:
            raise SpecError(f"{path}.order", "expected an integer >= 2")
        if radius <= 0:
            raise SpecError(f"{path}.radius", "expected a positive radius")
        height = _num(spec.get("height", 1.0), f"{path}.height")
        if "normalize_at" in spec:
            x0 = _num(spec["normalize_at"], f"{path}.normalize_at")
            base = (1.0 - ((x0 - center) / radius) ** 2) ** order
            if abs(x0 - center) >= radius:
                raise SpecError(f"{path}.normalize_at", "point lies outside the support")
            height = height / base
        phi = TestFunction.bump(center, radius, height, order, name=name)
        phi.spec = {k: spec[k] for k in spec}
        phi.spec.setdefault("kind", "bump")
        return phi
    if kind == "pieces":
        extra = set(spec) - {"kind", "breakpoints", "pieces"}
        if extra:
            raise SpecError(path, f"unexpected keys {sorted(extra)}")
        bps = spec.get("breakpoints")
        pieces = spec.get("pieces")
        if not isinstance(bps, list) or not isinstance(pieces, list):
            raise SpecError(path, "pieces test functions need breakpoints and pieces lists")
        nodes = [_expr(p, f"{path}.pieces[{i}]") for i, p in enumerate(pieces)]
        try:
            pp = PiecewisePrimitive([_num(b, f"{path}.breakpoints[{i}]") for i, b in enumerate(bps)], nodes)
            return TestFunction(pp, name=name, spec=copy.deepcopy(spec))
        except ValueError as err:
            raise SpecError(path, str(err)) from None
    raise SpecError(f"{path}.kind", f"unknown test function kind {kind!r}")


SELECTION_KINDS = ("const", "maxF", "minZeta", "match", "explicit")


def check_selection_spec(spec, path: str):
    """Validate a selection spec without a BV function at hand."""
    if isinstance(spec, bool):
        raise SpecError(path, "booleans are not selections")
    if isinstance(spec, (int, float)):
        v = _num(spec, path)
        if not 0.0 <= v <= 1.0:
            raise ScenarioValidationError("selection-range", f"{path}: value {v} outside [0, 1]")
        return
    if isinstance(spec, str):
        if spec not in ("maxF", "minZeta"):
            raise SpecError(path, f"unknown selection {spec!r}")
        return
    spec = _table(spec, path)
    kind = spec.get("kind")
    if kind not in SELECTION_KINDS:
        raise SpecError(f"{path}.kind", f"unknown selection kind {kind!r}")
    if kind == "const":
        if set(spec) - {"kind", "value"}:
            raise SpecError(path, "const selections take only 'value'")
        v = _num(spec.get("value"), f"{path}.value")
        if not 0.0 <= v <= 1.0:
            raise ScenarioValidationError("selection-range", f"{path}: value {v} outside [0, 1]")
    elif kind == "match":
        if set(spec) - {"kind", "Lambda"}:
            raise SpecError(path, "match selections take only 'Lambda'")
        v = _num(spec.get("Lambda"), f"{path}.Lambda")
        if not 0.0 <= v <= 1.0:
            raise ScenarioValidationError("selection-range", f"{path}: Lambda {v} outside [0, 1]")
    elif kind == "explicit":
        if set(spec) - {"kind", "values"} or not isinstance(spec.get("values"), list):
            raise SpecError(path, "explicit selections need a 'values' list of {x, value}")
        for i, item in enumerate(spec["values"]):
            item = _table(item, f"{path}.values[{i}]")
            if set(item) != {"x", "value"}:
                raise SpecError(f"{path}.values[{i}]", "expected {x, value}")
            _num(item["x"], f"{path}.values[{i}].x")
            v = _num(item["value"], f"{path}.values[{i}].value")
            if not 0.0 <= v <= 1.0:
                raise ScenarioValidationError("selection-range", f"{path}.values[{i}]: {v} outside [0, 1]")
    elif set(spec) != {"kind"}:
        raise SpecError(path, f"{kind} selections take no parameters")


def resolve_selection(fd: Field, u: BVFunction, spec) -> Selection:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Selection.const(u, float(spec))
    kind = spec if isinstance(spec, str) else spec.get("kind")
    if kind == "const":
        return Selection.const(u, float(spec["value"]))
    if kind == "maxF":
        return pairing_L(fd, u)[1]
    if kind == "minZeta":
        return pairing_V(fd, u)[1]
    if kind == "match":
        from .pairing import pairing_match_external

        return pairing_match_external(fd, u, Selection.const(u, float(spec["Lambda"])))[0]
    if kind == "explicit":
        return Selection.from_map({float(v["x"]): float(v["value"]) for v in spec["values"]}, "explicit")
    raise ValueError(f"unknown selection {spec!r}")


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


def field_from_spec(spec: dict, domain: tuple[float, float], path: str = "field") -> Field:
    spec = _table(spec, path)
    extra = set(spec) - {"kind", "T", "b0", "terms"}
    if extra:
        raise SpecError(path, f"unexpected keys {sorted(extra)}")
    kind = spec.get("kind", "tensor")
    if kind not in FIELD_KINDS:
        raise SpecError(f"{path}.kind", f"unknown field kind {kind!r}")
    T = _num(spec.get("T"), f"{path}.T")
    if T <= 0:
        raise ScenarioValidationError("t-range", f"{path}.T must be positive")
    b0 = _expr(spec["b0"], f"{path}.b0") if "b0" in spec else None
    terms_spec = spec.get("terms", [])
    if not isinstance(terms_spec, list):
        raise SpecError(f"{path}.terms", "expected an array of tables")
    terms = []
    for i, t in enumerate(terms_spec):
        tp = f"{path}.terms[{i}]"
        t = _table(t, tp)
        if set(t) != {"g", "A"}:
            raise SpecError(tp, "each term needs exactly 'g' and 'A'")
        terms.append(TensorTerm(_expr(t["g"], f"{tp}.g"), _bv(t["A"], domain, f"{tp}.A")))
    if kind == "autonomous" and terms:
        raise ScenarioValidationError("field-kind", "autonomous fields carry only b0")
    try:
        return Field(domain, terms, b0, T, kind)
    except InvalidCantorOverlap as err:
        raise ScenarioValidationError("cantor-overlap", str(err)) from None


def _sets_from_spec(spec, domain, path: str = "sets") -> dict[str, FinitePerimeterSet]:
    out = {}
    for name, ivs in _table(spec, path).items():
        p = f"{path}.{name}"
        if not isinstance(ivs, list) or not ivs:
            raise SpecError(p, "expected a list of [lo, hi] pairs")
        pairs = []
        for i, iv in enumerate(ivs):
            if not isinstance(iv, list) or len(iv) != 2:
                raise SpecError(f"{p}[{i}]", "expected [lo, hi]")
            a, b = _num(iv[0], f"{p}[{i}][0]"), _num(iv[1], f"{p}[{i}][1]")
            if not a < b:
                raise ScenarioValidationError("set-order", f"{p}[{i}]: needs lo < hi")
            pairs.append((a, b))
        try:
            E = FinitePerimeterSet(pairs, domain)
        except ValueError as err:
            raise ScenarioValidationError("compact-sets", f"{p}: {err}") from None
        if not E.is_compact():
            raise ScenarioValidationError("compact-sets", f"{p}: sets must be compactly contained in the domain")
        out[name] = E
    return out


CHECK_PARAMS = {
    "representation": {"selections", "phis", "cantor_depth"},
    "coarea": {"Lambda", "phis"},
    "coarea_negative": {"lambda", "phi", "expected_gap"},
    "gauss_green": {"selections", "sets", "n_random"},
    "lsc_L": {"phi", "lambdas"},
    "lsc_V": {"phi", "lambdas"},
    "lsc_converse": {"lambda", "phi", "expected_gap"},
    "recovery": {"lambdas", "Lambda", "phi"},
    "relaxation": {"phi", "lambdas"},
    "slicing": {"n_samples", "cantor_tolerance"},
    "misc": {"n_intervals", "phis"},
}


def _checks_from_spec(spec, strict: bool, path: str = "checks") -> list[dict]:
    if not isinstance(spec, list):
        raise SpecError(path, "expected an array of tables")
    out, seen = [], set()
    for i, c in enumerate(spec):
        p = f"{path}[{i}]"
        c = _table(c, p)
        name = c.get("name")
        if name not in CHECK_PARAMS:
            raise SpecError(f"{p}.name", f"unknown check {name!r}")
        allowed = CHECK_PARAMS[name] | {"name", "id", "tolerance"}
        extra = set(c) - allowed
        if extra and strict:
            raise ScenarioValidationError("schema", f"{p}: unknown keys {sorted(extra)}")
        entry = {k: copy.deepcopy(v) for k, v in c.items() if k in allowed}
        entry.setdefault("id", name)
        if entry["id"] in seen:
            raise ScenarioValidationError("check-ids", f"{p}: duplicate check id {entry['id']!r}")
        seen.add(entry["id"])
        if "tolerance" in entry:
            t = _num(entry["tolerance"], f"{p}.tolerance")
            if t <= 0:
                raise ScenarioValidationError("tolerance", f"{p}.tolerance must be positive")
        out.append(entry)
    return out


@dataclass
class Scenario:
    name: str
    field: Field
    u: BVFunction
    selections: dict[str, object]
    phis: dict[str, TestFunction]
    sets: dict[str, FinitePerimeterSet]
    checks: list[dict]
    tolerances: dict[str, float]
    seed: int
    spec: dict
    description: str = ""
    _sel_cache: dict = dc_field(default_factory=dict, repr=False)

    @property
    def domain(self) -> tuple[float, float]:
        return self.u.domain

    def selection(self, ref) -> Selection:
        """A selection by catalog name, by inline spec, or a constant."""
        spec = self.selections.get(ref, ref) if isinstance(ref, str) else ref
        key = repr(spec)
        if key not in self._sel_cache:
            self._sel_cache[key] = resolve_selection(self.field, self.u, spec)
        return self._sel_cache[key]

    def phi(self, ref: str | None = None, nonnegative: bool = False) -> TestFunction:
        if ref is None:
            for p in self.phis.values():
                if not nonnegative or p.is_nonnegative():
                    return p
            raise ScenarioValidationError("test-functions", "no suitable test function in the catalog")
        if ref not in self.phis:
            raise ScenarioValidationError("test-functions", f"unknown test function {ref!r}")
        return self.phis[ref]

    def rng(self, tag: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(tag.encode())])

    @classmethod
    def from_spec(cls, spec: dict, strict: bool = False, seed: int | None = None) -> "Scenario":
        spec = _table(spec, "<root>")
        extra = set(spec) - TOP_KEYS
        if extra and strict:
            raise ScenarioValidationError("schema", f"unknown top-level keys {sorted(extra)}")
        if "schema_version" in spec and spec["schema_version"] != SCHEMA_VERSION:
            raise ScenarioValidationError("schema", f"unsupported schema_version {spec['schema_version']!r}")
        name = spec.get("name")
        if not isinstance(name, str) or not name:
            raise SpecError("name", "expected a non-empty string")
        dom = _table(spec.get("domain"), "domain")
        if set(dom) != {"lo", "hi"}:
            raise SpecError("domain", "expected lo and hi")
        domain = (_num(dom["lo"], "domain.lo"), _num(dom["hi"], "domain.hi"))
        if not domain[0] < domain[1]:
            raise ScenarioValidationError("domain", "domain needs lo < hi")
        fd = field_from_spec(spec.get("field"), domain)
        u = _bv(spec.get("u"), domain, "u")
        if u.monotone_pieces is None:
            raise ScenarioValidationError("monotone-certificate", "u needs a monotonicity certificate")
        if u.sup_bound + 1.0 > fd.T * (1 + 1e-15):
            raise ScenarioValidationError("t-range", f"sup|u| + 1 = {u.sup_bound + 1.0:g} exceeds T = {fd.T:g}")
        try:
            check_cantor_supports(sorted(set(fd.cantor_supports()) | set(u.cantor_supports)))
        except InvalidCantorOverlap as err:
            raise ScenarioValidationError("cantor-overlap", str(err)) from None

        sels = {}
        for sname, s in _table(spec.get("selections", {}), "selections").items():
            check_selection_spec(s, f"selections.{sname}")
            if isinstance(s, dict) and s.get("kind") == "explicit":
                pts = sorted(float(v["x"]) for v in s["values"])
                if pts != sorted(u.jump_points):
                    raise ScenarioValidationError("selection-support",
                                                  f"selections.{sname}: points {pts} differ from the jump set")
            sels[sname] = copy.deepcopy(s)
        if not sels:
            sels["half"] = {"kind": "const", "value": 0.5}

        phis = {}
        for pname, p in _table(spec.get("phi", {}), "phi").items():
            phi = phi_from_spec(p, pname, f"phi.{pname}")
            a, b = phi.support
            if not domain[0] < a and b < domain[1]:
                raise ScenarioValidationError("test-support", f"phi.{pname}: support must lie inside the domain")
            phis[pname] = phi
        if not phis:
            raise ScenarioValidationError("test-functions", "at least one test function is required")

        sets = _sets_from_spec(spec.get("sets", {}), domain)
        checks = _checks_from_spec(spec.get("checks", [{"name": n} for n in CHECK_PARAMS]), strict)
        tols = {}
        for k, v in _table(spec.get("tolerances", {}), "tolerances").items():
            if k not in CHECK_PARAMS:
                raise SpecError(f"tolerances.{k}", "unknown check name")
            tols[k] = _num(v, f"tolerances.{k}")
        s = spec.get("seed", 0) if seed is None else seed
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise SpecError("seed", "expected a non-negative integer")
        desc = spec.get("description", "")
        if not isinstance(desc, str):
            raise SpecError("description", "expected a string")
        return cls(name, fd, u, sels, phis, sets, checks, tols, int(s), copy.deepcopy(spec), desc)


def normalize_spec(spec: dict) -> dict:
    """Canonical document: validated, defaults filled, output table dropped."""
    sc = Scenario.from_spec(spec)
    fd = sc.field
    field_spec: dict = {"kind": fd.kind, "T": fd.T}
    if fd.b0 is not None:
        field_spec["b0"] = fd.b0.to_spec()
    if fd.terms:
        field_spec["terms"] = [{"g": t.g.to_spec(), "A": t.A.to_spec()} for t in fd.terms]
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "seed": sc.seed,
        "domain": {"lo": sc.domain[0], "hi": sc.domain[1]},
        "field": field_spec,
        "u": sc.u.to_spec(),
        "selections": copy.deepcopy(sc.selections),
        "phi": {k: p.to_spec() for k, p in sc.phis.items()},
        "checks": copy.deepcopy(sc.checks),
    }
    if sc.description:
        out["description"] = sc.description
    if sc.sets:
        out["sets"] = {k: [list(iv) for iv in E.intervals] for k, E in sc.sets.items()}
    if sc.tolerances:
        out["tolerances"] = dict(sc.tolerances)
    return out
