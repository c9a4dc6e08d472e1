"""Theorem checkers and approximation sequences.

Each checker takes a ``Scenario`` and returns a ``CheckResult``: named
residuals with their own tolerances, a pass flag, and detail tables.  The two
sides of every identity are computed by separate routes (pairing set function
against traces, quadrature against closed forms, and so on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from .bv1d import BVFunction, FinitePerimeterSet, bv_chi, bv_derivative, bv_level_set, bv_level_sets
from .errors import JumpsTooClose, PairingError, SAMPLE_OUTSIDE
from .field import (
    Field,
    Part,
    TensorTerm,
    field_composite,
    field_div_Bt,
    field_div_bt,
    field_traces,
    maximize_1d,
)
from .measure1d import (
    BorelSet,
    Interval,
    PiecewisePrimitive,
    TestFunction,
    cantor_cells,
    integrate,
    integrate_cantor,
    integrate_lebesgue,
    measure_dominates,
    measure_eval,
    measure_pair,
    measure_tv,
)
from .pairing import (
    PairingMeasure,
    Selection,
    jump_data,
    pairing_densities,
    pairing_external,
    pairing_internal,
    pairing_L,
    pairing_match_external,
    pairing_match_internal,
    pairing_standard,
    pairing_V,
    sigma_system,
    weak_form,
)
from .scenario import Scenario

N_LADDER = tuple(2 ** k for k in range(3, 15))
LAMBDA_GRID = tuple(k / 10 for k in range(11))
T_QUAD_TOL = 1e-9

DEFAULT_TOLERANCES = {
    "representation": 1e-6,
    "coarea": 1e-6,
    "coarea_negative": 1e-3,
    "gauss_green": 1e-8,
    "lsc_L": 1e-6,
    "lsc_V": 1e-5,
    "lsc_converse": 1e-3,
    "recovery": 1e-3,
    "relaxation": 1e-4,
    "slicing": 1e-8,
    "misc": 1e-10,
}


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    residuals: dict[str, float]
    tolerances: dict[str, float]
    passed: bool
    details: dict = dc_field(default_factory=dict)
    tables: dict[str, list[tuple[int, float, float]]] = dc_field(default_factory=dict)
    status: str = "ok"  # ok | skipped
    id: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "id": self.id or self.name,
            "status": self.status,
            "pass": self.passed,
            "residuals": dict(self.residuals),
            "tolerance": dict(self.tolerances),
            "details": self.details,
        }


class _Collector:
    """Accumulates (residual, tolerance) pairs; the worst residual per key is kept."""

    def __init__(self, name: str, scale: float = 1.0):
        self.name = name
        self.scale = scale
        self.res: dict[str, float] = {}
        self.tol: dict[str, float] = {}
        self.details: dict = {}
        self.tables: dict[str, list] = {}
        self.info: dict[str, float] = {}

    def add(self, key: str, value: float, tol: float):
        value = float(value)
        if key not in self.res or not value <= self.res[key]:
            self.res[key] = value
        self.tol[key] = tol * self.scale

    def result(self, status: str = "ok") -> CheckResult:
        ok = all(self.res[k] <= self.tol[k] for k in self.res)  # NaN fails
        return CheckResult(self.name, self.res, self.tol, ok, self.details, self.tables, status)


def skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name, {}, {}, True, {"reason": reason}, {}, "skipped")


# ---------------------------------------------------------------------------
# approximation sequences
# ---------------------------------------------------------------------------


def gen_cl_sequence(u: BVFunction, sel: Selection, n: int) -> BVFunction:
    """Piecewise-linear approximation: ramps through u^lambda on windows of half-width min(1/n, gap/3)."""
    sel.check(u)
    if not u.jumps:
        return u
    lo, hi = u.domain
    xs = [j.x for j in u.jumps]
    sep = min((b - a for a, b in zip(xs, xs[1:])), default=math.inf)
    if sep <= 6.0 / n:
        raise JumpsTooClose(f"jumps {sep:g} apart need n > {6.0 / sep:g}", n=n, separation=sep)
    windows = []
    for k, j in enumerate(u.jumps):
        gap = min(j.x - lo, hi - j.x,
                  j.x - xs[k - 1] if k > 0 else math.inf,
                  xs[k + 1] - j.x if k + 1 < len(xs) else math.inf)
        h = min(1.0 / n, gap / 3.0)
        a, b = j.x - h, j.x + h
        for c in u.cantor:
            if c.lo < b and a < c.hi:
                raise JumpsTooClose(f"ramp window around {j.x} meets a Cantor support", n=n)
        lam = sel.at(j.x)
        ul = (1.0 - lam) * j.u_minus + lam * j.u_plus
        va, vb = float(u.approx(a)), float(u.approx(b))
        windows.append((a, j.x, b, (ul - va) / h, (vb - ul) / h))
    bps = set(u.ac.breakpoints) if u.ac is not None else {lo, hi}
    for a, x, b, _, _ in windows:
        bps |= {a, x, b}
    bps = sorted(bps)
    pieces = []
    for p, q in zip(bps[:-1], bps[1:]):
        mid = 0.5 * (p + q)
        piece = None
        for a, x, b, s_left, s_right in windows:
            if a <= mid < x:
                piece = ex.Const(s_left)
            elif x <= mid < b:
                piece = ex.Const(s_right)
        if piece is None:
            if u.ac is not None:
                idx = int(np.searchsorted(u.ac.breakpoints, mid)) - 1
                piece = u.ac.pieces[idx]
            else:
                piece = ex.Const(0.0)
        pieces.append(piece)
    ac = PiecewisePrimitive(bps, pieces)
    return BVFunction(u.domain, u.base, ac, [], u.cantor, certify=u.monotone_pieces is not None)


@dataclass
class ApproxSequence:
    """CL(lambda) sequence with per-n membership certificates."""

    u: BVFunction
    sel: Selection
    field: Field
    ladder: tuple[int, ...] = N_LADDER

    def at(self, n: int) -> BVFunction:
        return gen_cl_sequence(self.u, self.sel, n)

    def certificate(self, n: int, un: BVFunction | None = None) -> dict:
        un = un if un is not None else self.at(n)
        sys = sigma_system(self.field)
        pr_margin = math.inf
        for p in sys.sigma.atoms:
            lo_v, hi_v = sorted((float(self.u.left(p)), float(self.u.right(p))))
            val = float(un.approx(p))
            pr_margin = min(pr_margin, val - lo_v, hi_v - val)
        g = self.u.sup_bound
        return {
            "n": n,
            "l1": self.u.l1_distance(un),
            "pr_margin": pr_margin if math.isfinite(pr_margin) else 0.0,
            "dominating_constant": g,
            "sup_un": un.sup_bound,
            "dominated": un.sup_bound <= g * (1 + 1.0 / n) + 1e-12,
            "strict_gap": abs(un.total_variation() - self.u.total_variation()),
        }


def _is_w11(un: BVFunction) -> bool:
    return not un.jumps and not un.cantor


def diffuse_functional(fd: Field, un: BVFunction, phi: TestFunction, tol: float = 1e-11) -> float:
    """int phi b(x, u_n) u_n' dx for Sobolev u_n; the full pairing otherwise."""
    if not _is_w11(un):
        return pairing_internal(fd, un, Selection.const(un, 0.5)).pair(phi, tol)
    if un.ac is None:
        return 0.0
    a, b = phi.support
    bps = sorted(set(un.breakpoints()) | set(fd.breakpoints()) | set(phi.breakpoints))
    return integrate(lambda x: phi.value(x) * fd.b(x, un.right(x)) * un.ac.eval(x), a, b, tol=tol, breakpoints=bps)


def diffuse_variation(fd: Field, un: BVFunction, K: tuple[float, float], sign: int = 0, tol: float = 1e-11) -> float:
    """|pairing(u_n)|(K), or its positive (sign=+1) / negative (sign=-1) part."""
    size = np.abs if sign == 0 else (lambda v: np.maximum(sign * v, 0.0))
    if not _is_w11(un):
        pm = pairing_internal(fd, un, Selection.const(un, 0.5))
        if sign == 0:
            return pm.total_variation(Interval.open(*K))
        return pm.total_variation(Interval.open(*K), positive=True) if sign > 0 else \
            pairing_internal(negate_field(fd), un, Selection.const(un, 0.5)).total_variation(Interval.open(*K), positive=True)
    if un.ac is None:
        return 0.0
    bps = sorted({p for p in set(un.breakpoints()) | set(fd.breakpoints()) if K[0] < p < K[1]} | set(K))

    def f(x):
        return fd.b(x, un.right(x)) * un.ac.eval(x)

    # the positive part has kinks where b(x, u_n) u_n' changes sign; make them panel ends
    kinks = []
    for a, b in zip(bps, bps[1:]):
        xs = np.linspace(a, b, 65)[1:-1]
        ys = f(xs)
        for i in np.nonzero(np.sign(ys[:-1]) * np.sign(ys[1:]) < 0)[0]:
            kinks.append(brentq(lambda y: float(f(y)), xs[i], xs[i + 1], xtol=1e-15))
    # window slopes grow like n; the tolerance is relative to the variation of u_n
    scale = max(1.0, integrate(lambda x: np.abs(un.ac.eval(x)), K[0], K[1], tol=1e-9, breakpoints=bps))
    return integrate(lambda x: size(f(x)), K[0], K[1], tol=tol * scale, breakpoints=sorted(set(bps) | set(kinks)))


def negate_field(fd: Field) -> Field:
    terms = [TensorTerm(ex.Affine(-1.0, 0.0, t.g), t.A) for t in fd.terms]
    b0 = ex.Affine(-1.0, 0.0, fd.b0) if fd.b0 is not None else None
    return Field(fd.domain, terms, b0, fd.T, fd.kind)


def trailing_liminf(values: list[float], ns: list[int] | None = None) -> float:
    """Estimate of liminf along a ladder of doubling n.

    Without ``ns`` this is the minimum over the trailing half.  With ``ns``, a
    sequence whose successive differences decay at a fitted algebraic rate p is
    extrapolated (Richardson) from its last two values; the raw minimum is used
    whenever no clean rate is visible.
    """
    tail = min(values[len(values) // 2:])
    if ns is None or len(values) < 4:
        return tail
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    p = fitted_rate(ns[1:], diffs)
    if p is None or p < 0.5:
        return tail
    tail_diffs = [b - a for a, b in zip(values[len(values) // 2:], values[len(values) // 2 + 1:])]
    if any(d1 * d2 < 0 for d1, d2 in zip(tail_diffs, tail_diffs[1:])):
        return tail
    return values[-1] + (values[-1] - values[-2]) / (2.0 ** p - 1.0)


def converged(values: list[float], limit: float, floor: float = 1e-12) -> bool:
    """Each of the last three deviations from the limit candidate is within a factor 10 of its neighbour."""
    d = [max(abs(v - limit), floor) for v in values[-3:]]
    if max(d) <= floor:
        return True
    return all(max(a, b) <= 10.0 * min(a, b) for a, b in zip(d, d[1:]))


def fitted_rate(ns: list[int], errs: list[float], floor: float = 1e-13) -> float | None:
    """Least-squares slope of -log(err) against log(n) over the trailing half, ignoring roundoff-level errors."""
    pts = [(math.log(n), math.log(e)) for n, e in list(zip(ns, errs))[len(ns) // 2:] if e > floor]
    if len(pts) < 3:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _selection_refs(sc: Scenario, params: dict, key: str) -> list:
    refs = params.get(key)
    if refs is None:
        return list(sc.selections)
    return refs if isinstance(refs, list) else [refs]


def _label(ref) -> str:
    return ref if isinstance(ref, str) else repr(ref)


def _phis(sc: Scenario, params: dict, key: str = "phis") -> list[TestFunction]:
    refs = params.get(key)
    if refs is None:
        return list(sc.phis.values())
    refs = refs if isinstance(refs, list) else [refs]
    return [sc.phi(r) for r in refs]


def random_intervals(sc: Scenario, tag: str, count: int, margin: float = 0.02, compact: bool = True) -> list[Interval]:
    """Seeded random intervals with random open/closed ends, kept away from the domain ends."""
    rng = sc.rng(tag)
    lo, hi = sc.domain
    w = hi - lo
    out = []
    for _ in range(count):
        a, b = np.sort(rng.uniform(lo + margin * w, hi - margin * w, 2))
        if b - a < 1e-6:
            b = a + 1e-3
        inc = rng.integers(0, 2, 2)
        out.append(Interval(float(a), float(b), bool(inc[0]), bool(inc[1])))
    return out


def _special_points(sc: Scenario) -> list[float]:
    return sorted(set(sc.u.jump_points) | set(sc.field.jump_points()))


def _sigma_F_integral(sc: Scenario, S: BorelSet, jump_value: Callable[[float, Part], float],
                      tol: float = 1e-11) -> float:
    """int_S F(x, u*) d sigma with F and sigma taken from the sigma system (explicit route).

    ``jump_value(p, part)`` supplies F at sigma-atoms where u jumps; elsewhere
    F is evaluated at the precise representative.
    """
    fd, u = sc.field, sc.u
    sys = sigma_system(fd)
    parts = []
    for p, mass in sorted(sys.sigma.atoms.items()):
        if not bool(S.contains(p)):
            continue
        part = Part("atom", p)
        if u.jump_at(p) is not None:
            Fv = jump_value(p, part)
        else:
            Fv = float(sys.F(part, float(u.right(p))))
        parts.append(Fv * mass)
    for comp in sys.sigma.cantor:
        part = Part("cantor", comp.support)
        for iv in S:
            if iv.hi <= comp.lo or iv.lo >= comp.hi or iv.is_point:
                continue
            parts.append(comp.weight * integrate_cantor(
                lambda x, part=part: sys.F(part, np.asarray(u.approx(x))),
                comp.lo, comp.hi, tol=tol, lo=iv.lo, hi=iv.hi, breakpoints=u.breakpoints()))
    if sys.m.ac is not None:
        terms = fd.terms

        def dens(x):
            x = np.asarray(x, dtype=float)
            ut = np.asarray(u.approx(x))
            coef = sys.ac_coef(x)
            s = sys.ac_s(x).reshape(x.shape)
            num = sum(coef[k].reshape(x.shape) * terms[k].G.eval(ut) for k in range(len(terms)))
            with np.errstate(invalid="ignore", divide="ignore"):
                F = np.where(s > 0, num / np.where(s > 0, s, 1.0), 0.0)
            return F * s * np.asarray(sys.m.ac(x))

        bps = sorted(set(u.breakpoints()) | set(fd.breakpoints()))
        for iv in S:
            if not iv.is_point:
                parts.append(integrate_lebesgue(dens, iv.lo, iv.hi, tol=tol, breakpoints=bps,
                                                cantor_supports=u.cantor_supports))
    return math.fsum(parts)


# ---------------------------------------------------------------------------
# representation
# ---------------------------------------------------------------------------


def _cantor_samples(u: BVFunction, rng: np.random.Generator, count: int) -> list[float]:
    out = []
    for c in u.cantor:
        out.append(c.lo + 0.25 * (c.hi - c.lo))
        for _ in range(count):
            digits = rng.integers(0, 2, 34)
            y = float(np.sum(2.0 * digits * 3.0 ** -np.arange(1, 35)))
            out.append(c.lo + y * (c.hi - c.lo))
    return out


def check_representation(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """Pairing measure against the measure assembled from its density report."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("representation", DEFAULT_TOLERANCES["representation"]))
    col = _Collector("representation", scale)
    fd, u = sc.field, sc.u
    rng = sc.rng("representation")
    ivs = random_intervals(sc, "representation", 16)
    ivs.append(Interval.open(*sc.domain))
    for p in _special_points(sc):
        d = 0.05 * (sc.domain[1] - sc.domain[0])
        ivs += [Interval.closed(p - d, p + d), Interval(p - d, p, False, False), Interval(p, p + d, True, False)]
    for c in u.cantor:
        ivs += [Interval.closed(c.lo, c.lo + (c.hi - c.lo) / 3), Interval.open(c.lo + (c.hi - c.lo) / 3, c.hi)]
    samples = _cantor_samples(u, rng, 3)
    per = {}
    for ref in _selection_refs(sc, params, "selections"):
        sel = sc.selection(ref)
        for variant, build in (("internal", pairing_internal), ("external", pairing_external)):
            pm = build(fd, u, sel)
            rep = pairing_densities(fd, u, pm, samples=samples)
            A = rep.assemble()
            key = f"{variant}[{_label(ref)}]"
            r_iv = max(abs(pm.eval(iv) - measure_eval(A, iv)) for iv in ivs)
            r_phi = max(abs(pm.pair(phi) - measure_pair(A, phi)) for phi in _phis(sc, params))
            r_jump = max((abs(j.mean_integral - j.theta) * j.height for j in rep.jumps), default=0.0)
            r_win = max((w["residual"] for w in rep.cantor_windows), default=0.0)
            col.add("intervals", r_iv, tol)
            col.add("test_functions", r_phi, tol)
            col.add("jump_densities", r_jump, tol)
            col.add("cantor_windows", r_win, tol)
            outside = [s["x"] for s in rep.cantor_samples if s["status"] == SAMPLE_OUTSIDE]
            per[key] = {
                "intervals": r_iv, "test_functions": r_phi, "jump_densities": r_jump, "cantor_windows": r_win,
                "total_over_domain": pm.eval(Interval.open(*sc.domain)),
                "sample_outside": outside,
                "suspect_jump_formula": {repr(j.x): {"difference_formula": j.formula, "alternative": j.suspect_formula}
                                         for j in rep.jumps if j.suspect_formula is not None},
            }
    col.details["per_pairing"] = per
    return col.result()


# ---------------------------------------------------------------------------
# coarea
# ---------------------------------------------------------------------------


class CoareaUnsupported(PairingError):
    code = "UNSUPPORTED"


def _cantor_piece_ranges(u: BVFunction):
    return [(p.lo, p.hi) for p, _, _ in u._pure_cantor_pieces()]


def _check_coarea_support(u: BVFunction):
    pure = {(p.lo, p.hi) for p, _, _ in u._pure_cantor_pieces()}
    for c in u.cantor:
        if (c.lo, c.hi) not in pure:
            raise CoareaUnsupported(f"Cantor part on [{c.lo}, {c.hi}] shares a monotone piece with other parts")


def coarea_integrand(fd: Field, u: BVFunction, Lam: Selection, phi: TestFunction, t: float,
                     exclude: list[tuple[float, float]], E: FinitePerimeterSet | None = None) -> float:
    """<[b_t, D chi_{u>t}]_Lambda, phi>, skipping boundary points inside ``exclude`` ranges."""
    if E is None:
        E, _ = bv_level_set(u, t)
    out = []
    for p, nu in E.boundary():
        jp = u.jump_at(p)
        if jp is None and any(a <= p <= b for a, b in exclude):
            continue
        fp = phi.value(p)
        if fp == 0.0:
            continue
        if jp is not None:
            L = Lam.at(p)
            chi = L * (jp.u_plus > t) + (1.0 - L) * (jp.u_minus > t)
        else:
            chi = 0.0
        tb = field_traces(fd, p, nu)
        out.append(fp * ((1.0 - chi) * float(tb.gamma_i(t)) + chi * float(tb.gamma_e(t))))
    return math.fsum(out)


def coarea_rhs(fd: Field, u: BVFunction, Lam: Selection, phi: TestFunction, tol: float = T_QUAD_TOL) -> tuple[float, dict]:
    """int_R <[b_t, D chi_{u>t}]_Lambda, phi> dt.

    Split in t at every exceptional level; pure Cantor pieces of u are
    integrated in x through the substitution t = u(y), dt = w dC(y).
    """
    _check_coarea_support(u)
    exclude = _cantor_piece_ranges(u)
    levels = set(u.irregular_values())
    pts = set(fd.breakpoints()) | set(phi.breakpoints) | set(phi.support)
    for p in pts:
        if u.domain[0] < p < u.domain[1]:
            levels |= {float(u.left(p)), float(u.right(p))}
    tmin, tmax = min(levels), max(levels)
    levels |= {k for k in fd.t_kinks() if tmin < k < tmax}
    bad = sorted(u.irregular_values())

    def f(ts):
        ts = [float(t) + (1e-9 if any(abs(float(t) - v) <= 1e-13 for v in bad) else 0.0) for t in np.atleast_1d(ts)]
        sets = bv_level_sets(u, ts)
        return np.array([coarea_integrand(fd, u, Lam, phi, t, exclude, E) for t, (E, _) in zip(ts, sets)])

    cuts = sorted(levels)
    t_part = integrate(f, tmin, tmax, tol=tol, breakpoints=cuts)
    c_parts = []
    for piece, comp, start in u._pure_cantor_pieces():
        w = comp.weight

        def g(y, w=w):
            y = np.asarray(y, dtype=float)
            return phi.value(y) * fd.b(y, np.asarray(u.approx(y)))

        a, b = phi.support
        c_parts.append(w * integrate_cantor(g, comp.lo, comp.hi, tol=tol / max(abs(w), 1e-300), lo=a, hi=b,
                                            breakpoints=list(phi.breakpoints) + fd.breakpoints()))
    return t_part + math.fsum(c_parts), {"t_range": [tmin, tmax], "t_part": t_part, "cantor_part": math.fsum(c_parts)}


def check_coarea(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """External pairing against the t-integral of linear pairings of the level sets."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("coarea", DEFAULT_TOLERANCES["coarea"]))
    col = _Collector("coarea", scale)
    fd, u = sc.field, sc.u
    try:
        _check_coarea_support(u)
    except CoareaUnsupported as err:
        col.add("unsupported", math.inf, tol)
        col.details["reason"] = str(err)
        return col.result()
    rows = {}
    for ref in _selection_refs(sc, params, "Lambda"):
        Lam = sc.selection(ref)
        pm = pairing_external(fd, u, Lam)
        for phi in _phis(sc, params):
            lhs = pm.pair(phi, 1e-11)
            rhs, info = coarea_rhs(fd, u, Lam, phi)
            col.add("external", abs(lhs - rhs), tol)
            rows[f"{_label(ref)}/{phi.name}"] = {"lhs": lhs, "rhs": rhs, **info}
    col.details["cases"] = rows
    return col.result()


def check_coarea_negative(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """Same t-integral against the internal pairing: reports the gap left by the jump set."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("coarea_negative", DEFAULT_TOLERANCES["coarea_negative"]))
    col = _Collector("coarea_negative", scale)
    fd, u = sc.field, sc.u
    if not u.jumps:
        return skipped("coarea_negative", "u has no jumps, so internal and external pairings coincide")
    ref = params.get("lambda", "half" if "half" in sc.selections else next(iter(sc.selections)))
    lam = sc.selection(ref)
    phi = sc.phi(params.get("phi"))
    pm_int = pairing_internal(fd, u, lam)
    # the t-integral is taken with Lambda equal to the internal selection
    rhs, info = coarea_rhs(fd, u, lam, phi)
    lhs = pm_int.pair(phi, 1e-11)
    gap = rhs - lhs
    pm_ext = pairing_external(fd, u, lam)
    predicted = math.fsum(phi.value(jd.x) * (pm_ext.atom(jd.x) - pm_int.atom(jd.x)) for jd in pm_int.jumps)
    col.add("gap_vs_jump_prediction", abs(gap - predicted), tol)
    if "expected_gap" in params:
        col.add("gap_vs_expected", abs(gap - float(params["expected_gap"])), tol)
    col.details.update({"lambda": _label(ref), "phi": phi.name, "internal": lhs, "coarea_integral": rhs,
                        "gap": gap, "predicted_gap": predicted, **info})
    return col.result()


# ---------------------------------------------------------------------------
# Gauss-Green
# ---------------------------------------------------------------------------


def gauss_green_sides(sc: Scenario, E: FinitePerimeterSet, sel: Selection) -> dict[str, tuple[float, float]]:
    """(LHS, RHS) of the four formulas for one set and one selection."""
    fd, u = sc.field, sc.u
    sys = sigma_system(fd)
    pm_int = pairing_internal(fd, u, sel)
    pm_ext = pairing_external(fd, u, sel)
    interior, closure = E.interior(), E.closure()

    def mixed(p, part):
        jp = u.jump_at(p)
        L = sel.at(p)
        return (L * float(sys.F(part, jp.u_plus)) + (1.0 - L) * float(sys.F(part, jp.u_minus)))

    def at_lambda(p, part):
        jp, lam = u.jump_at(p), sel.at(p)
        return float(sys.F(part, (1.0 - lam) * jp.u_minus + lam * jp.u_plus))

    rhs_i, rhs_e = [], []
    for p, nu in E.boundary():
        tb = field_traces(fd, p, nu)
        u_in = float(u.right(p)) if nu > 0 else float(u.left(p))
        u_out = float(u.left(p)) if nu > 0 else float(u.right(p))
        rhs_i.append(-float(tb.beta_i(u_in)))
        rhs_e.append(-float(tb.beta_e(u_out)))
    ri, re_ = math.fsum(rhs_i), math.fsum(rhs_e)
    return {
        "external_interior": (_sigma_F_integral(sc, interior, mixed) + pm_ext.eval(interior), ri),
        "external_closure": (_sigma_F_integral(sc, closure, mixed) + pm_ext.eval(closure), re_),
        "internal_interior": (_sigma_F_integral(sc, interior, at_lambda) + pm_int.eval(interior), ri),
        "internal_closure": (_sigma_F_integral(sc, closure, at_lambda) + pm_int.eval(closure), re_),
    }


def check_gauss_green(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """All four Gauss-Green identities on catalog, random and jump-anchored intervals."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("gauss_green", DEFAULT_TOLERANCES["gauss_green"]))
    col = _Collector("gauss_green", scale)
    lo, hi = sc.domain
    names = params.get("sets")
    sets = [(k, sc.sets[k]) for k in (names if names is not None else sc.sets)]
    for i, iv in enumerate(random_intervals(sc, "gauss_green", int(params.get("n_random", 10)))):
        sets.append((f"random{i}", FinitePerimeterSet([(iv.lo, iv.hi)], sc.domain)))
    d = 0.05 * (hi - lo)
    for p in _special_points(sc):
        for a, b in ((p, p + d), (p - d, p), (p - d, p + d)):
            if lo < a and b < hi:
                sets.append((f"anchored[{a:.6g},{b:.6g}]", FinitePerimeterSet([(a, b)], sc.domain)))
    cases = {}
    for ref in _selection_refs(sc, params, "selections"):
        sel = sc.selection(ref)
        for sname, E in sets:
            sides = gauss_green_sides(sc, E, sel)
            for key, (lhs, rhs) in sides.items():
                col.add(key, abs(lhs - rhs), tol)
            if not sname.startswith("random") and not sname.startswith("anchored"):
                cases[f"{_label(ref)}/{sname}"] = {k: {"lhs": v[0], "rhs": v[1]} for k, v in sides.items()}
    col.details["catalog_sets"] = cases
    col.details["sets_checked"] = len(sets)
    return col.result()


# ---------------------------------------------------------------------------
# lower semicontinuity, recovery, relaxation
# ---------------------------------------------------------------------------


def _sequence_values(fd: Field, seq: ApproxSequence, fn: Callable[[BVFunction], float]) -> tuple[list[float], list[dict]]:
    vals, certs = [], []
    for n in seq.ladder:
        un = seq.at(n)
        vals.append(fn(un))
        certs.append(seq.certificate(n, un) if n in (seq.ladder[0], seq.ladder[-1]) else {"n": n})
    return vals, certs


def _const_lambdas(params: dict) -> list[float]:
    return [float(v) for v in params.get("lambdas", LAMBDA_GRID)]


def _certificate_entries(col: _Collector, certs: list[dict], u: BVFunction):
    for c in certs:
        if "l1" in c:
            col.add("certificate_pr_margin", max(0.0, -c["pr_margin"]), 1e-12)
            col.add("certificate_domination", 0.0 if c["dominated"] else 1.0, 0.0)
            # L1 distance of a ramp is at most (oscillation on the window) x (window width)
            bound = 2.0 * (2.0 * u.sup_bound) * 2.0 / c["n"]
            col.add("certificate_l1", max(0.0, c["l1"] - bound), 1e-12)


def check_lsc_L(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("lsc_L", DEFAULT_TOLERANCES["lsc_L"]))
    col = _Collector("lsc_L", scale)
    fd, u = sc.field, sc.u
    phi = sc.phi(params.get("phi"), nonnegative=True)
    if not phi.is_nonnegative():
        col.add("phi_nonnegative", 1.0, 0.0)
        return col.result()
    pmL, witness = pairing_L(fd, u)
    value = pmL.pair(phi, 1e-11)
    per = {}
    for lam in _const_lambdas(params):
        sel = Selection.const(u, lam)
        seq = ApproxSequence(u, sel, fd)
        vals, certs = _sequence_values(fd, seq, lambda un: diffuse_functional(fd, un, phi))
        limit = pairing_internal(fd, u, sel).pair(phi, 1e-11)
        lim_inf = trailing_liminf(vals, seq.ladder)
        col.add("liminf_deficit", max(0.0, value - lim_inf), tol)
        _certificate_entries(col, certs, u)
        key = f"lambda={lam:g}"
        col.tables[key] = [(n, v, abs(v - limit)) for n, v in zip(seq.ladder, vals)]
        per[key] = {"liminf": lim_inf, "predicted_limit": limit, "converged": converged(vals, limit)}
    col.details.update({"phi": phi.name, "value_L": value, "witness": witness.as_dict(), "sequences": per})
    return col.result()


def v_split(fd: Field, u: BVFunction, K: tuple[float, float]) -> dict[str, float]:
    """|V|(K) and the split into positive parts of the L-pairings of b and -b."""
    iv = Interval.open(*K)
    pmV, _, _ = pairing_V(fd, u)
    Gp = pairing_L(fd, u)[0].total_variation(iv, positive=True)
    Hp = pairing_L(negate_field(fd), u)[0].total_variation(iv, positive=True)
    return {"V_total": pmV.total_variation(iv), "G_plus": Gp, "H_plus": Hp}


def check_lsc_V(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("lsc_V", DEFAULT_TOLERANCES["lsc_V"]))
    col = _Collector("lsc_V", scale)
    fd, u = sc.field, sc.u
    phi = sc.phi(params.get("phi"), nonnegative=True)
    K = phi.support
    split = v_split(fd, u, K)
    col.add("split_identity", abs(split["G_plus"] + split["H_plus"] - split["V_total"]), 1e-8)
    per = {}
    for lam in _const_lambdas(params):
        sel = Selection.const(u, lam)
        seq = ApproxSequence(u, sel, fd)
        vals, certs = _sequence_values(fd, seq, lambda un: diffuse_variation(fd, un, K))
        gp, _ = _sequence_values(fd, seq, lambda un: diffuse_variation(fd, un, K, +1))
        hp, _ = _sequence_values(fd, seq, lambda un: diffuse_variation(fd, un, K, -1))
        lim_inf = trailing_liminf(vals, seq.ladder)
        col.add("liminf_deficit", max(0.0, split["V_total"] - lim_inf), tol)
        col.add("G_plus_deficit", max(0.0, split["G_plus"] - trailing_liminf(gp, seq.ladder)), tol)
        col.add("H_plus_deficit", max(0.0, split["H_plus"] - trailing_liminf(hp, seq.ladder)), tol)
        _certificate_entries(col, certs, u)
        key = f"lambda={lam:g}"
        col.tables[key] = [(n, v, abs(v - split["V_total"])) for n, v in zip(seq.ladder, vals)]
        per[key] = {"liminf": lim_inf, "liminf_G_plus": trailing_liminf(gp, seq.ladder), "liminf_H_plus": trailing_liminf(hp, seq.ladder)}
    col.details.update({"phi_support": list(K), **split, "sequences": per})
    return col.result()


def _in_lambda_max(u: BVFunction, fd: Field, sel: Selection, tol: float = 1e-9) -> tuple[bool, float]:
    """Whether sel attains max F on every charged jump; also the worst shortfall."""
    worst = 0.0
    for jd in jump_data(fd, u):
        if not jd.charged:
            continue
        _, fmax = maximize_1d(jd.D, jd.jp.u_minus, jd.jp.u_plus)
        worst = max(worst, fmax - float(jd.D(jd.u_of(sel.at(jd.x)))))
    return worst <= tol, worst


def check_lsc_converse(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """For lambda outside the max-F class, the CL(lambda-hat) sequence undercuts the lambda-pairing."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("lsc_converse", DEFAULT_TOLERANCES["lsc_converse"]))
    col = _Collector("lsc_converse", scale)
    fd, u = sc.field, sc.u
    if not u.jumps:
        return skipped("lsc_converse", "u has no jumps")
    ref = params.get("lambda", 0.0)
    sel = sc.selection(ref)
    phi = sc.phi(params.get("phi"), nonnegative=True)
    inside, shortfall = _in_lambda_max(u, fd, sel)
    value = pairing_internal(fd, u, sel).pair(phi, 1e-11)
    pmL, witness = pairing_L(fd, u)
    seq = ApproxSequence(u, witness, fd)
    vals, certs = _sequence_values(fd, seq, lambda un: diffuse_functional(fd, un, phi))
    lim_inf = trailing_liminf(vals, seq.ladder)
    gap = value - lim_inf
    predicted = value - pmL.pair(phi, 1e-11)
    _certificate_entries(col, certs, u)
    col.tables["witness"] = [(n, v, abs(v - (value - predicted))) for n, v in zip(seq.ladder, vals)]
    if inside:
        col.add("gap_for_max_class_selection", abs(gap), tol)
    else:
        col.add("gap_not_positive", 0.0 if gap > tol * scale else 1.0, 0.0)
        col.add("gap_vs_prediction", abs(gap - predicted), tol)
    if "expected_gap" in params:
        col.add("gap_vs_expected", abs(gap - float(params["expected_gap"])), tol)
    col.details.update({"lambda": _label(ref), "in_max_class": inside, "max_class_shortfall": shortfall,
                        "value": value, "liminf": lim_inf, "gap": gap, "predicted_gap": predicted,
                        "witness": witness.as_dict(), "phi": phi.name})
    return col.result()


def check_recovery(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """CL(lambda) values converge to the internal lambda-pairing, with a fitted rate."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("recovery", DEFAULT_TOLERANCES["recovery"]))
    col = _Collector("recovery", scale)
    fd, u = sc.field, sc.u
    phi = sc.phi(params.get("phi"))
    Lam = sc.selection(params.get("Lambda", next(iter(sc.selections))))
    per = {}
    for ref in _selection_refs(sc, params, "lambdas"):
        sel = sc.selection(ref)
        seq = ApproxSequence(u, sel, fd)
        vals, certs = _sequence_values(fd, seq, lambda un: diffuse_functional(fd, un, phi))
        limit = pairing_internal(fd, u, sel).pair(phi, 1e-11)
        errs = [abs(v - limit) for v in vals]
        rate = fitted_rate(list(seq.ladder), errs)
        col.add("final_error", errs[-1], tol)
        col.add("rate_shortfall", 0.0 if (rate is None and errs[-1] <= 1e-12) else max(0.0, 0.9 - (rate or 0.0)), 0.0)
        _certificate_entries(col, certs, u)
        # second route at the finest n: the pairing of u_n with the external selection
        un = seq.at(seq.ladder[-1])
        pm_n = pairing_external(fd, un, Selection.const(un, Lam.param if Lam.param is not None else 0.5))
        col.add("route_gap", abs(pm_n.pair(phi, 1e-11) - vals[-1]), 1e-7)
        key = _label(ref)
        col.tables[key] = [(n, v, e) for n, v, e in zip(seq.ladder, vals, errs)]
        per[key] = {"limit": limit, "final_error": errs[-1], "rate": rate, "converged": converged(vals, limit),
                    "strict_gap_final": certs[-1].get("strict_gap")}
    col.details.update({"phi": phi.name, "sequences": per})
    return col.result()


def check_relaxation(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """Grid of CL(lambda) limits: all above <L, phi>, and the minimum attains it with a max-F witness."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("relaxation", DEFAULT_TOLERANCES["relaxation"]))
    col = _Collector("relaxation", scale)
    fd, u = sc.field, sc.u
    if u.cantor:
        return skipped("relaxation", "u has a Cantor part, so CL sequences are not Sobolev")
    phi = sc.phi(params.get("phi"), nonnegative=True)
    pmL, witness = pairing_L(fd, u)
    target = pmL.pair(phi, 1e-11)
    per, limits = {}, {}
    for lam in _const_lambdas(params):
        sel = Selection.const(u, lam)
        seq = ApproxSequence(u, sel, fd)
        vals, certs = _sequence_values(fd, seq, lambda un: diffuse_functional(fd, un, phi))
        _certificate_entries(col, certs, u)
        key = f"lambda={lam:g}"
        limit = vals[-1]
        limits[key] = (limit, sel)
        col.add("liminf_below_L", max(0.0, target - trailing_liminf(vals, seq.ladder)), tol)
        col.tables[key] = [(n, v, abs(v - target)) for n, v in zip(seq.ladder, vals)]
        per[key] = {"limit": limit, "liminf": trailing_liminf(vals, seq.ladder)}
    seq = ApproxSequence(u, witness, fd)
    wvals, _ = _sequence_values(fd, seq, lambda un: diffuse_functional(fd, un, phi))
    col.tables["witness"] = [(n, v, abs(v - target)) for n, v in zip(seq.ladder, wvals)]
    grid_key = min(limits, key=lambda k: limits[k][0])
    grid_min, grid_sel = limits[grid_key]
    best_val, best_sel, best_key = (grid_min, grid_sel, grid_key)
    if wvals[-1] < grid_min:
        best_val, best_sel, best_key = wvals[-1], witness, "witness"
    col.add("attainment", abs(best_val - target), tol)
    in_class, shortfall = _in_lambda_max(u, fd, best_sel)
    col.add("witness_max_class_shortfall", shortfall, 1e-9)
    col.details.update({"phi": phi.name, "value_L": target, "grid_min": grid_min, "grid_argmin": grid_key,
                        "witness_limit": wvals[-1], "attained_by": best_key, "witness": witness.as_dict(),
                        "sequences": per})
    return col.result()


# ---------------------------------------------------------------------------
# slicing
# ---------------------------------------------------------------------------


def _ac_samples(sc: Scenario, count: int) -> list[float]:
    u = sc.u
    if u.ac is None:
        return []
    rng = sc.rng("slicing")
    lo, hi = sc.domain
    bad = sorted(set(u.breakpoints()) | set(sc.field.breakpoints()))
    out = []
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        x = float(rng.uniform(lo, hi))
        if any(abs(x - b) < 1e-6 for b in bad):
            continue
        if any(c.lo <= x <= c.hi for c in u.cantor):
            continue
        if abs(float(u.ac.eval(x))) < 1e-8:
            continue
        if u.is_irregular(float(u.approx(x)), tol=1e-9):
            continue
        out.append(x)
    return out


def _boundary_normal(u: BVFunction, x: float, t: float) -> int | None:
    E, _ = bv_level_set(u, t)
    for p, nu in E.boundary():
        if abs(p - x) <= 1e-9 * max(1.0, abs(x)):
            return nu
    return None


def check_slicing(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """Diffuse density of the pairing at x against Tr* of b_t on the boundary of {u > t}, t = u(x)."""
    params = params or {}
    tol = params.get("tolerance", sc.tolerances.get("slicing", DEFAULT_TOLERANCES["slicing"]))
    ctol = float(params.get("cantor_tolerance", 1e-3))
    col = _Collector("slicing", scale)
    fd, u = sc.field, sc.u
    n = int(params.get("n_samples", 8))
    pm = pairing_internal(fd, u, sc.selection(next(iter(sc.selections))))
    rows = []
    for x in _ac_samples(sc, n):
        t = float(u.approx(x))
        nu = _boundary_normal(u, x, t)
        if nu is None:
            rows.append({"x": x, "t": t, "status": SAMPLE_OUTSIDE})
            continue
        lhs = float(pm.ac_density(np.array(x))) / abs(float(u.ac.eval(x)))
        rhs = float(field_traces(fd, x, nu).b_star(t))
        col.add("ac_samples", abs(lhs - rhs), tol)
        rows.append({"x": x, "t": t, "pairing_density": lhs, "level_set_trace": rhs, "status": "ok"})
    depth = 12
    for c in u.cantor:
        for x in _cantor_samples(u, sc.rng("slicing-cantor"), max(2, n // 2)):
            if not c.lo <= x <= c.hi:
                continue
            t = float(u.approx(x))
            nu = _boundary_normal(u, x, t)
            if nu is None:
                rows.append({"x": x, "t": t, "status": SAMPLE_OUTSIDE})
                continue
            y = (x - c.lo) / (c.hi - c.lo)
            left, _ = cantor_cells(depth)
            k = int(np.searchsorted(left, y, side="right")) - 1
            a = c.lo + (c.hi - c.lo) * left[k]
            b = a + (c.hi - c.lo) * 3.0 ** -depth
            lhs = pm.cantor_mass(a, b) / (abs(c.weight) * 2.0 ** -depth)
            rhs = float(field_traces(fd, x, nu).b_star(t))
            col.add("cantor_samples", abs(lhs - rhs), ctol)
            rows.append({"x": x, "t": t, "pairing_density": lhs, "level_set_trace": rhs, "status": "ok"})
    col.details["samples"] = rows
    col.details["probe"] = _slicing_probe(sc)
    if not col.res:
        col.details["note"] = "no diffuse sample points"
    return col.result()


def _slicing_probe(sc: Scenario) -> list[dict]:
    """At jumps of u where the field is continuous in x but nonlinear in t, the sliced densities differ.

    Informational only: the slicing identity is asserted off the jump set.
    """
    fd, u = sc.field, sc.u
    if all(isinstance(t.g, ex.Const) for t in fd.terms):
        return []
    out = []
    fjumps = set(fd.jump_points())
    pm = pairing_internal(fd, u, Selection.const(u, 0.5))
    for jp in u.jumps:
        if jp.x in fjumps:
            continue
        theta = pm.atom(jp.x) / jp.height
        tb = field_traces(fd, jp.x, jp.nu)
        ts = np.linspace(jp.u_minus, jp.u_plus, 65)[1:-1]
        sliced = np.asarray(tb.b_star(ts))
        out.append({"x": jp.x, "jump_density": theta, "sliced_min": float(sliced.min()),
                    "sliced_max": float(sliced.max()), "max_gap": float(np.max(np.abs(sliced - theta)))})
    return out


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------


def _all_variants(sc: Scenario) -> list[tuple[str, PairingMeasure]]:
    fd, u = sc.field, sc.u
    out = []
    for ref in sc.selections:
        sel = sc.selection(ref)
        out.append((f"internal[{ref}]", pairing_internal(fd, u, sel)))
        out.append((f"external[{ref}]", pairing_external(fd, u, sel)))
    out.append(("standard", pairing_standard(fd, u)))
    out.append(("L", pairing_L(fd, u)[0]))
    out.append(("V", pairing_V(fd, u)[0]))
    return out


def _F_hat(sys, part, a, b):
    return maximize_1d(lambda t: sys.F(part, t), a, b)[1]


def check_misc(sc: Scenario, params: dict | None = None, scale: float = 1.0) -> CheckResult:
    """Bundle of structural invariants, one residual per sub-check."""
    params = params or {}
    col = _Collector("misc", scale)
    fd, u = sc.field, sc.u
    sys = sigma_system(fd)
    comp = field_composite(fd, u)
    rng = sc.rng("misc")
    T = fd.T
    phis = _phis(sc, params)
    variants = _all_variants(sc)
    du_tv = measure_tv(bv_derivative(u))[0]

    # weak form against the definition, every variant and test function
    for name, pm in variants:
        for phi in phis:
            col.add("weak_form", abs(pm.pair(phi, 1e-11) - weak_form(pm, phi, 1e-11)), 1e-7)

    # TV bound on seeded random intervals
    n_iv = int(params.get("n_intervals", 100))
    ivs = random_intervals(sc, "misc-tv", n_iv)
    worst = 0.0
    for name, pm in variants:
        for iv in ivs:
            worst = max(worst, pm.total_variation(iv) - fd.b_sup * measure_eval(du_tv, iv))
    col.add("tv_bound", max(0.0, worst), 1e-10)

    # variants agree off the jump set
    jumps = u.jump_points
    off = [iv for iv in random_intervals(sc, "misc-off", 30) if not any(iv.lo <= p <= iv.hi for p in jumps)]
    for iv in off:
        vals = [pm.eval(iv) for _, pm in variants]
        col.add("variants_off_jumps", max(vals) - min(vals), 1e-10)

    # jump formulas: internal atom = zeta(u^lambda), L atom = min zeta
    jds = jump_data(fd, u, comp)
    for name, pm in variants:
        if pm.variant != "internal":
            continue
        for jd in jds:
            col.add("internal_atom_zeta", abs(pm.atom(jd.x) - float(jd.zeta(jd.u_of(pm.selection.at(jd.x))))), 1e-12)
    pmL = dict(variants)["L"]
    for jd in jds:
        _, neg_min = maximize_1d(lambda t, jd=jd: -jd.zeta(t), jd.jp.u_minus, jd.jp.u_plus)
        col.add("L_atom_min_zeta", abs(pmL.atom(jd.x) + neg_min), 1e-9)

    # minimality of L and |V|
    pmV = dict(variants)["V"]
    grid_int = [pairing_internal(fd, u, Selection.const(u, lam)) for lam in LAMBDA_GRID]
    for phi in phis:
        if not phi.is_nonnegative():
            continue
        lval = pmL.pair(phi, 1e-11)
        for pm in grid_int:
            col.add("L_minimal", max(0.0, lval - pm.pair(phi, 1e-11)), 1e-9)
    for iv in random_intervals(sc, "misc-v", 12):
        vv = pmV.total_variation(iv)
        for pm in grid_int:
            col.add("V_setwise_minimal", max(0.0, vv - pm.total_variation(iv)), 1e-9)

    # matching in both directions
    monotone = True
    for Lam in (0.0, 0.5, 1.0):
        sel_L = Selection.const(u, Lam)
        lam_sel, resid = pairing_match_external(fd, u, sel_L)
        col.add("matching_residual", max((abs(r) for r in resid.values()), default=0.0), 1e-10)
        pm_i = pairing_internal(fd, u, lam_sel)
        pm_e = pairing_external(fd, u, sel_L)
        for jd in jds:
            col.add("matching_atoms", abs(pm_i.atom(jd.x) - pm_e.atom(jd.x)), 1e-10)
    for jd in jds:
        if jd.charged:
            d = np.diff(jd.D(np.linspace(-T, T, 2049)))
            monotone &= bool(np.all(d >= -1e-14) or np.all(d <= 1e-14))
    if monotone:
        for lam in LAMBDA_GRID:
            _, R = pairing_match_internal(fd, u, Selection.const(u, lam))
            col.add("monotone_R_zero", max((abs(r) for r in R.values()), default=0.0), 1e-10)
    col.details["monotone_F"] = monotone

    # sigma system: |f| <= 1, F(., 0) = 0, F 1-Lipschitz, F-hat structure
    parts = [Part("atom", p) for p in sorted(sys.sigma.atoms)] + [Part("cantor", s) for s in sorted(sys.cantor_coef)]
    if sys.m.ac is not None:
        lo, hi = fd.domain
        parts += [Part("ac", float(x)) for x in rng.uniform(lo, hi, 6)]
    ts = np.linspace(-T, T, 401)
    for part in parts:
        fv = np.asarray(sys.f(part, ts))
        col.add("f_bounded", max(0.0, float(np.max(np.abs(fv))) - 1.0), 1e-12)
        col.add("F_zero_at_zero", abs(float(sys.F(part, 0.0))), 1e-15)
        Fv = np.asarray(sys.F(part, ts))
        col.add("F_lipschitz", max(0.0, float(np.max(np.abs(np.diff(Fv)) - np.diff(ts)))), 1e-12)
    for part in parts[:4]:
        for _ in range(4):
            a1, a2, b = np.sort(rng.uniform(-T + 1, T - 1, 3))
            b2 = min(b + 0.3, T - 1)
            f11, f21 = _F_hat(sys, part, a1, b), _F_hat(sys, part, a2, b)
            f12 = _F_hat(sys, part, a1, b2)
            col.add("F_hat_monotone", max(0.0, f21 - f11, f11 - f12), 1e-10)
            col.add("F_hat_lipschitz", max(0.0, abs(f11 - f21) - (a2 - a1), abs(f12 - f11) - (b2 - b)), 1e-10)

    # traces: Lipschitz, div identity at atoms, composite traces
    tpairs = rng.uniform(-T, T, (16, 2))
    for p in _special_points(sc):
        for nu in (1, -1):
            tb = field_traces(fd, p, nu)
            for t, s in tpairs:
                for beta in (tb.beta_i, tb.beta_e):
                    col.add("trace_lipschitz", max(0.0, abs(float(beta(t)) - float(beta(s))) - fd.b_sup * abs(t - s)), 1e-12)
        tb = field_traces(fd, p, 1)
        for t in tpairs[:, 0]:
            div = measure_eval(field_div_Bt(fd, float(t)), Interval.point(p))
            col.add("trace_jump_identity", abs(float(tb.beta_i(t)) - float(tb.beta_e(t)) - div), 1e-12)
        jp = u.jump_at(p)
        nu = jp.nu if jp is not None else 1
        tb = field_traces(fd, p, nu)
        inner = comp.right(p) if nu > 0 else comp.left(p)
        outer = comp.left(p) if nu > 0 else comp.right(p)
        u_in = u.right(p) if nu > 0 else u.left(p)
        u_out = u.left(p) if nu > 0 else u.right(p)
        col.add("composite_traces", max(abs(nu * float(inner) - float(tb.beta_i(u_in))),
                                        abs(nu * float(outer) - float(tb.beta_e(u_out)))), 1e-12)

    # domination of |div b_t| by sigma, and the primitive identity
    sig_tv = sys.sigma
    samples = [BorelSet([iv]) for iv in random_intervals(sc, "misc-dom", 8)]
    samples += [BorelSet([Interval.point(p)]) for p in fd.jump_points()]
    dom_fail = 0
    for t in np.linspace(-T, T, 64):
        if not measure_dominates(sig_tv, measure_tv(field_div_bt(fd, float(t)))[0], samples, 1e-9):
            dom_fail += 1
    col.add("sigma_dominates", float(dom_fail), 0.0)
    derivs = [bv_derivative(term.A) for term in fd.terms]
    for iv in random_intervals(sc, "misc-prim", 3):
        da = [measure_eval(d, iv) for d in derivs]
        for t in (-0.7 * T, 0.4 * T):
            direct = measure_eval(field_div_Bt(fd, t), iv)
            quad = math.fsum(integrate(term.g.eval, 0.0, t, tol=1e-13, breakpoints=term.g.kinks()) * a
                             for term, a in zip(fd.terms, da))
            col.add("primitive_divergence", abs(direct - quad), 1e-10)

    # composite: weak against structural divergence, and |Div v|(K) <= sup|u| sigma(K) + sup|b| |Du|(K)
    for phi in phis:
        col.add("composite_weak_vs_structural", abs(comp.weak_pair(phi, 1e-11) - comp.structural_pair(phi, 1e-11)), 1e-8)
    for iv in random_intervals(sc, "misc-bound", 4):
        lhs, rhs = comp.bound_check(Interval.closed(iv.lo, iv.hi), sys.sigma)
        col.add("composite_bound", max(0.0, lhs - rhs), 1e-10)

    # level sets: chi_{u^+ > t} = (chi_{u > t})^+ and the same for minus
    lo, hi = sc.domain
    xs = list(rng.uniform(lo, hi, 24)) + list(u.jump_points)
    levels = [float(v) for v in rng.uniform(-u.sup_bound, u.sup_bound, 8)]
    mism = 0
    for t in levels:
        if u.is_irregular(t, 1e-9):
            continue
        w, _ = bv_chi(u, t)
        E, _ = bv_level_set(u, t)
        ends = [p for p, _ in E.boundary()]
        for x in xs:
            if u.jump_at(x) is None and any(abs(x - p) < 1e-9 for p in ends):
                continue
            um, up = sorted((float(u.left(x)), float(u.right(x))))
            wm, wp = sorted((float(w.left(x)), float(w.right(x))))
            mism += int((up > t) != (wp > 0.5)) + int((um > t) != (wm > 0.5))
    col.add("level_set_traces", float(mism), 0.0)

    # Leibniz form for a single separated term: diffuse part = g(u) x linear pairing
    if fd.kind == "separated" and len(fd.terms) == 1 and fd.b0 is None:
        term = fd.terms[0]
        pm = pairing_internal(fd, u, Selection.const(u, 0.5))
        if u.ac is not None:
            for x in _ac_samples(sc, 6):
                lin = float(term.A.approx(x)) * float(u.ac.eval(x))
                col.add("leibniz_ac", abs(float(pm.ac_density(np.array(x))) - float(term.g(float(u.approx(x)))) * lin), 1e-12)
        for c in u.cantor:
            left, _ = cantor_cells(3)
            for ln in left:
                a = c.lo + (c.hi - c.lo) * ln
                b = a + (c.hi - c.lo) / 27.0

                def gA(y):
                    y = np.asarray(y, dtype=float)
                    return term.g.eval(np.asarray(u.approx(y))) * 0.5 * (term.A.left(y) + term.A.right(y))

                pred = c.weight * integrate_cantor(gA, c.lo, c.hi, tol=1e-12, lo=a, hi=b, max_depth=22)
                col.add("leibniz_cantor", abs(pm.cantor_mass(a, b) - pred), 1e-8)

    # linear cross-check: constant g, jump density min(|A+|, |A-|) when the traces share a sign
    linear = fd.b0 is None and len(fd.terms) == 1 and isinstance(fd.terms[0].g, ex.Const)
    probes = []
    if linear:
        for jd in jds:
            gi, ge = float(jd.traces.gamma_i(0.0)), float(jd.traces.gamma_e(0.0))
            if gi * ge >= 0:
                expected = min(abs(gi), abs(ge)) * jd.jp.height
                col.add("linear_min_trace", abs(abs(pmV.atom(jd.x)) - expected), 1e-10)
                probes.append({"x": jd.x, "V_atom": pmV.atom(jd.x), "min_trace_times_height": expected})
            else:
                probes.append({"x": jd.x, "skipped": "traces of opposite sign"})
    col.details["linear_probe"] = probes
    return col.result()


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


CHECKS: dict[str, Callable[[Scenario, dict, float], CheckResult]] = {
    "representation": check_representation,
    "coarea": check_coarea,
    "coarea_negative": check_coarea_negative,
    "gauss_green": check_gauss_green,
    "lsc_L": check_lsc_L,
    "lsc_V": check_lsc_V,
    "lsc_converse": check_lsc_converse,
    "recovery": check_recovery,
    "relaxation": check_relaxation,
    "slicing": check_slicing,
    "misc": check_misc,
}


def run_check(sc: Scenario, entry: dict, tol_scale: float = 1.0) -> CheckResult:
    name = entry["name"]
    params = {k: v for k, v in entry.items() if k not in ("name", "id")}
    try:
        res = CHECKS[name](sc, params, tol_scale)
    except PairingError as err:
        res = CheckResult(name, {"error": math.inf}, {"error": 0.0}, False,
                          {"error": str(err), "code": err.code})
    res.id = entry.get("id", name)
    return res
