"""The five nonlinear pairing measures and their density reports.

Every pairing is -(sigma term) + Div v with v = B(., u(.)).  The sigma term
is built in the cancelled form sum_k G_k(u*) DA_k, where u* is the
representative the variant prescribes on the jump set of u.  Div v is
carried as an exact set function of intervals (see ``field.Composite``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable

import numpy as np

from .bv1d import BVFunction, JumpPoint
from .errors import SAMPLE_OUTSIDE, SelectionMismatch
from .field import (
    Composite,
    Field,
    Part,
    SigmaSystem,
    TraceBundle,
    field_composite,
    field_traces,
    first_root_or_min_abs,
    maximize_1d,
)
from .measure1d import (
    BorelSet,
    CallableDensity,
    CantorComponent,
    Interval,
    Measure,
    TestFunction,
    cantor_cells,
    integrate,
    integrate_cantor,
    integrate_lebesgue,
    measure_eval,
    measure_pair,
)

VARIANTS = ("internal", "external", "standard", "L", "V")


# ---------------------------------------------------------------------------
# selections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Selection:
    """lambda values on the jump points of one BV function."""

    values: tuple[tuple[float, float], ...]
    tag: str = "explicit"  # const | maxF | minZeta | match | explicit
    param: float | None = None

    def __post_init__(self):
        for x, lam in self.values:
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"selection value {lam} at {x} is outside [0, 1]")

    @classmethod
    def from_map(cls, values: dict[float, float], tag: str = "explicit", param: float | None = None) -> "Selection":
        return cls(tuple(sorted((float(x), float(v)) for x, v in values.items())), tag, param)

    @classmethod
    def const(cls, u: BVFunction, c: float) -> "Selection":
        return cls.from_map({x: c for x in u.jump_points}, "const", float(c))

    def as_dict(self) -> dict[float, float]:
        return dict(self.values)

    def at(self, x: float) -> float:
        for p, v in self.values:
            if p == x:
                return v
        raise SelectionMismatch(f"selection has no value at {x}")

    def check(self, u: BVFunction) -> None:
        pts = [p for p, _ in self.values]
        if sorted(pts) != sorted(u.jump_points):
            raise SelectionMismatch(f"selection points {pts} differ from the jump set {u.jump_points}")

    def describe(self) -> str:
        if self.tag == "const":
            return f"const({self.param})"
        if self.tag == "match":
            return f"match({self.param})"
        return self.tag


# ---------------------------------------------------------------------------
# per-jump data
# ---------------------------------------------------------------------------


@dataclass
class JumpData:
    """Everything about one jump of u needed by the pairings."""

    jp: JumpPoint
    traces: TraceBundle
    coeffs: np.ndarray  # DA_k({x}) for each term
    field: Field
    div_atom: float

    @property
    def x(self) -> float:
        return self.jp.x

    @property
    def charged(self) -> bool:
        return bool(np.any(self.coeffs != 0.0))

    def D(self, t) -> np.ndarray:
        """sum_k G_k(t) DA_k({x}) = F(x, t) sigma({x})."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for c, term in zip(self.coeffs, self.field.terms):
            if c:
                out = out + c * term.G.eval(t)
        return out

    def u_of(self, lam: float) -> float:
        return (1.0 - lam) * self.jp.u_minus + lam * self.jp.u_plus

    def zeta(self, t) -> np.ndarray:
        return self.traces.zeta(t, self.jp.u_minus, self.jp.u_plus)


def jump_data(fd: Field, u: BVFunction, comp: Composite | None = None) -> list[JumpData]:
    comp = comp or field_composite(fd, u)
    out = []
    for jp in u.jumps:
        coeffs = np.array([
            (term.A.jump_at(jp.x).size if term.A.jump_at(jp.x) is not None else 0.0) for term in fd.terms
        ])
        out.append(JumpData(jp, field_traces(fd, jp.x, jp.nu), coeffs, fd, comp.div_point(jp.x)))
    return out


def sigma_system(fd: Field) -> SigmaSystem:
    sys = getattr(fd, "_sigma_cache", None)
    if sys is None:
        sys = SigmaSystem(fd)
        fd._sigma_cache = sys
    return sys


# ---------------------------------------------------------------------------
# pairing measure
# ---------------------------------------------------------------------------


class PairingMeasure:
    """sigma_term + Div v, where sigma_term = -sum_k G_k(u*) DA_k is an ordinary Measure."""

    def __init__(
        self,
        variant: str,
        fd: Field,
        u: BVFunction,
        comp: Composite,
        sigma_term: Measure,
        jump_atoms: dict[float, dict],
        selection: Selection | None,
        jumps: list[JumpData],
    ):
        self.variant = variant
        self.field = fd
        self.u = u
        self.composite = comp
        self.sigma_term = sigma_term
        self.jump_atoms = jump_atoms
        self.selection = selection
        self.jumps = jumps

    # -- set function -----------------------------------------------------

    def atom(self, x: float) -> float:
        return self.sigma_term.atoms.get(x, 0.0) + self.composite.div_point(x)

    def eval(self, S: BorelSet | Interval, tol: float = 1e-10) -> float:
        S = S if isinstance(S, BorelSet) else BorelSet([S])
        return measure_eval(self.sigma_term, S, tol) + self.composite.div_set(S)

    def pair(self, phi: TestFunction, tol: float = 1e-10) -> float:
        return measure_pair(self.sigma_term, phi, tol) + self.composite.structural_pair(phi, tol)

    def atoms(self) -> dict[float, float]:
        pts = set(self.sigma_term.atoms) | set(self.composite.jump_points)
        out = {p: self.atom(p) for p in sorted(pts)}
        return {p: w for p, w in out.items() if w != 0.0}

    def ac_density(self, x) -> np.ndarray:
        """Density of the AC part: b(x, u) u'."""
        x = np.asarray(x, dtype=float)
        if self.u.ac is None:
            return np.zeros(x.shape)
        return self.field.b(x, np.asarray(self.u.approx(x))) * self.u.ac.eval(x)

    # -- Cantor part --------------------------------------------------------

    def _sigma_cantor_cells(self, sup, depth: int, lo: np.ndarray, sub: int = 4) -> np.ndarray:
        """Masses of the sigma term's Cantor parts on level-``depth`` cells (midpoints of finer sub-cells)."""
        out = np.zeros(lo.size)
        a, b = sup
        w = 3.0 ** (-depth)
        sub_left, _ = cantor_cells(sub)
        offsets = w * (sub_left + 0.5 * 3.0 ** (-sub))
        left_n = (lo - a) / (b - a)
        x = a + (b - a) * (left_n[:, None] + offsets[None, :])
        for comp in self.sigma_term.cantor:
            if comp.support == sup:
                vals = comp.density_values(x.ravel()).reshape(x.shape)
                out += comp.weight * vals.mean(axis=1) * 2.0 ** (-depth)
        return out

    def cantor_cell_masses(self, sup, depth: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi, mass = self.composite.cantor_cell_masses(sup, depth)
        return lo, hi, mass + self._sigma_cantor_cells(sup, depth, lo)

    def cantor_mass(self, lo: float, hi: float, tol: float = 1e-10) -> float:
        """Cantor part of the pairing on the closed interval [lo, hi]."""
        S = BorelSet([Interval.closed(lo, hi)])
        total = self.eval(S, tol)
        atoms = sum(w for p, w in self.atoms().items() if lo <= p <= hi)
        ac = integrate_lebesgue(self.ac_density, lo, hi, tol=tol,
                                breakpoints=self.composite.breakpoints,
                                cantor_supports=self.composite.cantor_supports)
        return total - atoms - ac

    def total_variation(self, E: Interval, depth: int = 10, tol: float = 1e-10, positive: bool = False) -> float:
        """|pairing|(E), or the positive part when ``positive``: atoms, AC density and a Cantor cell sum."""
        size = (lambda v: np.maximum(v, 0.0)) if positive else np.abs
        parts = [float(size(w)) for p, w in self.atoms().items() if bool(E.contains(p))]
        if not E.is_point:
            parts.append(integrate_lebesgue(lambda x: size(self.ac_density(x)), E.lo, E.hi, tol=tol,
                                            breakpoints=self.composite.breakpoints,
                                            cantor_supports=self.composite.cantor_supports))
        for sup in self.composite.cantor_supports:
            if sup[1] < E.lo or sup[0] > E.hi or E.is_point:
                continue
            lo, hi, mass = self.cantor_cell_masses(sup, depth)
            inside = (lo >= E.lo) & (hi <= E.hi)
            parts.append(float(np.sum(size(mass[inside]))))
            for i in np.nonzero(~inside & (hi > E.lo) & (lo < E.hi))[0]:
                parts.append(float(size(self.cantor_mass(max(lo[i], E.lo), min(hi[i], E.hi), tol))))
        return math.fsum(parts)

    def describe(self) -> str:
        if self.variant in ("internal", "external") and self.selection is not None:
            return f"{self.variant}[{self.selection.describe()}]"
        return self.variant


def _sigma_term(fd: Field, u: BVFunction, jumps: list[JumpData], jump_weights: dict[float, float]) -> Measure:
    """-sum_k G_k(u*) DA_k with u* given on J_u by ``jump_weights`` (already summed over k)."""
    atoms: dict[float, float] = {}
    for term in fd.terms:
        for jp in term.A.jumps:
            if jp.x in jump_weights:
                continue
            t = float(u.right(jp.x))  # u is continuous here
            atoms[jp.x] = atoms.get(jp.x, 0.0) - float(term.G(t)) * jp.size
    for x, w in jump_weights.items():
        if w != 0.0:
            atoms[x] = atoms.get(x, 0.0) - w
    ac = None
    ac_terms = [term for term in fd.terms if term.A.ac is not None]
    if ac_terms:
        def dens(x):
            x = np.asarray(x, dtype=float)
            ut = np.asarray(u.approx(x))
            return -sum(term.G.eval(ut) * term.A.ac.eval(x) for term in ac_terms)

        bound = sum(term.g_sup(fd.T) * fd.T * term.A.ac.sup_bound() for term in ac_terms)
        kinks = sorted(set(u.breakpoints()) | {k for term in ac_terms for k in term.A.ac.kinks})
        ac = CallableDensity(dens, kinks, bound, cantor_supports=u.cantor_supports)
    cantor = []
    for term in fd.terms:
        for c in term.A.cantor:
            G = term.G

            def dens_c(x, G=G):
                return G.eval(np.asarray(u.approx(x)))

            cantor.append(CantorComponent(-c.weight, c.lo, c.hi, dens_c, term.g_sup(fd.T) * fd.T,
                                          tuple(u.breakpoints())))
    return Measure(fd.domain, ac, atoms, cantor)


def _build(variant: str, fd: Field, u: BVFunction, jump_t: dict[float, tuple[float, dict]],
           selection: Selection | None, comp: Composite, jumps: list[JumpData]) -> PairingMeasure:
    weights = {x: w for x, (w, _) in jump_t.items()}
    sig = _sigma_term(fd, u, jumps, weights)
    atoms = {}
    for jd in jumps:
        w, info = jump_t[jd.x]
        atoms[jd.x] = {"value": jd.div_atom - w, "div_v": jd.div_atom, "sigma_term": -w, **info}
    return PairingMeasure(variant, fd, u, comp, sig, atoms, selection, jumps)


def _prepare(fd: Field, u: BVFunction):
    comp = field_composite(fd, u)
    return comp, jump_data(fd, u, comp)


def pairing_internal(fd: Field, u: BVFunction, sel: Selection, variant: str = "internal") -> PairingMeasure:
    """Internal lambda-pairing: -F(x, u^lambda) sigma + Div B(x, u)."""
    sel.check(u)
    comp, jumps = _prepare(fd, u)
    jt = {}
    for jd in jumps:
        lam = sel.at(jd.x)
        t = jd.u_of(lam)
        jt[jd.x] = (float(jd.D(t)), {"lambda": lam, "t": t})
    return _build(variant, fd, u, jt, sel, comp, jumps)


def pairing_external(fd: Field, u: BVFunction, sel: Selection, variant: str = "external") -> PairingMeasure:
    """External Lambda-pairing: -[(1-Lambda) F(x, u-) + Lambda F(x, u+)] sigma + Div B(x, u)."""
    sel.check(u)
    comp, jumps = _prepare(fd, u)
    jt = {}
    for jd in jumps:
        lam = sel.at(jd.x)
        w = (1.0 - lam) * float(jd.D(jd.jp.u_minus)) + lam * float(jd.D(jd.jp.u_plus))
        jt[jd.x] = (w, {"Lambda": lam})
    return _build(variant, fd, u, jt, sel, comp, jumps)


def pairing_standard(fd: Field, u: BVFunction) -> PairingMeasure:
    return pairing_external(fd, u, Selection.const(u, 0.5), variant="standard")


def _max_F(jd: JumpData) -> tuple[float, float]:
    """(t*, F-hat sigma({x})) maximizing D over [u-, u+], smallest maximizer on ties."""
    a, b = jd.jp.u_minus, jd.jp.u_plus
    if not jd.charged:
        return a, 0.0
    return maximize_1d(jd.D, a, b)


def pairing_L(fd: Field, u: BVFunction) -> tuple[PairingMeasure, Selection]:
    comp, jumps = _prepare(fd, u)
    jt, lam = {}, {}
    for jd in jumps:
        t_star, fmax = _max_F(jd)
        lam[jd.x] = min(1.0, max(0.0, (t_star - jd.jp.u_minus) / jd.jp.height))
        jt[jd.x] = (fmax, {"t_star": t_star, "lambda": lam[jd.x]})
    witness = Selection.from_map(lam, "maxF")
    return _build("L", fd, u, jt, witness, comp, jumps), witness


def _min_zeta(jd: JumpData) -> float:
    return first_root_or_min_abs(jd.zeta, jd.jp.u_minus, jd.jp.u_plus)


def pairing_V(fd: Field, u: BVFunction) -> tuple[PairingMeasure, Selection, dict[float, float]]:
    comp, jumps = _prepare(fd, u)
    jt, lam, theta = {}, {}, {}
    for jd in jumps:
        t = _min_zeta(jd)
        lam[jd.x] = min(1.0, max(0.0, (t - jd.jp.u_minus) / jd.jp.height))
        jt[jd.x] = (float(jd.D(t)), {"t_V": t, "lambda": lam[jd.x]})
    sel = Selection.from_map(lam, "minZeta")
    pm = _build("V", fd, u, jt, sel, comp, jumps)
    for jd in jumps:
        theta[jd.x] = abs(pm.jump_atoms[jd.x]["value"]) / jd.jp.height
    return pm, sel, theta


def pairing_variant(fd: Field, u: BVFunction, variant: str, sel: Selection | None = None) -> PairingMeasure:
    if variant == "internal":
        return pairing_internal(fd, u, sel)
    if variant == "external":
        return pairing_external(fd, u, sel)
    if variant == "standard":
        return pairing_standard(fd, u)
    if variant == "L":
        return pairing_L(fd, u)[0]
    if variant == "V":
        return pairing_V(fd, u)[0]
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------


def _first_match(h: Callable, lo: float, hi: float, target: float, points: int = 4097) -> float:
    """Smallest s in [lo, hi] with h(s) = target (h continuous, target between h(lo) and h(hi))."""
    grid = np.linspace(lo, hi, points)
    vals = np.asarray(h(grid), dtype=float) - target
    exact = np.nonzero(vals == 0.0)[0]
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    k0 = int(exact[0]) if exact.size else points
    k1 = int(change[0]) if change.size else points
    if k0 <= k1 and k0 < points:
        return float(grid[k0])
    if k1 == points:
        return float(grid[int(np.argmin(np.abs(vals)))])
    a, b = float(grid[k1]), float(grid[k1 + 1])
    fa = vals[k1]
    for _ in range(200):
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        fm = float(h(np.array([m]))[0]) - target
        if fm == 0.0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    fa_abs = abs(float(h(np.array([a]))[0]) - target)
    fb_abs = abs(float(h(np.array([b]))[0]) - target)
    return a if fa_abs <= fb_abs else b


def pairing_match_external(fd: Field, u: BVFunction, Lam: Selection) -> tuple[Selection, dict[float, float]]:
    """Internal lambda with (b(., u), Du)_lambda = [b(., u), Du]_Lambda, and the per-jump residual."""
    Lam.check(u)
    _, jumps = _prepare(fd, u)
    lam, resid = {}, {}
    for jd in jumps:
        L = Lam.at(jd.x)
        if not jd.charged:
            lam[jd.x], resid[jd.x] = L, 0.0
            continue
        a, b = jd.jp.u_minus, jd.jp.u_plus
        target = (1.0 - L) * float(jd.D(a)) + L * float(jd.D(b))
        s = _first_match(lambda s: jd.D((1.0 - s) * a + s * b), 0.0, 1.0, target)
        lam[jd.x] = s
        resid[jd.x] = float(jd.D((1.0 - s) * a + s * b)) - target
    return Selection.from_map(lam, "match", Lam.param), resid


def pairing_match_internal(fd: Field, u: BVFunction, sel: Selection) -> tuple[Selection, dict[float, float]]:
    """Reverse direction: the clamped Lambda for a given lambda and the leftover R (|R| <= u+ - u-)."""
    sel.check(u)
    sys = sigma_system(fd)
    _, jumps = _prepare(fd, u)
    Lam, R = {}, {}
    for jd in jumps:
        lam = sel.at(jd.x)
        if not jd.charged:
            Lam[jd.x], R[jd.x] = lam, 0.0
            continue
        mass = sys.atom_mass(jd.x)
        Fm = float(jd.D(jd.jp.u_minus)) / mass
        Fp = float(jd.D(jd.jp.u_plus)) / mass
        Fl = float(jd.D(jd.u_of(lam))) / mass
        den = Fp - Fm
        raw = (Fl - Fm) / den if den != 0.0 else 0.0
        L = min(1.0, max(0.0, raw))
        Lam[jd.x] = L
        R[jd.x] = Fl - ((1.0 - L) * Fm + L * Fp)
    return Selection.from_map(Lam, "explicit"), R


# ---------------------------------------------------------------------------
# the weak-form oracle
# ---------------------------------------------------------------------------


def weak_form(pm: PairingMeasure, phi: TestFunction, tol: float = 1e-10) -> float:
    """-int B(x, u) phi' dx - int F(x, u*) phi dsigma, with sigma, F from the SigmaSystem.

    Atoms and Cantor parts use F and sigma explicitly; on the AC part of sigma
    the product F sigma is taken in its cancelled form sum_k G_k(u) A_k' dx.
    """
    fd, u = pm.field, pm.u
    sys = sigma_system(fd)
    a, b = phi.support
    parts = [pm.composite.weak_pair(phi, tol)]
    # atoms of sigma
    for p, smass in sys.sigma.atoms.items():
        if not a < p < b:
            continue
        part = sys.locate(p)
        if p in pm.jump_atoms:
            jd = next(j for j in pm.jumps if j.x == p)
            info = pm.jump_atoms[p]
            if pm.variant in ("external", "standard"):
                L = info["Lambda"]
                Fv = (1.0 - L) * float(sys.F(part, jd.jp.u_minus)) + L * float(sys.F(part, jd.jp.u_plus))
            elif pm.variant == "L":
                Fv = float(sys.F(part, info["t_star"]))
            elif pm.variant == "V":
                Fv = float(sys.F(part, info["t_V"]))
            else:
                Fv = float(sys.F(part, info["t"]))
        else:
            Fv = float(sys.F(part, float(u.right(p))))
        parts.append(-Fv * phi.value(p) * smass)
    # Cantor parts of sigma
    for comp in sys.sigma.cantor:
        sup = comp.support
        if sup[1] <= a or sup[0] >= b:
            continue
        part = Part("cantor", sup)

        def integrand(x, part=part):
            return sys.F(part, np.asarray(u.approx(x))) * phi.value(x)

        parts.append(-comp.weight * integrate_cantor(integrand, sup[0], sup[1], tol=tol / max(comp.weight, 1e-300),
                                                     lo=a, hi=b, breakpoints=phi.breakpoints))
    # AC part, cancelled form
    ac_terms = [term for term in fd.terms if term.A.ac is not None]
    if ac_terms:
        def ac_int(x):
            ut = np.asarray(u.approx(x))
            return sum(term.G.eval(ut) * term.A.ac.eval(x) for term in ac_terms) * phi.value(x)

        parts.append(-integrate_lebesgue(ac_int, a, b, tol=tol,
                                         breakpoints=pm.composite.breakpoints + list(phi.breakpoints),
                                         cantor_supports=pm.composite.cantor_supports))
    return math.fsum(parts)


# ---------------------------------------------------------------------------
# density report
# ---------------------------------------------------------------------------


@dataclass
class JumpDensity:
    x: float
    height: float
    atom: float
    theta: float
    mean_integral: float
    formula: float
    suspect_formula: float | None = None


@dataclass
class DensityReport:
    variant: str
    jumps: list[JumpDensity]
    cantor_samples: list[dict]
    cantor_windows: list[dict]
    theta_V: dict[float, float] | None
    notes: list[str] = dc_field(default_factory=list)
    _pm: PairingMeasure | None = None
    _prediction: Callable | None = None

    def ac_density(self, x):
        return self._pm.ac_density(x)

    def cantor_prediction(self, x):
        return self._prediction(x)

    def assemble(self) -> Measure:
        """Measure built only from the densities: theta |Du| on jumps, b(x,u)u' dx, Tr* |D^c u|."""
        pm = self._pm
        u = pm.u
        # jump masses from the trace mean-integrals, not from the pairing atoms
        atoms = {j.x: j.mean_integral * j.height for j in self.jumps}
        ac = None
        if u.ac is not None:
            ac = CallableDensity(pm.ac_density, pm.composite.breakpoints, bound=pm.field.b_sup * u.ac.sup_bound(),
                                 cantor_supports=pm.composite.cantor_supports)
        cantor = []
        for c in u.cantor:
            cantor.append(CantorComponent(abs(c.weight), c.lo, c.hi, self._prediction, pm.field.b_sup,
                                          tuple(u.breakpoints())))
        return Measure(u.domain, ac, atoms, cantor)


def _cantor_prediction(fd: Field, u: BVFunction) -> Callable:
    """x -> Tr*(b_t, boundary of {u > t})(x) at t = u(x), on Cantor supports of u."""

    def pred(x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(u.approx(x))
        nu = np.zeros(x.shape)
        for c in u.cantor:
            inside = (x >= c.lo) & (x <= c.hi)
            nu = np.where(inside, 1.0 if c.weight > 0 else -1.0, nu)
        return nu * 0.5 * (fd.b(x, t, "left") + fd.b(x, t, "right"))

    return pred


def pairing_densities(fd: Field, u: BVFunction, pm: PairingMeasure, samples: Iterable[float] = (),
                      window_depth: int = 4, cantor_depth: int = 16) -> DensityReport:
    from .bv1d import bv_level_set

    jumps = []
    for jd in pm.jumps:
        info = pm.jump_atoms[jd.x]
        a, b = jd.jp.u_minus, jd.jp.u_plus
        h = jd.jp.height
        gi = lambda t, jd=jd: jd.traces.gamma_i(t)  # noqa: E731
        ge = lambda t, jd=jd: jd.traces.gamma_e(t)  # noqa: E731
        kinks = fd.t_kinks()
        suspect = None
        if pm.variant in ("external", "standard"):
            L = info["Lambda"]
            mean = ((1.0 - L) * integrate(gi, a, b, tol=1e-13, breakpoints=kinks)
                    + L * integrate(ge, a, b, tol=1e-13, breakpoints=kinks)) / h
            formula = ((1.0 - L) * (float(jd.traces.beta_i(b)) - float(jd.traces.beta_i(a)))
                       + L * (float(jd.traces.beta_e(b)) - float(jd.traces.beta_e(a))))
        else:
            t = info.get("t", info.get("t_star", info.get("t_V")))
            mean = (integrate(ge, a, t, tol=1e-13, breakpoints=kinks)
                    + integrate(gi, t, b, tol=1e-13, breakpoints=kinks)) / h
            formula = float(jd.zeta(t))
            lam = info["lambda"]
            # the alternative statement lambda beta_i(u+) + (1 - lambda) beta_e(u-) is kept for comparison only
            suspect = lam * float(jd.traces.beta_i(b)) + (1.0 - lam) * float(jd.traces.beta_e(a))
        atom = info["value"]
        jumps.append(JumpDensity(jd.x, h, atom, atom / h, mean, formula, suspect))

    pred = _cantor_prediction(fd, u)
    samples_out = []
    for x in samples:
        x = float(x)
        t = float(u.approx(x))
        rec = {"x": x, "t": t, "prediction": float(pred(np.array(x))), "status": "ok"}
        try:
            E, _ = bv_level_set(u, t)
            on_boundary = any(abs(p - x) <= 1e-9 * max(1.0, abs(x)) for p, _ in E.boundary())
        except Exception:  # noqa: BLE001 - reported, not fatal
            on_boundary = False
        if not on_boundary:
            rec["status"] = SAMPLE_OUTSIDE
        samples_out.append(rec)

    windows = []
    for c in u.cantor:
        sup = c.support
        left_n, _ = cantor_cells(window_depth)
        wlen = (sup[1] - sup[0]) * 3.0 ** (-window_depth)
        for ln in left_n:
            lo = sup[0] + (sup[1] - sup[0]) * ln
            hi = lo + wlen
            predicted = abs(c.weight) * integrate_cantor(pred, sup[0], sup[1], tol=1e-12, lo=lo, hi=hi,
                                                         max_depth=22)
            measured = pm.cantor_mass(lo, hi)
            windows.append({"lo": lo, "hi": hi, "predicted": predicted, "measured": measured,
                            "residual": abs(predicted - measured)})

    theta_V = None
    if pm.variant == "V":
        theta_V = {j.x: abs(j.atom) / j.height for j in jumps}
    notes = []
    if pm.variant == "internal":
        notes.append("suspect_formula holds lambda*beta_i(u+) + (1-lambda)*beta_e(u-); "
                     "jump densities follow the difference formula instead")
    return DensityReport(pm.variant, jumps, samples_out, windows, theta_V, notes, pm, pred)
