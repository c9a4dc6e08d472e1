"""Nonlinear fields b(x, t) = b0(t) + sum_k g_k(t) A_k(x) with BV coefficients A_k.

The primitive in t is B(x, t) = B0(t) + sum_k G_k(t) A_k(x) with G_k(0) = 0,
so every divergence in x is a finite combination of the measures DA_k.  The
dominating measure sigma and the densities f, F are materialized as well,
but pairing code works with the cancelled form F(x, t) sigma = sum_k G_k(t) DA_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import expr as ex
from .bv1d import BVFunction, bv_derivative
from .errors import InvalidCantorOverlap, LocatorMiss, TRangeError
from .measure1d import (
    BorelSet,
    CallableDensity,
    CantorComponent,
    Interval,
    Measure,
    TestFunction,
    cantor_cells,
    integrate_lebesgue,
    measure_combine,
    measure_eval,
    measure_tv,
)
from .quadrature import gk15

GRID_POINTS = 4097
SEARCH_TOL = 1e-11


# ---------------------------------------------------------------------------
# certified 1D searches
# ---------------------------------------------------------------------------


def maximize_1d(h: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, points: int = GRID_POINTS) -> tuple[float, float]:
    """(argmax, max) of a continuous h on [lo, hi]: grid scan, then bounded Brent refinement.

    Ties resolve to the smallest t: the first grid maximizer is kept unless
    refinement finds a strictly larger value.
    """
    if hi <= lo:
        return lo, float(h(np.array([lo]))[0])
    grid = np.linspace(lo, hi, points)
    vals = np.asarray(h(grid), dtype=float)
    k = int(np.argmax(vals))
    best_t, best = float(grid[k]), float(vals[k])
    a, b = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, points - 1)])
    res = minimize_scalar(lambda s: -float(h(np.array([s]))[0]), bounds=(a, b), method="bounded",
                          options={"xatol": SEARCH_TOL})
    # floating noise on flat stretches must not move the tie-break
    if -res.fun > best + 1e-14 * max(1.0, abs(best)):
        best_t, best = float(res.x), float(-res.fun)
    return best_t, best


def first_root_or_min_abs(h: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, points: int = GRID_POINTS) -> float:
    """Smallest t in [lo, hi] with h(t) = 0 if the grid shows a sign change or zero, else argmin |h|."""
    if hi <= lo:
        return lo
    grid = np.linspace(lo, hi, points)
    vals = np.asarray(h(grid), dtype=float)
    zero = np.nonzero(vals == 0.0)[0]
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    first_zero = int(zero[0]) if zero.size else points
    first_change = int(change[0]) if change.size else points
    if first_zero <= first_change and first_zero < points:
        return float(grid[first_zero])
    if first_change < points:
        a, b = float(grid[first_change]), float(grid[first_change + 1])
        fa = vals[first_change]
        while b - a > SEARCH_TOL * max(1.0, abs(a)):
            m = 0.5 * (a + b)
            fm = float(h(np.array([m]))[0])
            if fm == 0.0:
                return m
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        return 0.5 * (a + b)
    t, _ = maximize_1d(lambda s: -np.abs(np.asarray(h(s))), lo, hi, points)
    return t


# ---------------------------------------------------------------------------
# field
# ---------------------------------------------------------------------------


class TensorTerm:
    """g(t) * A(x), with the primitive G(t) = int_0^t g."""

    def __init__(self, g: ex.Expr, A: BVFunction):
        self.g = g
        self.G = ex.primitive_from_zero(g)
        self.A = A

    def g_sup(self, T: float) -> float:
        return self.g.sup_abs(-T, T)

    def g_lip(self, T: float) -> float:
        return self.g.deriv().sup_abs(-T, T)


FIELD_KINDS = ("autonomous", "separated", "tensor", "smooth")


class Field:
    def __init__(
        self,
        domain: tuple[float, float],
        terms: Sequence[TensorTerm] = (),
        b0: ex.Expr | None = None,
        T: float = 2.0,
        kind: str = "tensor",
    ):
        if kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        self.domain = (float(domain[0]), float(domain[1]))
        self.terms = tuple(terms)
        for term in self.terms:
            if term.A.domain != self.domain:
                raise ValueError("coefficient domain differs from the field domain")
        self.b0 = b0
        self.B0 = ex.primitive_from_zero(b0) if b0 is not None else None
        self.T = float(T)
        self.kind = kind
        self._check_cantor()
        self.b_sup = (b0.sup_abs(-self.T, self.T) if b0 is not None else 0.0) + sum(
            t.g_sup(self.T) * t.A.sup_bound for t in self.terms
        )

    def _check_cantor(self):
        supports = sorted({c.support for t in self.terms for c in t.A.cantor})
        check_cantor_supports(supports)

    def check_t(self, t) -> None:
        arr = np.asarray(t, dtype=float)
        if arr.size and np.max(np.abs(arr)) > self.T * (1 + 1e-15):
            raise TRangeError(f"t = {float(np.max(np.abs(arr)))} outside [-{self.T}, {self.T}]", T=self.T)

    def _A(self, term: TensorTerm, x, side: str):
        if side == "left":
            return np.asarray(term.A.left(x))
        if side == "right":
            return np.asarray(term.A.right(x))
        return np.asarray(term.A.approx(x))

    def b(self, x, t, side: str = "approx"):
        """b(x side, t), broadcasting x against t."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(x, t).shape)
        if self.b0 is not None:
            out = out + self.b0.eval(t)
        for term in self.terms:
            out = out + term.g.eval(t) * self._A(term, x, side)
        return out

    def B(self, x, t, side: str = "approx"):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        self.check_t(t)
        out = np.zeros(np.broadcast(x, t).shape)
        if self.B0 is not None:
            out = out + self.B0.eval(t)
        for term in self.terms:
            out = out + term.G.eval(t) * self._A(term, x, side)
        return out

    def breakpoints(self) -> list[float]:
        pts = set()
        for term in self.terms:
            pts |= set(term.A.breakpoints())
        return sorted(pts)

    def jump_points(self) -> list[float]:
        return sorted({j.x for term in self.terms for j in term.A.jumps})

    def cantor_supports(self) -> list[tuple[float, float]]:
        return sorted({c.support for term in self.terms for c in term.A.cantor})

    def t_kinks(self) -> list[float]:
        pts = set()
        for term in self.terms:
            pts |= set(term.g.kinks())
        if self.b0 is not None:
            pts |= set(self.b0.kinks())
        return sorted(pts)

    def t_lipschitz(self) -> float:
        """Lipschitz constant of t -> b(x, t), uniform in x."""
        lip = self.b0.deriv().sup_abs(-self.T, self.T) if self.b0 is not None else 0.0
        return lip + sum(t.g_lip(self.T) * t.A.sup_bound for t in self.terms)

    def is_zero(self) -> bool:
        return self.b0 is None and not self.terms


def check_cantor_supports(supports: Sequence[tuple[float, float]]) -> None:
    s = sorted(set(supports))
    for (a0, a1), (b0, b1) in zip(s, s[1:]):
        if b0 < a1:
            raise InvalidCantorOverlap(f"Cantor supports [{a0}, {a1}] and [{b0}, {b1}] overlap without coinciding")


def field_B(fd: Field, x: float, side: str, t: float) -> float:
    fd.check_t(t)
    return float(fd.B(x, t, side))


def field_div_bt(fd: Field, t: float) -> Measure:
    fd.check_t(t)
    terms = [(float(term.g(t)), bv_derivative(term.A)) for term in fd.terms]
    terms = [(c, m) for c, m in terms if c != 0.0]
    return measure_combine(terms) if terms else Measure.zero(fd.domain)


def field_div_Bt(fd: Field, t: float) -> Measure:
    fd.check_t(t)
    terms = [(float(term.G(t)), bv_derivative(term.A)) for term in fd.terms]
    terms = [(c, m) for c, m in terms if c != 0.0]
    return measure_combine(terms) if terms else Measure.zero(fd.domain)


# ---------------------------------------------------------------------------
# sigma, f, F
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Part:
    """Locator of a part of the dominating measure: an atom, a Cantor support, or an AC point."""

    kind: str  # "atom" | "cantor" | "ac"
    key: object


class SigmaSystem:
    def __init__(self, fd: Field):
        self.field = fd
        T = fd.T
        self.T = T
        derivs = [bv_derivative(term.A) for term in fd.terms]
        self._derivs = derivs
        tvs = [measure_tv(d)[0] for d in derivs]
        self.m = measure_combine([(1.0, tv) for tv in tvs]) if tvs else Measure.zero(fd.domain)

        # atoms: per point, coefficient vector phi_k = DA_k({p}) / m({p})
        self.atom_coef: dict[float, np.ndarray] = {}
        for p, mass in self.m.atoms.items():
            self.atom_coef[p] = np.array([d.atoms.get(p, 0.0) / mass for d in derivs])
        # Cantor: per support, phi_k = w_k / sum |w|
        self.cantor_coef: dict[tuple[float, float], np.ndarray] = {}
        self.cantor_mass: dict[tuple[float, float], float] = {}
        for sup in fd.cantor_supports():
            ws = np.array([sum(c.weight for c in d.cantor if c.support == sup) for d in derivs])
            total = float(np.sum(np.abs(ws)))
            self.cantor_mass[sup] = total
            self.cantor_coef[sup] = ws / total

        self._g_lip = sum(t.g_lip(T) for t in fd.terms)
        self.atom_s = {p: self._envelope(c) for p, c in self.atom_coef.items()}
        self.cantor_s = {sup: self._envelope(c) for sup, c in self.cantor_coef.items()}
        self._ac_cache: dict[float, float] = {}
        self.sigma = self._build_sigma()

    # envelope s = max_{|t| <= T} |sum g_k(t) phi_k|
    def _g_matrix(self, t: np.ndarray) -> np.ndarray:
        return np.stack([term.g.eval(t) for term in self.field.terms]) if self.field.terms else np.zeros((0, t.size))

    def _envelope(self, coef: np.ndarray) -> float:
        if not np.any(coef):
            return 0.0
        terms = self.field.terms

        def h(t):
            t = np.asarray(t, dtype=float)
            return np.abs(sum(c * term.g.eval(t) for c, term in zip(coef, terms)))

        _, val = maximize_1d(h, -self.T, self.T)
        return val

    def ac_coef(self, x) -> np.ndarray:
        """phi_k(x) on the AC part: A_k'(x) / sum_j |A_j'(x)|, 0/0 = 0.  Shape (K, n)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dens = []
        for term in self.field.terms:
            ac = term.A.ac
            dens.append(np.zeros(x.shape) if ac is None else np.asarray(ac.eval(x), dtype=float))
        if not dens:
            return np.zeros((0, x.size))
        D = np.stack(dens)
        tot = np.sum(np.abs(D), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, D / np.where(tot > 0, tot, 1.0), 0.0)

    def ac_s(self, x) -> np.ndarray:
        """Envelope on the AC part, vectorized: grid maximum then golden-section polish, memoized per x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.size)
        missing = [i for i, xi in enumerate(x) if float(xi) not in self._ac_cache]
        if missing:
            xm = x[missing]
            coef = self.ac_coef(xm)  # (K, n)
            grid = np.linspace(-self.T, self.T, GRID_POINTS)
            Gm = self._g_matrix(grid)  # (K, P)
            # elementwise sum over terms keeps each row independent of the batch
            vals = np.zeros((xm.size, GRID_POINTS))
            for k in range(coef.shape[0]):
                vals = vals + coef[k][:, None] * Gm[k][None, :]
            vals = np.abs(vals)
            k = np.argmax(vals, axis=1)
            best = vals[np.arange(xm.size), k]
            step = grid[1] - grid[0]
            a = np.clip(grid[k] - step, -self.T, self.T)
            b = np.clip(grid[k] + step, -self.T, self.T)
            ratio = (math.sqrt(5) - 1) / 2

            def hv(t):
                G = np.stack([term.g.eval(t) for term in self.field.terms])  # (K, n)
                return np.abs(np.sum(coef * G, axis=0))

            if coef.size:
                for _ in range(60):
                    c = b - ratio * (b - a)
                    d = a + ratio * (b - a)
                    left_better = hv(c) >= hv(d)
                    b = np.where(left_better, d, b)
                    a = np.where(left_better, a, c)
                best = np.maximum(best, hv(0.5 * (a + b)))
            for i, val in zip(missing, best):
                self._ac_cache[float(x[i])] = float(val)
        for i, xi in enumerate(x):
            out[i] = self._ac_cache[float(xi)]
        return out

    def _build_sigma(self) -> Measure:
        fd = self.field
        atoms = {p: self.atom_s[p] * self.m.atoms[p] for p in self.m.atoms}
        cantor = [CantorComponent(self.cantor_s[sup] * self.cantor_mass[sup], *sup) for sup in self.cantor_coef]
        ac = None
        if self.m.ac is not None:
            m_ac = self.m.ac
            bound = sum(t.g_sup(self.T) for t in fd.terms) * m_ac.sup_bound()
            ac = CallableDensity(lambda x: self.ac_s(x).reshape(np.shape(x)) * np.asarray(m_ac(x)),
                                 breakpoints=list(m_ac.kinks), bound=bound)
        return Measure(fd.domain, ac, atoms, cantor)

    # -- locators ---------------------------------------------------------

    def locate(self, x: float) -> Part:
        """Atom if x carries an atom of m, else the Cantor support containing x, else the AC part."""
        if x in self.m.atoms:
            return Part("atom", x)
        lo, hi = self.field.domain
        if not lo < x < hi:
            raise LocatorMiss(f"{x} is outside the domain")
        for sup in self.cantor_coef:
            if sup[0] <= x <= sup[1]:
                return Part("cantor", sup)
        return Part("ac", x)

    def coef(self, part: Part) -> tuple[np.ndarray, float]:
        if part.kind == "atom":
            if part.key not in self.atom_coef:
                raise LocatorMiss(f"no atom of sigma at {part.key}")
            return self.atom_coef[part.key], self.atom_s[part.key]
        if part.kind == "cantor":
            if part.key not in self.cantor_coef:
                raise LocatorMiss(f"no Cantor part of sigma on {part.key}")
            return self.cantor_coef[part.key], self.cantor_s[part.key]
        if part.kind == "ac":
            x = float(part.key)
            lo, hi = self.field.domain
            if not lo < x < hi:
                raise LocatorMiss(f"{x} is outside the domain")
            return self.ac_coef(x)[:, 0], float(self.ac_s(x)[0])
        raise LocatorMiss(f"unknown part kind {part.kind!r}")

    def f(self, part: Part, t) -> np.ndarray:
        coef, s = self.coef(part)
        t = np.asarray(t, dtype=float)
        if s == 0.0:
            return np.zeros(t.shape)
        return sum(c * term.g.eval(t) for c, term in zip(coef, self.field.terms)) / s

    def F(self, part: Part, t) -> np.ndarray:
        coef, s = self.coef(part)
        t = np.asarray(t, dtype=float)
        if s == 0.0:
            return np.zeros(t.shape)
        return sum(c * term.G.eval(t) for c, term in zip(coef, self.field.terms)) / s

    def atom_mass(self, p: float) -> float:
        return float(self.sigma.atoms.get(p, 0.0))


def field_sigma(fd: Field) -> SigmaSystem:
    return SigmaSystem(fd)


def field_F(sys: SigmaSystem, part: Part | float, t: float) -> float:
    sys.field.check_t(t)
    if not isinstance(part, Part):
        part = sys.locate(float(part))
    return float(sys.F(part, np.array(t)))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceBundle:
    field: Field
    x0: float
    nu: int

    @property
    def inner_side(self) -> str:
        return "right" if self.nu > 0 else "left"

    @property
    def outer_side(self) -> str:
        return "left" if self.nu > 0 else "right"

    def gamma_i(self, t):
        return self.nu * self.field.b(self.x0, t, self.inner_side)

    def gamma_e(self, t):
        return self.nu * self.field.b(self.x0, t, self.outer_side)

    def beta_i(self, t):
        return self.nu * self.field.B(self.x0, t, self.inner_side)

    def beta_e(self, t):
        return self.nu * self.field.B(self.x0, t, self.outer_side)

    def tr_star(self, t):
        return 0.5 * (self.beta_i(t) + self.beta_e(t))

    def b_star(self, t):
        """Mean of the two one-sided normal traces of b_t."""
        return 0.5 * (self.gamma_i(t) + self.gamma_e(t))

    def zeta(self, t, u_minus: float, u_plus: float):
        """int_{u-}^{t} gamma_e + int_{t}^{u+} gamma_i, through the primitives."""
        t = np.asarray(t, dtype=float)
        return self.beta_e(t) - self.beta_e(u_minus) + self.beta_i(u_plus) - self.beta_i(t)

    def lipschitz(self) -> float:
        return self.field.b_sup


def field_traces(fd: Field, x0: float, nu: int) -> TraceBundle:
    if nu not in (1, -1):
        raise ValueError("normal must be +1 or -1")
    lo, hi = fd.domain
    if not lo < x0 < hi:
        raise ValueError(f"{x0} is outside the domain")
    return TraceBundle(fd, float(x0), nu)


# ---------------------------------------------------------------------------
# composite v(x) = B(x, u(x))
# ---------------------------------------------------------------------------


class Composite:
    """v = B(., u(.)) with one-sided values, its divergence as a set function, and two pairings."""

    def __init__(self, fd: Field, u: BVFunction):
        fd.check_t(u.sup_bound)
        if u.sup_bound + 1.0 > fd.T * (1 + 1e-15):
            raise TRangeError(f"sup|u| + 1 = {u.sup_bound + 1.0} exceeds T = {fd.T}", T=fd.T)
        self.field = fd
        self.u = u
        supports = sorted(set(fd.cantor_supports()) | set(u.cantor_supports))
        check_cantor_supports(supports)
        self.cantor_supports = supports
        self.jump_points = sorted(set(fd.jump_points()) | set(u.jump_points))
        self.breakpoints = sorted(set(fd.breakpoints()) | set(u.breakpoints()))
        self._has_ac = u.ac is not None or any(t.A.ac is not None for t in fd.terms)

    def left(self, x):
        return self.field.B(x, self.u.left(x), "left")

    def right(self, x):
        return self.field.B(x, self.u.right(x), "right")

    def value(self, x):
        """v at points off the jump set (average of the one-sided values elsewhere)."""
        return 0.5 * (np.asarray(self.left(x)) + np.asarray(self.right(x)))

    # Div v as a set function
    def div_point(self, p: float) -> float:
        return float(self.right(p) - self.left(p))

    def div_interval(self, iv: Interval) -> float:
        hi_val = self.right(iv.hi) if iv.include_hi else self.left(iv.hi)
        lo_val = self.left(iv.lo) if iv.include_lo else self.right(iv.lo)
        return float(hi_val - lo_val)

    def div_set(self, S: BorelSet) -> float:
        return math.fsum(self.div_interval(iv) for iv in S)

    def ac_density(self, x):
        """Chain-rule density sum_k G_k(u) A_k' + b(x, u) u' of the AC part of Div v."""
        x = np.asarray(x, dtype=float)
        ut = np.asarray(self.u.approx(x))
        out = np.zeros(x.shape)
        for term in self.field.terms:
            if term.A.ac is not None:
                out = out + term.G.eval(ut) * term.A.ac.eval(x)
        if self.u.ac is not None:
            out = out + self.field.b(x, ut) * self.u.ac.eval(x)
        return out

    def weak_pair(self, phi: TestFunction, tol: float = 1e-10) -> float:
        """<Div v, phi> = -int v phi' dx (the oracle route)."""
        a, b = phi.support
        return -integrate_lebesgue(
            lambda x: np.asarray(self.value(x)) * phi.deriv(x),
            a, b, tol=tol,
            breakpoints=self.breakpoints + list(phi.breakpoints),
            cantor_supports=self.cantor_supports,
        )

    def _cell_ac(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        if not self._has_ac:
            return np.zeros(lo.size)
        vals, _ = gk15(self.ac_density, lo, hi)
        return vals

    def cantor_cell_masses(self, sup: tuple[float, float], depth: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(left, right, Cantor mass of Div v) for the level-``depth`` cells of a Cantor support."""
        left_n, _ = cantor_cells(depth)
        a, b = sup
        w = (b - a) * 3.0 ** (-depth)
        lo = a + (b - a) * left_n
        hi = lo + w
        # Evaluate a little outside each cell, inside the neighbouring gaps: the
        # Cantor staircase is flat there, so rounding of the cell ends cannot
        # leak mass between cells.
        delta = 0.1 * w
        elo, ehi = lo - delta, hi + delta
        mass = np.asarray(self.right(ehi)) - np.asarray(self.left(elo)) - self._cell_ac(elo, ehi)
        for p in self.jump_points:
            if a - delta <= p <= b + delta:
                i = int(np.searchsorted(elo, p, side="right")) - 1
                if 0 <= i < lo.size and elo[i] <= p <= ehi[i]:
                    mass[i] -= self.div_point(p)
        return lo, hi, mass

    def structural_pair(self, phi: TestFunction, tol: float = 1e-10, max_depth: int = 20) -> float:
        """<Div v, phi> from the parts: atoms, chain-rule AC density, Cantor cell sums."""
        a, b = phi.support
        parts = [self.div_point(p) * phi.value(p) for p in self.jump_points if a < p < b]
        if self._has_ac:
            parts.append(integrate_lebesgue(
                lambda x: self.ac_density(x) * phi.value(x), a, b, tol=tol,
                breakpoints=self.breakpoints + list(phi.breakpoints),
                cantor_supports=self.cantor_supports,
            ))
        for sup in self.cantor_supports:
            if sup[1] <= a or sup[0] >= b:
                continue
            parts.append(self._cantor_pair(sup, phi.value, tol, max_depth))
        return math.fsum(parts)

    def _cantor_pair(self, sup, fn, tol, max_depth, min_depth: int = 8) -> float:
        def at(depth):
            lo, hi, mass = self.cantor_cell_masses(sup, depth)
            return float(np.sum(fn(0.5 * (lo + hi)) * mass))

        depth = min_depth
        prev = at(depth)
        while depth + 2 <= max_depth:
            depth += 2
            cur = at(depth)
            if abs(cur - prev) <= tol:
                return cur
            prev = cur
        return prev

    def bound_check(self, K: Interval, sigma: Measure) -> tuple[float, float]:
        """(|Div v|(K) lower estimate, ||u||_inf sigma(K) + b_sup |Du|(K))."""
        tv_u = measure_tv(bv_derivative(self.u))[0]
        rhs = self.u.sup_bound * measure_eval(sigma, K) + self.field.b_sup * measure_eval(tv_u, K)
        pts = np.linspace(K.lo, K.hi, 513)
        lhs = float(np.sum(np.abs(np.diff(np.asarray(self.value(pts))))))
        return lhs, rhs


def field_composite(fd: Field, u: BVFunction) -> Composite:
    return Composite(fd, u)
