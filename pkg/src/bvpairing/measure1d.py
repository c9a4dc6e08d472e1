"""Signed Radon measures on a bounded interval, split into three mutually
singular parts: an absolutely continuous density, finitely many atoms, and
weighted copies of the middle-thirds Cantor measure.

Cantor arithmetic is exact where it can be: the Cantor function is computed
digit by digit in base three, and Cantor masses of intervals are CDF
differences.  Integrals against a Cantor component use the self-similar cell
decomposition at a depth chosen adaptively from the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import expr as ex
from .errors import TolNotMet
from .quadrature import gk15, integrate

DEFAULT_TOL = 1e-10
CANTOR_MAX_DEPTH = 20


# ---------------------------------------------------------------------------
# sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    include_lo: bool = False
    include_hi: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval needs lo <= hi, got [{self.lo}, {self.hi}]")
        if self.lo == self.hi and not (self.include_lo and self.include_hi):
            raise ValueError("a degenerate interval must include both endpoints (a point)")

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, True)

    @classmethod
    def point(cls, p: float) -> "Interval":
        return cls(p, p, True, True)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        lo_ok = (x > self.lo) | ((x == self.lo) & self.include_lo)
        hi_ok = (x < self.hi) | ((x == self.hi) & self.include_hi)
        return lo_ok & hi_ok

    def __str__(self) -> str:
        return f"{'[' if self.include_lo else '('}{self.lo}, {self.hi}{']' if self.include_hi else ')'}"


def _touch(a: Interval, b: Interval) -> bool:
    # b.lo >= a.lo assumed
    return b.lo < a.hi or (b.lo == a.hi and (a.include_hi or b.include_lo))


class BorelSet:
    """Finite union of intervals, kept sorted, disjoint and maximally merged."""

    def __init__(self, parts: Iterable[Interval] = ()):
        items = sorted(parts, key=lambda iv: (iv.lo, not iv.include_lo))
        merged: list[Interval] = []
        for iv in items:
            if merged and _touch(merged[-1], iv):
                last = merged[-1]
                if iv.hi > last.hi or (iv.hi == last.hi and iv.include_hi):
                    hi, inc_hi = iv.hi, iv.include_hi or (iv.hi == last.hi and last.include_hi)
                else:
                    hi, inc_hi = last.hi, last.include_hi
                inc_lo = last.include_lo or (iv.lo == last.lo and iv.include_lo)
                merged[-1] = Interval(last.lo, hi, inc_lo, inc_hi)
            else:
                merged.append(iv)
        self.parts: tuple[Interval, ...] = tuple(merged)

    @classmethod
    def of(cls, *parts: Interval) -> "BorelSet":
        return cls(parts)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.parts:
            out |= iv.contains(x)
        return out

    def endpoints(self) -> list[float]:
        return sorted({p for iv in self.parts for p in (iv.lo, iv.hi)})

    def is_empty(self) -> bool:
        return not self.parts

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self) -> str:
        return "BorelSet(" + " ∪ ".join(str(p) for p in self.parts) + ")"


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


class PiecewisePrimitive:
    """Closed-form expression per open subinterval between sorted breakpoints."""

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence[ex.Expr]):
        bps = [float(b) for b in breakpoints]
        if len(bps) < 2 or any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing with at least two entries")
        if len(pieces) != len(bps) - 1:
            raise ValueError("need exactly one piece per subinterval")
        self.breakpoints = tuple(bps)
        self.pieces = tuple(pieces)
        bounds = []
        for (a, b), piece in zip(self.intervals(), self.pieces):
            s = piece.sup_abs(a, b)
            if not math.isfinite(s):
                raise ValueError(f"density piece on ({a}, {b}) is not bounded")
            bounds.append(s)
        self.sup_bounds = tuple(bounds)
        self._prims = tuple(p.antiderivative() for p in self.pieces)
        self.cantor_supports: tuple[tuple[float, float], ...] = ()

    @classmethod
    def constant(cls, lo: float, hi: float, value: float) -> "PiecewisePrimitive":
        return cls([lo, hi], [ex.Const(value)])

    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:]))

    @property
    def domain(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    def _index(self, x: np.ndarray, side: str) -> np.ndarray:
        bps = np.asarray(self.breakpoints)
        idx = np.searchsorted(bps, x, side="right" if side == "right" else "left") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def eval(self, x, side: str = "right"):
        arr = np.asarray(x, dtype=float)
        idx = self._index(arr, side)
        out = np.zeros(arr.shape)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece.eval(arr[mask])
        return float(out) if arr.ndim == 0 else out

    __call__ = eval

    def derivative(self) -> "PiecewisePrimitive":
        return PiecewisePrimitive(self.breakpoints, [p.deriv() for p in self.pieces])

    def sup_bound(self) -> float:
        return max(self.sup_bounds)

    @property
    def kinks(self) -> list[float]:
        out = set(self.breakpoints)
        for (a, b), piece in zip(self.intervals(), self.pieces):
            out |= {k for k in piece.kinks() if a < k < b}
        return sorted(out)

    def is_zero(self) -> bool:
        return all(isinstance(p, ex.Const) and p.value == 0.0 for p in self.pieces)

    def cumulative(self, x) -> np.ndarray:
        """int_{left end}^{x} of the density (x clipped to the domain)."""
        arr = np.asarray(x, dtype=float)
        out = np.zeros(arr.shape)
        for (a, b), piece, prim in zip(self.intervals(), self.pieces, self._prims):
            xc = np.clip(arr, a, b)
            if prim is not None:
                out = out + (prim.eval(xc) - float(prim.eval(np.array(a))))
            else:
                flat = xc.ravel()
                vals = np.array([integrate(piece.eval, a, xi, tol=1e-13, breakpoints=piece.kinks()) for xi in flat])
                out = out + vals.reshape(arr.shape)
        return out

    def integral(self, a: float, b: float) -> float:
        return float(self.cumulative(np.array(b)) - self.cumulative(np.array(a)))

    def to_spec(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "pieces": [p.to_spec() for p in self.pieces]}

    def __repr__(self) -> str:
        return f"PiecewisePrimitive({self.to_spec()!r})"


class CallableDensity:
    """A bounded density given by a vectorized callable plus its split points."""

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        breakpoints: Iterable[float] = (),
        bound: float = math.inf,
        cantor_supports: Iterable[tuple[float, float]] = (),
    ):
        self.func = func
        self.kinks = sorted(set(float(b) for b in breakpoints))
        self.breakpoints = tuple(self.kinks)
        self._bound = bound
        self.cantor_supports = tuple(sorted(set(cantor_supports)))

    def eval(self, x, side: str = "right"):
        arr = np.asarray(x, dtype=float)
        out = np.asarray(self.func(arr), dtype=float)
        return float(out) if arr.ndim == 0 else np.broadcast_to(out, arr.shape)

    __call__ = eval

    def sup_bound(self) -> float:
        return self._bound


def density_kinks(d) -> list[float]:
    return list(d.kinks) if d is not None else []


# ---------------------------------------------------------------------------
# Cantor arithmetic
# ---------------------------------------------------------------------------


def cantor_cdf(x, precision: int = 60) -> float:
    """Cantor-Lebesgue function by ternary digits.

    Digits 0 and 2 become binary 0 and 1; the first digit 1 ends the scan
    with a binary 1.  ``Fraction`` input is processed exactly.
    """
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    exact = isinstance(x, Fraction)
    y = x if exact else float(x)
    result = Fraction(0) if exact else 0.0
    scale = Fraction(1, 2) if exact else 0.5
    for _ in range(precision):
        y = y * 3
        digit = int(math.floor(y))
        y = y - digit
        if digit == 1:
            result += scale
            break
        if digit == 2:
            result += scale
        scale = scale / 2
        if y == 0:
            break
    return float(result)


_BLOCK = 6


def _block_tables() -> tuple[np.ndarray, np.ndarray]:
    # value contributed by each block of _BLOCK ternary digits and whether the scan stops there
    vals = np.zeros(3 ** _BLOCK)
    stops = np.zeros(3 ** _BLOCK, dtype=bool)
    for d in range(3 ** _BLOCK):
        digits = [(d // 3 ** (_BLOCK - 1 - k)) % 3 for k in range(_BLOCK)]
        acc, scale = 0.0, 0.5
        for dig in digits:
            if dig >= 1:
                acc += scale
            if dig == 1:
                stops[d] = True
                break
            scale *= 0.5
        vals[d] = acc
    return vals, stops


_BLOCK_VALS, _BLOCK_STOPS = _block_tables()


def cantor_cdf_array(x, precision: int = 60) -> np.ndarray:
    """Vectorized :func:`cantor_cdf` for float arrays, six ternary digits per step."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.where(flat >= 1.0, 1.0, 0.0)
    active = np.nonzero((flat > 0.0) & (flat < 1.0))[0]
    y = flat[active].copy()
    acc = np.zeros(active.size)
    scale = 1.0
    base = float(3 ** _BLOCK)
    for _ in range(0, precision, _BLOCK):
        if active.size == 0:
            break
        y *= base
        block = np.floor(y)
        y -= block
        idx = block.astype(np.int64)
        acc += scale * _BLOCK_VALS[idx]
        stop = _BLOCK_STOPS[idx] | (y == 0.0)
        if np.any(stop):
            out[active[stop]] = acc[stop]
            keep = ~stop
            active, y, acc = active[keep], y[keep], acc[keep]
        scale *= 0.5 ** _BLOCK
    if active.size:
        out[active] = acc
    return out.reshape(x.shape)


def cantor_plateau_right_end(s: float, precision: int = 60) -> float:
    """sup{y in [0,1] : c(y) <= s}, from the binary digits of s (exact ternary map)."""
    if s < 0:
        return 0.0
    if s >= 1:
        return 1.0
    y = 0.0
    scale = 1.0 / 3.0
    r = float(s)
    for _ in range(precision):
        r *= 2.0
        bit = math.floor(r)
        r -= bit
        if bit:
            y += 2.0 * scale
        scale /= 3.0
        if r == 0.0:
            break
    return y


def is_dyadic(s: float, max_level: int = 40) -> bool:
    return 0.0 < s < 1.0 and float(s * 2.0**max_level).is_integer()


@lru_cache(maxsize=32)
def cantor_cells(depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Left ends of the 2**depth level-``depth`` cells of [0,1] and the CDF there."""
    left = np.zeros(1)
    for _ in range(depth):
        left = np.concatenate([left / 3.0, left / 3.0 + 2.0 / 3.0])
    cdf = np.arange(left.size, dtype=float) / float(left.size)
    left.setflags(write=False)
    cdf.setflags(write=False)
    return left, cdf


@lru_cache(maxsize=32)
def cantor_gaps(depth: int) -> tuple[np.ndarray, np.ndarray]:
    """All removed open middle thirds of levels 1..depth (normalized), sorted."""
    los, his = [], []
    for k in range(1, depth + 1):
        left, _ = cantor_cells(k - 1)
        w = 3.0 ** (-k)
        los.append(left + w)
        his.append(left + 2.0 * w)
    lo = np.concatenate(los) if los else np.zeros(0)
    hi = np.concatenate(his) if his else np.zeros(0)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def _split_at(lo: np.ndarray, hi: np.ndarray, cuts: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """Split sorted disjoint panels at interior cut points."""
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    extra_lo, extra_hi = [], []
    for c in sorted(set(cuts)):
        i = int(np.searchsorted(lo, c, side="right")) - 1
        if 0 <= i < lo.size and lo[i] < c < hi[i]:
            extra_lo.append(c)
            extra_hi.append(hi[i])
            hi[i] = c
    if extra_lo:
        lo = np.concatenate([lo, extra_lo])
        hi = np.concatenate([hi, extra_hi])
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
    return lo, hi


def _cantor_sum(f, alpha: float, beta: float, depth: int, lo_n: float, hi_n: float, cuts_n: Sequence[float]) -> float:
    left, _ = cantor_cells(depth)
    w = 3.0 ** (-depth)
    scale = beta - alpha
    special = np.zeros(left.size, dtype=bool)
    for c in [lo_n, hi_n, *cuts_n]:
        i = int(np.searchsorted(left, c, side="right")) - 1
        if 0 <= i < left.size and left[i] < c < left[i] + w:
            special[i] = True
    inside = (left >= lo_n) & (left + w <= hi_n) & ~special
    mids = alpha + scale * (left[inside] + 0.5 * w)
    total = float(np.sum(f(mids))) * 2.0 ** (-depth) if mids.size else 0.0
    extra = []
    for i in np.nonzero(special)[0]:
        a, b = max(left[i], lo_n), min(left[i] + w, hi_n)
        if b <= a:
            continue
        pts = [a] + sorted(c for c in cuts_n if a < c < b) + [b]
        for s0, s1 in zip(pts[:-1], pts[1:]):
            mass = cantor_cdf(s1) - cantor_cdf(s0)
            if mass:
                extra.append(mass * float(f(np.array([alpha + scale * 0.5 * (s0 + s1)]))[0]))
    return total + math.fsum(extra)


def integrate_cantor(
    f: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    beta: float,
    tol: float = DEFAULT_TOL,
    lo: float | None = None,
    hi: float | None = None,
    breakpoints: Iterable[float] = (),
    max_depth: int = CANTOR_MAX_DEPTH,
    min_depth: int = 8,
) -> float:
    """int f dC over the Cantor probability measure on [alpha, beta], optionally restricted to [lo, hi].

    Each level-d cell contributes its mass times f at the cell centre; the
    reflection symmetry of a cell cancels the first-order error.  Depth
    increases in steps of two until successive sums agree within ``tol``.
    """
    scale = beta - alpha
    lo_n = 0.0 if lo is None else max(0.0, (lo - alpha) / scale)
    hi_n = 1.0 if hi is None else min(1.0, (hi - alpha) / scale)
    if hi_n <= lo_n:
        return 0.0
    cuts_n = [(c - alpha) / scale for c in breakpoints if alpha < c < beta]
    depth = min(min_depth, max_depth)
    prev = _cantor_sum(f, alpha, beta, depth, lo_n, hi_n, cuts_n)
    while True:
        nxt = min(depth + 2, max_depth)
        if nxt == depth:
            raise TolNotMet(f"Cantor integral did not reach {tol:g} by depth {max_depth}", tol=tol)
        cur = _cantor_sum(f, alpha, beta, nxt, lo_n, hi_n, cuts_n)
        if abs(cur - prev) <= tol:
            return cur
        if nxt == max_depth:
            raise TolNotMet(
                f"Cantor integral did not reach {tol:g} by depth {max_depth} (last change {abs(cur - prev):.3g})",
                tol=tol,
            )
        prev, depth = cur, nxt


def _triadic_lebesgue(f, alpha, beta, depth, lo_n, hi_n, cuts_n, tol) -> float:
    scale = beta - alpha
    glo, ghi = cantor_gaps(depth)
    plo, phi_ = np.maximum(glo, lo_n), np.minimum(ghi, hi_n)
    keep = phi_ > plo
    plo, phi_ = _split_at(plo[keep], phi_[keep], cuts_n)
    left, _ = cantor_cells(depth)
    w = 3.0 ** (-depth)
    clo, chi = np.maximum(left, lo_n), np.minimum(left + w, hi_n)
    keep = chi > clo
    clo, chi = _split_at(clo[keep], chi[keep], cuts_n)

    def g(y):
        return f(alpha + scale * y)

    total = []
    if plo.size:
        vals, errs = gk15(g, plo, phi_)
        bad = errs > tol * (phi_ - plo)
        total.append(float(np.sum(vals[~bad])))
        for a, b in zip(plo[bad], phi_[bad]):
            total.append(integrate(g, float(a), float(b), tol=tol * (b - a)))
    if clo.size:
        total.append(float(np.sum(g(0.5 * (clo + chi)) * (chi - clo))))
    return scale * math.fsum(total)


def integrate_lebesgue(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    breakpoints: Iterable[float] = (),
    cantor_supports: Iterable[tuple[float, float]] = (),
    max_depth: int = 16,
) -> float:
    """int_a^b f dx where f may depend on Cantor functions supported in ``cantor_supports``.

    Outside the supports this is plain adaptive quadrature.  Inside a support
    the removed middle thirds (where Cantor functions are constant) get one
    K15 panel each and the remaining level-d cells use the centre rule.
    """
    if b <= a:
        return 0.0 if b == a else -integrate_lebesgue(f, b, a, tol, breakpoints, cantor_supports, max_depth)
    supports = sorted((float(s0), float(s1)) for s0, s1 in cantor_supports if s1 > a and s0 < b)
    bps = sorted({float(p) for p in breakpoints if a < p < b})
    if not supports:
        return integrate(f, a, b, tol=tol, breakpoints=bps)
    cuts = set(bps)
    for s0, s1 in supports:
        cuts |= {s0, s1}
    pts = [a] + sorted(c for c in cuts if a < c < b) + [b]
    length = b - a
    pieces = []
    for p, q in zip(pts[:-1], pts[1:]):
        share = tol * (q - p) / length
        sup = next(((s0, s1) for s0, s1 in supports if s0 <= p and q <= s1), None)
        if sup is None:
            pieces.append(integrate(f, p, q, tol=share, breakpoints=bps))
            continue
        s0, s1 = sup
        sc = s1 - s0
        lo_n, hi_n = (p - s0) / sc, (q - s0) / sc
        cuts_n = [(c - s0) / sc for c in bps if p < c < q]
        depth = 6
        prev = _triadic_lebesgue(f, s0, s1, depth, lo_n, hi_n, cuts_n, share / 4)
        while True:
            nxt = depth + 2
            cur = _triadic_lebesgue(f, s0, s1, nxt, lo_n, hi_n, cuts_n, share / 4)
            if abs(cur - prev) <= share / 2:
                pieces.append(cur)
                break
            if nxt >= max_depth:
                raise TolNotMet(f"triadic quadrature did not reach {share:g} on ({p}, {q})", tol=share)
            prev, depth = cur, nxt
    return math.fsum(pieces)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


class TestFunction:
    """A C^1 function with compact support in the domain, piecewise closed form."""

    __test__ = False  # not a pytest class

    def __init__(self, pieces: PiecewisePrimitive, name: str = "phi", spec: dict | None = None):
        self.pieces = pieces
        self.dpieces = pieces.derivative()
        self.name = name
        self.spec = spec
        self.support = pieces.domain
        self.breakpoints = tuple(pieces.kinks)
        self._check_c1()

    def _check_c1(self, tol: float = 1e-9):
        a, b = self.support
        vals = [self.pieces.eval(np.array(a), "right"), self.pieces.eval(np.array(b), "left")]
        ders = [self.dpieces.eval(np.array(a), "right"), self.dpieces.eval(np.array(b), "left")]
        scale = max(1.0, max(self.pieces.sup_bounds))
        if max(abs(v) for v in vals + ders) > tol * scale:
            raise ValueError(f"test function {self.name!r} is not C^1 at the ends of its support")
        for p in self.pieces.breakpoints[1:-1]:
            for fn in (self.pieces, self.dpieces):
                jump = abs(float(fn.eval(np.array(p), "right")) - float(fn.eval(np.array(p), "left")))
                if jump > tol * scale:
                    raise ValueError(f"test function {self.name!r} is not C^1 at {p}")

    @classmethod
    def bump(cls, center: float, radius: float, height: float = 1.0, order: int = 2, name: str = "bump") -> "TestFunction":
        """height * (1 - ((x - center)/radius)^2)^order on the open support, C^{order-1}."""
        if radius <= 0 or order < 2:
            raise ValueError("bump needs radius > 0 and order >= 2")
        coef = np.array([1.0])
        for _ in range(order):
            coef = np.polynomial.polynomial.polymul(coef, [1.0, 0.0, -1.0])
        piece = ex.Poly(height * coef, ex.Affine(1.0 / radius, -center / radius))
        spec = {"kind": "bump", "center": center, "radius": radius, "height": height, "order": order}
        return cls(PiecewisePrimitive([center - radius, center + radius], [piece]), name=name, spec=spec)

    def value(self, x):
        arr = np.asarray(x, dtype=float)
        a, b = self.support
        out = np.where((arr > a) & (arr < b), self.pieces.eval(np.clip(arr, a, b)), 0.0)
        return float(out) if arr.ndim == 0 else out

    __call__ = value

    def deriv(self, x):
        arr = np.asarray(x, dtype=float)
        a, b = self.support
        out = np.where((arr > a) & (arr < b), self.dpieces.eval(np.clip(arr, a, b)), 0.0)
        return float(out) if arr.ndim == 0 else out

    def sup(self) -> float:
        return max(self.pieces.sup_bounds)

    def is_nonnegative(self) -> bool:
        if self.spec is not None and self.spec.get("kind", "bump") == "bump" and "center" in self.spec:
            return float(self.spec.get("height", 1.0)) >= 0.0
        for (a, b), p in zip(self.pieces.intervals(), self.pieces.pieces):
            if p.enclose(a, b)[0] >= -1e-12:
                continue
            # interval enclosures of polynomials are loose; fall back to a dense grid
            if float(np.min(p.eval(np.linspace(a, b, 2049)))) < -1e-12:
                return False
        return True

    def to_spec(self) -> dict:
        if self.spec is not None:
            return dict(self.spec)
        return {"kind": "pieces", **self.pieces.to_spec()}


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CantorComponent:
    """weight * (optional density) * Cantor measure pushed to [lo, hi]."""

    weight: float
    lo: float
    hi: float
    density: Callable[[np.ndarray], np.ndarray] | None = None
    density_bound: float = 1.0
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("a Cantor component needs lo < hi")

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def cdf(self, x) -> np.ndarray:
        return cantor_cdf_array((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo))

    def total_bound(self) -> float:
        return abs(self.weight) * (self.density_bound if self.density is not None else 1.0)

    def density_values(self, x: np.ndarray) -> np.ndarray:
        if self.density is None:
            return np.ones(np.shape(x))
        return np.asarray(self.density(x), dtype=float)

    def mass(self, a: float, b: float, tol: float = DEFAULT_TOL) -> float:
        """Mass of the component on the interval with ends a < b (endpoints carry no mass)."""
        if b <= self.lo or a >= self.hi or b <= a:
            return 0.0
        if self.density is None:
            sc = self.hi - self.lo
            return self.weight * (cantor_cdf((min(b, self.hi) - self.lo) / sc) - cantor_cdf((max(a, self.lo) - self.lo) / sc))
        tol_w = tol / max(abs(self.weight), 1e-300)
        return self.weight * integrate_cantor(
            self.density, self.lo, self.hi, tol=tol_w, lo=a, hi=b, breakpoints=self.breakpoints
        )

    def integrate(self, f, tol: float = DEFAULT_TOL, lo=None, hi=None, breakpoints=()) -> float:
        tol_w = tol / max(abs(self.weight), 1e-300)

        def g(x):
            return f(x) * self.density_values(x)

        return self.weight * integrate_cantor(
            g, self.lo, self.hi, tol=tol_w, lo=lo, hi=hi, breakpoints=tuple(breakpoints) + self.breakpoints
        )


def _merge_cantor(components: Iterable[CantorComponent]) -> tuple[CantorComponent, ...]:
    groups: dict[tuple[float, float], list[CantorComponent]] = {}
    for c in components:
        groups.setdefault(c.support, []).append(c)
    out = []
    for (lo, hi), cs in sorted(groups.items()):
        if all(c.density is None for c in cs):
            w = math.fsum(c.weight for c in cs)
            if w != 0.0:
                out.append(CantorComponent(w, lo, hi))
            continue
        parts = [(c.weight, c.density) for c in cs]

        def dens(x, parts=parts):
            total = np.zeros(np.shape(x))
            for w, d in parts:
                total = total + w * (np.ones(np.shape(x)) if d is None else np.asarray(d(x), dtype=float))
            return total

        bound = sum(c.total_bound() for c in cs)
        bps = tuple(sorted({b for c in cs for b in c.breakpoints}))
        out.append(CantorComponent(1.0, lo, hi, dens, bound, bps))
    return tuple(out)


class Measure:
    """Finite signed measure on the open interval ``domain``."""

    def __init__(
        self,
        domain: tuple[float, float],
        ac=None,
        atoms: dict[float, float] | Iterable[tuple[float, float]] | None = None,
        cantor: Iterable[CantorComponent] = (),
    ):
        self.domain = (float(domain[0]), float(domain[1]))
        self.ac = ac
        items = atoms.items() if isinstance(atoms, dict) else (atoms or [])
        acc: dict[float, list[float]] = {}
        for p, w in items:
            acc.setdefault(float(p), []).append(float(w))
        merged = {p: math.fsum(ws) for p, ws in acc.items()}
        self.atoms: dict[float, float] = {p: merged[p] for p in sorted(merged) if merged[p] != 0.0}
        self.cantor = _merge_cantor(cantor)

    @classmethod
    def zero(cls, domain) -> "Measure":
        return cls(domain)

    @classmethod
    def dirac(cls, domain, p: float, w: float = 1.0) -> "Measure":
        return cls(domain, atoms={p: w})

    @classmethod
    def lebesgue(cls, domain, lo: float | None = None, hi: float | None = None, density: float = 1.0) -> "Measure":
        lo = domain[0] if lo is None else lo
        hi = domain[1] if hi is None else hi
        d = CallableDensity(
            lambda x: np.where((x > lo) & (x < hi), density, 0.0), breakpoints=[lo, hi], bound=abs(density)
        )
        return cls(domain, ac=d)

    @property
    def cantor_supports(self) -> list[tuple[float, float]]:
        sup = [c.support for c in self.cantor]
        if self.ac is not None:
            sup += list(getattr(self.ac, "cantor_supports", ()))
        return sorted(set(sup))

    def ac_part(self) -> "Measure":
        return Measure(self.domain, ac=self.ac)

    def atomic_part(self) -> "Measure":
        return Measure(self.domain, atoms=self.atoms)

    def cantor_part(self) -> "Measure":
        return Measure(self.domain, cantor=self.cantor)

    def diffuse_part(self) -> "Measure":
        return Measure(self.domain, ac=self.ac, cantor=self.cantor)

    def is_zero(self) -> bool:
        ac_zero = self.ac is None or (isinstance(self.ac, PiecewisePrimitive) and self.ac.is_zero())
        return ac_zero and not self.atoms and not self.cantor

    def breakpoints(self) -> list[float]:
        pts = set(density_kinks(self.ac)) | set(self.atoms)
        for c in self.cantor:
            pts |= {c.lo, c.hi, *c.breakpoints}
        return sorted(pts)

    def eval(self, S: BorelSet | Interval, tol: float = DEFAULT_TOL) -> float:
        return measure_eval(self, S, tol)

    def pair(self, phi: TestFunction, tol: float = DEFAULT_TOL) -> float:
        return measure_pair(self, phi, tol)

    def restrict(self, S: BorelSet) -> "Measure":
        ends = S.endpoints()
        ac = None
        if self.ac is not None:
            base = self.ac
            ac = CallableDensity(
                lambda x: np.where(S.contains(x), base(x), 0.0),
                breakpoints=list(density_kinks(base)) + ends,
                bound=base.sup_bound(),
                cantor_supports=getattr(base, "cantor_supports", ()),
            )
        atoms = {p: w for p, w in self.atoms.items() if bool(S.contains(p))}
        cantor = []
        for c in self.cantor:
            cantor.append(
                CantorComponent(
                    c.weight,
                    c.lo,
                    c.hi,
                    lambda x, c=c: c.density_values(x) * S.contains(x),
                    c.density_bound if c.density is not None else 1.0,
                    tuple(sorted(set(c.breakpoints) | set(ends))),
                )
            )
        return Measure(self.domain, ac, atoms, cantor)

    def __repr__(self) -> str:
        return f"Measure(domain={self.domain}, ac={'yes' if self.ac is not None else 'no'}, atoms={self.atoms}, cantor={len(self.cantor)})"


def _as_set(S) -> BorelSet:
    if isinstance(S, BorelSet):
        return S
    if isinstance(S, Interval):
        return BorelSet([S])
    raise TypeError("expected a BorelSet or Interval")


def measure_eval(mu: Measure, S: BorelSet | Interval, tol: float = DEFAULT_TOL) -> float:
    """mu(S): quadrature for the density, atom sums, exact CDF differences for Cantor parts."""
    S = _as_set(S)
    lo_dom, hi_dom = mu.domain
    parts = []
    for iv in S:
        if iv.lo < lo_dom - 1e-15 or iv.hi > hi_dom + 1e-15:
            raise ValueError(f"set part {iv} is not inside the domain {mu.domain}")
        for p, w in mu.atoms.items():
            if bool(iv.contains(p)):
                parts.append(w)
        if iv.is_point:
            continue
        if mu.ac is not None:
            parts.append(
                integrate_lebesgue(
                    mu.ac, iv.lo, iv.hi, tol=tol, breakpoints=density_kinks(mu.ac),
                    cantor_supports=getattr(mu.ac, "cantor_supports", ()),
                )
            )
        for c in mu.cantor:
            parts.append(c.mass(iv.lo, iv.hi, tol))
    return math.fsum(parts)


def measure_pair(mu: Measure, phi: TestFunction, tol: float = DEFAULT_TOL) -> float:
    """<mu, phi> = integral of phi against all three parts."""
    a, b = phi.support
    parts = []
    if mu.ac is not None:
        ac = mu.ac

        def f(x):
            return phi.value(x) * ac(x)

        parts.append(
            integrate_lebesgue(
                f, a, b, tol=tol, breakpoints=density_kinks(ac) + list(phi.breakpoints),
                cantor_supports=getattr(ac, "cantor_supports", ()),
            )
        )
    for p, w in mu.atoms.items():
        parts.append(w * phi.value(p))
    for c in mu.cantor:
        if c.hi <= a or c.lo >= b:
            continue
        parts.append(c.integrate(phi.value, tol=tol, lo=a, hi=b, breakpoints=phi.breakpoints))
    return math.fsum(parts)


def measure_tv(mu: Measure) -> tuple[Measure, Measure, Measure]:
    """(|mu|, mu^+, mu^-), valid because the three parts are mutually singular."""

    def derived(fn):
        if mu.ac is None:
            return None
        base = mu.ac
        return CallableDensity(
            lambda x: fn(np.asarray(base(x), dtype=float)),
            breakpoints=density_kinks(base),
            bound=base.sup_bound(),
            cantor_supports=getattr(base, "cantor_supports", ()),
        )

    def cantor_with(fn):
        out = []
        for c in mu.cantor:
            if c.density is None:
                w = fn(np.array(c.weight))
                if w != 0.0:
                    out.append(CantorComponent(float(w), c.lo, c.hi))
            else:
                out.append(
                    CantorComponent(
                        1.0, c.lo, c.hi, lambda x, c=c: fn(c.weight * c.density_values(x)), c.total_bound(), c.breakpoints
                    )
                )
        return out

    pos_f = lambda v: np.maximum(v, 0.0)  # noqa: E731
    neg_f = lambda v: np.maximum(-v, 0.0)  # noqa: E731
    tv = Measure(mu.domain, derived(np.abs), {p: abs(w) for p, w in mu.atoms.items()}, cantor_with(np.abs))
    pos = Measure(mu.domain, derived(pos_f), {p: w for p, w in mu.atoms.items() if w > 0}, cantor_with(pos_f))
    neg = Measure(mu.domain, derived(neg_f), {p: -w for p, w in mu.atoms.items() if w < 0}, cantor_with(neg_f))
    return tv, pos, neg


def measure_combine(terms: Sequence[tuple[float, Measure]]) -> Measure:
    """Linear combination; atoms at equal points merge, zero atoms are dropped."""
    terms = [(float(c), m) for c, m in terms if c != 0.0]
    if not terms:
        raise ValueError("measure_combine needs at least one nonzero term")
    domain = terms[0][1].domain
    dens = [(c, m.ac) for c, m in terms if m.ac is not None]
    ac = None
    if dens:
        if len(dens) == 1 and dens[0][0] == 1.0:
            ac = dens[0][1]
        else:
            ac = CallableDensity(
                lambda x: sum(c * np.asarray(d(x), dtype=float) for c, d in dens),
                breakpoints=sorted({k for _, d in dens for k in density_kinks(d)}),
                bound=sum(abs(c) * d.sup_bound() for c, d in dens),
                cantor_supports=sorted({s for _, d in dens for s in getattr(d, "cantor_supports", ())}),
            )
    atoms = [(p, c * w) for c, m in terms for p, w in m.atoms.items()]
    cantor = []
    for c, m in terms:
        for comp in m.cantor:
            cantor.append(CantorComponent(c * comp.weight, comp.lo, comp.hi, comp.density, comp.density_bound, comp.breakpoints))
    return Measure(domain, ac, atoms, cantor)


def measure_dominates(mu: Measure, nu: Measure, samples: Iterable[BorelSet], tol: float = 1e-12) -> bool:
    """True iff nu(S) <= mu(S) + tol for every sampled S (both measures nonnegative)."""
    return all(measure_eval(nu, S) <= measure_eval(mu, S) + tol for S in samples)
