"""Bounded-variation functions on an interval, stored by their derivative.

A function is its right limit at the left end of the domain plus the
integral of its derivative: an absolutely continuous density, finitely many
jumps and weighted Cantor staircases.  One-sided limits are therefore exact
sums, and a monotonicity certificate makes every superlevel set a finite
union of intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import expr as ex
from .errors import NoCertificate
from .measure1d import (
    BorelSet,
    CantorComponent,
    Interval,
    Measure,
    PiecewisePrimitive,
    cantor_plateau_right_end,
    is_dyadic,
)

LEVEL_TOL = 1e-12
_SIGN_EPS = 1e-9


@dataclass(frozen=True)
class JumpPoint:
    x: float
    left: float
    right: float

    def __post_init__(self):
        if self.left == self.right:
            raise ValueError(f"no jump at {self.x}: equal one-sided limits")

    @property
    def nu(self) -> int:
        # the side the normal points to carries the larger value
        return 1 if self.right > self.left else -1

    @property
    def u_minus(self) -> float:
        return min(self.left, self.right)

    @property
    def u_plus(self) -> float:
        return max(self.left, self.right)

    @property
    def u_i(self) -> float:
        return self.u_plus

    @property
    def u_e(self) -> float:
        return self.u_minus

    @property
    def size(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.u_plus - self.u_minus


@dataclass(frozen=True)
class Representatives:
    u_minus: float
    u_plus: float
    u_tilde: float | None
    u_lambda: float
    u_i: float
    u_e: float
    nu: int


@dataclass(frozen=True)
class MonotonePiece:
    lo: float
    hi: float
    direction: int  # +1 nondecreasing, -1 nonincreasing, 0 constant


class FinitePerimeterSet:
    """Finite union of disjoint closed intervals inside the closure of the domain.

    The reduced boundary is the set of interval ends lying strictly inside the
    domain; each carries the inward normal (+1 at a left end, -1 at a right end).
    """

    def __init__(self, intervals: Iterable[tuple[float, float]], domain: tuple[float, float]):
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        merged: list[list[float]] = []
        for a, b in ivs:
            if not a < b:
                raise ValueError("intervals of a finite perimeter set must be nondegenerate")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        self.domain = (float(domain[0]), float(domain[1]))
        for a, b in merged:
            if a < self.domain[0] or b > self.domain[1]:
                raise ValueError(f"interval [{a}, {b}] leaves the domain {self.domain}")
        self.intervals: tuple[tuple[float, float], ...] = tuple((a, b) for a, b in merged)

    def is_compact(self) -> bool:
        lo, hi = self.domain
        return all(lo < a and b < hi for a, b in self.intervals)

    def boundary(self) -> list[tuple[float, int]]:
        lo, hi = self.domain
        out = []
        for a, b in self.intervals:
            if a > lo:
                out.append((a, 1))
            if b < hi:
                out.append((b, -1))
        return out

    def interior(self) -> BorelSet:
        return BorelSet(Interval.open(a, b) for a, b in self.intervals)

    def closure(self) -> BorelSet:
        lo, hi = self.domain
        return BorelSet(Interval(a, b, a > lo, b < hi) for a, b in self.intervals)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x > a) & (x < b)
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, FinitePerimeterSet) and self.intervals == other.intervals and self.domain == other.domain

    def __repr__(self) -> str:
        return f"FinitePerimeterSet({list(self.intervals)})"


def _sign_runs(e: ex.Expr, a: float, b: float, budget: int = 20000) -> list[tuple[float, float, int]]:
    """Cover [a, b] by subintervals on which the enclosure of ``e`` has one sign (0 = vanishes)."""
    scale = max(1.0, e.sup_abs(a, b)) if math.isfinite(e.sup_abs(a, b)) else 1.0
    eps = _SIGN_EPS * scale
    out: list[tuple[float, float, int]] = []
    stack = [(a, b)]
    steps = 0
    while stack:
        p, q = stack.pop()
        steps += 1
        if steps > budget:
            raise NoCertificate(f"could not certify the sign of the derivative on ({a}, {b})")
        lo, hi = e.enclose(p, q)
        if lo >= -eps and hi <= eps:
            out.append((p, q, 0))
        elif lo >= -eps:
            out.append((p, q, 1))
        elif hi <= eps:
            out.append((p, q, -1))
        elif q - p <= LEVEL_TOL * max(1.0, abs(p), abs(q)):
            out.append((p, q, 0))
        else:
            m = 0.5 * (p + q)
            stack.append((m, q))
            stack.append((p, m))
    return out


def _merge_runs(runs: Sequence[tuple[float, float, int]]) -> list[MonotonePiece]:
    pieces: list[list] = []
    for p, q, s in runs:
        if pieces and (s == 0 or pieces[-1][2] in (0, s)):
            pieces[-1][1] = q
            if pieces[-1][2] == 0:
                pieces[-1][2] = s
        else:
            pieces.append([p, q, s])
    return [MonotonePiece(p, q, s) for p, q, s in pieces]


class BVFunction:
    """u(x+) = base + int_{lo}^{x} ac + sum of jumps at points <= x + sum of Cantor staircases."""

    def __init__(
        self,
        domain: tuple[float, float],
        base: float = 0.0,
        ac: PiecewisePrimitive | None = None,
        jumps: Iterable[tuple[float, float]] = (),
        cantor: Iterable[CantorComponent] = (),
        certify: bool = True,
    ):
        self.domain = (float(domain[0]), float(domain[1]))
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain needs lo < hi")
        self.base = float(base)
        if ac is not None:
            if ac.domain != self.domain:
                raise ValueError(f"density breakpoints must span the domain {self.domain}")
            if ac.is_zero():
                ac = None
        self.ac = ac
        js = sorted((float(x), float(s)) for x, s in jumps if s != 0.0)
        for x, _ in js:
            if not lo < x < hi:
                raise ValueError(f"jump at {x} is outside the open domain")
        if len({x for x, _ in js}) != len(js):
            raise ValueError("two jumps at the same point")
        self._jump_x = np.array([x for x, _ in js])
        self._jump_s = np.array([s for _, s in js])
        cs = []
        for c in cantor:
            if c.density is not None:
                raise ValueError("Cantor parts of a BV function must have constant weight")
            if c.lo < lo or c.hi > hi:
                raise ValueError("Cantor support must lie inside the domain")
            cs.append(c)
        self.cantor: tuple[CantorComponent, ...] = tuple(sorted(cs, key=lambda c: (c.lo, c.hi)))
        self.jumps: tuple[JumpPoint, ...] = tuple(
            JumpPoint(x, float(self.left(x)), float(self.right(x))) for x, _ in js
        )
        self.monotone_pieces: tuple[MonotonePiece, ...] | None = self._certify() if certify else None
        self.sup_bound = self._sup_bound()

    # -- evaluation -------------------------------------------------------

    def _continuous_part(self, x: np.ndarray) -> np.ndarray:
        out = np.full(x.shape, self.base)
        if self.ac is not None:
            out = out + self.ac.cumulative(x)
        for c in self.cantor:
            out = out + c.weight * c.cdf(x)
        return out

    def right(self, x):
        arr = np.asarray(x, dtype=float)
        out = self._continuous_part(arr)
        if self._jump_x.size:
            out = out + (self._jump_s[None, :] * (self._jump_x[None, :] <= arr.reshape(-1, 1))).sum(axis=1).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def left(self, x):
        arr = np.asarray(x, dtype=float)
        out = self._continuous_part(arr)
        if self._jump_x.size:
            out = out + (self._jump_s[None, :] * (self._jump_x[None, :] < arr.reshape(-1, 1))).sum(axis=1).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def approx(self, x):
        """Precise representative (average of one-sided limits; equals both off the jump set)."""
        arr = np.asarray(x, dtype=float)
        out = 0.5 * (np.asarray(self.left(arr)) + np.asarray(self.right(arr)))
        return float(out) if arr.ndim == 0 else out

    __call__ = approx

    def jump_at(self, x: float) -> JumpPoint | None:
        for j in self.jumps:
            if j.x == x:
                return j
        return None

    @property
    def jump_points(self) -> list[float]:
        return [j.x for j in self.jumps]

    # -- structure --------------------------------------------------------

    def breakpoints(self) -> list[float]:
        pts = set(self.domain) | set(self.jump_points)
        if self.ac is not None:
            pts |= set(self.ac.kinks)
        for c in self.cantor:
            pts |= {c.lo, c.hi}
        return sorted(p for p in pts if self.domain[0] <= p <= self.domain[1])

    @property
    def cantor_supports(self) -> list[tuple[float, float]]:
        return [c.support for c in self.cantor]

    def has_cantor(self) -> bool:
        return bool(self.cantor)

    def _certify(self) -> tuple[MonotonePiece, ...]:
        cuts = self.breakpoints()
        runs: list[MonotonePiece] = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            c_sign = 0
            for c in self.cantor:
                if c.lo <= a and b <= c.hi:
                    s = 1 if c.weight > 0 else -1
                    if c_sign and s != c_sign:
                        raise NoCertificate(f"Cantor parts of opposite sign overlap on ({a}, {b})")
                    c_sign = s
            if self.ac is None:
                sub = [(a, b, 0)]
            else:
                idx = int(np.searchsorted(self.ac.breakpoints, 0.5 * (a + b))) - 1
                sub = _sign_runs(self.ac.pieces[idx], a, b)
            if c_sign:
                if any(s == -c_sign for _, _, s in sub):
                    raise NoCertificate(f"density and Cantor part disagree in sign on ({a}, {b})")
                sub = [(a, b, c_sign)]
            # a new piece starts at every cut, since jumps and breakpoints may break monotonicity
            runs.extend(_merge_runs(sub))
        return tuple(runs)

    def _sup_bound(self) -> float:
        pts = np.array(self.breakpoints())
        vals = [np.abs(np.asarray(self.left(pts[1:]))), np.abs(np.asarray(self.right(pts[:-1])))]
        if self.monotone_pieces is not None:
            ends = np.array(sorted({p.lo for p in self.monotone_pieces} | {p.hi for p in self.monotone_pieces}))
            vals += [np.abs(np.asarray(self.left(ends[1:]))), np.abs(np.asarray(self.right(ends[:-1])))]
        else:
            grid = np.linspace(*self.domain, 4097)
            vals.append(np.abs(np.asarray(self.approx(grid))))
        return float(max(np.max(v) for v in vals if np.size(v)))

    def total_variation(self) -> float:
        tv, _, _ = _tv(self)
        return tv

    def l1_distance(self, other: "BVFunction", tol: float = 1e-10) -> float:
        from .measure1d import integrate_lebesgue

        pts = sorted(set(self.breakpoints()) | set(other.breakpoints()))
        return integrate_lebesgue(
            lambda x: np.abs(np.asarray(self.approx(x)) - np.asarray(other.approx(x))),
            *self.domain,
            tol=tol,
            breakpoints=pts,
            cantor_supports=self.cantor_supports + other.cantor_supports,
        )

    # -- irregular levels ---------------------------------------------------

    def irregular_values(self) -> list[float]:
        """Jump values, extremum values and constant-piece values (finite part of the exceptional set)."""
        if getattr(self, "_irregular", None) is not None:
            return list(self._irregular)
        vals = set()
        for j in self.jumps:
            vals |= {j.left, j.right}
        for p in self.monotone_pieces or ():
            vals |= {float(self.right(p.lo)), float(self.left(p.hi))}
        self._irregular = tuple(sorted(vals))
        return list(self._irregular)

    def is_irregular(self, t: float, tol: float = 1e-13) -> bool:
        if any(abs(t - v) <= tol for v in self.irregular_values()):
            return True
        for piece, comp, start in self._pure_cantor_pieces():
            s = (t - start) / comp.weight
            if is_dyadic(s):
                return True
        return False

    def _pure_cantor_pieces(self):
        if self.monotone_pieces is None:
            return []
        if getattr(self, "_pure_cantor", None) is not None:
            return list(self._pure_cantor)
        out = []
        for p in self.monotone_pieces:
            comps = [c for c in self.cantor if c.lo <= p.lo and p.hi <= c.hi]
            ac_zero = self.ac is None or all(
                abs(v) < 1e-300 for v in np.atleast_1d(self.ac.eval(np.linspace(p.lo, p.hi, 9)))
            )
            if len(comps) == 1 and ac_zero and (comps[0].lo, comps[0].hi) == (p.lo, p.hi):
                out.append((p, comps[0], float(self.right(p.lo))))
        self._pure_cantor = tuple(out)
        return out

    # -- serialization ------------------------------------------------------

    def to_spec(self) -> dict:
        spec: dict = {"base": self.base}
        if self.ac is not None:
            spec["ac"] = self.ac.to_spec()
        if self.jumps:
            spec["jumps"] = [{"x": x, "size": s} for x, s in zip(self._jump_x.tolist(), self._jump_s.tolist())]
        if self.cantor:
            spec["cantor"] = [{"weight": c.weight, "lo": c.lo, "hi": c.hi} for c in self.cantor]
        return spec

    def __repr__(self) -> str:
        return f"BVFunction(domain={self.domain}, {self.to_spec()!r})"


def _tv(u: BVFunction) -> tuple[float, float, float]:
    from .measure1d import measure_eval, measure_tv

    tv, pos, neg = measure_tv(bv_derivative(u))
    whole = BorelSet([Interval.open(*u.domain)])
    return measure_eval(tv, whole), measure_eval(pos, whole), measure_eval(neg, whole)


def bv_from_spec(spec: dict, domain: tuple[float, float], path: str = "u", var: str = "x") -> BVFunction:
    """Build a BV function from its scenario table; raises ValueError naming the path."""
    allowed = {"base", "ac", "jumps", "cantor", "monotone"}
    extra = set(spec) - allowed
    if extra:
        raise ValueError(f"{path}: unexpected keys {sorted(extra)}")
    base = spec.get("base", 0.0)
    if isinstance(base, bool) or not isinstance(base, (int, float)):
        raise ValueError(f"{path}.base: expected a number")
    ac = None
    if "ac" in spec:
        a = spec["ac"]
        if not isinstance(a, dict) or set(a) - {"breakpoints", "pieces"}:
            raise ValueError(f"{path}.ac: expected a table with breakpoints and pieces")
        bps = a.get("breakpoints", list(domain))
        pieces = a.get("pieces")
        if not isinstance(pieces, list):
            raise ValueError(f"{path}.ac.pieces: expected a list")
        nodes = [ex.from_spec(p, f"{path}.ac.pieces[{i}]") for i, p in enumerate(pieces)]
        ac = PiecewisePrimitive(bps, nodes)
    jumps = []
    for i, j in enumerate(spec.get("jumps", [])):
        if not isinstance(j, dict) or set(j) - {"x", "size"} or "x" not in j or "size" not in j:
            raise ValueError(f"{path}.jumps[{i}]: expected {{x, size}}")
        jumps.append((float(j["x"]), float(j["size"])))
    cantor = []
    for i, c in enumerate(spec.get("cantor", [])):
        if not isinstance(c, dict) or set(c) - {"weight", "lo", "hi"} or not {"weight", "lo", "hi"} <= set(c):
            raise ValueError(f"{path}.cantor[{i}]: expected {{weight, lo, hi}}")
        cantor.append(CantorComponent(float(c["weight"]), float(c["lo"]), float(c["hi"])))
    mono = spec.get("monotone", "auto")
    if mono not in ("auto", "none"):
        raise ValueError(f"{path}.monotone: expected 'auto' or 'none'")
    return BVFunction(domain, float(base), ac, jumps, cantor, certify=(mono == "auto"))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def bv_eval_sided(u: BVFunction, x: float) -> tuple[float, float]:
    return float(u.left(x)), float(u.right(x))


def bv_representatives(u: BVFunction, x: float, lam: float) -> Representatives:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    j = u.jump_at(x)
    if j is None:
        v = float(u.right(x))
        return Representatives(v, v, v, v, v, v, 1)
    ul = (1.0 - lam) * j.u_minus + lam * j.u_plus
    return Representatives(j.u_minus, j.u_plus, None, ul, j.u_i, j.u_e, j.nu)


def bv_derivative(u: BVFunction) -> Measure:
    return Measure(u.domain, ac=u.ac, atoms={j.x: j.size for j in u.jumps}, cantor=u.cantor)


def _locate(u: BVFunction, piece: MonotonePiece, t: float) -> float:
    """Boundary point of {u > t} inside a strictly monotone piece whose end values bracket t."""
    for p, comp, start in u._pure_cantor_pieces():
        if p == piece:
            s = (t - start) / comp.weight
            width = comp.hi - comp.lo
            if comp.weight > 0:
                return comp.lo + width * cantor_plateau_right_end(s)
            return comp.lo + width * (1.0 - cantor_plateau_right_end(1.0 - s))
    lo, hi = piece.lo, piece.hi
    inc = piece.direction > 0
    while hi - lo > LEVEL_TOL * max(1.0, abs(lo), abs(hi)):
        grid = np.linspace(lo, hi, 65)
        vals = np.asarray(u.right(grid[1:-1]))
        above = vals > t
        if inc:
            # last grid point still <= t bounds the boundary from the left
            k = int(np.argmax(above)) if above.any() else vals.size
            new_lo, new_hi = grid[k], grid[k + 1]
        else:
            k = int(np.argmax(~above)) if (~above).any() else vals.size
            new_lo, new_hi = grid[k], grid[k + 1]
        if (new_lo, new_hi) == (lo, hi):
            break
        lo, hi = new_lo, new_hi
    return 0.5 * (lo + hi)


def _bisect_many(u: BVFunction, piece: MonotonePiece, ts: np.ndarray) -> np.ndarray:
    """Vectorized bisection for the boundary of {u > t}, one t per entry, on a piece free of Cantor parts."""
    a = np.full(ts.shape, piece.lo)
    b = np.full(ts.shape, piece.hi)
    width = LEVEL_TOL * max(1.0, abs(piece.lo), abs(piece.hi))
    steps = max(1, int(math.ceil(math.log2(max(piece.hi - piece.lo, width) / width))))
    inc = piece.direction > 0
    for _ in range(steps):
        m = 0.5 * (a + b)
        above = np.asarray(u.right(m)) > ts
        move_b = above if inc else ~above
        b = np.where(move_b, m, b)
        a = np.where(move_b, a, m)
    return 0.5 * (a + b)


def bv_level_sets(u: BVFunction, ts) -> list[tuple[FinitePerimeterSet, bool]]:
    """{u > t} for several levels at once; see ``bv_level_set``."""
    if u.monotone_pieces is None:
        raise NoCertificate("level sets need a monotonicity certificate")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    parts: list[list[tuple[float, float]]] = [[] for _ in ts]
    for p in u.monotone_pieces:
        a_val, b_val = float(u.right(p.lo)), float(u.left(p.hi))
        if p.direction == 0 or a_val == b_val:
            for i in np.nonzero(a_val > ts)[0]:
                parts[i].append((p.lo, p.hi))
            continue
        inc = p.direction > 0
        lo_val, hi_val = (a_val, b_val) if inc else (b_val, a_val)
        for i in np.nonzero(lo_val > ts)[0]:
            parts[i].append((p.lo, p.hi))
        cut = np.nonzero((lo_val <= ts) & (hi_val > ts))[0]
        if not cut.size:
            continue
        if any(c.lo < p.hi and p.lo < c.hi for c in u.cantor):
            xs = np.array([_locate(u, p, float(ts[i])) for i in cut])
        else:
            xs = _bisect_many(u, p, ts[cut])
        for i, x in zip(cut, xs):
            x = min(max(float(x), p.lo), p.hi)
            seg = (x, p.hi) if inc else (p.lo, x)
            if seg[1] > seg[0]:
                parts[i].append(seg)
    out = []
    jx = u.jump_points
    for t, segs in zip(ts, parts):
        merged: list[list[float]] = []
        for a, b in sorted(segs):
            if merged and a <= merged[-1][1] + LEVEL_TOL:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        # snap ends that land within tolerance of a jump onto it
        for m in merged:
            for k in (0, 1):
                for x in jx:
                    if abs(m[k] - x) <= 10 * LEVEL_TOL * max(1.0, abs(x)):
                        m[k] = x
        E = FinitePerimeterSet([(a, b) for a, b in merged if b > a], u.domain)
        out.append((E, not u.is_irregular(float(t))))
    return out


def bv_level_set(u: BVFunction, t: float) -> tuple[FinitePerimeterSet, bool]:
    """{u > t} as a finite union of intervals, and whether t is a regular level."""
    return bv_level_sets(u, [t])[0]


def bv_chi(u: BVFunction, t: float) -> tuple[BVFunction, bool]:
    """Characteristic function of {u > t} as a BV function, with the regularity flag."""
    E, regular = bv_level_set(u, t)
    lo, hi = u.domain
    jumps = []
    base = 0.0
    for a, b in E.intervals:
        if a <= lo:
            base = 1.0
        else:
            jumps.append((a, 1.0))
        if b < hi:
            jumps.append((b, -1.0))
    return BVFunction(u.domain, base, None, jumps), regular
