"""Closed-form expression trees in one variable.

Every node evaluates on numpy arrays, differentiates symbolically, encloses
its range over an interval (interval arithmetic, padded outward for rounding)
and, where a closed form exists, produces an antiderivative.  The same nodes
serve as densities in ``x`` and as field coefficients in ``t``.

TOML grammar (see :func:`from_spec`)::

    2.5                                   constant
    "x"  or  "t"                          the variable
    {op="poly", coef=[c0, c1, ...], arg=<expr>}
    {op="sin"|"cos"|"exp", arg=<expr>}
    {op="clamp", arg=<expr>, lo=a, hi=b}
    {op="affine", scale=s, shift=b, arg=<expr>}    s*arg + b
    {op="add", terms=[...]}
    {op="mul", factors=[...]}

``arg`` defaults to the variable everywhere.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

_PAD_REL = 1e-12
_PAD_ABS = 1e-15


def _pad(lo: float, hi: float) -> tuple[float, float]:
    w = _PAD_REL * max(abs(lo), abs(hi)) + _PAD_ABS
    return lo - w, hi + w


def _imul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    prods = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    prods = [0.0 if math.isnan(p) else p for p in prods]
    return min(prods), max(prods)


class Expr:
    """Base node.  Subclasses implement ``eval``, ``deriv``, ``enclose``."""

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = self.eval(arr)
        if arr.ndim == 0:
            return float(out)
        return np.broadcast_to(out, arr.shape).astype(float, copy=False)

    def eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def deriv(self) -> "Expr":
        raise NotImplementedError

    def enclose(self, lo: float, hi: float) -> tuple[float, float]:
        raise NotImplementedError

    def antiderivative(self) -> "Expr | None":
        return None

    def affine_form(self) -> tuple[float, float] | None:
        """(scale, shift) when the node is affine in the variable."""
        return None

    def kinks(self) -> list[float]:
        """Variable values where the node is not smooth (only for affine clamp arguments)."""
        return []

    def to_spec(self):
        raise NotImplementedError

    def sup_abs(self, lo: float, hi: float) -> float:
        a, b = self.enclose(lo, hi)
        return max(abs(a), abs(b))

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.to_spec() == other.to_spec()

    def __hash__(self) -> int:
        return hash(repr(self.to_spec()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_spec()!r})"


class Const(Expr):
    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, x):
        return np.full(np.shape(x), self.value)

    def deriv(self):
        return Const(0.0)

    def enclose(self, lo, hi):
        return self.value, self.value

    def antiderivative(self):
        return Poly((0.0, self.value), Var())

    def affine_form(self):
        return 0.0, self.value

    def to_spec(self):
        return self.value


class Var(Expr):
    def __init__(self, name: str = "x"):
        self.name = name

    def eval(self, x):
        return np.asarray(x, dtype=float)

    def deriv(self):
        return Const(1.0)

    def enclose(self, lo, hi):
        return lo, hi

    def antiderivative(self):
        return Poly((0.0, 0.0, 0.5), Var(self.name))

    def affine_form(self):
        return 1.0, 0.0

    def to_spec(self):
        return self.name

    def __eq__(self, other):
        return isinstance(other, Var)

    def __hash__(self):
        return hash("Var")


class Poly(Expr):
    """sum_i coef[i] * arg**i"""

    def __init__(self, coef: Sequence[float], arg: Expr | None = None):
        coef = [float(c) for c in coef]
        while len(coef) > 1 and coef[-1] == 0.0:
            coef.pop()
        self.coef = tuple(coef) if coef else (0.0,)
        self.arg = arg if arg is not None else Var()

    def eval(self, x):
        return npoly.polyval(self.arg.eval(x), self.coef)

    def deriv(self):
        dc = npoly.polyder(self.coef) if len(self.coef) > 1 else [0.0]
        return mul(Poly(dc, self.arg), self.arg.deriv())

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        cand = [p, q]
        if len(self.coef) > 2:
            roots = npoly.polyroots(npoly.polyder(self.coef))
            cand += [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and p < r.real < q]
        vals = npoly.polyval(np.array(cand), self.coef)
        return _pad(float(np.min(vals)), float(np.max(vals)))

    def antiderivative(self):
        af = self.arg.affine_form()
        if af is None:
            return None
        s, _ = af
        if s == 0.0:
            return Poly((0.0, float(self.eval(np.array(0.0)))), Var())
        return Affine(1.0 / s, 0.0, Poly(npoly.polyint(self.coef), self.arg))

    def affine_form(self):
        if len(self.coef) > 2:
            return None
        af = self.arg.affine_form()
        if af is None:
            return None
        c0 = self.coef[0]
        c1 = self.coef[1] if len(self.coef) > 1 else 0.0
        return c1 * af[0], c1 * af[1] + c0

    def kinks(self):
        return self.arg.kinks()

    def to_spec(self):
        spec = {"op": "poly", "coef": list(self.coef)}
        if not isinstance(self.arg, Var):
            spec["arg"] = self.arg.to_spec()
        return spec


class _Unary(Expr):
    op = ""

    def __init__(self, arg: Expr | None = None):
        self.arg = arg if arg is not None else Var()

    def kinks(self):
        return self.arg.kinks()

    def to_spec(self):
        spec = {"op": self.op}
        if not isinstance(self.arg, Var):
            spec["arg"] = self.arg.to_spec()
        return spec


def _trig_range(p: float, q: float, phase: float) -> tuple[float, float]:
    # range of sin(y + phase) over y in [p, q]
    if q - p >= 2 * math.pi:
        return -1.0, 1.0
    vals = [math.sin(p + phase), math.sin(q + phase)]
    k0 = math.ceil((p + phase - math.pi / 2) / math.pi)
    k1 = math.floor((q + phase - math.pi / 2) / math.pi)
    for k in range(k0, k1 + 1):
        vals.append(1.0 if k % 2 == 0 else -1.0)
    return _pad(max(-1.0, min(vals)), min(1.0, max(vals)))


class Sin(_Unary):
    op = "sin"

    def eval(self, x):
        return np.sin(self.arg.eval(x))

    def deriv(self):
        return mul(Cos(self.arg), self.arg.deriv())

    def enclose(self, lo, hi):
        return _trig_range(*self.arg.enclose(lo, hi), 0.0)

    def antiderivative(self):
        af = self.arg.affine_form()
        if af is None or af[0] == 0.0:
            return None
        return Affine(-1.0 / af[0], 0.0, Cos(self.arg))


class Cos(_Unary):
    op = "cos"

    def eval(self, x):
        return np.cos(self.arg.eval(x))

    def deriv(self):
        return mul(Affine(-1.0, 0.0, Sin(self.arg)), self.arg.deriv())

    def enclose(self, lo, hi):
        return _trig_range(*self.arg.enclose(lo, hi), math.pi / 2)

    def antiderivative(self):
        af = self.arg.affine_form()
        if af is None or af[0] == 0.0:
            return None
        return Affine(1.0 / af[0], 0.0, Sin(self.arg))


class Exp(_Unary):
    op = "exp"

    def eval(self, x):
        return np.exp(self.arg.eval(x))

    def deriv(self):
        return mul(Exp(self.arg), self.arg.deriv())

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        return _pad(math.exp(p), math.exp(q))

    def antiderivative(self):
        af = self.arg.affine_form()
        if af is None or af[0] == 0.0:
            return None
        return Affine(1.0 / af[0], 0.0, Exp(self.arg))


def _affine_preimages(arg: Expr, values: Sequence[float]) -> list[float]:
    af = arg.affine_form()
    if af is None or af[0] == 0.0:
        return []
    s, b = af
    return sorted((v - b) / s for v in values)


class Clamp(Expr):
    def __init__(self, arg: Expr | None = None, lo: float = -math.inf, hi: float = math.inf):
        if not lo <= hi:
            raise ValueError("clamp requires lo <= hi")
        self.arg = arg if arg is not None else Var()
        self.lo = float(lo)
        self.hi = float(hi)

    def eval(self, x):
        return np.clip(self.arg.eval(x), self.lo, self.hi)

    def deriv(self):
        return mul(Window(self.arg, self.lo, self.hi), self.arg.deriv())

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        return min(max(p, self.lo), self.hi), min(max(q, self.lo), self.hi)

    def antiderivative(self):
        af = self.arg.affine_form()
        if af is None or af[0] == 0.0:
            return None
        return Affine(1.0 / af[0], 0.0, ClampIntegral(self.arg, self.lo, self.hi))

    def kinks(self):
        return sorted(set(self.arg.kinks()) | set(_affine_preimages(self.arg, [self.lo, self.hi])))

    def to_spec(self):
        spec = {"op": "clamp", "lo": self.lo, "hi": self.hi}
        if not isinstance(self.arg, Var):
            spec["arg"] = self.arg.to_spec()
        return spec


class Window(Expr):
    """Indicator of lo < arg < hi (derivative of a clamp)."""

    def __init__(self, arg: Expr, lo: float, hi: float):
        self.arg, self.lo, self.hi = arg, float(lo), float(hi)

    def eval(self, x):
        y = self.arg.eval(x)
        return ((y > self.lo) & (y < self.hi)).astype(float)

    def deriv(self):
        return Const(0.0)

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        if p > self.lo and q < self.hi:
            return 1.0, 1.0
        if q <= self.lo or p >= self.hi:
            return 0.0, 0.0
        return 0.0, 1.0

    def kinks(self):
        return sorted(set(self.arg.kinks()) | set(_affine_preimages(self.arg, [self.lo, self.hi])))

    def to_spec(self):
        return {"op": "window", "lo": self.lo, "hi": self.hi, "arg": self.arg.to_spec()}


def _clamp_integral(y: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # closed form of int_0^y clamp(s, lo, hi) ds
    def prim(z):
        # primitive of clamp, continuous, zero at z = clip(0)
        zc = np.clip(z, lo, hi)
        return 0.5 * zc * zc + np.where(z < lo, lo * (z - lo), 0.0) + np.where(z > hi, hi * (z - hi), 0.0)

    return prim(y) - prim(np.zeros_like(y))


class ClampIntegral(Expr):
    """int_0^arg clamp(s, lo, hi) ds"""

    def __init__(self, arg: Expr, lo: float, hi: float):
        self.arg, self.lo, self.hi = arg, float(lo), float(hi)

    def eval(self, x):
        return _clamp_integral(np.asarray(self.arg.eval(x), dtype=float), self.lo, self.hi)

    def deriv(self):
        return mul(Clamp(self.arg, self.lo, self.hi), self.arg.deriv())

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        cand = [p, q]
        root = min(max(0.0, self.lo), self.hi)
        if self.lo <= 0.0 <= self.hi and p < root < q:
            cand.append(root)
        vals = _clamp_integral(np.array(cand), self.lo, self.hi)
        return _pad(float(vals.min()), float(vals.max()))

    def kinks(self):
        return self.arg.kinks()

    def to_spec(self):
        return {"op": "clamp_integral", "lo": self.lo, "hi": self.hi, "arg": self.arg.to_spec()}


class Affine(Expr):
    """scale * arg + shift"""

    def __init__(self, scale: float, shift: float, arg: Expr | None = None):
        self.scale = float(scale)
        self.shift = float(shift)
        self.arg = arg if arg is not None else Var()

    def eval(self, x):
        return self.scale * self.arg.eval(x) + self.shift

    def deriv(self):
        d = self.arg.deriv()
        if isinstance(d, Const):
            return Const(self.scale * d.value)
        return Affine(self.scale, 0.0, d)

    def enclose(self, lo, hi):
        p, q = self.arg.enclose(lo, hi)
        a, b = self.scale * p + self.shift, self.scale * q + self.shift
        return _pad(min(a, b), max(a, b))

    def antiderivative(self):
        inner = self.arg.antiderivative()
        if inner is None:
            return None
        return add([Affine(self.scale, 0.0, inner), Poly((0.0, self.shift), Var())])

    def affine_form(self):
        af = self.arg.affine_form()
        if af is None:
            return None
        return self.scale * af[0], self.scale * af[1] + self.shift

    def kinks(self):
        return self.arg.kinks()

    def to_spec(self):
        spec = {"op": "affine", "scale": self.scale, "shift": self.shift}
        if not isinstance(self.arg, Var):
            spec["arg"] = self.arg.to_spec()
        return spec


class Add(Expr):
    def __init__(self, terms: Sequence[Expr]):
        self.terms = tuple(terms)

    def eval(self, x):
        out = np.zeros(np.shape(x))
        for t in self.terms:
            out = out + t.eval(x)
        return out

    def deriv(self):
        return add([t.deriv() for t in self.terms])

    def enclose(self, lo, hi):
        a = b = 0.0
        for t in self.terms:
            p, q = t.enclose(lo, hi)
            a += p
            b += q
        return _pad(a, b)

    def antiderivative(self):
        parts = [t.antiderivative() for t in self.terms]
        if any(p is None for p in parts):
            return None
        return add(parts)

    def affine_form(self):
        forms = [t.affine_form() for t in self.terms]
        if any(f is None for f in forms):
            return None
        return sum(f[0] for f in forms), sum(f[1] for f in forms)

    def kinks(self):
        return sorted(set().union(*[set(t.kinks()) for t in self.terms])) if self.terms else []

    def to_spec(self):
        return {"op": "add", "terms": [t.to_spec() for t in self.terms]}


class Mul(Expr):
    def __init__(self, factors: Sequence[Expr]):
        self.factors = tuple(factors)

    def eval(self, x):
        out = np.ones(np.shape(x))
        for f in self.factors:
            out = out * f.eval(x)
        return out

    def deriv(self):
        terms = []
        for i, f in enumerate(self.factors):
            others = [g for j, g in enumerate(self.factors) if j != i]
            terms.append(mul(others + [f.deriv()]))
        return add(terms)

    def enclose(self, lo, hi):
        acc = (1.0, 1.0)
        for f in self.factors:
            acc = _imul(acc, f.enclose(lo, hi))
        return _pad(*acc)

    def antiderivative(self):
        consts = [f for f in self.factors if isinstance(f, Const)]
        rest = [f for f in self.factors if not isinstance(f, Const)]
        if len(rest) > 1:
            return None
        scale = math.prod(c.value for c in consts)
        if not rest:
            return Const(scale).antiderivative()
        inner = rest[0].antiderivative()
        return None if inner is None else Affine(scale, 0.0, inner)

    def affine_form(self):
        consts = [f for f in self.factors if isinstance(f, Const)]
        rest = [f for f in self.factors if not isinstance(f, Const)]
        scale = math.prod(c.value for c in consts)
        if not rest:
            return 0.0, scale
        if len(rest) > 1:
            return None
        af = rest[0].affine_form()
        return None if af is None else (scale * af[0], scale * af[1])

    def kinks(self):
        return sorted(set().union(*[set(f.kinks()) for f in self.factors])) if self.factors else []

    def to_spec(self):
        return {"op": "mul", "factors": [f.to_spec() for f in self.factors]}


class NumericPrimitive(Expr):
    """int_0^x integrand, by adaptive quadrature; used when no closed form exists."""

    def __init__(self, integrand: Expr, tol: float = 1e-13):
        self.integrand = integrand
        self.tol = tol

    def eval(self, x):
        from .quadrature import integrate  # local import: quadrature depends on numpy only

        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        kinks = self.integrand.kinks()
        for i, xi in enumerate(xs.ravel()):
            if xi == 0.0:
                out.flat[i] = 0.0
                continue
            lo, hi = min(0.0, xi), max(0.0, xi)
            val = integrate(self.integrand.eval, lo, hi, tol=self.tol, breakpoints=kinks)
            out.flat[i] = val if xi > 0 else -val
        return out.reshape(np.shape(x))

    def deriv(self):
        return self.integrand

    def enclose(self, lo, hi):
        m = self.integrand.sup_abs(min(lo, 0.0), max(hi, 0.0))
        base = float(self.eval(np.array(lo)))
        return _pad(base - m * (hi - lo), base + m * (hi - lo))

    def kinks(self):
        return self.integrand.kinks()

    def to_spec(self):
        return {"op": "primitive", "of": self.integrand.to_spec()}


def _items(args) -> list:
    if len(args) == 1 and isinstance(args[0], (list, tuple)):
        return list(args[0])
    return list(args)


def add(*terms) -> Expr:
    terms = _items(terms)
    flat: list[Expr] = []
    c = 0.0
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        elif isinstance(t, Const):
            c += t.value
        else:
            flat.append(t)
    if c != 0.0 or not flat:
        flat.append(Const(c))
    return flat[0] if len(flat) == 1 else Add(flat)


def mul(*factors) -> Expr:
    factors = _items(factors)
    flat: list[Expr] = []
    c = 1.0
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        elif isinstance(f, Const):
            c *= f.value
        else:
            flat.append(f)
    if c == 0.0:
        return Const(0.0)
    if not flat:
        return Const(c)
    if c != 1.0:
        if len(flat) == 1:
            return Affine(c, 0.0, flat[0])
        flat.insert(0, Const(c))
    return flat[0] if len(flat) == 1 else Mul(flat)


def primitive_from_zero(e: Expr) -> Expr:
    """An expression P with P' = e and P(0) = 0, closed form when available."""
    p = e.antiderivative()
    if p is None:
        return NumericPrimitive(e)
    p0 = float(p(0.0))
    return add([p, Const(-p0)]) if p0 != 0.0 else p


_UNARY = {"sin": Sin, "cos": Cos, "exp": Exp}


def from_spec(spec, path: str = "expr") -> Expr:
    """Build an expression from its TOML form; raises ValueError naming the path."""
    if isinstance(spec, bool):
        raise ValueError(f"{path}: booleans are not expressions")
    if isinstance(spec, (int, float)):
        if not math.isfinite(spec):
            raise ValueError(f"{path}: non-finite constant")
        return Const(float(spec))
    if isinstance(spec, str):
        if spec in ("x", "t"):
            return Var(spec)
        raise ValueError(f"{path}: unknown variable {spec!r} (use 'x' or 't')")
    if not isinstance(spec, dict):
        raise ValueError(f"{path}: expected a number, 'x'/'t', or an inline table")
    op = spec.get("op")
    allowed = {
        "poly": {"op", "coef", "arg"},
        "sin": {"op", "arg"},
        "cos": {"op", "arg"},
        "exp": {"op", "arg"},
        "clamp": {"op", "arg", "lo", "hi"},
        "affine": {"op", "arg", "scale", "shift"},
        "add": {"op", "terms"},
        "mul": {"op", "factors"},
    }
    if op not in allowed:
        raise ValueError(f"{path}: unknown op {op!r}")
    extra = set(spec) - allowed[op]
    if extra:
        raise ValueError(f"{path}: unexpected keys {sorted(extra)} for op {op!r}")
    arg = from_spec(spec["arg"], f"{path}.arg") if "arg" in spec else Var()

    def num(key, default=None):
        if key not in spec:
            if default is None:
                raise ValueError(f"{path}: op {op!r} needs {key!r}")
            return default
        v = spec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"{path}.{key}: expected a number")
        return float(v)

    if op == "poly":
        coef = spec.get("coef")
        if not isinstance(coef, list) or not coef or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in coef):
            raise ValueError(f"{path}.coef: expected a non-empty list of numbers")
        return Poly(coef, arg)
    if op in _UNARY:
        return _UNARY[op](arg)
    if op == "clamp":
        lo, hi = num("lo"), num("hi")
        if not lo <= hi:
            raise ValueError(f"{path}: clamp needs lo <= hi")
        return Clamp(arg, lo, hi)
    if op == "affine":
        return Affine(num("scale", 1.0), num("shift", 0.0), arg)
    key = "terms" if op == "add" else "factors"
    items = spec.get(key)
    if not isinstance(items, list) or not items:
        raise ValueError(f"{path}.{key}: expected a non-empty list")
    parts = [from_spec(item, f"{path}.{key}[{i}]") for i, item in enumerate(items)]
    return Add(parts) if op == "add" else Mul(parts)
