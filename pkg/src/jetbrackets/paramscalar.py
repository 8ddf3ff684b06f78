"""Exact rational functions in the symbolic parameters of a system.

A :class:`ParamScalar` is ``num/den`` with ``num`` and ``den`` sparse
polynomials over the rationals.  The representation is canonical: numerator
and denominator are coprime and the denominator is monic with respect to a
fixed monomial order, so two values are equal iff their representations are
identical.  Cancellation uses sympy's sparse polynomial rings; everything
else is plain dict arithmetic on :class:`fractions.Fraction` coefficients.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Tuple, Union

from sympy import QQ
from sympy.polys.rings import ring

# monomial: tuple of (param name, positive int exponent), sorted by name
Mono = Tuple[Tuple[str, int], ...]
Poly = Dict[Mono, Fraction]

Number = Union[int, Fraction]

_ONE_MONO: Mono = ()


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for name, e in b:
        d[name] = d.get(name, 0) + e
    return tuple(sorted(d.items()))


def _mono_key(m: Mono):
    return (sum(e for _, e in m), m)


def _poly_add(a: Poly, b: Poly, sign: int = 1) -> Poly:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + sign * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _poly_mul(a: Poly, b: Poly) -> Poly:
    if len(a) == 1 and _ONE_MONO in a:
        c = a[_ONE_MONO]
        return {m: c * v for m, v in b.items()}
    if len(b) == 1 and _ONE_MONO in b:
        c = b[_ONE_MONO]
        return {m: c * v for m, v in a.items()}
    out: Poly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _mono_mul(ma, mb)
            v = out.get(m, 0) + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def _poly_names(*polys: Poly) -> Tuple[str, ...]:
    names = set()
    for p in polys:
        for m in p:
            names.update(n for n, _ in m)
    return tuple(sorted(names))


def _is_const(p: Poly) -> bool:
    return not p or (len(p) == 1 and _ONE_MONO in p)


@lru_cache(maxsize=None)
def _ring(names: Tuple[str, ...]):
    return ring(",".join(names), QQ)[0]


def _to_ring(p: Poly, names: Tuple[str, ...]):
    R = _ring(names)
    idx = {n: i for i, n in enumerate(names)}
    terms = {}
    for m, c in p.items():
        exps = [0] * len(names)
        for n, e in m:
            exps[idx[n]] = e
        terms[tuple(exps)] = QQ(c.numerator, c.denominator)
    return R(terms)


def _from_ring(el, names: Tuple[str, ...]) -> Poly:
    out: Poly = {}
    for exps, c in el.terms():
        m = tuple((names[i], e) for i, e in enumerate(exps) if e)
        out[m] = Fraction(int(c.numerator), int(c.denominator))
    return out


def _leading(p: Poly) -> Fraction:
    return p[max(p, key=_mono_key)]


def _freeze(p: Poly) -> Tuple:
    return tuple(sorted(p.items()))


@lru_cache(maxsize=65536)
def _cancel(num_items: Tuple, den_items: Tuple) -> Tuple[Tuple, Tuple]:
    num, den = dict(num_items), dict(den_items)
    names = _poly_names(num, den)
    n, d = _to_ring(num, names).cancel(_to_ring(den, names))
    num, den = _from_ring(n, names), _from_ring(d, names)
    lc = _leading(den)
    if lc != 1:
        num = {m: c / lc for m, c in num.items()}
        den = {m: c / lc for m, c in den.items()}
    return _freeze(num), _freeze(den)


class ParamScalar:
    """Element of Q(parameters) in canonical reduced form."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Poly, den: Poly | None = None, _canonical: bool = False):
        if den is None:
            den = {_ONE_MONO: Fraction(1)}
        if not den:
            raise ZeroDivisionError("ParamScalar with zero denominator")
        if not num:
            self.num: Poly = {}
            self.den: Poly = {_ONE_MONO: Fraction(1)}
        elif _canonical:
            self.num, self.den = num, den
        elif _is_const(den):
            c = den[_ONE_MONO]
            self.num = num if c == 1 else {m: v / c for m, v in num.items()}
            self.den = {_ONE_MONO: Fraction(1)}
        else:
            n, d = _cancel(_freeze(num), _freeze(den))
            self.num, self.den = dict(n), dict(d)
        self._hash = None

    # -- constructors ---------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "ParamScalar":
        c = Fraction(c)
        return cls({_ONE_MONO: c} if c else {}, _canonical=True)

    @classmethod
    def param(cls, name: str) -> "ParamScalar":
        return cls({((name, 1),): Fraction(1)}, _canonical=True)

    @classmethod
    def coerce(cls, x) -> "ParamScalar":
        if isinstance(x, ParamScalar):
            return x
        if isinstance(x, (int, Fraction)):
            return cls.const(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to ParamScalar")

    # -- predicates -----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_const(self) -> bool:
        return _is_const(self.num) and _is_const(self.den)

    def is_polynomial(self) -> bool:
        return _is_const(self.den)

    def const_value(self) -> Fraction:
        if not self.is_const():
            raise ValueError(f"{self} is not a constant")
        return self.num.get(_ONE_MONO, Fraction(0))

    def params(self) -> frozenset:
        return frozenset(_poly_names(self.num, self.den))

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den == other.den:
            num = _poly_add(self.num, other.num)
            if _is_const(self.den):
                return ParamScalar(num, _canonical=True) if num else _ZERO
            return ParamScalar(num, self.den)
        num = _poly_add(_poly_mul(self.num, other.den), _poly_mul(other.num, self.den))
        return ParamScalar(num, _poly_mul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return ParamScalar({m: -c for m, c in self.num.items()}, self.den, _canonical=True)

    def __sub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        if not self.num or not other.num:
            return _ZERO
        if _is_const(self.den) and _is_const(other.den):
            return ParamScalar(_poly_mul(self.num, other.num), _canonical=True)
        return ParamScalar(_poly_mul(self.num, other.num), _poly_mul(self.den, other.den))

    __rmul__ = __mul__

    def inverse(self) -> "ParamScalar":
        if not self.num:
            raise ZeroDivisionError("inverse of zero ParamScalar")
        return ParamScalar(self.den, self.num)

    def __truediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return ParamScalar.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("ParamScalar powers must be integers")
        if n < 0:
            return self.inverse() ** (-n)
        out = ONE
        for _ in range(n):
            out = out * self
        return out

    # -- comparison/hash ------------------------------------------------
    def __eq__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((_freeze(self.num), _freeze(self.den)))
        return self._hash

    def sort_key(self):
        return (_freeze(self.den), _freeze(self.num))

    # -- evaluation -----------------------------------------------------
    def evaluate(self, values: Mapping[str, object]):
        """Numeric value; exact when all supplied values are rational."""
        n, d = _poly_eval(self.num, values), _poly_eval(self.den, values)
        if d == 0:
            raise ZeroDivisionError(f"{self} has a pole at {dict(values)}")
        return n / d

    def subs(self, values: Mapping[str, Number]) -> "ParamScalar":
        """Substitute exact rational values for some parameters."""
        if not values or not (self.params() & set(values)):
            return self
        num = _poly_subs(self.num, values)
        den = _poly_subs(self.den, values)
        if not den:
            raise ZeroDivisionError(f"{self} has a pole at {dict(values)}")
        return ParamScalar(num, den)

    def factors(self) -> list:
        """Irreducible non-constant factors of numerator and denominator."""
        out = []
        for p in (self.num, self.den):
            if _is_const(p):
                continue
            names = _poly_names(p)
            _, facs = _to_ring(p, names).factor_list()
            for f, _mult in facs:
                out.append(ParamScalar(_from_ring(f, names)))
        return out

    # -- rendering ------------------------------------------------------
    def __repr__(self):
        return f"ParamScalar({render_scalar(self)!r})"

    def __str__(self):
        return render_scalar(self)


def _coerce_or_none(x):
    if isinstance(x, ParamScalar):
        return x
    if isinstance(x, (int, Fraction)):
        return ParamScalar.const(x)
    return None


def _poly_eval(p: Poly, values: Mapping[str, object]):
    total = Fraction(0)
    for m, c in p.items():
        t = c
        for n, e in m:
            try:
                t = t * values[n] ** e
            except KeyError:
                raise KeyError(f"no value for parameter {n!r}") from None
        total = total + t
    return total


def _poly_subs(p: Poly, values: Mapping[str, Number]) -> Poly:
    out: Poly = {}
    for m, c in p.items():
        keep = []
        for n, e in m:
            if n in values:
                c = c * Fraction(values[n]) ** e
            else:
                keep.append((n, e))
        if not c:
            continue
        k = tuple(keep)
        v = out.get(k, 0) + c
        if v:
            out[k] = v
        else:
            out.pop(k, None)
    return out


def _render_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _render_mono(m: Mono) -> str:
    return "*".join(n if e == 1 else f"{n}^{e}" for n, e in m)


def render_poly(p: Poly) -> str:
    """Deterministic infix rendering, highest-degree terms first."""
    if not p:
        return "0"
    parts = []
    for i, m in enumerate(sorted(p, key=_mono_key, reverse=True)):
        c = p[m]
        neg = c < 0
        a = -c if neg else c
        if not m:
            body = _render_frac(a)
        elif a == 1:
            body = _render_mono(m)
        else:
            body = f"{_render_frac(a)}*{_render_mono(m)}"
        if i == 0:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f" - {body}" if neg else f" + {body}")
    return "".join(parts)


def _primitive(p: Poly) -> Tuple[Fraction, Poly]:
    """``p = c * q`` with ``q`` integral, coprime and positive leading coefficient."""
    lcm = 1
    for v in p.values():
        lcm = lcm * v.denominator // gcd(lcm, v.denominator)
    g = 0
    for v in p.values():
        g = gcd(g, int(v * lcm))
    c = Fraction(g, lcm)
    if _leading(p) < 0:
        c = -c
    return c, {m: v / c for m, v in p.items()}


def render_scalar(s: ParamScalar) -> str:
    """Polynomials render expanded; quotients render with integral, coprime parts."""
    if _is_const(s.den):
        return render_poly(s.num)
    cn, n = _primitive(s.num)
    cd, d = _primitive(s.den)
    k = cn / cd
    n = {m: v * k.numerator for m, v in n.items()}
    d = {m: v * k.denominator for m, v in d.items()}
    num, den = render_poly(n), render_poly(d)
    if len(n) > 1:
        num = f"({num})"
    (m, c), = d.items() if len(d) == 1 else ((None, None),)
    if not (m is not None and (not m or (c == 1 and len(m) == 1))):
        den = f"({den})"
    return f"{num}/{den}"


ZERO = _ZERO = ParamScalar({}, _canonical=True)
ONE = ParamScalar.const(1)


def as_scalars(values: Iterable) -> list:
    return [ParamScalar.coerce(v) for v in values]
