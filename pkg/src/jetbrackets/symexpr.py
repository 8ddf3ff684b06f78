"""Canonical differential polynomials over jet space.

An :class:`Expr` is a finite sum ``sum c_k * m_k`` where each ``m_k`` is a
product of powers of bases and each ``c_k`` is a :class:`ParamScalar`.  A base
is either an independent variable ``("x",)`` or a jet coordinate
``("u", ("t", "x"))`` whose derivative indices are kept sorted, so mixed
partials coincide.  Exponents are affine in the parameters with rational
coefficients, which covers factors such as ``u^(p-1)`` and ``rho^q``.

Parameters never appear as bases.  A parameter raised to an integer power is
folded into the coefficient, so ``alpha*u^p*v`` has coefficient ``alpha`` and
monomial ``u^p*v``.  The dict representation is canonical (like terms merged,
zero coefficients dropped, zero exponents removed), which makes structural
equality decidable and equal to mathematical equality.

Term order for rendering is lexicographic on the sorted ``(base, exponent)``
tuples; it never depends on locale or insertion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Mapping, NamedTuple, Optional, Tuple, Union

from .errors import (
    MissingAssignment,
    NonIntegerExponentNeedsPositiveBase,
    NonIntegerPowerOfSum,
    NonMonomialDivisor,
    UndeclaredSymbol,
    ZeroToNegativePower,
)
from .paramscalar import ONE, ZERO, ParamScalar, render_scalar

Base = Tuple  # ("x",) or ("u", ("t", "x"))


# ---------------------------------------------------------------- exponents
class Exponent(NamedTuple):
    """``const + sum(c * param)``; ``lin`` is sorted with no zero entries."""

    const: Fraction
    lin: Tuple[Tuple[str, Fraction], ...] = ()

    @staticmethod
    def of(c) -> "Exponent":
        return Exponent(Fraction(c), ())

    def __add__(self, other: "Exponent") -> "Exponent":
        d = dict(self.lin)
        for n, c in other.lin:
            v = d.get(n, 0) + c
            if v:
                d[n] = v
            else:
                d.pop(n, None)
        return Exponent(self.const + other.const, tuple(sorted(d.items())))

    def __neg__(self) -> "Exponent":
        return Exponent(-self.const, tuple((n, -c) for n, c in self.lin))

    def __sub__(self, other: "Exponent") -> "Exponent":
        return self + (-other)

    def scale(self, k: Fraction) -> "Exponent":
        if not k:
            return ZERO_EXP
        return Exponent(self.const * k, tuple((n, c * k) for n, c in self.lin))

    def is_zero(self) -> bool:
        return not self.const and not self.lin

    def is_integer(self) -> bool:
        return not self.lin and self.const.denominator == 1

    def is_nonneg_integer(self) -> bool:
        return self.is_integer() and self.const >= 0

    def as_scalar(self) -> ParamScalar:
        s = ParamScalar.const(self.const)
        for n, c in self.lin:
            s = s + ParamScalar.param(n) * c
        return s

    def evaluate(self, params: Mapping[str, object]):
        v = self.const
        for n, c in self.lin:
            if n not in params:
                raise MissingAssignment(f"no value for parameter {n!r} in exponent")
            v = v + c * params[n]
        return v

    @staticmethod
    def from_scalar(s: ParamScalar) -> "Exponent":
        """Inverse of :meth:`as_scalar`; the scalar must be affine with rational coefficients."""
        if not s.is_polynomial():
            raise NonIntegerPowerOfSum(f"exponent {s} is not affine in the parameters")
        const = Fraction(0)
        lin = {}
        for m, c in s.num.items():
            if not m:
                const = c
            elif len(m) == 1 and m[0][1] == 1:
                lin[m[0][0]] = c
            else:
                raise NonIntegerPowerOfSum(f"exponent {s} is not affine in the parameters")
        return Exponent(const, tuple(sorted(lin.items())))

    def render(self) -> str:
        parts = []
        for n, c in self.lin:
            parts.append((c, n))
        if self.const or not parts:
            parts.append((self.const, None))
        out = []
        for i, (c, n) in enumerate(parts):
            neg = c < 0
            a = -c if neg else c
            a_s = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
            body = a_s if n is None else (n if a == 1 else f"{a_s}*{n}")
            if i == 0:
                out.append(f"-{body}" if neg else body)
            else:
                out.append(f" - {body}" if neg else f" + {body}")
        return "".join(out)


ZERO_EXP = Exponent(Fraction(0), ())
ONE_EXP = Exponent(Fraction(1), ())

Key = Tuple[Tuple[Base, Exponent], ...]


def jet(dep: str, *idx: str) -> Base:
    return (dep, tuple(sorted(idx)))


def indep(name: str) -> Base:
    return (name,)


def is_jet(base: Base) -> bool:
    return len(base) == 2


def base_name(base: Base) -> str:
    """Canonical printable name: ``x``, ``u``, ``u[t,x]``."""
    if len(base) == 1 or not base[1]:
        return base[0]
    return f"{base[0]}[{','.join(base[1])}]"


def _key_mul(a: Key, b: Key) -> Key:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for base, e in b:
        if base in d:
            s = d[base] + e
            if s.is_zero():
                del d[base]
            else:
                d[base] = s
        else:
            d[base] = e
    return tuple(sorted(d.items()))


# ---------------------------------------------------------------- Expr
class Expr:
    """Immutable canonical sum of monomials with ParamScalar coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Dict[Key, ParamScalar]] = None):
        self._terms: Dict[Key, ParamScalar] = terms or {}
        self._hash = None

    # construction
    @staticmethod
    def const(c) -> "Expr":
        s = ParamScalar.coerce(c)
        return Expr({(): s}) if not s.is_zero() else Expr()

    @staticmethod
    def scalar(s: ParamScalar) -> "Expr":
        return Expr({(): s}) if not s.is_zero() else Expr()

    @staticmethod
    def base(b: Base, exp: Exponent = ONE_EXP) -> "Expr":
        if exp.is_zero():
            return ONE_EXPR
        return Expr({((b, exp),): ONE})

    @staticmethod
    def param(name: str) -> "Expr":
        return Expr({(): ParamScalar.param(name)})

    @staticmethod
    def from_terms(items: Iterable[Tuple[Key, ParamScalar]]) -> "Expr":
        out: Dict[Key, ParamScalar] = {}
        for k, c in items:
            _accumulate(out, k, c)
        return Expr(out)

    # inspection
    def items(self):
        return self._terms.items()

    def terms(self) -> list:
        """Terms in canonical order as ``(key, coefficient)`` pairs."""
        return sorted(self._terms.items(), key=_term_order)

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator:
        return iter(self.terms())

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not k for k in self._terms)

    def constant_value(self) -> ParamScalar:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant on jet space")
        return self._terms.get((), ZERO)

    def bases(self) -> frozenset:
        return frozenset(b for k in self._terms for b, _ in k)

    def jets(self) -> frozenset:
        return frozenset(b for b in self.bases() if is_jet(b))

    def params(self) -> frozenset:
        out = set()
        for k, c in self._terms.items():
            out |= c.params()
            for _, e in k:
                out.update(n for n, _ in e.lin)
        return frozenset(out)

    def single_term(self) -> Tuple[Key, ParamScalar]:
        if len(self._terms) != 1:
            raise NonMonomialDivisor(f"{self} is not a single monomial")
        return next(iter(self._terms.items()))

    # ring operations
    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for k, c in other._terms.items():
            _accumulate(out, k, c)
        return Expr(out)

    __radd__ = __add__

    def __neg__(self):
        return Expr({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, ParamScalar)):
            s = ParamScalar.coerce(other)
            if s.is_zero():
                return ZERO_EXPR
            return Expr({k: c * s for k, c in self._terms.items()})
        other = _coerce(other)
        if other is None:
            return NotImplemented
        if not self._terms or not other._terms:
            return ZERO_EXPR
        out: Dict[Key, ParamScalar] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                _accumulate(out, _key_mul(ka, kb), ca * cb)
        return Expr(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self * other.monomial_inverse()

    def monomial_inverse(self) -> "Expr":
        if len(self._terms) != 1:
            raise NonMonomialDivisor(f"cannot divide by non-monomial {self}")
        k, c = next(iter(self._terms.items()))
        return Expr({tuple((b, -e) for b, e in k): c.inverse()})

    def __pow__(self, exp):
        if isinstance(exp, int):
            exp = Exponent.of(exp)
        if not isinstance(exp, Exponent):
            return NotImplemented
        if exp.is_zero():
            return ONE_EXPR
        if exp.is_nonneg_integer():
            n = int(exp.const)
            result, base = ONE_EXPR, self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base * base
            return result
        if not self._terms:
            if exp.is_integer():
                raise ZeroDivisionError("zero raised to a negative power")
            raise NonIntegerPowerOfSum("zero raised to a symbolic power")
        if len(self._terms) != 1:
            raise NonIntegerPowerOfSum(f"({self})^({exp.render()}) needs a nonnegative integer exponent")
        k, c = next(iter(self._terms.items()))
        if exp.is_integer():
            coeff = c ** int(exp.const)
        elif c == ONE:
            coeff = ONE
        else:
            raise NonIntegerPowerOfSum(
                f"coefficient {c} cannot be raised to the power {exp.render()}"
            )
        new_key = []
        for b, e in k:
            if exp.is_integer():
                ne = e.scale(exp.const)
            elif e.is_integer():
                ne = exp.scale(e.const)
            else:
                raise NonIntegerPowerOfSum(f"exponent product ({e.render()})*({exp.render()}) is not affine")
            if not ne.is_zero():
                new_key.append((b, ne))
        return Expr({tuple(new_key): coeff})

    # equality
    def __eq__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def sort_key(self):
        return tuple((k, c.sort_key()) for k, c in self.terms())

    def map_coeffs(self, f) -> "Expr":
        out: Dict[Key, ParamScalar] = {}
        for k, c in self._terms.items():
            _accumulate(out, k, f(c))
        return Expr(out)

    def __repr__(self):
        return f"Expr({render_expr(self)!r})"

    def __str__(self):
        return render_expr(self)


def _term_order(item):
    return item[0]


def _accumulate(out: Dict[Key, ParamScalar], k: Key, c: ParamScalar) -> None:
    if c.is_zero():
        return
    if k in out:
        v = out[k] + c
        if v.is_zero():
            del out[k]
        else:
            out[k] = v
    else:
        out[k] = c


def _coerce(x) -> Optional[Expr]:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction, ParamScalar)):
        return Expr.const(x)
    return None


ZERO_EXPR = Expr()
ONE_EXPR = Expr({(): ONE})


# ---------------------------------------------------------------- symbols
@dataclass(frozen=True)
class Symbols:
    """Declared names of a system, used to resolve identifiers."""

    independents: Tuple[str, ...] = ()
    dependents: Tuple[str, ...] = ()
    parameters: Tuple[str, ...] = ()

    def kind(self, name: str) -> str:
        if name in self.independents:
            return "independent"
        if name in self.dependents:
            return "dependent"
        if name in self.parameters:
            return "parameter"
        raise UndeclaredSymbol(f"undeclared symbol {name!r}")

    def extended(self, parameters: Iterable[str] = ()) -> "Symbols":
        extra = tuple(p for p in parameters if p not in self.parameters)
        return Symbols(self.independents, self.dependents, self.parameters + extra)


# ---------------------------------------------------------------- raw trees
# Raw expression trees are nested tuples:
#   ("num", Fraction) | ("name", str) | ("jet", dep, (idx, ...))
#   ("add", a, b) | ("sub", a, b) | ("neg", a) | ("mul", a, b) | ("div", a, b)
#   ("pow", base, exponent_tree)
RawTree = tuple


def normalize(raw: Union[RawTree, Expr], symbols: Symbols) -> Expr:
    """Expand a raw tree into canonical form."""
    if isinstance(raw, Expr):
        return raw
    tag = raw[0]
    if tag == "num":
        return Expr.const(Fraction(raw[1]))
    if tag == "name":
        kind = symbols.kind(raw[1])
        if kind == "parameter":
            return Expr.param(raw[1])
        if kind == "independent":
            return Expr.base(indep(raw[1]))
        return Expr.base(jet(raw[1]))
    if tag == "jet":
        dep, idx = raw[1], raw[2]
        if symbols.kind(dep) != "dependent":
            raise UndeclaredSymbol(f"{dep!r} is not a dependent variable")
        for i in idx:
            if symbols.kind(i) != "independent":
                raise UndeclaredSymbol(f"derivative index {i!r} is not an independent variable")
        return Expr.base(jet(dep, *idx))
    if tag == "add":
        return normalize(raw[1], symbols) + normalize(raw[2], symbols)
    if tag == "sub":
        return normalize(raw[1], symbols) - normalize(raw[2], symbols)
    if tag == "neg":
        return -normalize(raw[1], symbols)
    if tag == "mul":
        return normalize(raw[1], symbols) * normalize(raw[2], symbols)
    if tag == "div":
        num = normalize(raw[1], symbols)
        den = normalize(raw[2], symbols)
        if len(den) != 1:
            raise NonMonomialDivisor(f"cannot divide by {den}")
        return num * den.monomial_inverse()
    if tag == "pow":
        base = normalize(raw[1], symbols)
        exp_expr = normalize(raw[2], symbols)
        if not exp_expr.is_constant():
            raise NonIntegerPowerOfSum("exponents may only involve parameters and numbers")
        exp = Exponent.from_scalar(exp_expr.constant_value())
        # parameters live in the coefficient field, so only integer powers of them are exact
        return base ** exp
    raise ValueError(f"unknown raw node {tag!r}")


def eval_raw(raw: RawTree, point: Mapping, symbols: Symbols):
    """Evaluate a raw tree directly, without normalizing.  Used as an oracle."""
    tag = raw[0]
    if tag == "num":
        return Fraction(raw[1])
    if tag == "name":
        return _lookup(point, raw[1])
    if tag == "jet":
        return _lookup(point, base_name(jet(raw[1], *raw[2])))
    if tag == "add":
        return eval_raw(raw[1], point, symbols) + eval_raw(raw[2], point, symbols)
    if tag == "sub":
        return eval_raw(raw[1], point, symbols) - eval_raw(raw[2], point, symbols)
    if tag == "neg":
        return -eval_raw(raw[1], point, symbols)
    if tag == "mul":
        return eval_raw(raw[1], point, symbols) * eval_raw(raw[2], point, symbols)
    if tag == "div":
        d = eval_raw(raw[2], point, symbols)
        if d == 0:
            raise ZeroToNegativePower("division by zero")
        return eval_raw(raw[1], point, symbols) / d
    if tag == "pow":
        return _power(eval_raw(raw[1], point, symbols), eval_raw(raw[2], point, symbols))
    raise ValueError(f"unknown raw node {tag!r}")


# ---------------------------------------------------------------- evaluation
def _point_key(k) -> str:
    if isinstance(k, tuple):
        return base_name(k)
    if "[" in k:
        name, rest = k.split("[", 1)
        idx = [s.strip() for s in rest.rstrip("]").split(",") if s.strip()]
        return base_name(jet(name.strip(), *idx))
    return k


def numeric_point(assignments: Mapping) -> Dict[str, object]:
    """Canonicalize a NumericPoint: keys become names like ``u[t,x]``."""
    return {_point_key(k): v for k, v in assignments.items()}


def _lookup(point: Mapping, name: str):
    try:
        return point[name]
    except KeyError:
        raise MissingAssignment(f"no value assigned to {name!r}") from None


def _power(b, e):
    if isinstance(e, Fraction) and e.denominator == 1:
        n = int(e)
        if n < 0 and b == 0:
            raise ZeroToNegativePower("zero raised to a negative power")
        if isinstance(b, (int, Fraction)):
            return Fraction(b) ** n
        return b ** n
    if isinstance(e, int):
        return _power(b, Fraction(e))
    if b <= 0:
        raise NonIntegerExponentNeedsPositiveBase(f"base {b} with non-integer exponent {e}")
    return math.exp(float(e) * math.log(float(b)))


def eval_numeric(e: Expr, point: Mapping):
    """Evaluate at a NumericPoint; exact when assignments are rational and exponents integral."""
    pt = numeric_point(point)
    total = Fraction(0)
    for key, c in e.terms():
        try:
            val = c.evaluate(pt)
        except KeyError as exc:
            raise MissingAssignment(str(exc)) from None
        except ZeroDivisionError as exc:
            raise ZeroToNegativePower(str(exc)) from None
        for b, ex in key:
            val = val * _power(_lookup(pt, base_name(b)), ex.evaluate(pt))
        total = total + val
    return total


# ---------------------------------------------------------------- calculus primitives
def partial(e: Expr, b: Base) -> Expr:
    """Partial derivative with respect to a single base (jet coordinate or independent)."""
    out: Dict[Key, ParamScalar] = {}
    for k, c in e.items():
        for i, (bb, ex) in enumerate(k):
            if bb != b:
                continue
            ne = ex - ONE_EXP
            nk = k[:i] + (((bb, ne),) if not ne.is_zero() else ()) + k[i + 1:]
            _accumulate(out, nk, c * ex.as_scalar())
            break
    return Expr(out)


def substitute(e: Expr, target: Base, replacement: Expr) -> Expr:
    """Replace every occurrence of ``target`` by ``replacement`` and re-normalize."""
    out = ZERO_EXPR
    parts: Dict[Key, ParamScalar] = {}
    for k, c in e.items():
        hit = None
        for i, (b, ex) in enumerate(k):
            if b == target:
                hit = i
                break
        if hit is None:
            _accumulate(parts, k, c)
            continue
        ex = k[hit][1]
        rest = Expr({k[:hit] + k[hit + 1:]: c})
        out = out + rest * (replacement ** ex)
    return Expr(parts) + out


def subs_params(e: Expr, values: Mapping) -> Expr:
    """Specialize parameters to rational values, including inside exponents."""
    if not values:
        return e
    vals = {k: Fraction(v) for k, v in values.items()}
    out = ZERO_EXPR
    for k, c in e.items():
        c2 = c.subs(vals)
        if c2.is_zero():
            continue
        nk = []
        for b, ex in k:
            if any(n in vals for n, _ in ex.lin):
                const = ex.const + sum(cc * vals[n] for n, cc in ex.lin if n in vals)
                lin = tuple((n, cc) for n, cc in ex.lin if n not in vals)
                ex = Exponent(const, lin)
            if not ex.is_zero():
                nk.append((b, ex))
        out = out + Expr({tuple(nk): c2})
    return out


# ---------------------------------------------------------------- rendering
def _render_factor(b: Base, ex: Exponent) -> str:
    name = base_name(b)
    if ex == ONE_EXP:
        return name
    if ex.is_integer() and ex.const > 0:
        return f"{name}^{int(ex.const)}"
    if not ex.const and len(ex.lin) == 1 and ex.lin[0][1] == 1:
        return f"{name}^{ex.lin[0][0]}"
    return f"{name}^({ex.render()})"


def _render_coeff(c: ParamScalar) -> Tuple[bool, str, bool]:
    """Return (negative, magnitude text, is_unit)."""
    if c.is_const():
        v = c.const_value()
        neg = v < 0
        a = -v if neg else v
        txt = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
        return neg, txt, a == 1
    if len(c.num) == 1 and c.is_polynomial():
        (m, v), = c.num.items()
        if v < 0:
            return True, render_scalar(-c), False
        return False, render_scalar(c), False
    return False, f"({render_scalar(c)})", False


def render_expr(e: Expr) -> str:
    if e.is_zero():
        return "0"
    out = []
    for i, (k, c) in enumerate(e.terms()):
        neg, mag, unit = _render_coeff(c)
        factors = "*".join(_render_factor(b, ex) for b, ex in k)
        if not factors:
            body = mag
        elif unit:
            body = factors
        else:
            body = f"{mag}*{factors}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)
