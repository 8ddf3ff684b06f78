"""Total derivatives, Frechet derivatives, adjoints and Euler operators on jet space."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import NoEvolutionForm, NonIntegerPowerOfSum
from .paramscalar import ParamScalar
from .symexpr import (
    ONE_EXP,
    Base,
    Expr,
    Symbols,
    ZERO_EXPR,
    _accumulate,
    is_jet,
    jet,
    partial,
)

MultiIndex = Tuple[str, ...]


# ---------------------------------------------------------------- systems
@dataclass(frozen=True)
class SolvedForm:
    """``dependent[leading] = rhs`` holding on solutions."""

    dependent: str
    leading: MultiIndex
    rhs: Expr


@dataclass
class PDESystem:
    name: str
    symbols: Symbols
    equation_names: Tuple[str, ...]
    equations: Tuple[Expr, ...]
    solved_forms: Tuple[SolvedForm, ...] = ()
    evolution_variable: Optional[str] = None
    nonzero: Tuple[ParamScalar, ...] = ()
    _reduce_cache: Dict[Base, Expr] = field(default_factory=dict, repr=False, compare=False)

    @property
    def independents(self) -> Tuple[str, ...]:
        return self.symbols.independents

    @property
    def dependents(self) -> Tuple[str, ...]:
        return self.symbols.dependents

    @property
    def parameters(self) -> Tuple[str, ...]:
        return self.symbols.parameters

    @property
    def n_equations(self) -> int:
        return len(self.equations)

    @property
    def n_dependents(self) -> int:
        return len(self.symbols.dependents)

    def has_solved_form(self) -> bool:
        return bool(self.solved_forms)

    def is_first_order_evolution(self) -> bool:
        """``u^a_t = g^a`` for every dependent, with ``g`` free of ``t``-derivatives."""
        if self.evolution_variable is None or not self.solved_forms:
            return False
        t = self.evolution_variable
        if len(self.solved_forms) != self.n_dependents or self.n_equations != self.n_dependents:
            return False
        if {s.dependent for s in self.solved_forms} != set(self.dependents):
            return False
        for s in self.solved_forms:
            if s.leading != (t,):
                return False
            if any(t in b[1] for b in s.rhs.jets()):
                return False
        return True


# ---------------------------------------------------------------- total derivatives
def _mi_add(idx: MultiIndex, x: str) -> MultiIndex:
    return tuple(sorted(idx + (x,)))


@lru_cache(maxsize=200_000)
def total_derivative(e: Expr, xi: str) -> Expr:
    """``D_xi e`` by the Leibniz rule over the factors of each monomial."""
    out: Dict = {}
    for key, c in e.items():
        for pos, (b, ex) in enumerate(key):
            if is_jet(b):
                nb = (b[0], _mi_add(b[1], xi))
            elif b[0] == xi:
                nb = None
            else:
                continue
            # d/d(b) of b^ex, times D_xi b
            ne = ex - ONE_EXP
            factors = dict(key[:pos] + key[pos + 1:])
            if not ne.is_zero():
                factors[b] = ne
            if nb is not None:
                e2 = factors.get(nb)
                if e2 is None:
                    factors[nb] = ONE_EXP
                else:
                    s = e2 + ONE_EXP
                    if s.is_zero():
                        del factors[nb]
                    else:
                        factors[nb] = s
            _accumulate(out, tuple(sorted(factors.items())), c * ex.as_scalar())
    return Expr(out)


def total_derivative_multi(e: Expr, idx: Iterable[str]) -> Expr:
    for x in idx:
        if e.is_zero():
            return e
        e = total_derivative(e, x)
    return e


def neg_total_derivative_multi(e: Expr, idx: Sequence[str]) -> Expr:
    """``(-D)_I e``."""
    r = total_derivative_multi(e, idx)
    return -r if len(idx) % 2 else r


def jets_of(e: Expr, dep: Optional[str] = None) -> List[Base]:
    js = sorted(e.jets())
    if dep is not None:
        js = [b for b in js if b[0] == dep]
    return js


# ---------------------------------------------------------------- Frechet derivative and adjoint
def frechet(F: Sequence[Expr], P: Sequence[Expr], dependents: Sequence[str]) -> Tuple[Expr, ...]:
    """``F'(P) = sum dF/du^a_I * D_I P^a``."""
    comp = dict(zip(dependents, P))
    out = []
    for f in F:
        acc = ZERO_EXPR
        for b in jets_of(f):
            if b[0] not in comp:
                continue
            acc = acc + partial(f, b) * total_derivative_multi(comp[b[0]], b[1])
        out.append(acc)
    return tuple(out)


def frechet_adjoint(F: Sequence[Expr], Q: Sequence[Expr], dependents: Sequence[str]) -> Tuple[Expr, ...]:
    """``F'*(Q)_a = sum (-D)_I (dF^A/du^a_I * Q_A)``."""
    out = []
    for dep in dependents:
        grouped: Dict[MultiIndex, Expr] = {}
        for f, q in zip(F, Q):
            if q.is_zero():
                continue
            for b in jets_of(f, dep):
                grouped[b[1]] = grouped.get(b[1], ZERO_EXPR) + partial(f, b) * q
        acc = ZERO_EXPR
        for idx in sorted(grouped):
            acc = acc + neg_total_derivative_multi(grouped[idx], idx)
        out.append(acc)
    return tuple(out)


def euler(e: Expr, dep: str) -> Expr:
    """Euler operator ``E_dep(e) = sum (-D)_I de/d(dep_I)``."""
    acc = ZERO_EXPR
    for b in jets_of(e, dep):
        acc = acc + neg_total_derivative_multi(partial(e, b), b[1])
    return acc


def euler_vector(e: Expr, dependents: Sequence[str]) -> Tuple[Expr, ...]:
    return tuple(euler(e, d) for d in dependents)


def is_total_divergence(e: Expr, dependents: Optional[Sequence[str]] = None) -> bool:
    """True iff every Euler operator annihilates ``e``."""
    deps = dependents if dependents is not None else sorted({b[0] for b in e.jets()})
    return all(euler(e, d).is_zero() for d in deps)


def dot(a: Sequence[Expr], b: Sequence[Expr]) -> Expr:
    acc = ZERO_EXPR
    for x, y in zip(a, b):
        acc = acc + x * y
    return acc


# ---------------------------------------------------------------- on-solution reduction
def _contains(idx: MultiIndex, lead: MultiIndex) -> Optional[MultiIndex]:
    rest = list(idx)
    for x in lead:
        if x in rest:
            rest.remove(x)
        else:
            return None
    return tuple(rest)


def _reduce_base(b: Base, sys: PDESystem) -> Optional[Expr]:
    if not is_jet(b):
        return None
    cache = sys._reduce_cache
    if b in cache:
        return cache[b]
    result = None
    for s in sys.solved_forms:
        if s.dependent != b[0]:
            continue
        rest = _contains(b[1], s.leading)
        if rest is None:
            continue
        result = _reduce(total_derivative_multi(s.rhs, rest), sys)
        break
    cache[b] = result
    return result


def _reduce(e: Expr, sys: PDESystem) -> Expr:
    out = ZERO_EXPR
    plain: Dict = {}
    for key, c in e.items():
        reps = [(b, ex, _reduce_base(b, sys)) for b, ex in key]
        if all(r is None for _, _, r in reps):
            _accumulate(plain, key, c)
            continue
        term = Expr.scalar(c)
        for b, ex, r in reps:
            if r is None:
                term = term * Expr.base(b, ex)
            else:
                try:
                    term = term * (r ** ex)
                except NonIntegerPowerOfSum:
                    raise NonIntegerPowerOfSum(
                        f"cannot reduce {b} raised to {ex.render()}: its solved form is a sum"
                    ) from None
        out = out + term
    return Expr(plain) + out


def reduce_on_solutions(e: Expr, sys: PDESystem) -> Expr:
    """Eliminate every jet that is a derivative of a solved-form leading jet."""
    if not sys.solved_forms:
        raise NoEvolutionForm(f"system {sys.name!r} has no solved form; use R-operator identities")
    return _reduce(e, sys)


def reduce_vector(v: Sequence[Expr], sys: PDESystem) -> Tuple[Expr, ...]:
    return tuple(reduce_on_solutions(e, sys) for e in v)


def parametric_jet(b: Base, sys: PDESystem) -> bool:
    """True when ``b`` is not eliminated by reduction."""
    return _reduce_base(b, sys) is None
