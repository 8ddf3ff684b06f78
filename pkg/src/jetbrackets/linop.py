"""Matrices of linear operators in total derivatives.

Entry ``(i, j)`` is a map ``multiindex -> coefficient`` meaning
``sum_I c_I D_I``.  Multi-indices are sorted tuples, so ``D_x D_t`` and
``D_t D_x`` are the same key.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb
from typing import Callable, Dict, Iterable, Sequence, Tuple

from .errors import NoEvolutionForm, ShapeMismatch
from .jetcalc import (
    MultiIndex,
    PDESystem,
    frechet,
    frechet_adjoint,
    jets_of,
    reduce_on_solutions,
    reduce_vector,
    total_derivative_multi,
)
from .symexpr import Expr, ZERO_EXPR, partial

Entry = Dict[MultiIndex, Expr]


def _clean(entry: Entry) -> Entry:
    return {k: v for k, v in entry.items() if not v.is_zero()}


def _counts(mi: MultiIndex) -> Dict[str, int]:
    d: Dict[str, int] = {}
    for x in mi:
        d[x] = d.get(x, 0) + 1
    return d


def _sub_multiindices(mi: MultiIndex) -> Iterable[Tuple[MultiIndex, MultiIndex, int]]:
    """Yield ``(J, I - J, binom(I, J))`` for every sub-multiset ``J`` of ``I``."""
    counts = _counts(mi)
    names = sorted(counts)
    for ks in product(*(range(counts[n] + 1) for n in names)):
        j = tuple(sorted(sum(([n] * k for n, k in zip(names, ks)), [])))
        rest = tuple(sorted(sum(([n] * (counts[n] - k) for n, k in zip(names, ks)), [])))
        b = 1
        for n, k in zip(names, ks):
            b *= comb(counts[n], k)
        yield j, rest, b


@dataclass(frozen=True)
class TotalDiffOp:
    rows: int
    cols: int
    _entries: Tuple[Tuple[Tuple[int, int], Tuple[Tuple[MultiIndex, Expr], ...]], ...]

    @staticmethod
    def from_entries(rows: int, cols: int, entries: Dict[Tuple[int, int], Entry]) -> "TotalDiffOp":
        items = []
        for (i, j), ent in sorted(entries.items()):
            if not (0 <= i < rows and 0 <= j < cols):
                raise ShapeMismatch(f"entry {(i, j)} outside shape {(rows, cols)}")
            ent = _clean(ent)
            if ent:
                items.append(((i, j), tuple(sorted(ent.items()))))
        return TotalDiffOp(rows, cols, tuple(items))

    @staticmethod
    def zero(rows: int, cols: int) -> "TotalDiffOp":
        return TotalDiffOp(rows, cols, ())

    @staticmethod
    def identity(n: int) -> "TotalDiffOp":
        return TotalDiffOp.from_entries(n, n, {(i, i): {(): Expr.const(1)} for i in range(n)})

    @staticmethod
    def diagonal(entries: Sequence[Entry]) -> "TotalDiffOp":
        n = len(entries)
        return TotalDiffOp.from_entries(n, n, {(i, i): e for i, e in enumerate(entries)})

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def entries(self) -> Dict[Tuple[int, int], Entry]:
        return {ij: dict(ent) for ij, ent in self._entries}

    def entry(self, i: int, j: int) -> Entry:
        for ij, ent in self._entries:
            if ij == (i, j):
                return dict(ent)
        return {}

    def is_zero(self) -> bool:
        return not self._entries

    def max_order(self) -> int:
        return max((len(mi) for _, ent in self._entries for mi, _ in ent), default=0)

    # arithmetic
    def map_coeffs(self, f: Callable[[Expr], Expr]) -> "TotalDiffOp":
        return TotalDiffOp.from_entries(
            self.rows, self.cols, {ij: {mi: f(c) for mi, c in ent} for ij, ent in self._entries}
        )

    def __add__(self, other: "TotalDiffOp") -> "TotalDiffOp":
        if self.shape != other.shape:
            raise ShapeMismatch(f"cannot add {self.shape} and {other.shape}")
        acc = self.entries()
        for ij, ent in other._entries:
            cur = acc.setdefault(ij, {})
            for mi, c in ent:
                cur[mi] = cur.get(mi, ZERO_EXPR) + c
        return TotalDiffOp.from_entries(self.rows, self.cols, acc)

    def __neg__(self) -> "TotalDiffOp":
        return self.map_coeffs(lambda c: -c)

    def __sub__(self, other: "TotalDiffOp") -> "TotalDiffOp":
        return self + (-other)

    def scale(self, s) -> "TotalDiffOp":
        return self.map_coeffs(lambda c: c * s)

    def transpose_shape(self) -> Tuple[int, int]:
        return (self.cols, self.rows)

    def __repr__(self):
        from .dsl import render_operator

        return f"TotalDiffOp({render_operator(self)})"


def apply_op(L: TotalDiffOp, V: Sequence[Expr]) -> Tuple[Expr, ...]:
    """``(L V)_i = sum_j sum_I c_I D_I V_j``."""
    if len(V) != L.cols:
        raise ShapeMismatch(f"operator has {L.cols} columns, vector has {len(V)} entries")
    out = [ZERO_EXPR] * L.rows
    for (i, j), ent in L._entries:
        for mi, c in ent:
            out[i] = out[i] + c * total_derivative_multi(V[j], mi)
    return tuple(out)


def adjoint_op(L: TotalDiffOp) -> TotalDiffOp:
    """Formal adjoint: ``(c D_I)* = (-D)_I o c`` expanded by Leibniz."""
    acc: Dict[Tuple[int, int], Entry] = {}
    for (i, j), ent in L._entries:
        tgt = acc.setdefault((j, i), {})
        for mi, c in ent:
            sign = -1 if len(mi) % 2 else 1
            for jj, rest, b in _sub_multiindices(mi):
                # (-1)^|I| binom(I,J) D_{I-J}(c) D_J
                coeff = total_derivative_multi(c, rest) * (sign * b)
                tgt[jj] = tgt.get(jj, ZERO_EXPR) + coeff
    return TotalDiffOp.from_entries(L.cols, L.rows, acc)


def compose(L1: TotalDiffOp, L2: TotalDiffOp) -> TotalDiffOp:
    """``L1 o L2``."""
    if L1.cols != L2.rows:
        raise ShapeMismatch(f"cannot compose {L1.shape} with {L2.shape}")
    e2: Dict[int, list] = {}
    for (j, k), ent in L2._entries:
        e2.setdefault(j, []).append((k, ent))
    acc: Dict[Tuple[int, int], Entry] = {}
    for (i, j), ent1 in L1._entries:
        for k, ent2 in e2.get(j, []):
            tgt = acc.setdefault((i, k), {})
            for mi1, a in ent1:
                for mi2, b in ent2:
                    # a D_I (b D_J) = a sum_K binom(I,K) D_K(b) D_{I-K+J}
                    for kk, rest, bc in _sub_multiindices(mi1):
                        coeff = a * total_derivative_multi(b, kk) * bc
                        key = tuple(sorted(rest + mi2))
                        tgt[key] = tgt.get(key, ZERO_EXPR) + coeff
    return TotalDiffOp.from_entries(L1.rows, L2.cols, acc)


def frechet_op(F: Sequence[Expr], dependents: Sequence[str]) -> TotalDiffOp:
    """``F'`` as an operator matrix: entry ``(A, a)`` is ``sum_I dF^A/du^a_I D_I``."""
    acc: Dict[Tuple[int, int], Entry] = {}
    col = {d: i for i, d in enumerate(dependents)}
    for A, f in enumerate(F):
        for b in jets_of(f):
            if b[0] not in col:
                continue
            tgt = acc.setdefault((A, col[b[0]]), {})
            tgt[b[1]] = tgt.get(b[1], ZERO_EXPR) + partial(f, b)
    return TotalDiffOp.from_entries(len(F), len(dependents), acc)


def extract_R_evolution(sys: PDESystem, obj: Sequence[Expr], side: str) -> TotalDiffOp:
    """``R_P = P'`` for symmetries and ``R_Q = -Q'`` for adjoint-symmetries.

    The object is reduced on solutions first so it carries no derivatives in
    the evolution variable.
    """
    if not sys.is_first_order_evolution():
        raise NoEvolutionForm(f"system {sys.name!r} is not a first-order evolution system")
    red = reduce_vector(obj, sys)
    op = frechet_op(red, sys.dependents)
    if side == "symmetry":
        return op
    if side == "adjoint":
        return -op
    raise ValueError(f"side must be 'symmetry' or 'adjoint', got {side!r}")


def verify_R(sys: PDESystem, obj: Sequence[Expr], R: TotalDiffOp, side: str) -> bool:
    """Exact off-solution identity ``G'(P) = R_P(G)`` or ``G'*(Q) = R_Q(G)``."""
    return all(r.is_zero() for r in R_residual(sys, obj, R, side))


def R_residual(sys: PDESystem, obj: Sequence[Expr], R: TotalDiffOp, side: str) -> Tuple[Expr, ...]:
    M, m = sys.n_equations, sys.n_dependents
    if side == "symmetry":
        if len(obj) != m or R.shape != (M, M):
            raise ShapeMismatch(f"symmetry R must be {M}x{M} for {m} components")
        lhs = frechet(sys.equations, obj, sys.dependents)
    elif side == "adjoint":
        if len(obj) != M or R.shape != (m, M):
            raise ShapeMismatch(f"adjoint R must be {m}x{M} for {M} components")
        lhs = frechet_adjoint(sys.equations, obj, sys.dependents)
    else:
        raise ValueError(f"side must be 'symmetry' or 'adjoint', got {side!r}")
    rhs = apply_op(R, sys.equations)
    return tuple(a - b for a, b in zip(lhs, rhs))


def reduce_op(L: TotalDiffOp, sys: PDESystem) -> TotalDiffOp:
    return L.map_coeffs(lambda c: reduce_on_solutions(c, sys))
