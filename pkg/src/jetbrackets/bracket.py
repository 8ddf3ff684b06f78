"""Finite-dimensional Lie-algebra layer over the parameter field.

Vectors over a labelled basis are ``dict label -> ParamScalar`` ("combos").
All elimination is exact Gauss-Jordan over :class:`ParamScalar`.  Every
pivot is checked against the declared nonzero constraints before it is
divided by, so a result is never silently valid only off some unstated
parameter locus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import (
    DependentBasis,
    IllDefinedBracket,
    NoScalingSymmetry,
    NotInRange,
    NotInSpan,
    UndeclaredPole,
)
from .jetcalc import frechet
from .paramscalar import ONE, ZERO, ParamScalar
from .symexpr import Expr

Combo = Dict[str, ParamScalar]
Vector = Tuple[Expr, ...]
Matrix = List[List[ParamScalar]]


# ---------------------------------------------------------------- pole bookkeeping
class PoleGuard:
    """Irreducible factors that are known to be nonzero."""

    def __init__(self, nonzero: Iterable[ParamScalar] = ()):
        self.allowed = set()
        for s in nonzero:
            for f in _factor_polys(s):
                self.allowed.add(f)
        self.enabled = True

    @staticmethod
    def off() -> "PoleGuard":
        g = PoleGuard()
        g.enabled = False
        return g

    def allows(self, s: ParamScalar) -> bool:
        if not self.enabled or s.is_const():
            return True
        return all(f in self.allowed for f in _factor_polys(s))

    def check(self, s: ParamScalar) -> None:
        if not self.enabled or s.is_const():
            return
        for f in _factor_polys(s):
            if f not in self.allowed:
                raise UndeclaredPole(f"division by {s} needs {f} != 0, which is not a declared constraint")

    def pivot_key(self, s: ParamScalar):
        """Sort key for pivot candidates: constants, then declared-safe entries, then the simplest."""
        return (not s.is_const(), not self.allows(s), len(str(s)))


def _factor_polys(s: ParamScalar) -> List[ParamScalar]:
    """Monic irreducible factors of numerator and denominator."""
    out = []
    for f in s.factors():
        if f.is_const():
            continue
        out.append(_monic(f))
    return out


def _monic(f: ParamScalar) -> ParamScalar:
    lead = max(f.num.items(), key=lambda kv: (sum(e for _, e in kv[0]), kv[0]))[1]
    return f / ParamScalar.const(lead)


# ---------------------------------------------------------------- exact elimination
@dataclass
class RREF:
    rows: Matrix
    pivots: List[int]  # pivot column of each nonzero row


def rref(matrix: Sequence[Sequence[ParamScalar]], guard: Optional[PoleGuard] = None) -> RREF:
    """Reduced row echelon form by Gauss-Jordan elimination."""
    guard = guard or PoleGuard.off()
    A = [list(r) for r in matrix]
    nrows = len(A)
    ncols = len(A[0]) if A else 0
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        # prefer a constant pivot, then the structurally simplest one
        cands = [i for i in range(r, nrows) if not A[i][c].is_zero()]
        if not cands:
            continue
        best = min(cands, key=lambda i: (guard.pivot_key(A[i][c]), i))
        A[r], A[best] = A[best], A[r]
        piv = A[r][c]
        guard.check(piv)
        inv = piv.inverse()
        A[r] = [x * inv for x in A[r]]
        for i in range(nrows):
            if i != r and not A[i][c].is_zero():
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    return RREF(A[:r], pivots)


def complement_columns(vectors: Sequence[Sequence[ParamScalar]], guard: Optional[PoleGuard] = None) -> List[int]:
    """Columns whose unit vectors complete ``vectors`` to a basis.

    Full pivoting that prefers constant entries, so the choice does not
    divide by parameters unless it has to.
    """
    guard = guard or PoleGuard.off()
    A = [list(r) for r in vectors]
    used: List[int] = []
    while A:
        cands = [(i, j) for i, row in enumerate(A) for j, x in enumerate(row) if not x.is_zero()]
        if not cands:
            break
        i, j = min(cands, key=lambda ij: (guard.pivot_key(A[ij[0]][ij[1]]), ij[1], ij[0]))
        piv = A[i][j]
        guard.check(piv)
        row = [x / piv for x in A.pop(i)]
        A = [[a - r[j] * b for a, b in zip(r, row)] for r in A]
        used.append(j)
    ncols = len(vectors[0]) if vectors else 0
    return [c for c in range(ncols) if c not in used]


def rank(matrix: Sequence[Sequence[ParamScalar]], guard: Optional[PoleGuard] = None) -> int:
    return len(rref(matrix, guard).pivots)


def nullspace(matrix: Sequence[Sequence[ParamScalar]], ncols: int, guard: Optional[PoleGuard] = None) -> Matrix:
    """Basis of ``{x : A x = 0}``, one vector per free column."""
    if not matrix:
        return [[ONE if j == i else ZERO for j in range(ncols)] for i in range(ncols)]
    R = rref(matrix, guard)
    free = [c for c in range(ncols) if c not in R.pivots]
    basis = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for row, pc in zip(R.rows, R.pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def solve(A: Sequence[Sequence[ParamScalar]], b: Sequence[ParamScalar], guard: Optional[PoleGuard] = None):
    """Unique solution of ``A x = b`` for ``A`` with independent columns, or ``None``."""
    ncols = len(A[0]) if A else 0
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    R = rref(aug, guard)
    if ncols in R.pivots:
        return None
    x = [ZERO] * ncols
    for row, pc in zip(R.rows, R.pivots):
        x[pc] = row[ncols]
    return x


# ---------------------------------------------------------------- coordinates of Expr vectors
def _coords(vectors: Sequence[Sequence[Expr]]) -> Tuple[List[Tuple], List[Dict[Tuple, ParamScalar]]]:
    keys = set()
    maps = []
    for v in vectors:
        m = {}
        for i, e in enumerate(v):
            for k, c in e.items():
                m[(i, k)] = c
        keys.update(m)
        maps.append(m)
    return sorted(keys, key=repr), maps


def decompose(
    target: Sequence[Expr],
    basis: Sequence[Sequence[Expr]],
    guard: Optional[PoleGuard] = None,
) -> List[ParamScalar]:
    """Exact coefficients ``c`` with ``target = sum c_i basis_i``."""
    for b in basis:
        if len(b) != len(target):
            raise NotInSpan("basis vector and target have different lengths")
    keys, maps = _coords(list(basis) + [target])
    A = [[maps[j].get(k, ZERO) for j in range(len(basis))] for k in keys]
    if rank(A, guard) < len(basis):
        raise DependentBasis("basis vectors are linearly dependent over the parameter field")
    x = solve(A, [maps[-1].get(k, ZERO) for k in keys], guard)
    if x is None:
        raise NotInSpan("target is not a combination of the basis")
    return x


def recombine(coeffs: Sequence[ParamScalar], basis: Sequence[Sequence[Expr]]) -> Vector:
    n = len(basis[0]) if basis else 0
    out = [Expr()] * n
    for c, b in zip(coeffs, basis):
        if c.is_zero():
            continue
        out = [o + e * Expr.scalar(c) for o, e in zip(out, b)]
    return tuple(out)


# ---------------------------------------------------------------- commutators
def commutator(P1: Sequence[Expr], P2: Sequence[Expr], dependents: Sequence[str]) -> Vector:
    """Evolutionary commutator ``[P1, P2] = P2'(P1) - P1'(P2)``."""
    a = frechet(P2, P1, dependents)
    b = frechet(P1, P2, dependents)
    return tuple(x - y for x, y in zip(a, b))


# ---------------------------------------------------------------- combos
def combo_add(*cs: Mapping[str, ParamScalar]) -> Combo:
    out: Combo = {}
    for c in cs:
        for k, v in c.items():
            s = out.get(k, ZERO) + v
            if s.is_zero():
                out.pop(k, None)
            else:
                out[k] = s
    return out


def combo_scale(c: Mapping[str, ParamScalar], s) -> Combo:
    s = ParamScalar.coerce(s)
    if s.is_zero():
        return {}
    return {k: v * s for k, v in c.items() if not (v * s).is_zero()}


def combo_clean(c: Mapping[str, ParamScalar]) -> Combo:
    return {k: v for k, v in c.items() if not v.is_zero()}


def combo_equal(a: Mapping[str, ParamScalar], b: Mapping[str, ParamScalar]) -> bool:
    return combo_clean(combo_add(a, combo_scale(b, -1))) == {}


def to_list(c: Mapping[str, ParamScalar], labels: Sequence[str]) -> List[ParamScalar]:
    extra = set(c) - set(labels)
    if extra:
        raise NotInSpan(f"labels {sorted(extra)} are outside the basis")
    return [c.get(k, ZERO) for k in labels]


def to_combo(v: Sequence[ParamScalar], labels: Sequence[str]) -> Combo:
    return {k: x for k, x in zip(labels, v) if not x.is_zero()}


def combo_subs(c: Mapping[str, ParamScalar], values: Mapping[str, object]) -> Combo:
    return combo_clean({k: v.subs(values) for k, v in c.items()})


# ---------------------------------------------------------------- structure constants
@dataclass
class StructureConstants:
    labels: List[str]
    table: Dict[Tuple[str, str], Combo] = field(default_factory=dict)

    def bracket(self, a: str, b: str) -> Combo:
        if (a, b) in self.table:
            return dict(self.table[(a, b)])
        if (b, a) in self.table:
            return combo_scale(self.table[(b, a)], -1)
        return {}

    def bracket_combos(self, x: Mapping[str, ParamScalar], y: Mapping[str, ParamScalar]) -> Combo:
        out: Combo = {}
        for a, ca in x.items():
            for b, cb in y.items():
                if a == b:
                    continue
                out = combo_add(out, combo_scale(self.bracket(a, b), ca * cb))
        return out

    def nonzero_entries(self) -> Dict[Tuple[str, str], Combo]:
        out = {}
        for i, a in enumerate(self.labels):
            for b in self.labels[i + 1:]:
                v = combo_clean(self.bracket(a, b))
                if v:
                    out[(a, b)] = v
        return out


def symmetry_structure_constants(
    vectors: Mapping[str, Sequence[Expr]],
    labels: Sequence[str],
    dependents: Sequence[str],
    guard: Optional[PoleGuard] = None,
) -> StructureConstants:
    """Commute every pair and decompose over the same basis."""
    basis = [vectors[k] for k in labels]
    sc = StructureConstants(list(labels))
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            c = commutator(vectors[a], vectors[b], dependents)
            if all(e.is_zero() for e in c):
                continue
            sc.table[(a, b)] = to_combo(decompose(c, basis, guard), labels)
    return sc


@dataclass(frozen=True)
class AlgebraReport:
    verdict: str
    failures: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def lie_algebra_checks(sc: StructureConstants) -> AlgebraReport:
    """Antisymmetry and Jacobi as exact identities."""
    fails = []
    for (a, b), v in sc.table.items():
        if (b, a) in sc.table and not combo_equal(sc.table[(b, a)], combo_scale(v, -1)):
            fails.append(f"antisymmetry [{a},{b}]")
        if a == b and combo_clean(v):
            fails.append(f"[{a},{a}] != 0")
    L = sc.labels
    for i, a in enumerate(L):
        for j, b in enumerate(L[i + 1:], i + 1):
            for c in L[j + 1:]:
                t1 = sc.bracket_combos(sc.bracket(a, b), {c: ONE})
                t2 = sc.bracket_combos(sc.bracket(b, c), {a: ONE})
                t3 = sc.bracket_combos(sc.bracket(c, a), {b: ONE})
                if combo_clean(combo_add(t1, t2, t3)):
                    fails.append(f"Jacobi ({a},{b},{c})")
    return AlgebraReport("fail" if fails else "pass", tuple(fails))


def isomorphism_check(
    source: StructureConstants,
    target: StructureConstants,
    mapping: Mapping[str, Mapping[str, ParamScalar]],
) -> AlgebraReport:
    """``phi([a,b]) = [phi a, phi b]`` on the source basis and ``phi`` injective."""
    fails = []
    missing = [k for k in source.labels if k not in mapping]
    if missing:
        return AlgebraReport("fail", (f"no image for {', '.join(missing)}",))

    def phi(c: Mapping[str, ParamScalar]) -> Combo:
        out: Combo = {}
        for k, v in c.items():
            out = combo_add(out, combo_scale(mapping[k], v))
        return out

    L = source.labels
    for i, a in enumerate(L):
        for b in L[i + 1:]:
            lhs = phi(source.bracket(a, b))
            rhs = target.bracket_combos(mapping[a], mapping[b])
            if not combo_equal(lhs, rhs):
                fails.append(f"phi([{a},{b}]) != [phi({a}),phi({b})]")
    M = [to_list(mapping[k], target.labels) for k in L]
    if rank(M) < len(L):
        fails.append("correspondence is not injective")
    return AlgebraReport("fail" if fails else "pass", tuple(fails))


# ---------------------------------------------------------------- dual action and bracket
@dataclass
class DualAnalysis:
    sym_labels: List[str]
    adj_labels: List[str]
    q: Combo
    columns: Dict[str, Combo]  # S_Q(P_j) over the adjoint basis
    kernel: List[Combo]
    ideal: bool
    cokernel: List[Combo]
    policy: str
    weights: Optional[Dict[str, ParamScalar]] = None

    def matrix(self) -> Matrix:
        return [[self.columns[p].get(a, ZERO) for p in self.sym_labels] for a in self.adj_labels]


def dual_columns(
    q: Mapping[str, ParamScalar],
    table: Mapping[str, Mapping[str, Combo]],
    sym_labels: Sequence[str],
) -> Dict[str, Combo]:
    """``S_Q(P_j) = sum_i q_i S_{P_j}(Q_i)`` from a computed action table ``table[Q][P]``."""
    cols = {}
    for p in sym_labels:
        acc: Combo = {}
        for lab, c in q.items():
            acc = combo_add(acc, combo_scale(table[lab][p], c))
        cols[p] = acc
    return cols


def _in_span(v: Sequence[ParamScalar], basis: Matrix, guard: PoleGuard) -> bool:
    if all(x.is_zero() for x in v):
        return True
    if not basis:
        return False
    A = [[b[i] for b in basis] for i in range(len(v))]
    return solve(A, v, guard) is not None


def _weights(sc: StructureConstants, scaling: str, labels: Sequence[str]) -> Dict[str, ParamScalar]:
    # [P_j, S] = w_j P_j
    w = {}
    for p in labels:
        v = combo_clean(sc.bracket(p, scaling))
        extra = set(v) - {p}
        if extra:
            raise IllDefinedBracket(f"{p} is not homogeneous under {scaling}")
        w[p] = v.get(p, ZERO)
    return w


def dual_action_analysis(
    q: Mapping[str, ParamScalar],
    table: Mapping[str, Mapping[str, Combo]],
    sym_sc: StructureConstants,
    adj_labels: Sequence[str],
    policy: str = "ideal",
    scaling: Optional[str] = None,
    guard: Optional[PoleGuard] = None,
) -> DualAnalysis:
    guard = guard or PoleGuard.off()
    syms = list(sym_sc.labels)
    cols = dual_columns(q, table, syms)
    A = [[cols[p].get(a, ZERO) for p in syms] for a in adj_labels]
    ker = nullspace(A, len(syms), guard)
    ker_combos = [to_combo(v, syms) for v in ker]

    ideal = True
    for k in ker_combos:
        for p in syms:
            br = to_list(sym_sc.bracket_combos(k, {p: ONE}), syms)
            if not _in_span(br, ker, guard):
                ideal = False
                break
        if not ideal:
            break

    weights = None
    if policy == "ideal":
        free = complement_columns(ker, guard) if ker else list(range(len(syms)))
        coker = [{syms[j]: ONE} for j in free]
    elif policy == "scaling":
        if not scaling:
            raise NoScalingSymmetry("the scaling policy needs a designated scaling symmetry")
        if scaling not in syms:
            raise NoScalingSymmetry(f"{scaling!r} is not a symmetry label")
        weights = _weights(sym_sc, scaling, syms)
        groups: Dict[ParamScalar, List[str]] = {}
        for p in syms:
            groups.setdefault(weights[p], []).append(p)
        inside = set()
        for w, ps in groups.items():
            if all(_in_span(to_list({p: ONE}, syms), ker, guard) for p in ps):
                inside.add(w)
        if sum(len(groups[w]) for w in inside) != len(ker):
            raise IllDefinedBracket("the kernel is not a sum of scaling weight spaces")
        coker = [{p: ONE} for p in syms if weights[p] not in inside]
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return DualAnalysis(syms, list(adj_labels), dict(q), cols, ker_combos, ideal, coker, policy, weights)


@dataclass
class BracketResult:
    analysis: DualAnalysis
    basis_labels: List[str]
    basis: Dict[str, Combo]  # bracket basis over the adjoint labels
    preimages: Dict[str, Combo]  # S_Q^{-1} of each basis element over symmetry labels
    entries: Dict[Tuple[str, str], Combo]

    def entry(self, a: str, b: str) -> Combo:
        if (a, b) in self.entries:
            return self.entries[(a, b)]
        if (b, a) in self.entries:
            return combo_scale(self.entries[(b, a)], -1)
        return {}

    def structure_constants(self) -> StructureConstants:
        return StructureConstants(list(self.basis_labels), {k: v for k, v in self.entries.items() if v})


def apply_dual(an: DualAnalysis, p: Mapping[str, ParamScalar]) -> Combo:
    out: Combo = {}
    for lab, c in p.items():
        out = combo_add(out, combo_scale(an.columns[lab], c))
    return out


def invert_dual(
    an: DualAnalysis,
    target: Mapping[str, ParamScalar],
    cokernel: Optional[List[Combo]] = None,
    guard: Optional[PoleGuard] = None,
) -> Combo:
    """``S_Q^{-1}`` restricted to the chosen complement of the kernel."""
    guard = guard or PoleGuard.off()
    coker = cokernel if cokernel is not None else an.cokernel
    images = [to_list(apply_dual(an, c), an.adj_labels) for c in coker]
    y = to_list(target, an.adj_labels)
    if not coker:
        if any(not v.is_zero() for v in y):
            raise NotInRange("S_Q is zero but the target is not")
        return {}
    A = [[img[i] for img in images] for i in range(len(an.adj_labels))]
    x = solve(A, y, guard)
    if x is None:
        raise NotInRange(f"target is not in the range of S_Q")
    out: Combo = {}
    for xi, c in zip(x, coker):
        out = combo_add(out, combo_scale(c, xi))
    return out


def adjsym_bracket(
    an: DualAnalysis,
    sym_sc: StructureConstants,
    basis: Sequence[Tuple[str, Combo]],
    guard: Optional[PoleGuard] = None,
    cokernel: Optional[List[Combo]] = None,
) -> BracketResult:
    """Bracket table ``S_Q([S_Q^{-1} a, S_Q^{-1} b])`` on a basis of the range."""
    guard = guard or PoleGuard.off()
    if an.policy == "ideal" and not an.ideal:
        raise IllDefinedBracket("the kernel of S_Q is not an ideal; the bracket depends on the complement")
    labels = [k for k, _ in basis]
    bvecs = {k: combo_clean(v) for k, v in basis}
    B = [[bvecs[k].get(a, ZERO) for k in labels] for a in an.adj_labels]
    if rank(B, guard) < len(labels):
        raise DependentBasis("bracket basis is linearly dependent")
    pre = {k: invert_dual(an, bvecs[k], cokernel, guard) for k in labels}
    entries: Dict[Tuple[str, str], Combo] = {}
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            comm = sym_sc.bracket_combos(pre[a], pre[b])
            val = to_list(apply_dual(an, comm), an.adj_labels)
            x = solve(B, val, guard)
            if x is None:
                raise NotInSpan(f"bracket of {a} and {b} leaves the span of the bracket basis")
            entries[(a, b)] = to_combo(x, labels)
    return BracketResult(an, labels, bvecs, pre, entries)


def perturbed_cokernel(an: DualAnalysis) -> List[Combo]:
    """Complement shifted by kernel elements, for well-definedness checks."""
    if not an.kernel:
        return list(an.cokernel)
    k = an.kernel[0]
    return [combo_add(c, combo_scale(k, i + 1)) for i, c in enumerate(an.cokernel)]
