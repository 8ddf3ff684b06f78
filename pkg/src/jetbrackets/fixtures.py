"""Loading, specializing and validating the shipped ``.sys`` fixtures.

A :class:`Fixture` bundles a parsed system with its objects, R-operators
and golden tables, and offers the table computations that the tests and
the CLI share.  Golden tables are data only; every computed value comes
from the operations in :mod:`structure` and :mod:`bracket`.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from . import bracket as br
from .dsl import (
    ActionTable,
    BracketTable,
    IsomorphismBlock,
    NoetherBlock,
    SystemFile,
    VariationalBlock,
    parse_system,
)
from .errors import NotInSpan, UnknownFixture, ValidationFailure
from .jetcalc import PDESystem, SolvedForm, reduce_vector
from .linop import TotalDiffOp, apply_op, extract_R_evolution, verify_R
from .paramscalar import ParamScalar
from .structure import (
    ON_SOLUTION,
    OFF_SOLUTION_R,
    ActionKind,
    CheckReport,
    MultiplierVerdict,
    check_determining,
    classify_multiplier,
    noether_operator,
    symmetry_action,
    variational_check,
)
from .symexpr import Expr, subs_params

FIXTURE_NAMES = (
    "reaction_diffusion",
    "navier_stokes",
    "boussinesq",
    "coupled_kdv",
    "coupled_kdv_potential",
    "acoustic_wave",
    "acoustic_potential",
    "acoustic_first_layer",
)

Vector = Tuple[Expr, ...]
Combo = Dict[str, ParamScalar]
ActionTableData = Dict[str, Dict[str, Combo]]


def fixture_dir() -> Path:
    env = os.environ.get("JETBRACKETS_FIXTURE_DIR")
    return Path(env) if env else Path(__file__).with_name("fixtures")


def fixture_path(name: str) -> Path:
    path = fixture_dir() / f"{name}.sys"
    if not path.is_file():
        raise UnknownFixture(f"no fixture named {name!r} in {fixture_dir()}")
    return path


def available_fixtures() -> List[str]:
    return sorted(p.stem for p in fixture_dir().glob("*.sys"))


# ---------------------------------------------------------------- specialization helpers
def _subs_vec(v, values):
    return tuple(subs_params(e, values) for e in v)


def _subs_op(op: TotalDiffOp, values) -> TotalDiffOp:
    return op.map_coeffs(lambda c: subs_params(c, values)) if values else op


def _subs_combo(c: Mapping[str, ParamScalar], values) -> Combo:
    return br.combo_subs(c, values) if values else dict(c)


def _guard_ok(guard: Mapping[str, Fraction], values: Mapping[str, Fraction]) -> bool:
    return all(k in values and values[k] == v for k, v in guard.items())


@dataclass
class Fixture:
    name: str
    file: SystemFile
    system: PDESystem
    specialization: Dict[str, Fraction]
    symmetries: Dict[str, Vector]
    adjoint_symmetries: Dict[str, Vector]
    r_ops: Dict[str, TotalDiffOp]
    nonzero: List[ParamScalar]
    action_tables: List[ActionTable]
    bracket_tables: List[BracketTable]
    noether: List[NoetherBlock]
    variational: List[VariationalBlock]
    isomorphisms: List[IsomorphismBlock]
    commutators: Optional[Dict[Tuple[str, str], Combo]]
    multipliers: Optional[Tuple[List[str], List[str]]]
    content_hash: str
    potential: Optional["Fixture"] = None
    _cache: Dict = field(default_factory=dict, repr=False)

    # -- labels --------------------------------------------------------
    @property
    def sym_labels(self) -> List[str]:
        return list(self.symmetries)

    @property
    def local_adj_labels(self) -> List[str]:
        return list(self.adjoint_symmetries)

    @property
    def adj_labels(self) -> List[str]:
        """Local labels followed by the nonlocal ones supplied by the potential system."""
        out = self.local_adj_labels
        if self.file.potential is not None:
            out += [k for k in self.file.potential.adjoint_symmetries if k not in out]
        return out

    def obj(self, label: str) -> Vector:
        if label in self.symmetries:
            return self.symmetries[label]
        return self.adjoint_symmetries[label]

    def side(self, label: str) -> str:
        return "symmetry" if label in self.symmetries else "adjoint"

    def R(self, label: str) -> Optional[TotalDiffOp]:
        return self.r_ops.get(label)

    def guard(self) -> br.PoleGuard:
        return br.PoleGuard(self.nonzero)

    # -- determining equations ----------------------------------------
    def check_object(self, label: str) -> List[CheckReport]:
        """Every applicable determining test for one object."""
        side = self.side(label)
        o = self.obj(label)
        out = []
        if self.system.has_solved_form():
            out.append(check_determining(self.system, o, side, method=ON_SOLUTION, subject=label))
        R = self.R(label)
        if R is not None:
            out.append(check_determining(self.system, o, side, R=R, method=OFF_SOLUTION_R, subject=label))
        elif self.system.is_first_order_evolution():
            red = reduce_vector(o, self.system)
            Rx = extract_R_evolution(self.system, o, side)
            out.append(check_determining(self.system, red, side, R=Rx, method=OFF_SOLUTION_R, subject=label))
        if not out:
            out.append(check_determining(self.system, o, side, subject=label))
        return out

    def validate(self) -> None:
        for label in self.sym_labels + self.local_adj_labels:
            for rep in self.check_object(label):
                if not rep.passed:
                    raise ValidationFailure(
                        f"{self.name}: {label} fails its determining equation ({rep.method})", rep.residual
                    )
        for label, R in self.r_ops.items():
            if not verify_R(self.system, self.obj(label), R, self.side(label)):
                raise ValidationFailure(f"{self.name}: R[{label}] does not verify")

    # -- multipliers ---------------------------------------------------
    def classify(self, label: str) -> MultiplierVerdict:
        if label not in self.adjoint_symmetries:
            pot = self._potential_label(label)
            return self.potential.classify(pot)
        return classify_multiplier(self.system, self.adjoint_symmetries[label], label)

    def _potential_label(self, label: str) -> str:
        if self.potential is None or self.file.potential is None:
            raise KeyError(label)
        tgt = self.file.potential.adjoint_symmetries.get(label)
        if tgt is None:
            raise NotInSpan(f"{label} has no image in the potential system")
        return tgt

    # -- actions -------------------------------------------------------
    def action(self, kind, P: str, Q: str) -> Vector:
        key = ("action", ActionKind.of(kind), P, Q)
        if key not in self._cache:
            self._cache[key] = symmetry_action(
                kind, self.system, self.symmetries[P], self.adjoint_symmetries[Q], self.R(P), self.R(Q)
            )
        return self._cache[key]

    def reduced(self, label: str) -> Vector:
        """The object with solved-form jets eliminated; action outputs live in this form."""
        key = ("reduced", label)
        if key not in self._cache:
            o = self.obj(label)
            self._cache[key] = reduce_vector(o, self.system) if self.system.has_solved_form() else o
        return self._cache[key]

    def _adj_basis(self) -> List[Vector]:
        return [self.reduced(k) for k in self.local_adj_labels]

    def action_cell(self, kind, P: str, Q: str) -> Combo:
        """Action of ``P`` on ``Q`` as a combination of the adjoint-symmetry labels."""
        key = ("cell", ActionKind.of(kind), P, Q)
        if key in self._cache:
            return self._cache[key]
        if Q in self.adjoint_symmetries:
            v = self.action(kind, P, Q)
            c = br.to_combo(br.decompose(v, self._adj_basis(), self.guard()), self.local_adj_labels)
        else:
            c = self._nonlocal_cell(kind, P, Q)
        self._cache[key] = c
        return c

    def _nonlocal_cell(self, kind, P: str, Q: str) -> Combo:
        # computed in potential variables, expressed over the potential images
        # of the basis, then mapped back; labels with no image get coefficient 0
        link = self.file.potential
        pot = self.potential
        pP = link.symmetries.get(P)
        if pP is None:
            raise NotInSpan(f"{P} has no image in the potential system")
        pQ = self._potential_label(Q)
        v = pot.action(kind, pP, pQ)
        labels = [k for k in self.adj_labels if link.adjoint_symmetries.get(k)]
        basis = [pot.reduced(link.adjoint_symmetries[k]) for k in labels]
        return br.to_combo(br.decompose(v, basis, pot.guard()), labels)

    def action_table(self, kind) -> ActionTableData:
        return {q: {p: self.action_cell(kind, p, q) for p in self.sym_labels} for q in self.adj_labels}

    # -- commutators ---------------------------------------------------
    def structure_constants(self) -> br.StructureConstants:
        key = ("sc",)
        if key not in self._cache:
            self._cache[key] = br.symmetry_structure_constants(
                self.symmetries, self.sym_labels, self.system.dependents, self.guard()
            )
        return self._cache[key]

    # -- brackets ------------------------------------------------------
    def dual_analysis(
        self, kind, q: Mapping[str, ParamScalar], policy: str = "ideal", scaling: Optional[str] = None
    ) -> br.DualAnalysis:
        table = {lab: {p: self.action_cell(kind, p, lab) for p in self.sym_labels} for lab in q}
        return br.dual_action_analysis(
            q, table, self.structure_constants(), self.adj_labels, policy, scaling, self.guard()
        )

    def bracket_table(self, bt: BracketTable, instantiate: bool = False) -> br.BracketResult:
        """Compute the bracket described by a fixture block.

        With ``instantiate`` the block's declared parameter values are
        substituted into ``q`` and the basis before computing.
        """
        q, basis = bt.q, bt.basis or [(k, {k: ParamScalar.const(1)}) for k in self.adj_labels]
        guard = self.guard()
        if instantiate and bt.instantiate:
            q = br.combo_subs(q, bt.instantiate)
            basis = [(k, br.combo_subs(c, bt.instantiate)) for k, c in basis]
            guard = br.PoleGuard(
                [s.subs(bt.instantiate) for s in self.nonzero if not s.subs(bt.instantiate).is_const()]
            )
        table = {lab: {p: self.action_cell(bt.kind, p, lab) for p in self.sym_labels} for lab in self.adj_labels}
        an = br.dual_action_analysis(
            q, table, self.structure_constants(), self.adj_labels, bt.policy, bt.scaling, guard
        )
        return br.adjsym_bracket(an, self.structure_constants(), basis, guard)

    def find_bracket(self, name: str) -> BracketTable:
        for bt in self.bracket_tables:
            if bt.name == name:
                return bt
        raise KeyError(name)

    # -- Noether and variational --------------------------------------
    def noether_op(self, block: NoetherBlock) -> TotalDiffOp:
        Q = self._combo_vector(block.q)
        R_Q = self._combo_R(block.q)
        return noether_operator(self.system, Q, R_Q, block.scale)

    def _combo_vector(self, c: Mapping[str, ParamScalar]) -> Vector:
        out = [Expr()] * self.system.n_equations
        for k, s in c.items():
            out = [a + b * Expr.scalar(s) for a, b in zip(out, self.adjoint_symmetries[k])]
        return tuple(out)

    def _combo_R(self, c: Mapping[str, ParamScalar]) -> Optional[TotalDiffOp]:
        if not any(k in self.r_ops for k in c):
            return None
        if not all(k in self.r_ops for k in c):
            raise ValidationFailure("a combination mixes supplied and extracted R-operators")
        op = None
        for k, s in c.items():
            term = self.r_ops[k].scale(Expr.scalar(s))
            op = term if op is None else op + term
        return op

    def noether_images(self, block: NoetherBlock) -> Dict[str, Combo]:
        J = self.noether_op(block)
        out = {}
        for p in self.sym_labels:
            v = apply_op(J, self.symmetries[p])
            if self.system.has_solved_form():
                v = reduce_vector(v, self.system)
            out[p] = br.to_combo(br.decompose(v, self._adj_basis(), self.guard()), self.local_adj_labels)
        return out

    def variational_report(self, vb: VariationalBlock) -> CheckReport:
        return variational_check(self.system, vb.kind, vb.op, vb.density, vb.lhs, vb.residual_op, vb.name)


# ---------------------------------------------------------------- loading
def _build(sf: SystemFile, values: Dict[str, Fraction], text: str) -> Fixture:
    keep_sym = [o for o in sf.symmetries if _guard_ok(o.guard, values)]
    keep_adj = [o for o in sf.adjoint_symmetries if _guard_ok(o.guard, values)]
    syms = {o.label: _subs_vec(o.components, values) for o in keep_sym}
    adjs = {o.label: _subs_vec(o.components, values) for o in keep_adj}
    present = set(syms) | set(adjs)
    if sf.potential is not None:
        present |= set(sf.potential.adjoint_symmetries)
    r_ops = {k: _subs_op(v, values) for k, v in sf.r_ops.items() if k in syms or k in adjs}

    nonzero = []
    for s in sf.nonzero:
        t = s.subs(values) if values else s
        if t.is_zero():
            raise ValidationFailure(f"{sf.name}: specialization makes declared-nonzero {s} vanish")
        if not t.is_const():
            nonzero.append(t)

    def labels_ok(labels) -> bool:
        return all(lab in present for lab in labels)

    actions = []
    for t in sf.action_tables:
        if labels_ok(t.cols) and labels_ok(t.rows) and all(labels_ok(c) for cells in t.rows.values() for c in cells):
            rows = {k: [_subs_combo(c, values) for c in cells] for k, cells in t.rows.items()}
            actions.append(ActionTable(t.name, t.kind, list(t.cols), rows, t.line))
    brackets = []
    for b in sf.bracket_tables:
        used = set(b.q) | {k for _, c in b.basis for k in c}
        if not b.basis:
            used |= {k for pair in b.entries for k in pair}
        if labels_ok(used) and labels_ok(k for c in (b.kernel or []) for k in c):
            brackets.append(
                BracketTable(
                    b.name, b.kind, _subs_combo(b.q, values), b.policy, b.scaling,
                    [(k, _subs_combo(c, values)) for k, c in b.basis],
                    {k: _subs_combo(v, values) for k, v in b.entries.items()},
                    dict(b.instantiate),
                    None if b.kernel is None else [_subs_combo(c, values) for c in b.kernel],
                    b.ideal, b.golden, b.line,
                )
            )
    noether = []
    for nb in sf.noether:
        if labels_ok(nb.q) and labels_ok(nb.images) and all(labels_ok(c) for c in nb.images.values()):
            noether.append(
                NoetherBlock(
                    nb.name, _subs_combo(nb.q, values), nb.scale.subs(values) if values else nb.scale,
                    None if nb.J is None else _subs_op(nb.J, values),
                    {k: _subs_combo(c, values) for k, c in nb.images.items()}, nb.line,
                )
            )
    variational = [
        VariationalBlock(
            v.name, v.kind, _subs_op(v.op, values), subs_params(v.density, values),
            None if v.lhs is None else _subs_vec(v.lhs, values),
            None if v.residual_op is None else _subs_op(v.residual_op, values),
            v.expect, v.line,
        )
        for v in sf.variational
    ]
    brackets_present = {b.name for b in brackets}
    isos = [
        IsomorphismBlock(i.name, i.bracket, {k: _subs_combo(c, values) for k, c in i.mapping.items()}, i.line, i.scale)
        for i in sf.isomorphisms
        if i.bracket in brackets_present and labels_ok(i.mapping) and all(labels_ok(c) for c in i.mapping.values())
    ]
    commutators = None
    if sf.commutators is not None:
        commutators = {
            k: _subs_combo(v, values) for k, v in sf.commutators.entries.items() if labels_ok(k) and labels_ok(v)
        }
    multipliers = None
    if sf.multipliers is not None:
        multipliers = (
            [k for k in sf.multipliers.multipliers if k in present],
            [k for k in sf.multipliers.nonmultipliers if k in present],
        )

    system = PDESystem(
        sf.name,
        sf.symbols,
        tuple(n for n, _ in sf.equations),
        tuple(subs_params(e, values) for _, e in sf.equations),
        tuple(SolvedForm(s.dependent, s.leading, subs_params(s.rhs, values)) for s in sf.solved_forms),
        sf.evolution_variable,
        tuple(nonzero),
    )
    return Fixture(
        sf.name, sf, system, dict(values), syms, adjs, r_ops, nonzero, actions, brackets, noether,
        variational, isos, commutators, multipliers, hashlib.sha256(text.encode()).hexdigest(),
    )


def load_system_text(
    text: str,
    source: str = "<string>",
    specialize: Optional[Mapping[str, object]] = None,
    validate: bool = True,
) -> Fixture:
    """Parse, specialize and validate a system given as text."""
    sf = parse_system(text, source)
    values = dict(sf.specialize) if specialize is None else {k: Fraction(v) for k, v in specialize.items()}
    fx = _build(sf, values, text)
    if sf.potential is not None:
        fx.potential = load_fixture(sf.potential.system, specialize=values or None, validate=validate)
    if validate:
        fx.validate()
    return fx


def load_file(path, specialize=None, validate: bool = True) -> Fixture:
    path = Path(path)
    return load_system_text(path.read_text(), str(path), specialize, validate)


@lru_cache(maxsize=None)
def _load_cached(name: str, spec_key: Optional[Tuple], validate: bool, directory: str) -> Fixture:
    path = Path(directory) / f"{name}.sys"
    if not path.is_file():
        raise UnknownFixture(f"no fixture named {name!r} in {directory}")
    specialize = None if spec_key is None else dict(spec_key)
    return load_system_text(path.read_text(), str(path), specialize, validate)


def load_fixture(name: str, specialize: Optional[Mapping[str, object]] = None, validate: bool = True) -> Fixture:
    """Load a shipped fixture by name.

    ``specialize=None`` applies the file's default parameter values; an
    empty mapping keeps every parameter symbolic.
    """
    key = None if specialize is None else tuple(sorted((k, Fraction(v)) for k, v in specialize.items()))
    return _load_cached(name, key, validate, str(fixture_dir()))
