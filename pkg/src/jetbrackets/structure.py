"""Determining equations, multipliers, symmetry actions and Noether operators.

Conventions for a system ``G = 0`` with ``m`` dependents and ``M`` equations:

* a symmetry ``P`` (length ``m``) satisfies ``G'(P) = R_P(G)``;
* an adjoint-symmetry ``Q`` (length ``M``) satisfies ``G'*(Q) = R_Q(G)``.

The three actions of a symmetry on an adjoint-symmetry are::

    Action1 = R_P*(Q) - R_Q*(P)
    Action2 = Q'(P) + R_P*(Q)
    Action3 = Q'(P) + R_Q*(P)

For first-order evolution systems ``R_P = P'`` and ``R_Q = -Q'`` after
reducing the objects on solutions, so no fixture data is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

from .errors import NoEvolutionForm, ShapeMismatch, UnverifiableWithoutR
from .jetcalc import PDESystem, dot, euler_vector, frechet, frechet_adjoint, reduce_vector
from .linop import (
    R_residual,
    TotalDiffOp,
    adjoint_op,
    apply_op,
    extract_R_evolution,
    frechet_op,
    reduce_op,
)
from .symexpr import Expr

Vector = Tuple[Expr, ...]

ON_SOLUTION = "on-solution"
OFF_SOLUTION_R = "off-solution-R"


class ActionKind(Enum):
    ACTION1 = 1
    ACTION2 = 2
    ACTION3 = 3

    @staticmethod
    def of(k) -> "ActionKind":
        if isinstance(k, ActionKind):
            return k
        return ActionKind(int(k))


@dataclass(frozen=True)
class CheckReport:
    subject: str
    verdict: str  # "pass" | "fail"
    residual: Vector
    method: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @staticmethod
    def from_residual(subject: str, residual: Sequence[Expr], method: str, detail: str = "") -> "CheckReport":
        residual = tuple(residual)
        verdict = "pass" if all(r.is_zero() for r in residual) else "fail"
        return CheckReport(subject, verdict, residual, method, detail)


def _check_side(side: str) -> None:
    if side not in ("symmetry", "adjoint"):
        raise ValueError(f"side must be 'symmetry' or 'adjoint', got {side!r}")


def determining_residual(sys: PDESystem, obj: Sequence[Expr], side: str) -> Vector:
    """``G'(P)`` or ``G'*(Q)`` reduced on solutions."""
    _check_side(side)
    width = sys.n_dependents if side == "symmetry" else sys.n_equations
    if len(obj) != width:
        raise ShapeMismatch(f"{side} needs {width} components, got {len(obj)}")
    if side == "symmetry":
        raw = frechet(sys.equations, obj, sys.dependents)
    else:
        raw = frechet_adjoint(sys.equations, obj, sys.dependents)
    return reduce_vector(raw, sys)


def check_determining(
    sys: PDESystem,
    obj: Sequence[Expr],
    side: str,
    R: Optional[TotalDiffOp] = None,
    method: Optional[str] = None,
    subject: str = "",
) -> CheckReport:
    """Check the determining equation for a symmetry or adjoint-symmetry.

    By default the on-solution test is used when the system has solved
    forms and the off-solution ``R`` identity otherwise.  ``method`` forces
    one of the two.
    """
    _check_side(side)
    if method is None:
        method = ON_SOLUTION if sys.has_solved_form() else OFF_SOLUTION_R
    if method == ON_SOLUTION:
        try:
            res = determining_residual(sys, obj, side)
        except NoEvolutionForm as exc:
            raise UnverifiableWithoutR(str(exc)) from None
        return CheckReport.from_residual(subject, res, ON_SOLUTION)
    if method != OFF_SOLUTION_R:
        raise ValueError(f"unknown method {method!r}")
    if R is None:
        raise UnverifiableWithoutR(
            f"{subject or side}: system {sys.name!r} has no solved form and no R-operator was supplied"
        )
    return CheckReport.from_residual(subject, R_residual(sys, obj, R, side), OFF_SOLUTION_R)


# ---------------------------------------------------------------- multipliers
@dataclass(frozen=True)
class MultiplierVerdict:
    subject: str
    is_multiplier: bool
    euler_residual: Vector
    self_adjoint: Optional[bool] = None  # None when the evolution test does not apply

    @property
    def label(self) -> str:
        return "Multiplier" if self.is_multiplier else "NonMultiplier"

    @property
    def consistent(self) -> bool:
        return self.self_adjoint is None or self.self_adjoint == self.is_multiplier


def classify_multiplier(sys: PDESystem, Q: Sequence[Expr], subject: str = "") -> MultiplierVerdict:
    """Euler test ``E(Q.G) = 0``, cross-checked by ``Q' = Q'*`` on evolution systems."""
    res = euler_vector(dot(Q, sys.equations), sys.dependents)
    is_mult = all(r.is_zero() for r in res)
    sa = None
    if sys.is_first_order_evolution():
        Qr = reduce_vector(Q, sys)
        op = frechet_op(Qr, sys.dependents)
        sa = op == adjoint_op(op)
    return MultiplierVerdict(subject, is_mult, res, sa)


# ---------------------------------------------------------------- R-operators
def evolution_R(sys: PDESystem, obj: Sequence[Expr], side: str) -> TotalDiffOp:
    return extract_R_evolution(sys, obj, side)


def resolve_R(sys: PDESystem, obj: Sequence[Expr], side: str, R: Optional[TotalDiffOp]) -> TotalDiffOp:
    if R is not None:
        return R
    if sys.is_first_order_evolution():
        return extract_R_evolution(sys, obj, side)
    raise UnverifiableWithoutR(f"system {sys.name!r} needs a fixture R-operator for this {side}")


# ---------------------------------------------------------------- actions
def symmetry_action(
    kind,
    sys: PDESystem,
    P: Sequence[Expr],
    Q: Sequence[Expr],
    R_P: Optional[TotalDiffOp] = None,
    R_Q: Optional[TotalDiffOp] = None,
) -> Vector:
    """Action of the symmetry ``P`` on the adjoint-symmetry ``Q``.

    Missing R-operators are extracted for first-order evolution systems from
    the reduced object.  On systems with solved forms the output is reduced.
    """
    kind = ActionKind.of(kind)
    # an extracted R belongs to the reduced object, a supplied one to the object as given
    if R_P is None and sys.has_solved_form():
        P = reduce_vector(P, sys)
    if R_Q is None and sys.has_solved_form():
        Q = reduce_vector(Q, sys)
    if kind is ActionKind.ACTION1:
        a = apply_op(adjoint_op(resolve_R(sys, P, "symmetry", R_P)), Q)
        b = apply_op(adjoint_op(resolve_R(sys, Q, "adjoint", R_Q)), P)
        out = [x - y for x, y in zip(a, b)]
    elif kind is ActionKind.ACTION2:
        a = frechet(Q, P, sys.dependents)
        b = apply_op(adjoint_op(resolve_R(sys, P, "symmetry", R_P)), Q)
        out = [x + y for x, y in zip(a, b)]
    else:
        a = frechet(Q, P, sys.dependents)
        b = apply_op(adjoint_op(resolve_R(sys, Q, "adjoint", R_Q)), P)
        out = [x + y for x, y in zip(a, b)]
    reduce = sys.has_solved_form()
    if reduce:
        return reduce_vector(out, sys)
    return tuple(out)


def evolution_action1(sys: PDESystem, P: Sequence[Expr], Q: Sequence[Expr]) -> Vector:
    """``E_u(P.Q)``: the first action written without R-operators."""
    if not sys.is_first_order_evolution():
        raise NoEvolutionForm(f"system {sys.name!r} is not a first-order evolution system")
    P = reduce_vector(P, sys)
    Q = reduce_vector(Q, sys)
    return reduce_vector(euler_vector(dot(P, Q), sys.dependents), sys)


# ---------------------------------------------------------------- Noether operator
def noether_operator(
    sys: PDESystem, Q: Sequence[Expr], R_Q: Optional[TotalDiffOp] = None, scale=1
) -> TotalDiffOp:
    """``scale * (Q' + R_Q*)``, with coefficients reduced on solutions when possible."""
    if R_Q is None and sys.has_solved_form():
        Q = reduce_vector(Q, sys)
    J = frechet_op(Q, sys.dependents) + adjoint_op(resolve_R(sys, Q, "adjoint", R_Q))
    if sys.has_solved_form():
        J = reduce_op(J, sys)
    return J.scale(scale)


def symplectic_integrand(sys: PDESystem, Q: Sequence[Expr], P1: Sequence[Expr], P2: Sequence[Expr]) -> Expr:
    """``P1.Q'(P2) - P2.Q'(P1)`` on an evolution system, everything reduced."""
    if not sys.is_first_order_evolution():
        raise NoEvolutionForm(f"system {sys.name!r} is not a first-order evolution system")
    Q, P1, P2 = (reduce_vector(v, sys) for v in (Q, P1, P2))
    a = dot(P1, reduce_vector(frechet(Q, P2, sys.dependents), sys))
    b = dot(P2, reduce_vector(frechet(Q, P1, sys.dependents), sys))
    return a - b


def pairing_integrand(J: TotalDiffOp, P1: Sequence[Expr], P2: Sequence[Expr]) -> Expr:
    """``P1.J(P2)``, the pairing a Noether operator defines on symmetries."""
    return dot(P1, apply_op(J, P2))


# ---------------------------------------------------------------- variational identities
def variational_check(
    sys: PDESystem,
    kind: str,
    op: TotalDiffOp,
    density: Expr,
    lhs: Optional[Sequence[Expr]] = None,
    residual_op: Optional[TotalDiffOp] = None,
    subject: str = "",
) -> CheckReport:
    """Lagrangian or Hamiltonian identity as an exact computation.

    ``lagrangian``: ``op(G) - E(density)`` must vanish identically.

    ``hamiltonian``: ``lhs - op(E(density))`` must vanish on solutions.  With
    solved forms this is checked by reduction; otherwise the residual must
    equal ``residual_op(G)`` identically (``residual_op`` defaults to the
    identity).
    """
    delta = euler_vector(density, sys.dependents)
    if kind == "lagrangian":
        if op.shape != (sys.n_dependents, sys.n_equations):
            raise ShapeMismatch(f"lagrangian op must be {sys.n_dependents}x{sys.n_equations}, got {op.shape}")
        res = [a - b for a, b in zip(apply_op(op, sys.equations), delta)]
        return CheckReport.from_residual(subject, res, OFF_SOLUTION_R, "op(G) - E(L)")
    if kind != "hamiltonian":
        raise ValueError(f"kind must be 'lagrangian' or 'hamiltonian', got {kind!r}")
    if lhs is None:
        raise ShapeMismatch("hamiltonian check needs the left-hand tuple")
    flow = apply_op(op, delta)
    if len(lhs) != len(flow):
        raise ShapeMismatch(f"lhs has {len(lhs)} entries, operator gives {len(flow)}")
    res = [a - b for a, b in zip(lhs, flow)]
    if sys.has_solved_form() and residual_op is None:
        return CheckReport.from_residual(subject, reduce_vector(res, sys), ON_SOLUTION, "lhs - op(E(H))")
    rop = residual_op if residual_op is not None else TotalDiffOp.identity(sys.n_equations)
    rg = apply_op(rop, sys.equations)
    if len(rg) != len(res):
        raise ShapeMismatch("residual operator does not match the left-hand tuple")
    return CheckReport.from_residual(
        subject, [a - b for a, b in zip(res, rg)], OFF_SOLUTION_R, "lhs - op(E(H)) - K(G)"
    )
