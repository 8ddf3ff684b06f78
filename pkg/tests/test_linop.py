import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import SYMBOLS, _multiindices, polynomial_exprs
from jetbrackets.dsl import parse_expr, parse_operator
from jetbrackets.errors import NoEvolutionForm, ShapeMismatch
from jetbrackets.fixtures import FIXTURE_NAMES, load_fixture
from jetbrackets.jetcalc import dot, is_total_divergence
from jetbrackets.linop import (
    TotalDiffOp,
    adjoint_op,
    apply_op,
    compose,
    extract_R_evolution,
    verify_R,
)
from jetbrackets.symexpr import Expr

BQ = load_fixture("boussinesq")
RD = load_fixture("reaction_diffusion")
KDV = load_fixture("coupled_kdv")

EVOLUTION = [n for n in FIXTURE_NAMES if load_fixture(n).system.is_first_order_evolution()]
ALL_OPS = [(n, lab) for n in FIXTURE_NAMES for lab in load_fixture(n).r_ops]


def ops(n_rows=2, n_cols=2):
    entry = st.dictionaries(st.sampled_from(_multiindices(2)), polynomial_exprs(max_order=1, max_leaves=3), max_size=2)
    return st.dictionaries(
        st.tuples(st.integers(0, n_rows - 1), st.integers(0, n_cols - 1)), entry, max_size=3
    ).map(lambda d: TotalDiffOp.from_entries(n_rows, n_cols, d))


def vectors(n=2):
    return st.lists(polynomial_exprs(max_order=2, max_leaves=4), min_size=n, max_size=n).map(tuple)


# ---------------------------------------------------------------- apply
def test_identity_apply():
    V = (parse_expr("u", SYMBOLS), parse_expr("v[x]*t", SYMBOLS))
    assert apply_op(TotalDiffOp.identity(2), V) == V


def test_boussinesq_time_translation_operator():
    from jetbrackets.jetcalc import total_derivative

    G = BQ.system.equations
    assert apply_op(BQ.R("P2"), G) == tuple(total_derivative(g, "t") for g in G)


def test_noether_operator_apply():
    sym = BQ.system.symbols
    J = parse_operator("[[0, -1], [1, 0]]", sym)
    Pu, Ph = parse_expr("u[x]*t", sym), parse_expr("h[y]", sym)
    assert apply_op(J, (Pu, Ph)) == (-Ph, Pu)


def test_apply_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        apply_op(TotalDiffOp.identity(2), (Expr.const(1),))


# ---------------------------------------------------------------- adjoint
def test_adjoint_of_first_order_scalar():
    sym = SYMBOLS
    L = parse_operator("[[t*u*D[x]]]", sym)
    V = parse_expr("v[t]", sym)
    from jetbrackets.jetcalc import total_derivative

    assert apply_op(adjoint_op(L), (V,)) == (-total_derivative(parse_expr("t*u*v[t]", sym), "x"),)


def test_boussinesq_R_Q6_adjoint():
    sym = BQ.system.symbols
    want = parse_operator("[[0, t*D[t] - 1], [-t*D[t] + 2, 0]]", sym)
    assert adjoint_op(BQ.R("Q6")) == want


@pytest.mark.parametrize("name,label", ALL_OPS)
def test_adjoint_involution_on_fixture_operators(name, label):
    R = load_fixture(name).R(label)
    assert adjoint_op(adjoint_op(R)) == R


@settings(max_examples=150)
@given(ops(), vectors(), vectors())
def test_bilinear_identity(L, P, Q):
    lhs = dot(Q, apply_op(L, P)) - dot(apply_op(adjoint_op(L), Q), P)
    assert is_total_divergence(lhs, SYMBOLS.dependents)


@settings(max_examples=150)
@given(ops(), ops(), vectors())
def test_compose_matches_apply(L1, L2, V):
    assert apply_op(compose(L1, L2), V) == apply_op(L1, apply_op(L2, V))


@settings(max_examples=100)
@given(ops())
def test_adjoint_involution_random(L):
    assert adjoint_op(adjoint_op(L)) == L


# ---------------------------------------------------------------- extraction and verification
def test_extract_space_translation():
    sym = RD.system.symbols
    assert extract_R_evolution(RD.system, RD.obj("P2"), "symmetry") == parse_operator(
        "[[D[x], 0], [0, D[x]]]", sym
    )


def test_extract_kdv_scaling_multiplier():
    assert extract_R_evolution(KDV.system, KDV.obj("Q3"), "adjoint") == -TotalDiffOp.identity(2)


def test_extract_constant():
    assert extract_R_evolution(KDV.system, KDV.obj("Q1"), "adjoint").is_zero()


def test_extract_requires_evolution():
    with pytest.raises(NoEvolutionForm):
        extract_R_evolution(BQ.system, BQ.obj("P2"), "symmetry")


@pytest.mark.parametrize("name", EVOLUTION)
def test_extracted_operators_verify(name):
    from jetbrackets.jetcalc import reduce_vector

    fx = load_fixture(name)
    for label in fx.sym_labels + fx.local_adj_labels:
        side = fx.side(label)
        R = extract_R_evolution(fx.system, fx.obj(label), side)
        assert verify_R(fx.system, reduce_vector(fx.obj(label), fx.system), R, side), label


def test_boussinesq_operators_verify():
    assert len(BQ.r_ops) == 12
    for label, R in BQ.r_ops.items():
        assert verify_R(BQ.system, BQ.obj(label), R, BQ.side(label)), label


def test_time_translation_operator_on_reaction_diffusion():
    R = parse_operator("[[D[t], 0], [0, D[t]]]", RD.system.symbols)
    assert verify_R(RD.system, RD.obj("P1"), R, "symmetry")


def test_wrong_operator_fails():
    assert not verify_R(BQ.system, BQ.obj("P6"), TotalDiffOp.zero(2, 2), "symmetry")


def test_verify_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        verify_R(BQ.system, BQ.obj("P6"), TotalDiffOp.zero(1, 2), "symmetry")
