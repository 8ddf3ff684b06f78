import pytest
from hypothesis import given, settings

from _support import SYMBOLS, raw_trees
from jetbrackets.dsl import parse_expr, parse_operator, parse_system, render, render_operator, tokenize
from jetbrackets.errors import DslSyntaxError, DuplicateName, LengthMismatch, UndeclaredSymbol
from jetbrackets.fixtures import fixture_path, load_fixture
from jetbrackets.symexpr import Expr, Symbols, normalize, render_expr

RD = Symbols(("t", "x"), ("u", "v"), ("kappa1", "kappa2", "alpha", "p"))

SMALL = """\
system heat
independents t x
dependents u
parameters k
nonzero k

equations
  G: u[t] - k*u[x,x]

evolution
  u[t] = k*u[x,x]

symmetries
  P1 = (u[x])
  P2 = u[t]

adjoint_symmetries
  Q1 = 1
"""


def test_reaction_diffusion_equation_text():
    fx = load_fixture("reaction_diffusion")
    assert parse_expr("u[t] - kappa1*u[x,x] - alpha*u^p*v", RD) == fx.file.equations[0][1]


def test_zero_is_empty():
    assert parse_expr("0", RD) == Expr()
    assert parse_expr("0", RD).is_zero()


def test_mixed_partials_commute():
    assert parse_expr("u[x,t]", RD) == parse_expr("u[t,x]", RD)


def test_render_simple():
    assert render(parse_expr("u + u", RD)) == "2*u"


REGRESSION = [
    "u[t] - kappa1*u[x,x] - alpha*u^p*v",
    "alpha*(p*u^(p - 1)*v*u[x] + u^p*v[x])",
    "x^(-2)*u[t] - 1/2*kappa2*t*v[x,x]^3",
    "(kappa1 + 1)/(2*p)*u*v - 7/3",
    "u^(2*p + 1)*x^p",
    "-(u - v)^2",
]


@pytest.mark.parametrize("text", REGRESSION)
def test_render_round_trip(text):
    e = parse_expr(text, RD)
    assert parse_expr(render_expr(e), RD) == e


@settings(max_examples=200)
@given(raw_trees())
def test_render_round_trip_random(raw):
    e = normalize(raw, SYMBOLS)
    assert parse_expr(render_expr(e), SYMBOLS) == e


def test_boussinesq_noether_rendering():
    fx = load_fixture("boussinesq")
    (nb,) = fx.noether
    assert render_operator(fx.noether_op(nb)) == "[[0, -1], [1, 0]]"


def test_operator_parse_and_render():
    op = parse_operator("[[t*D[t] + 2, 0], [0, D[x,x] - u]]", RD)
    assert op.shape == (2, 2)
    assert parse_operator(render_operator(op), RD) == op


def test_reaction_diffusion_file_counts():
    sf = parse_system(fixture_path("reaction_diffusion").read_text())
    assert len(sf.equations) == 2
    assert sf.symmetry_labels() == ["P1", "P2", "P3"]
    assert sf.adjoint_labels() == ["Q1", "Q2"]


def test_boussinesq_r_ops_block():
    sf = parse_system(fixture_path("boussinesq").read_text())
    assert sorted(sf.r_ops) == sorted([f"P{i}" for i in range(1, 7)] + [f"Q{i}" for i in range(1, 7)])


def test_small_system_parses():
    sf = parse_system(SMALL)
    assert sf.name == "heat"
    assert [o.label for o in sf.symmetries] == ["P1", "P2"]
    assert sf.solved_forms[0].leading == ("t",)


def test_wrong_length_tuple():
    bad = SMALL.replace("Q1 = 1", "Q1 = (1, 2)")
    with pytest.raises(LengthMismatch):
        parse_system(bad)


def test_undeclared_symbol():
    with pytest.raises(UndeclaredSymbol):
        parse_system(SMALL.replace("P2 = u[t]", "P2 = w[t]"))


def test_duplicate_label():
    with pytest.raises(DuplicateName):
        parse_system(SMALL.replace("P2 = u[t]", "P1 = u[t]"))


def test_syntax_error_location():
    with pytest.raises(DslSyntaxError) as ei:
        parse_system(SMALL.replace("G: u[t] - k*u[x,x]", "G: u[t] - * k"))
    assert ei.value.line == 8


def test_no_postfix_derivative_on_groups():
    with pytest.raises(DslSyntaxError):
        parse_expr("(u + v)[x]", RD)


def test_comments_in_system_files():
    sf = parse_system(SMALL.replace("Q1 = 1", "Q1 = 1  # constant multiplier"))
    assert sf.adjoint_symmetries[0].components == (Expr.const(1),)


def test_tokenizer_positions():
    toks = tokenize("u +\n 12")
    assert [(t.kind, t.text, t.line) for t in toks[:3]] == [("ident", "u", 1), ("punct", "+", 1), ("num", "12", 2)]
