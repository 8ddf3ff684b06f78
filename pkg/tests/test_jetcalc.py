import mpmath
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import SAMPLE_FUNCTIONS, SYMBOLS, EPS, T, X, polynomial_exprs, to_sympy
from jetbrackets.dsl import parse_expr
from jetbrackets.errors import NoEvolutionForm
from jetbrackets.fixtures import load_fixture
from jetbrackets.jetcalc import (
    dot,
    euler,
    frechet,
    frechet_adjoint,
    is_total_divergence,
    reduce_on_solutions,
    total_derivative,
)
from jetbrackets.symexpr import Symbols, eval_numeric

RD = load_fixture("reaction_diffusion")
RDS = RD.system
S = Symbols(("x", "t"), ("u", "v"), ("p", "k"))


def E(text, sym=S):
    return parse_expr(text, sym)


# ---------------------------------------------------------------- total derivatives
def test_total_derivative_examples():
    assert total_derivative(E("x*u"), "x") == E("u + x*u[x]")
    assert total_derivative(E("u^p"), "t") == E("p*u^(p - 1)*u[t]")
    sym = Symbols(("t", "r"), ("v",), ())
    got = total_derivative(E("r^(-2)*v[t]", sym), "r")
    assert got == E("-2*r^(-3)*v[t] + r^(-2)*v[r,t]", sym)
    # numeric oracle for the radial example
    f = {"v": sp.sin(T) * X**2 + X * T}
    g = sp.diff(X**-2 * sp.diff(f["v"], T), X)
    want = g.subs({X: 3, T: 2})
    jets = {"t": 2, "r": 3, "v[t]": sp.diff(f["v"], T).subs({X: 3, T: 2}),
            "v[r,t]": sp.diff(f["v"], T, X).subs({X: 3, T: 2})}
    val = sum(float(c.evaluate({})) * _eval_key(k, jets) for k, c in got.terms())
    assert abs(val - float(want)) < 1e-12


def _eval_key(key, jets):
    from jetbrackets.symexpr import base_name

    out = 1.0
    for b, ex in key:
        out *= float(jets[base_name(b)]) ** float(ex.evaluate({}))
    return out


@settings(max_examples=60)
@given(polynomial_exprs(max_order=2), st.sampled_from(["x", "t"]))
def test_total_derivative_matches_sympy(e, xi):
    got = to_sympy(total_derivative(e, xi))
    want = sp.diff(to_sympy(e), X if xi == "x" else T)
    assert sp.simplify(got - want) == 0


@settings(max_examples=200)
@given(polynomial_exprs(max_order=3))
def test_total_derivatives_commute(e):
    assert total_derivative(total_derivative(e, "x"), "t") == total_derivative(total_derivative(e, "t"), "x")


# ---------------------------------------------------------------- Frechet derivative
def test_frechet_reaction_diffusion():
    sym = Symbols(("t", "x"), ("u", "v", "Pu", "Pv"), RDS.parameters)
    G = (parse_expr("u[t] - kappa1*u[x,x] - alpha*u^p*v", sym),)
    got = frechet(G, (parse_expr("Pu", sym), parse_expr("Pv", sym)), ("u", "v"))
    want = parse_expr("Pu[t] - kappa1*Pu[x,x] - alpha*(p*u^(p - 1)*v*Pu + u^p*Pv)", sym)
    assert got == (want,)


def test_frechet_linear():
    sym = Symbols(("t", "x"), ("u", "P"), ())
    got = frechet((parse_expr("u[t] - u[x,x]", sym),), (parse_expr("P", sym),), ("u",))
    assert got == (parse_expr("P[t] - P[x,x]", sym),)


def _directional(F_expr, P_expr, xv, tv, params):
    """d/de F[u + e*phi] at e=0 by a central difference."""
    phi_u, phi_v = (to_sympy(p, params=params) for p in P_expr)
    shifted = {"u": SAMPLE_FUNCTIONS["u"] + EPS * phi_u, "v": SAMPLE_FUNCTIONS["v"] + EPS * phi_v}
    Fe = to_sympy(F_expr, funcs=shifted, params=params).subs({X: xv, T: tv})
    return central_difference_mp(sp.lambdify(EPS, Fe, "mpmath"))


def central_difference_mp(f):
    with mpmath.workdps(60):
        h = mpmath.mpf("1e-20")
        return (f(h) - f(-h)) / (2 * h)


@settings(max_examples=25)
@given(polynomial_exprs(max_order=2, max_leaves=5), polynomial_exprs(max_order=1, max_leaves=4),
       polynomial_exprs(max_order=1, max_leaves=4))
def test_frechet_finite_difference(F, Pu, Pv):
    xv, tv = sp.Rational(3, 7), sp.Rational(5, 4)
    got = to_sympy(frechet((F,), (Pu, Pv), ("u", "v"))[0]).subs({X: xv, T: tv})
    with mpmath.workdps(60):
        want = _directional(F, (Pu, Pv), xv, tv, {})
        g = mpmath.mpf(sp.N(got, 60))
        assert abs(g - want) <= mpmath.mpf("1e-6") * max(1, abs(want))


# ---------------------------------------------------------------- adjoint
def test_adjoint_navier_stokes_first_component():
    ns = load_fixture("navier_stokes")
    sym = ns.system.symbols.extended()
    ext = Symbols(sym.independents, sym.dependents + ("Qu", "Qr"), sym.parameters)
    Q = (parse_expr("Qr", ext), parse_expr("Qu", ext))
    assert ns.system.equation_names == ("Gu", "Grho")
    Qv = (Q[1], Q[0])
    got = frechet_adjoint(ns.system.equations, Qv, ns.system.dependents)
    iu = ns.system.dependents.index("u")
    want = parse_expr("-Qu[t] - u*Qu[x] - rho*Qr[x] - mu*rho^(-1)*Qu[x,x] + 2*mu*rho^(-2)*rho[x]*Qu[x]"
                      " + mu*Qu*(rho^(-2)*rho[x,x] - 2*rho^(-3)*rho[x]^2)", ext)
    assert got[iu] == want


def test_adjoint_inviscid_burgers():
    sym = Symbols(("t", "x"), ("u", "Q"), ())
    got = frechet_adjoint((parse_expr("u[t] - u*u[x]", sym),), (parse_expr("Q", sym),), ("u",))
    assert got == (parse_expr("-Q[t] + u*Q[x]", sym),)


@settings(max_examples=200)
@given(
    st.lists(polynomial_exprs(max_order=2, max_leaves=4), min_size=2, max_size=2),
    st.lists(polynomial_exprs(max_order=2, max_leaves=4), min_size=2, max_size=2),
    st.lists(polynomial_exprs(max_order=2, max_leaves=4), min_size=2, max_size=2),
)
def test_bilinear_adjoint_identity(F, P, Q):
    deps = SYMBOLS.dependents
    lhs = dot(Q, frechet(F, P, deps)) - dot(P, frechet_adjoint(F, Q, deps))
    assert is_total_divergence(lhs, deps)


# ---------------------------------------------------------------- Euler operator
def test_euler_examples():
    assert euler(E("1/2*u[x]^2"), "u") == E("-u[x,x]")
    assert euler(total_derivative(E("u*v[t]^2 + x*u[x]"), "x"), "u").is_zero()


def test_euler_reaction_diffusion_action_entry():
    P2 = RD.obj("P2")
    Q2 = RD.obj("Q2")
    e = reduce_on_solutions(dot(P2, Q2), RDS)
    assert euler(e, "u") == E("-1")
    assert euler(e, "v") == E("-1")


@settings(max_examples=200)
@given(polynomial_exprs(max_order=2), st.sampled_from(["x", "t"]), st.sampled_from(["u", "v"]))
def test_euler_kills_divergences(e, xi, dep):
    assert euler(total_derivative(e, xi), dep).is_zero()


# ---------------------------------------------------------------- reduction
def test_reduce_equation_to_zero():
    for G in RDS.equations:
        assert reduce_on_solutions(G, RDS).is_zero()


def test_reduce_time_derivative():
    sym = RDS.symbols
    got = reduce_on_solutions(parse_expr("t*u[t]", sym), RDS)
    assert got == parse_expr("kappa1*t*u[x,x] + alpha*t*u^p*v", sym)


def test_reduce_numeric_on_linear_solutions():
    # alpha = 0 decouples into heat equations with exact solution exp(-4*kappa1*t)*sin(2x) + x
    k1 = sp.Rational(3, 2)
    sol = sp.exp(-k1 * 4 * T) * sp.sin(2 * X) + X
    sym = RDS.symbols
    e = parse_expr("t*u[t] + u[t,x]*u", sym)
    red = reduce_on_solutions(e, RDS)
    params = {"kappa1": k1, "kappa2": 1, "alpha": 0, "p": 2}
    funcs = {"u": sol, "v": sp.Integer(0)}
    a = to_sympy(e, funcs, params).subs({X: sp.Rational(1, 3), T: sp.Rational(1, 5)})
    b = to_sympy(red, funcs, params).subs({X: sp.Rational(1, 3), T: sp.Rational(1, 5)})
    assert abs(sp.N(a - b, 30)) < 1e-25


def test_reduce_without_solved_form():
    bq = load_fixture("boussinesq")
    with pytest.raises(NoEvolutionForm):
        reduce_on_solutions(bq.system.equations[0], bq.system)


@settings(max_examples=100)
@given(polynomial_exprs(max_order=3))
def test_reduce_is_projection(e):
    once = reduce_on_solutions(e, RDS)
    assert reduce_on_solutions(once, RDS) == once
    assert not any(b[0] in ("u", "v") and "t" in b[1] for b in once.jets())


# ---------------------------------------------------------------- divergence test
def test_total_divergence_examples():
    assert is_total_divergence(total_derivative(E("u*u[x]"), "x"))
    assert not is_total_divergence(E("u[x]^2"))
    assert euler(E("u[x]^2"), "u") == E("-2*u[x,x]")
    assert is_total_divergence(RDS.equations[0] + RDS.equations[1], RDS.dependents)


def test_eval_sanity():
    assert eval_numeric(E("u*x"), {"u": 2, "x": 3}) == 6
