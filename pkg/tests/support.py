"""Shared oracles and random generators for the test suite.

The identities here are computed from first principles (direct total-derivative
expansions, the recursive prolongation formula) so they stay independent of the
library paths they are used to check.
"""

import random

import sympy as sp

from jetred import (
    Expr,
    JetVariable,
    MultiIndex,
    VariableContext,
    VectorField,
    apply_prolonged,
    characteristic,
    make_field,
    partial_diff,
    total_derivative,
    total_derivative_multi,
)


def random_point_poly(rng: random.Random, ctx: VariableContext,
                      degree: int = 2, terms: int = 2) -> sp.Expr:
    """Small integer polynomial in the base variables (x, u)."""
    gens = list(ctx.x_symbols) + list(ctx.u_symbols)
    out = sp.Integer(rng.randint(-2, 2))
    for _ in range(rng.randint(0, terms)):
        c = rng.choice([-2, -1, 1, 2])
        mono = sp.Integer(1)
        for _ in range(rng.randint(1, degree)):
            mono *= rng.choice(gens)
        out += c * mono
    return out


def random_field(rng: random.Random, ctx: VariableContext) -> VectorField:
    xi = [random_point_poly(rng, ctx) for _ in range(ctx.n)]
    eta = [random_point_poly(rng, ctx) for _ in range(ctx.m)]
    return make_field(ctx, xi, eta)


def random_jet_poly(rng: random.Random, ctx: VariableContext,
                    order: int = 2, degree: int = 2, terms: int = 3) -> Expr:
    """Polynomial of bounded order and jet degree with point-poly coefficients."""
    from jetred.expr import multiindices

    jets = [ctx.symbol_of(JetVariable(a, alpha))
            for a in range(ctx.m)
            for alpha in multiindices(ctx.n, order)]
    sym = sp.Integer(0)
    for _ in range(rng.randint(1, terms)):
        mono = sp.Integer(1)
        for _ in range(rng.randint(0, degree)):
            mono *= rng.choice(jets)
        sym += random_point_poly(rng, ctx, degree=1, terms=1) * mono
    e = Expr(ctx, sym)
    if e.sym == 0:
        return Expr(ctx, jets[-1])
    return e


def tautology_residual(eq: Expr, q: VectorField) -> Expr:
    """Q_(r)L - xi^i D_i L - sum L_{u_alpha} D^alpha Q[u], expanded directly."""
    ctx = eq.ctx
    r = max(eq.order, 1)
    lhs = apply_prolonged(q, r, eq)
    rhs = Expr(ctx, 0)
    for i in range(ctx.n):
        rhs = rhs + q.xi[i] * total_derivative(eq, i)
    chars = characteristic(q)
    for s, jv in eq.jet_symbols().items():
        rhs = rhs + partial_diff(eq, s) * total_derivative_multi(chars[jv.dep], jv.alpha)
    return lhs - rhs


def characteristic_identity_residual(q: VectorField) -> Expr:
    """Q_(1)Q[u] - (eta_u - xi^j_u u_j) Q[u] for a single dependent variable."""
    ctx = q.ctx
    assert ctx.m == 1
    char = characteristic(q)[0]
    u = ctx.u_symbol(0)
    factor = partial_diff(q.eta[0], u)
    for j in range(ctx.n):
        uj = ctx.symbol_of(JetVariable(0, MultiIndex.delta(ctx.n, j)))
        factor = factor - partial_diff(q.xi[j], u) * Expr(ctx, uj)
    return apply_prolonged(q, 1, char) - factor * char


def recursive_prolongation_coefficient(q: VectorField, jv: JetVariable) -> Expr:
    """phi^{alpha+delta_i} = D_i phi^alpha - (D_i xi^j) u^a_{alpha+delta_j}.

    The classical recursive form; used only to cross-check the characteristic
    formula the library computes with.
    """
    ctx = q.ctx
    if jv.order == 0:
        return q.eta[jv.dep]
    i = next(k for k, c in enumerate(jv.alpha) if c > 0)
    parent = JetVariable(jv.dep, MultiIndex(tuple(
        c - 1 if k == i else c for k, c in enumerate(jv.alpha))))
    phi = total_derivative(recursive_prolongation_coefficient(q, parent), i)
    for j in range(ctx.n):
        bumped = ctx.symbol_of(JetVariable(jv.dep, parent.alpha.bump(j)))
        phi = phi - total_derivative(q.xi[j], i) * Expr(ctx, bumped)
    return phi
