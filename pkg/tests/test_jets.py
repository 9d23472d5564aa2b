"""Jet calculus: total derivatives, prolongation, commutators, family checks."""

import random

import pytest
import sympy as sp

from jetred import (
    Expr,
    JetVariable,
    MultiIndex,
    apply_prolonged,
    characteristic,
    check_involution,
    check_transversality,
    commutator,
    family,
    make_field,
    prolong,
    total_derivative,
    total_derivative_multi,
)

from support import (
    characteristic_identity_residual,
    random_field,
    random_jet_poly,
    recursive_prolongation_coefficient,
    tautology_residual,
)


class TestTotalDerivative:
    def test_definition(self, ctx, jet, u):
        assert total_derivative(ctx.expr(u), 1).sym == jet(0, 1)

    def test_product_rule(self, ctx, jet, u):
        e = ctx.expr(u * jet(0, 1))
        out = total_derivative(e, 0)
        assert out.sym == jet(1, 0) * jet(0, 1) + u * jet(1, 1)

    def test_example1_prolonged_member(self, ctx, example1, jet, t):
        out = total_derivative(example1, 1)
        assert out.sym == jet(1, 1) + jet(0, 3) + t * jet(0, 2)

    def test_derivatives_commute(self, ctx):
        rng = random.Random(7)
        for _ in range(10):
            e = random_jet_poly(rng, ctx)
            d01 = total_derivative(total_derivative(e, 0), 1)
            d10 = total_derivative(total_derivative(e, 1), 0)
            assert (d01 - d10).sym == 0

    def test_multi(self, ctx, jet, u):
        e = total_derivative_multi(ctx.expr(u), MultiIndex((1, 2)))
        assert e.sym == jet(1, 2)


class TestCharacteristic:
    def test_time_translation(self, ctx, d_t, jet):
        (char,) = characteristic(d_t)
        assert char.sym == -jet(1, 0)

    def test_travelling(self, ctx, jet):
        c = sp.Symbol("c")
        q = make_field(ctx, (1, c), (0,))
        (char,) = characteristic(q)
        assert char.sym == -jet(1, 0) - c * jet(0, 1)

    def test_scaling(self, ctx, jet, x, u):
        q = make_field(ctx, (0, x), (u,))
        (char,) = characteristic(q)
        assert char.sym == u - x * jet(0, 1)


class TestProlong:
    def test_translation_adds_nothing(self, ctx, d_x):
        p = prolong(d_x, 2)
        for s, coeff in p.coeffs.items():
            if ctx.decode(s).order >= 1:
                assert coeff.sym == 0

    def test_vertical_scaling(self, ctx, jet, u):
        q = make_field(ctx, (0, 0), (u,))
        p = prolong(q, 1)
        assert p.coeffs[jet(0, 1)].sym == jet(0, 1)

    def test_time_dependent_shift(self, ctx, jet, t):
        # hand application of the characteristic formula to t*d_x
        q = make_field(ctx, (0, t), (0,))
        p = prolong(q, 1)
        assert p.coeffs[jet(1, 0)].sym == -jet(0, 1)
        assert p.coeffs[jet(0, 1)].sym == 0

    def test_matches_recursive_formula(self, ctx):
        rng = random.Random(11)
        for _ in range(6):
            q = random_field(rng, ctx)
            p = prolong(q, 2)
            for s, coeff in p.coeffs.items():
                jv = ctx.decode(s)
                expected = recursive_prolongation_coefficient(q, jv)
                assert (coeff - expected).sym == 0


class TestApplyProlonged:
    def test_example1(self, ctx, example1, d_t, jet):
        out = apply_prolonged(d_t, 2, example1)
        assert out.sym == jet(0, 1)

    def test_heat_x_translation(self, ctx, heat, d_x):
        assert apply_prolonged(d_x, 2, heat).sym == 0

    def test_heat_vertical_scaling(self, ctx, heat, u, jet):
        q = make_field(ctx, (0, 0), (u,))
        out = apply_prolonged(q, 2, heat)
        assert out.sym == jet(1, 0) - jet(0, 2)

    def test_order_bound_enforced(self, ctx, example1, d_t):
        with pytest.raises(ValueError):
            apply_prolonged(d_t, 1, example1)


class TestCommutator:
    def test_examples(self, ctx, d_t, d_x, t, x):
        q = make_field(ctx, (0, t), (0,))
        out = commutator(d_t, q)
        assert [c.sym for c in out.xi] == [0, 1] and out.eta[0].sym == 0

        out = commutator(d_t, d_x)
        assert out.is_zero()

        q2 = make_field(ctx, (0, x), (0,))
        out = commutator(d_x, q2)
        assert [c.sym for c in out.xi] == [0, 1] and out.eta[0].sym == 0

    def test_antisymmetric_and_jacobi(self, ctx):
        rng = random.Random(3)
        for _ in range(4):
            a, b, c = (random_field(rng, ctx) for _ in range(3))
            ab = commutator(a, b)
            ba = commutator(b, a)
            assert all((p + q).sym == 0 for p, q in zip(ab.xi + ab.eta, ba.xi + ba.eta))
            jac_parts = [commutator(a, commutator(b, c)),
                         commutator(b, commutator(c, a)),
                         commutator(c, commutator(a, b))]
            for comps in zip(*[p.xi + p.eta for p in jac_parts]):
                assert sum(comps, start=Expr(ctx, 0)).sym == 0


class TestInvolution:
    def test_translations(self, ctx, d_t, d_x):
        cert = check_involution(family(d_t, d_x))
        assert cert.involutive
        assert all(z.sym == 0 for z in cert.zeta[(0, 1)])

    def test_scaling_pair(self, ctx, d_x, x, u):
        scaling = make_field(ctx, (0, x), (u,))
        cert = check_involution(family(d_x, scaling))
        assert cert.involutive
        z = [z.sym for z in cert.zeta[(0, 1)]]
        assert z == [1, 0]

    def test_non_involutive(self, ctx, d_x, x):
        q = make_field(ctx, (1, 0), (x,))
        cert = check_involution(family(q, d_x))
        assert not cert.involutive
        s, s2, witness = cert.witness
        assert witness.eta[0].sym == -1

    def test_single_operator_trivial(self, ctx, d_t):
        assert check_involution(family(d_t)).involutive


class TestTransversality:
    def test_translations(self, ctx, d_t, d_x):
        report = check_transversality(family(d_t, d_x))
        assert report.ok and report.rank == 2
        assert report.minor_determinant.sym == 1

    def test_vertical_field_fails(self, ctx, u):
        q = make_field(ctx, (0, 0), (u,))
        report = check_transversality(family(q))
        assert not report.ok and report.rank == 0

    def test_proportional_rows_fail(self, ctx, d_t, t):
        q = make_field(ctx, (t, 0), (0,))
        report = check_transversality(family(d_t, q))
        assert not report.ok and report.rank == 1

    def test_degeneration_locus_reported(self, ctx, t):
        q = make_field(ctx, (t, 0), (0,))
        report = check_transversality(family(q))
        assert report.ok
        assert report.minor_determinant.sym == t


class TestPaperIdentities:
    def test_characteristic_identity(self, ctx):
        rng = random.Random(17)
        for _ in range(20):
            q = random_field(rng, ctx)
            assert characteristic_identity_residual(q).sym == 0

    def test_tautology(self, ctx):
        rng = random.Random(19)
        for _ in range(20):
            q = random_field(rng, ctx)
            eq = random_jet_poly(rng, ctx)
            assert tautology_residual(eq, q).sym == 0
