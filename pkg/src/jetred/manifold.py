"""Differential consequences and reduction modulo solved manifolds.

A solved manifold is a triangular set of substitution rules
``leading jet variable -> expression``; restriction of an expression to the
manifold is exhaustive substitution.  Ranking is graded lex (first-declared
independent variable weighs most, then dependent index), which makes the
leading variable of every solvable relation well defined and substitution
terminating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import sympy as sp
from sympy.core.function import AppliedUndef

from .expr import (
    Expr,
    JetVariable,
    MultiIndex,
    UnsupportedFormError,
    VariableContext,
    _canonical,
    multiindices,
)
from .jets import (
    TransversalityError,
    VectorFieldFamily,
    _CharDerivatives,
    _D_raw,
    check_transversality,
)

_MAX_REDUCE_PASSES = 200


@dataclass(frozen=True)
class DifferentialSystem:
    """Equations L^mu[u] = 0 over a shared context, with their orders."""

    equations: tuple[Expr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "equations", tuple(self.equations))
        if not self.equations:
            raise ValueError("empty system")
        ctx = self.equations[0].ctx
        for eq in self.equations:
            if eq.ctx != ctx:
                raise ValueError("equations bound to different contexts")
            if eq.sym == 0:
                raise ValueError("system contains an identically zero equation")
        # cheap minimality heuristic: reject exact rational multiples
        for i, a in enumerate(self.equations):
            for b in self.equations[i + 1:]:
                ratio = sp.cancel(a.sym / b.sym)
                if ratio.is_Rational:
                    raise ValueError(
                        f"equations {a} and {b} are proportional; "
                        "the system must be minimal")

    @property
    def ctx(self) -> VariableContext:
        return self.equations[0].ctx

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(eq.order for eq in self.equations)

    @property
    def order(self) -> int:
        return max(self.orders)


@dataclass(frozen=True)
class ConsequenceSet:
    """Algebraically independent differential consequences up to a given order."""

    origin: DifferentialSystem
    order: int
    members: tuple[Expr, ...]
    # per member: the (equation index, multi-index) pairs it was built from
    provenance: tuple[tuple[tuple[int, MultiIndex], ...], ...]
    # nonzero multipliers assumed during pseudo-division
    assumptions: tuple[Expr, ...] = ()

    @property
    def ctx(self) -> VariableContext:
        return self.origin.ctx


@dataclass(frozen=True)
class SolvedManifold:
    """Mutually reduced substitution rules, or the empty (inconsistent) manifold."""

    ctx: VariableContext
    rules: tuple[tuple[sp.Symbol, sp.Expr], ...]
    inconsistent: bool = False
    conflict: Union[Expr, None] = None
    assumptions: tuple[Expr, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.rules, key=lambda kv: self.ctx.rank(kv[0]),
                               reverse=True))
        object.__setattr__(self, "rules", ordered)
        object.__setattr__(self, "_rule_map", dict(ordered))

    @staticmethod
    def empty(ctx: VariableContext) -> "SolvedManifold":
        return SolvedManifold(ctx, ())

    @property
    def rule_map(self) -> dict[sp.Symbol, sp.Expr]:
        return self._rule_map  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.rules)


def _reduce_raw(ctx: VariableContext, sym: sp.Expr,
                rules: dict[sp.Symbol, sp.Expr]) -> sp.Expr:
    """Exhaustive substitution of rule keys, then canonicalization."""
    if not rules:
        return _canonical(sym)
    for _ in range(_MAX_REDUCE_PASSES):
        present = {s: rules[s] for s in sym.free_symbols if s in rules}
        if not present:
            return _canonical(sym)
        sym = _canonical(sym.subs(present, simultaneous=True))
    raise RuntimeError("reduction did not terminate; rule set is not triangular")


def _interreduce(ctx: VariableContext,
                 rules: dict[sp.Symbol, sp.Expr]) -> dict[sp.Symbol, sp.Expr]:
    for _ in range(_MAX_REDUCE_PASSES):
        changed = False
        for key in list(rules):
            others = {k: v for k, v in rules.items() if k != key}
            new = _reduce_raw(ctx, rules[key], others)
            if new != rules[key]:
                rules[key] = new
                changed = True
        if not changed:
            return rules
    raise RuntimeError("rule interreduction did not stabilize")


def _needs_assumption(ctx: VariableContext, coeff: sp.Expr) -> bool:
    """Dividing by ``coeff`` deserves an explicit nonzero assumption when it
    contains unknown functions or free parameters (not just context variables)."""
    if coeff.atoms(AppliedUndef, sp.Derivative):
        return True
    for s in coeff.free_symbols:
        if not ctx.is_independent(s) and ctx.decode(s) is None:
            return True
    return False


def _solve_linear(ctx: VariableContext, sym: sp.Expr,
                  lead: sp.Symbol) -> tuple[sp.Expr, sp.Expr]:
    """sym = c1*lead + c0 with c1 free of lead; returns (c1, -c0/c1)."""
    poly = sp.Poly(sym, lead)
    if poly.degree() != 1:
        raise UnsupportedFormError(
            f"cannot solve {sp.sstr(sym)} rationally for {lead} "
            f"(degree {poly.degree()})")
    c1 = poly.nth(1)
    c0 = poly.nth(0)
    return c1, _canonical(-c0 / c1)


def reduce_modulo(e: Expr, m: SolvedManifold) -> Expr:
    """Normal form of ``e`` on the manifold."""
    if m.inconsistent:
        raise ValueError("cannot reduce modulo an inconsistent (empty) manifold")
    return Expr(e.ctx, _reduce_raw(e.ctx, e.sym, m.rule_map))


# -- characteristic manifold Q_(r) --------------------------------------------

def characteristic_manifold(f: VectorFieldFamily, r: int) -> SolvedManifold:
    """Rules solved from D^alpha Q^s[u] = 0 for all |alpha| < r."""
    if r < 1:
        raise ValueError("manifold order must be >= 1")
    report = check_transversality(f)
    if not report.ok:
        raise TransversalityError(report)
    ctx = f.ctx
    rules: dict[sp.Symbol, sp.Expr] = {}
    assumptions: list[Expr] = []
    char_caches = [_CharDerivatives(q) for q in f]
    for k in range(r):
        for alpha in multiindices(ctx.n, k, min_order=k):
            for s in range(f.l):
                for a in range(ctx.m):
                    raw = char_caches[s].get(a, alpha)
                    red = _reduce_raw(ctx, raw, rules)
                    if red == 0:
                        continue
                    lead = ctx.leading_jet(red)
                    if lead is None:
                        # a characteristic system is never inconsistent by itself
                        raise RuntimeError(
                            f"characteristic consequence degenerated to {red}")
                    c1, value = _solve_linear(ctx, red, lead)
                    if _needs_assumption(ctx, c1):
                        assumptions.append(Expr(ctx, c1))
                    rules[lead] = value
    rules = _interreduce(ctx, rules)
    return SolvedManifold(ctx, tuple(rules.items()),
                          assumptions=tuple(assumptions))


# -- differential consequences L_(k) ------------------------------------------

def _derivative_closure(eq: Expr, max_extra: int) -> dict[MultiIndex, sp.Expr]:
    """D^alpha eq for all |alpha| <= max_extra, built incrementally."""
    ctx = eq.ctx
    out: dict[MultiIndex, sp.Expr] = {MultiIndex.zero(ctx.n): eq.sym}
    for k in range(1, max_extra + 1):
        for alpha in multiindices(ctx.n, k, min_order=k):
            i = next(j for j, c in enumerate(alpha) if c > 0)
            parent = MultiIndex(tuple(
                c - 1 if j == i else c for j, c in enumerate(alpha)))
            out[alpha] = _D_raw(ctx, out[parent], i)
    return out


_Item = tuple[sp.Expr, tuple[tuple[int, MultiIndex], ...]]


def _merge_prov(a, b):
    seen = dict.fromkeys(tuple(a) + tuple(b))
    return tuple(seen)


def _eliminate_above_order(ctx: VariableContext, items: list[_Item],
                           k: int) -> list[_Item]:
    """Gaussian elimination of all jet variables of order > k.

    The input members are one total derivative beyond the target order, hence
    linear in their above-order variables; the returned combinations are the
    members of the row space free of above-order variables.
    """
    work = [(s, p) for s, p in items if s != 0]
    while True:
        above: dict[sp.Symbol, JetVariable] = {}
        for sym, _ in work:
            above.update(ctx.jet_atoms(sym, min_order=k + 1))
        if not above:
            break
        v = max(above, key=ctx.rank)
        holders = [i for i, (sym, _) in enumerate(work) if v in sym.free_symbols]
        pivot_i = min(holders, key=lambda i: (
            len(ctx.jet_atoms(work[i][0], min_order=k + 1)),
            sp.count_ops(work[i][0])))
        pivot_sym, pivot_prov = work.pop(pivot_i)
        pc1, _ = _solve_linear(ctx, pivot_sym, v)
        next_work = []
        for sym, prov in work:
            if v in sym.free_symbols:
                c1, _ = _solve_linear(ctx, sym, v)
                sym = _canonical(sym - (c1 / pc1) * pivot_sym)
                prov = _merge_prov(prov, pivot_prov)
            if sym != 0:
                next_work.append((sym, prov))
        work = next_work
    return work


def _autoreduce(ctx: VariableContext,
                items: list[_Item]) -> tuple[list[_Item], list[Expr]]:
    """One triangularization sweep: reduce each member modulo the lower ones,
    dropping members that reduce to zero.  Members whose leading variable
    occurs nonlinearly stay unsolved and reduce later members by
    pseudo-division (tracked nonzero multipliers)."""

    def sort_key(item):
        sym = item[0]
        lead = ctx.leading_jet(sym)
        rank = ctx.rank(lead) if lead is not None else (-1, (), 0)
        return (rank, sp.count_ops(sym))

    solved: dict[sp.Symbol, sp.Expr] = {}
    unsolved: list[tuple[sp.Expr, sp.Symbol]] = []
    assumptions: list[Expr] = []
    kept: list[_Item] = []
    for sym, prov in sorted(items, key=sort_key):
        for _ in range(_MAX_REDUCE_PASSES):
            sym = _reduce_raw(ctx, sym, solved)
            changed = False
            for g, lv in unsolved:
                gdeg = sp.Poly(g, lv).degree()
                while sym.has(lv) and sp.Poly(sym, lv).degree() >= gdeg:
                    sym = _canonical(sp.prem(sym, g, lv))
                    mult = sp.Poly(g, lv).LC()
                    assumptions.append(Expr(ctx, mult))
                    changed = True
            if not changed:
                break
        if sym == 0:
            continue
        kept.append((sym, prov))
        lead = ctx.leading_jet(sym)
        if lead is None:
            continue
        if sp.Poly(sym, lead).degree() == 1:
            c1, value = _solve_linear(ctx, sym, lead)
            if _needs_assumption(ctx, c1):
                assumptions.append(Expr(ctx, c1))
            solved[lead] = value
        else:
            unsolved.append((sym, lead))
    return kept, assumptions


def differential_consequences(s: DifferentialSystem, k: int) -> ConsequenceSet:
    """Maximal set of algebraically independent consequences of order <= k.

    Generates D^alpha L^mu up to the target order, plus one overshoot sweep
    whose above-order variables are eliminated to catch lower-order
    combinations (e.g. the pressure equation of an incompressible system).
    """
    ctx = s.ctx
    if any(k < r for r in s.orders):
        raise ValueError(f"consequence order {k} below an equation order")
    base: list[_Item] = []
    over: list[_Item] = []
    for mu, eq in enumerate(s.equations):
        extra = k - s.orders[mu]
        closure = _derivative_closure(eq, extra + 1)
        for alpha, sym in closure.items():
            item = (sym, ((mu, alpha),))
            if alpha.order <= extra:
                base.append(item)
            else:
                over.append(item)
    derived = _eliminate_above_order(ctx, over, k)
    members, assumptions = _autoreduce(ctx, base + derived)
    if not members:
        raise RuntimeError("consequence set collapsed to the empty set")
    return ConsequenceSet(
        origin=s,
        order=k,
        members=tuple(Expr(ctx, sym) for sym, _ in members),
        provenance=tuple(prov for _, prov in members),
        assumptions=tuple(assumptions),
    )


# -- joint manifold L cap Q_(r) -------------------------------------------------

def _append_equations(ctx: VariableContext,
                      rules: dict[sp.Symbol, sp.Expr],
                      equations: Iterable[sp.Expr],
                      assumptions: list[Expr]) -> Union[Expr, None]:
    """Solve each equation modulo the current rules into a new rule.

    Returns a conflict witness when some equation reduces to a nonzero
    expression without jet variables (inconsistent joint system).
    """
    for sym in equations:
        red = _reduce_raw(ctx, sym, rules)
        if red == 0:
            continue
        lead = ctx.leading_jet(red)
        if lead is None:
            return Expr(ctx, red)
        c1, value = _solve_linear(ctx, red, lead)
        if _needs_assumption(ctx, c1):
            assumptions.append(Expr(ctx, c1))
        rules[lead] = value
    return None


def joint_manifold(cs: ConsequenceSet, qm: SolvedManifold) -> SolvedManifold:
    """Combine a consequence set with a characteristic manifold into one
    mutually reduced rule set; inconsistency yields the empty manifold."""
    ctx = cs.ctx
    if qm.inconsistent:
        return qm
    if qm.ctx != ctx:
        raise ValueError("manifold and consequences bound to different contexts")
    rules = dict(qm.rule_map)
    assumptions = list(qm.assumptions) + list(cs.assumptions)
    conflict = _append_equations(ctx, rules, (m.sym for m in cs.members),
                                 assumptions)
    if conflict is not None:
        return SolvedManifold(ctx, (), inconsistent=True, conflict=conflict,
                              assumptions=tuple(assumptions))
    rules = _interreduce(ctx, rules)
    return SolvedManifold(ctx, tuple(rules.items()),
                          assumptions=tuple(assumptions))


def solved_consequences(cs: ConsequenceSet) -> SolvedManifold:
    """The consequence set alone as a solved manifold (no characteristic rules)."""
    return joint_manifold(cs, SolvedManifold.empty(cs.ctx))


# -- provenance-tracked reduction (multiplier certificates) ---------------------

@dataclass
class TrackedRule:
    key: sp.Symbol
    value: sp.Expr
    # (key - value) written over the original generators:
    # {origin: coefficient} with origin ("Q", s, a, beta) or ("L", mu)
    expansion: dict[tuple, sp.Expr]


def _tracked_reduce(ctx: VariableContext, sym: sp.Expr,
                    rules: dict[sp.Symbol, TrackedRule]
                    ) -> tuple[sp.Expr, dict[tuple, sp.Expr]]:
    """Reduce and record: sym = residual + sum contributions[o] * ORIGINAL_o."""
    contributions: dict[tuple, sp.Expr] = {}
    for _ in range(_MAX_REDUCE_PASSES):
        present = [s for s in sym.free_symbols if s in rules]
        if not present:
            return _canonical(sym), contributions
        key = max(present, key=ctx.rank)
        rule = rules[key]
        poly = sp.Poly(sym, key)
        replaced = sp.Integer(0)
        cofactor = sp.Integer(0)
        for (deg,), coeff in poly.terms():
            replaced += coeff * rule.value**deg
            # c*(key^d - value^d) = c*(key - value) * sum key^j value^(d-1-j)
            cofactor += coeff * sum(
                key**j * rule.value**(deg - 1 - j) for j in range(deg))
        for origin, expcoeff in rule.expansion.items():
            contributions[origin] = _canonical(
                contributions.get(origin, sp.Integer(0)) + cofactor * expcoeff)
        sym = _canonical(replaced)
    raise RuntimeError("tracked reduction did not terminate")


def tracked_joint_manifold(eq: Expr, f: VectorFieldFamily, r: int
                           ) -> tuple[dict[sp.Symbol, TrackedRule], Union[Expr, None]]:
    """Joint manifold of a single equation and Q_(r), with every rule's
    relation to the originals {D^beta Q^s[u]^a (|beta| < r), L} recorded."""
    ctx = eq.ctx
    report = check_transversality(f)
    if not report.ok:
        raise TransversalityError(report)
    rules: dict[sp.Symbol, TrackedRule] = {}

    def add(sym: sp.Expr, origin: tuple) -> Union[Expr, None]:
        red, contribs = _tracked_reduce(ctx, sym, rules)
        if red == 0:
            return None
        lead = ctx.leading_jet(red)
        if lead is None:
            return Expr(ctx, red)
        c1, value = _solve_linear(ctx, red, lead)
        expansion = {origin: _canonical(1 / c1)}
        for o, coeff in contribs.items():
            expansion[o] = _canonical(expansion.get(o, sp.Integer(0)) - coeff / c1)
        rules[lead] = TrackedRule(lead, value, expansion)
        return None

    char_caches = [_CharDerivatives(q) for q in f]
    for k in range(r):
        for beta in multiindices(ctx.n, k, min_order=k):
            for s in range(f.l):
                for a in range(ctx.m):
                    conflict = add(char_caches[s].get(a, beta), ("Q", s, a, beta))
                    if conflict is not None:
                        return rules, conflict
    conflict = add(eq.sym, ("L", 0))
    return rules, conflict
