"""Canonical expressions over jet-space coordinates.

Expressions are multivariate polynomials in jet variables whose coefficients
are rational functions of the base variables, optionally extended by exp/log
atoms and rational powers.  Canonicalization (and hence decidable equality on
the rational core) is delegated to sympy's ``cancel``; everything jet-specific
lives in :class:`VariableContext`, which owns the bijection between jet
variables and sympy symbols.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

import sympy as sp
from sympy.core.function import AppliedUndef


class ExprError(Exception):
    """Base class for expression-kernel errors."""


class MalformedExpressionError(ExprError):
    """Raised for division by an identically zero denominator, floats, etc."""


class NameResolutionError(ExprError):
    """Raised when a variable does not belong to the active context."""


class UnsupportedFormError(ExprError):
    """Raised when an operation needs a form the expression does not have."""


@dataclass(frozen=True)
class MultiIndex:
    """Derivative multi-index alpha = (alpha_1, ..., alpha_n)."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(a < 0 for a in self.entries):
            raise ValueError(f"negative multi-index entry in {self.entries}")

    @staticmethod
    def zero(n: int) -> "MultiIndex":
        return MultiIndex((0,) * n)

    @staticmethod
    def delta(n: int, i: int) -> "MultiIndex":
        """Unit multi-index with a single 1 in slot i."""
        if not 0 <= i < n:
            raise ValueError(f"slot {i} out of range for n={n}")
        return MultiIndex(tuple(1 if j == i else 0 for j in range(n)))

    @property
    def order(self) -> int:
        return sum(self.entries)

    def bump(self, i: int) -> "MultiIndex":
        """alpha + delta_i."""
        return MultiIndex(
            tuple(a + 1 if j == i else a for j, a in enumerate(self.entries))
        )

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class JetVariable:
    """The jet coordinate u^a_alpha (alpha = 0 is the dependent itself)."""

    dep: int
    alpha: MultiIndex

    @property
    def order(self) -> int:
        return self.alpha.order


def _enumerate_multiindices(n: int, order: int) -> list[tuple[int, ...]]:
    """All n-tuples of nonnegative integers summing to ``order``."""
    if n == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        for rest in _enumerate_multiindices(n - 1, order - first):
            out.append((first,) + rest)
    return out


def multiindices(n: int, max_order: int, min_order: int = 0) -> list[MultiIndex]:
    """Multi-indices of length n with min_order <= |alpha| <= max_order."""
    out: list[MultiIndex] = []
    for k in range(min_order, max_order + 1):
        out.extend(MultiIndex(t) for t in _enumerate_multiindices(n, k))
    return out


@dataclass(frozen=True)
class VariableContext:
    """Declared independent and dependent variables of a jet space.

    The context materializes jet coordinates as sympy symbols named in the
    DSL's bracket notation (``u[t,x,x]`` for the third mixed derivative,
    bare ``u`` for order zero) and keeps the symbol <-> JetVariable registry.
    """

    independent: tuple[str, ...]
    dependent: tuple[str, ...]

    def __post_init__(self) -> None:
        if isinstance(self.independent, list):
            object.__setattr__(self, "independent", tuple(self.independent))
        if isinstance(self.dependent, list):
            object.__setattr__(self, "dependent", tuple(self.dependent))
        names = list(self.independent) + list(self.dependent)
        if len(set(names)) != len(names):
            raise ValueError(f"variable names not unique: {names}")
        if not self.independent or not self.dependent:
            raise ValueError("need at least one independent and one dependent variable")
        x_syms = tuple(sp.Symbol(s) for s in self.independent)
        u_syms = tuple(sp.Symbol(s) for s in self.dependent)
        registry = {u_syms[a]: JetVariable(a, MultiIndex.zero(self.n))
                    for a in range(self.m)}
        object.__setattr__(self, "_x_syms", x_syms)
        object.__setattr__(self, "_u_syms", u_syms)
        object.__setattr__(self, "_registry", registry)
        object.__setattr__(self, "_by_jet", {v: k for k, v in registry.items()})

    @property
    def n(self) -> int:
        return len(self.independent)

    @property
    def m(self) -> int:
        return len(self.dependent)

    @property
    def x_symbols(self) -> tuple[sp.Symbol, ...]:
        return self._x_syms  # type: ignore[attr-defined]

    @property
    def u_symbols(self) -> tuple[sp.Symbol, ...]:
        return self._u_syms  # type: ignore[attr-defined]

    def x_symbol(self, i: int) -> sp.Symbol:
        return self._x_syms[i]  # type: ignore[attr-defined]

    def u_symbol(self, a: int) -> sp.Symbol:
        return self._u_syms[a]  # type: ignore[attr-defined]

    def jet_name(self, jv: JetVariable) -> str:
        if jv.order == 0:
            return self.dependent[jv.dep]
        slots = []
        for i, count in enumerate(jv.alpha):
            slots.extend([self.independent[i]] * count)
        return f"{self.dependent[jv.dep]}[{','.join(slots)}]"

    def symbol_of(self, jv: JetVariable) -> sp.Symbol:
        """The sympy symbol of a jet variable (registered on first use)."""
        by_jet = self._by_jet  # type: ignore[attr-defined]
        sym = by_jet.get(jv)
        if sym is None:
            if jv.dep >= self.m or len(jv.alpha) != self.n:
                raise NameResolutionError(f"jet variable {jv} not in context")
            sym = sp.Symbol(self.jet_name(jv))
            by_jet[jv] = sym
            self._registry[sym] = jv  # type: ignore[attr-defined]
        return sym

    def jet(self, dep: Union[int, str], *counts: int) -> sp.Symbol:
        """Jet symbol by dependent (index or name) and per-slot derivative counts."""
        a = self.dependent.index(dep) if isinstance(dep, str) else dep
        if len(counts) != self.n:
            raise NameResolutionError(
                f"expected {self.n} derivative counts, got {len(counts)}")
        return self.symbol_of(JetVariable(a, MultiIndex(tuple(counts))))

    def decode(self, sym: sp.Symbol) -> Union[JetVariable, None]:
        """JetVariable of a registered symbol, None for anything else."""
        return self._registry.get(sym)  # type: ignore[attr-defined]

    def is_independent(self, sym: sp.Symbol) -> bool:
        return sym in self._x_syms  # type: ignore[attr-defined]

    def jet_atoms(self, sym_expr: sp.Expr, min_order: int = 0) -> dict[sp.Symbol, JetVariable]:
        """Registered jet symbols present, filtered by minimum derivative order."""
        out = {}
        registry = self._registry  # type: ignore[attr-defined]
        for s in sym_expr.free_symbols:
            jv = registry.get(s)
            if jv is not None and jv.order >= min_order:
                out[s] = jv
        return out

    def order_of(self, sym_expr: sp.Expr) -> int:
        """Highest derivative order present (0 if no jet variables)."""
        atoms = self.jet_atoms(sym_expr)
        return max((jv.order for jv in atoms.values()), default=0)

    def bump_symbol(self, sym: sp.Symbol, i: int) -> sp.Symbol:
        jv = self.decode(sym)
        if jv is None:
            raise NameResolutionError(f"{sym} is not a jet variable of the context")
        return self.symbol_of(JetVariable(jv.dep, jv.alpha.bump(i)))

    def rank(self, sym: sp.Symbol) -> tuple:
        """Ranking key: graded, then lex on the multi-index (first-declared
        independent variable weighs most), then dependent index (earlier
        dependents rank higher)."""
        jv = self.decode(sym)
        if jv is None:
            raise NameResolutionError(f"{sym} is not a jet variable of the context")
        return (jv.order, jv.alpha.entries, -jv.dep)

    def leading_jet(self, sym_expr: sp.Expr, min_order: int = 1) -> Union[sp.Symbol, None]:
        """Highest-ranked jet symbol of order >= min_order, or None."""
        atoms = self.jet_atoms(sym_expr, min_order=min_order)
        if not atoms:
            return None
        return max(atoms, key=self.rank)

    def expr(self, obj) -> "Expr":
        return Expr(self, obj)


_NUMERIC = (int, Fraction, sp.Integer, sp.Rational)


def _canonical(sym: sp.Expr) -> sp.Expr:
    sym = sp.sympify(sym)
    if sym.has(sp.Float):
        raise MalformedExpressionError("float literals are outside the expression class")
    try:
        out = sp.cancel(sym)
    except (sp.PolynomialError, NotImplementedError, ZeroDivisionError):
        out = sp.expand(sym)
    if out.has(sp.zoo) or out.has(sp.nan) or out.has(sp.oo) or out.has(-sp.oo):
        raise MalformedExpressionError(f"division by an identically zero denominator in {sym}")
    return out


def _in_rational_class(sym: sp.Expr) -> bool:
    """True when canonical equality is decisive (no transcendental atoms)."""
    for node in sp.preorder_traversal(sym):
        if isinstance(node, (AppliedUndef, sp.Derivative)):
            return False
        if node.func in (sp.exp, sp.log):
            return False
        if isinstance(node, sp.Pow) and not node.exp.is_Integer:
            return False
    return True


@dataclass(frozen=True)
class ZeroVerdict:
    is_zero: bool
    exact: bool  # False when decided by random evaluation

    @property
    def confidence(self) -> str:
        return "exact" if self.exact else "probabilistic"


@dataclass(frozen=True)
class Expr:
    """A context-bound expression held in canonical form."""

    ctx: VariableContext
    sym: sp.Expr

    def __post_init__(self) -> None:
        object.__setattr__(self, "sym", _canonical(self.sym))

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> sp.Expr:
        if isinstance(other, Expr):
            if other.ctx != self.ctx:
                raise ValueError("mixing expressions from different contexts")
            return other.sym
        if isinstance(other, _NUMERIC):
            return sp.sympify(Fraction(other) if isinstance(other, int) else other)
        if isinstance(other, sp.Expr):
            return other
        raise TypeError(f"cannot combine Expr with {type(other)!r}")

    def __add__(self, other):
        return Expr(self.ctx, self.sym + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Expr(self.ctx, self.sym - self._coerce(other))

    def __rsub__(self, other):
        return Expr(self.ctx, self._coerce(other) - self.sym)

    def __mul__(self, other):
        return Expr(self.ctx, self.sym * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Expr(self.ctx, self.sym / self._coerce(other))

    def __rtruediv__(self, other):
        return Expr(self.ctx, self._coerce(other) / self.sym)

    def __pow__(self, other):
        return Expr(self.ctx, self.sym ** self._coerce(other))

    def __neg__(self):
        return Expr(self.ctx, -self.sym)

    # -- structure ----------------------------------------------------------

    @property
    def order(self) -> int:
        return self.ctx.order_of(self.sym)

    def jet_symbols(self, min_order: int = 0) -> dict[sp.Symbol, JetVariable]:
        return self.ctx.jet_atoms(self.sym, min_order=min_order)

    def __str__(self) -> str:
        return sp.sstr(self.sym)

    def __repr__(self) -> str:
        return f"Expr({sp.sstr(self.sym)})"

    # -- spec operations ----------------------------------------------------

    def diff(self, v) -> "Expr":
        return partial_diff(self, v)

    def subs(self, bindings) -> "Expr":
        return substitute(self, bindings)

    def is_zero(self, points: int | None = None, seed: int | None = None) -> bool:
        return zero_verdict(self, points=points, seed=seed).is_zero

    def zero_verdict(self, points: int | None = None, seed: int | None = None) -> ZeroVerdict:
        return zero_verdict(self, points=points, seed=seed)


def normalize(e: Expr) -> Expr:
    """Canonical form (idempotent; the Expr constructor already applies it)."""
    return Expr(e.ctx, e.sym)


def _resolve_symbol(ctx: VariableContext, v) -> sp.Symbol:
    if isinstance(v, JetVariable):
        return ctx.symbol_of(v)
    if isinstance(v, Expr):
        v = v.sym
    if isinstance(v, str):
        v = sp.Symbol(v)
    if not isinstance(v, sp.Symbol):
        raise NameResolutionError(f"{v!r} does not name a variable")
    if ctx.is_independent(v) or ctx.decode(v) is not None:
        return v
    raise NameResolutionError(f"{v} is not a variable of the context")


def partial_diff(e: Expr, v) -> Expr:
    """Formal partial derivative; jet coordinates count as independent symbols."""
    return Expr(e.ctx, e.sym.diff(_resolve_symbol(e.ctx, v)))


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneous substitution of jet variables, then normalization."""
    table = {}
    for k, val in bindings.items():
        k_sym = _resolve_symbol(e.ctx, k)
        if k_sym in table:
            raise ValueError(f"duplicate binding for {k_sym}")
        table[k_sym] = val.sym if isinstance(val, Expr) else sp.sympify(val)
    return Expr(e.ctx, e.sym.subs(table, simultaneous=True))


# Default number of random evaluation points for the probabilistic zero test.
DEFAULT_ZERO_TEST_POINTS = 8
_ZERO_EPS = sp.Float("1e-35", 10)
_EVAL_DIGITS = 50


def _random_rational(rng: random.Random) -> sp.Rational:
    # positive, away from 0 and from small poles: p/q with 1 <= p,q <= 9
    return sp.Rational(rng.randint(1, 9), rng.randint(1, 9)) + sp.Rational(1, 17)


def _numeric_probe(sym: sp.Expr, points: int, seed: int) -> bool:
    """True when the expression vanishes at ``points`` random rational points."""
    opaque = {a: sp.Symbol(f"_op{i}") for i, a in
              enumerate(sorted(sym.atoms(sp.Derivative, AppliedUndef), key=sp.default_sort_key))}
    probe = sym.xreplace(opaque) if opaque else sym
    symbols = sorted(probe.free_symbols, key=sp.default_sort_key)
    rng = random.Random(seed)
    done = 0
    attempts = 0
    while done < points:
        attempts += 1
        if attempts > 8 * points:
            raise MalformedExpressionError(
                "probabilistic zero test failed to find admissible sample points")
        point = {s: _random_rational(rng) for s in symbols}
        val = probe.subs(point).evalf(_EVAL_DIGITS)
        if val.has(sp.zoo, sp.nan, sp.oo):
            continue
        try:
            magnitude = abs(complex(val))
        except (TypeError, ValueError):
            continue
        if magnitude > float(_ZERO_EPS):
            return False
        done += 1
    return True


def zero_verdict(e: Expr, points: int | None = None, seed: int | None = None) -> ZeroVerdict:
    """Decide whether ``e`` is zero.

    Exact on the rational core; expressions with transcendental atoms that do
    not cancel structurally fall back to evaluation at random rational points
    and the verdict is labeled probabilistic.
    """
    if e.sym == 0:
        return ZeroVerdict(True, True)
    if _in_rational_class(e.sym):
        return ZeroVerdict(False, True)
    k = DEFAULT_ZERO_TEST_POINTS if points is None else points
    s = 0 if seed is None else seed
    return ZeroVerdict(_numeric_probe(e.sym, k, s), False)


def is_zero(e: Expr, points: int | None = None, seed: int | None = None) -> bool:
    return zero_verdict(e, points=points, seed=seed).is_zero


def collect_jet_coefficients(e: Expr, parametric: Iterable) -> dict[Expr, Expr]:
    """Coefficients of ``e`` as a polynomial in the parametric jet variables.

    Returns a map monomial -> coefficient whose sum reconstructs ``e``; the
    zero expression yields the empty map.
    """
    syms = [_resolve_symbol(e.ctx, p) for p in parametric]
    if len(set(syms)) != len(syms):
        raise ValueError("parametric variables not pairwise distinct")
    if e.sym == 0:
        return {}
    if not syms:
        return {Expr(e.ctx, sp.Integer(1)): e}
    try:
        poly = sp.Poly(e.sym, *syms)
    except sp.PolynomialError as exc:
        raise UnsupportedFormError(
            f"expression is not polynomial in {syms}: {exc}") from exc
    out: dict[Expr, Expr] = {}
    for exponents, coeff in poly.terms():
        if coeff == 0:
            continue
        monomial = sp.Mul(*[s ** k for s, k in zip(syms, exponents)])
        out[Expr(e.ctx, monomial)] = Expr(e.ctx, coeff)
    return out
