"""Total derivatives, characteristics, prolongation and vector-field algebra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union

import sympy as sp

from .expr import (
    Expr,
    JetVariable,
    MultiIndex,
    VariableContext,
    _canonical,
    multiindices,
)


class TransversalityError(Exception):
    """Raised when an operation needs rank ||xi|| = l and the family lacks it."""

    def __init__(self, report: "TransversalityReport"):
        super().__init__(f"transversality fails: rank {report.rank} < {report.required}")
        self.report = report


@dataclass(frozen=True)
class VectorField:
    """First-order point field xi^i(x,u) d/dx_i + eta^a(x,u) d/du^a."""

    ctx: VariableContext
    xi: tuple[Expr, ...]
    eta: tuple[Expr, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "xi", tuple(self.xi))
        object.__setattr__(self, "eta", tuple(self.eta))
        if len(self.xi) != self.ctx.n or len(self.eta) != self.ctx.m:
            raise ValueError("coefficient count does not match the context")
        for coeff in self.xi + self.eta:
            if coeff.ctx != self.ctx:
                raise ValueError("coefficient bound to a different context")
            if coeff.jet_symbols(min_order=1):
                raise ValueError(
                    f"point-field coefficient {coeff} contains jet variables")

    def apply_point(self, f: sp.Expr) -> sp.Expr:
        """Action on a function of (x, u) only."""
        out = sp.Integer(0)
        for i, xi in enumerate(self.xi):
            out += xi.sym * f.diff(self.ctx.x_symbol(i))
        for a, eta in enumerate(self.eta):
            out += eta.sym * f.diff(self.ctx.u_symbol(a))
        return out

    def is_zero(self) -> bool:
        return all(c.sym == 0 for c in self.xi + self.eta)

    def scaled(self, factor: Expr, name: str = "") -> "VectorField":
        return VectorField(self.ctx,
                           tuple(factor * c for c in self.xi),
                           tuple(factor * c for c in self.eta),
                           name=name or self.name)

    def __str__(self) -> str:
        parts = []
        for i, c in enumerate(self.xi):
            if c.sym != 0:
                parts.append(f"({c}) d/d{self.ctx.independent[i]}")
        for a, c in enumerate(self.eta):
            if c.sym != 0:
                parts.append(f"({c}) d/d{self.ctx.dependent[a]}")
        return " + ".join(parts) if parts else "0"


def make_field(ctx: VariableContext, xi, eta, name: str = "") -> VectorField:
    """Build a VectorField from sympy expressions or numbers."""
    wrap = lambda v: v if isinstance(v, Expr) else Expr(ctx, v)
    return VectorField(ctx, tuple(wrap(v) for v in xi), tuple(wrap(v) for v in eta),
                       name=name)


@dataclass(frozen=True)
class VectorFieldFamily:
    """A family Q = {Q^1, ..., Q^l}, 1 <= l <= n, over one context."""

    members: tuple[VectorField, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("empty family")
        ctx = self.members[0].ctx
        if any(q.ctx != ctx for q in self.members):
            raise ValueError("family members live in different contexts")
        if len(self.members) > ctx.n:
            raise ValueError(f"family size {len(self.members)} exceeds n={ctx.n}")

    @property
    def ctx(self) -> VariableContext:
        return self.members[0].ctx

    @property
    def l(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, s: int) -> VectorField:
        return self.members[s]


def family(*fields: VectorField) -> VectorFieldFamily:
    return VectorFieldFamily(tuple(fields))


# -- total differentiation ---------------------------------------------------

def _D_raw(ctx: VariableContext, sym: sp.Expr, i: int) -> sp.Expr:
    out = sym.diff(ctx.x_symbol(i))
    for s, jv in ctx.jet_atoms(sym).items():
        out += ctx.symbol_of(JetVariable(jv.dep, jv.alpha.bump(i))) * sym.diff(s)
    return _canonical(out)


def total_derivative(e: Expr, i: int) -> Expr:
    """D_i e: the total derivative along the i-th independent variable."""
    if not 0 <= i < e.ctx.n:
        raise ValueError(f"independent-variable index {i} out of range")
    return Expr(e.ctx, _D_raw(e.ctx, e.sym, i))


def total_derivative_multi(e: Expr, alpha: MultiIndex) -> Expr:
    """D^alpha e, applied slot by slot."""
    sym = e.sym
    for i, count in enumerate(alpha):
        for _ in range(count):
            sym = _D_raw(e.ctx, sym, i)
    return Expr(e.ctx, sym)


# -- characteristics and prolongation -----------------------------------------

def characteristic(q: VectorField) -> tuple[Expr, ...]:
    """Q[u]^a = eta^a - xi^i u^a_i, one component per dependent variable."""
    ctx = q.ctx
    out = []
    for a in range(ctx.m):
        sym = q.eta[a].sym
        for i in range(ctx.n):
            sym -= q.xi[i].sym * ctx.symbol_of(JetVariable(a, MultiIndex.delta(ctx.n, i)))
        out.append(Expr(ctx, sym))
    return tuple(out)


class _CharDerivatives:
    """Cache of D^alpha Q[u]^a for one field."""

    def __init__(self, q: VectorField):
        self.q = q
        self.ctx = q.ctx
        self._cache: dict[tuple[int, tuple[int, ...]], sp.Expr] = {}
        for a, ch in enumerate(characteristic(q)):
            self._cache[(a, MultiIndex.zero(q.ctx.n).entries)] = ch.sym

    def get(self, a: int, alpha: MultiIndex) -> sp.Expr:
        key = (a, alpha.entries)
        if key not in self._cache:
            i = next(j for j, c in enumerate(alpha.entries) if c > 0)
            parent = MultiIndex(tuple(
                c - 1 if j == i else c for j, c in enumerate(alpha.entries)))
            self._cache[key] = _D_raw(self.ctx, self.get(a, parent), i)
        return self._cache[key]


@dataclass
class ProlongedField:
    """Prolongation of a point field: coefficient of d/du^a_alpha per jet symbol."""

    base: VectorField
    order: int
    coeffs: dict[sp.Symbol, Expr]


def _prolongation_coefficient(chars: _CharDerivatives, jv: JetVariable) -> sp.Expr:
    """phi^{a,alpha} = D^alpha Q[u]^a + xi^i u^a_{alpha+delta_i}."""
    ctx = chars.ctx
    sym = chars.get(jv.dep, jv.alpha)
    for i in range(ctx.n):
        xi = chars.q.xi[i].sym
        if xi != 0:
            sym += xi * ctx.symbol_of(JetVariable(jv.dep, jv.alpha.bump(i)))
    return _canonical(sym)


def prolong(q: VectorField, r: int) -> ProlongedField:
    """Standard r-th prolongation via the characteristic formula."""
    if r < 1:
        raise ValueError("prolongation order must be >= 1")
    ctx = q.ctx
    chars = _CharDerivatives(q)
    coeffs: dict[sp.Symbol, Expr] = {}
    for a in range(ctx.m):
        coeffs[ctx.u_symbol(a)] = q.eta[a]
        for alpha in multiindices(ctx.n, r, min_order=1):
            jv = JetVariable(a, alpha)
            coeffs[ctx.symbol_of(jv)] = Expr(
                ctx, _prolongation_coefficient(chars, jv))
    return ProlongedField(q, r, coeffs)


def apply_prolonged(q: VectorField, r: int, e: Expr) -> Expr:
    """Q_(r) acting on e; only the coefficients e actually needs are built."""
    ctx = q.ctx
    if e.order > r:
        raise ValueError(f"expression order {e.order} exceeds prolongation order {r}")
    chars = _CharDerivatives(q)
    out = sp.Integer(0)
    for i in range(ctx.n):
        if q.xi[i].sym != 0:
            out += q.xi[i].sym * e.sym.diff(ctx.x_symbol(i))
    for s, jv in e.jet_symbols().items():
        if jv.order == 0:
            coeff = q.eta[jv.dep].sym
        else:
            coeff = _prolongation_coefficient(chars, jv)
        if coeff != 0:
            out += coeff * e.sym.diff(s)
    return Expr(ctx, out)


# -- Lie-algebraic structure ---------------------------------------------------

def commutator(q1: VectorField, q2: VectorField) -> VectorField:
    if q1.ctx != q2.ctx:
        raise ValueError("commutator of fields over different contexts")
    ctx = q1.ctx
    xi = tuple(Expr(ctx, q1.apply_point(b.sym) - q2.apply_point(a.sym))
               for a, b in zip(q1.xi, q2.xi))
    eta = tuple(Expr(ctx, q1.apply_point(b.sym) - q2.apply_point(a.sym))
                for a, b in zip(q1.eta, q2.eta))
    return VectorField(ctx, xi, eta)


@dataclass
class InvolutionCertificate:
    involutive: bool
    # (s, s') -> the l functions zeta with [Q^s, Q^s'] = zeta^sigma Q^sigma
    zeta: dict[tuple[int, int], tuple[Expr, ...]]
    witness: tuple[int, int, VectorField] | None = None


def _solve_span(f: VectorFieldFamily, target: VectorField) -> tuple[Expr, ...] | None:
    """Coefficients c with target = c^sigma Q^sigma over functions of (x,u)."""
    ctx = f.ctx
    unknowns = sp.symbols(f"_zeta0:{f.l}")
    rows = []
    rhs = []
    for i in range(ctx.n):
        rows.append([f[s].xi[i].sym for s in range(f.l)])
        rhs.append(target.xi[i].sym)
    for a in range(ctx.m):
        rows.append([f[s].eta[a].sym for s in range(f.l)])
        rhs.append(target.eta[a].sym)
    system = sp.Matrix(rows), sp.Matrix(rhs)
    solutions = sp.linsolve(system, list(unknowns))
    if not solutions:
        return None
    sol = next(iter(solutions))
    # pick the particular solution with all free parameters set to zero
    sol = [sp.cancel(v.subs({u: 0 for u in unknowns})) for v in sol]
    # verify: linsolve over the rational-function field can pivot on
    # expressions, so double-check the identity
    for row, b in zip(rows, rhs):
        residual = _canonical(sum(c * a for c, a in zip(sol, row)) - b)
        if residual != 0:
            return None
    return tuple(Expr(ctx, v) for v in sol)


def check_involution(f: VectorFieldFamily) -> InvolutionCertificate:
    """Decide whether every commutator lies in the functional span of the family."""
    zeta: dict[tuple[int, int], tuple[Expr, ...]] = {}
    for s, s2 in itertools.combinations(range(f.l), 2):
        comm = commutator(f[s], f[s2])
        if comm.is_zero():
            zeta[(s, s2)] = tuple(Expr(f.ctx, 0) for _ in range(f.l))
            continue
        sol = _solve_span(f, comm)
        if sol is None:
            return InvolutionCertificate(False, zeta, witness=(s, s2, comm))
        zeta[(s, s2)] = sol
    return InvolutionCertificate(True, zeta)


@dataclass
class TransversalityReport:
    ok: bool
    rank: int
    required: int
    # the chosen nonvanishing l x l minor; its zero set is the degeneration locus
    minor_columns: tuple[int, ...] | None = None
    minor_determinant: Expr | None = None


def check_transversality(f: VectorFieldFamily) -> TransversalityReport:
    """Generic rank of the xi matrix: some l x l minor must not vanish identically."""
    ctx = f.ctx
    matrix = sp.Matrix([[f[s].xi[i].sym for i in range(ctx.n)] for s in range(f.l)])
    rank = matrix.rank(iszerofunc=lambda v: sp.cancel(v) == 0)
    for cols in itertools.combinations(range(ctx.n), f.l):
        det = sp.cancel(matrix[:, list(cols)].det())
        if det != 0:
            return TransversalityReport(True, rank, f.l, cols, Expr(ctx, det))
    return TransversalityReport(False, rank, f.l)
