import pytest
import sympy as sp

from jetred import VariableContext, make_field


@pytest.fixture
def ctx():
    """(t, x) with one unknown u: the workhorse 1+1 context."""
    return VariableContext(("t", "x"), ("u",))


@pytest.fixture
def t(ctx):
    return ctx.x_symbol(0)


@pytest.fixture
def x(ctx):
    return ctx.x_symbol(1)


@pytest.fixture
def u(ctx):
    return ctx.u_symbol(0)


@pytest.fixture
def jet(ctx):
    """jet(dt, dx) -> symbol of d^(dt+dx) u / dt^dt dx^dx."""
    return lambda dt, dx: ctx.jet("u", dt, dx)


@pytest.fixture
def example1(ctx, jet, t):
    """L = u_t + u_xx + t*u_x (explicitly t-dependent linear heat-type equation)."""
    return ctx.expr(jet(1, 0) + jet(0, 2) + t * jet(0, 1))


@pytest.fixture
def heat(ctx, jet):
    """L = u_t - u_xx."""
    return ctx.expr(jet(1, 0) - jet(0, 2))


@pytest.fixture
def burgers(ctx, jet, u):
    """L = u_t + u*u_x - u_xx."""
    return ctx.expr(jet(1, 0) + u * jet(0, 1) - jet(0, 2))


@pytest.fixture
def d_t(ctx):
    return make_field(ctx, (1, 0), (0,), name="d_t")


@pytest.fixture
def d_x(ctx):
    return make_field(ctx, (0, 1), (0,), name="d_x")
