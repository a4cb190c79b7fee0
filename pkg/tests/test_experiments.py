import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rigidity.coefficients import CoefficientField, random_elliptic_field
from rigidity.experiments import (
    DiscretizedProfile,
    ObstructionCurve,
    SearchOptions,
    analytic_derivatives,
    constant_component,
    discretize_operator,
    linear_part,
    minimize_residual,
    nonlinearity_norm,
    obstruction_study,
    operator_for,
    residual_functional,
)
from rigidity.grids import S2Grid
from rigidity.profiles import get_profile, homogeneous

IDENTITY = operator_for(CoefficientField.identity())


def _linear(grid, c=(0.7, -1.1, 0.4), scheme="spectral"):
    return DiscretizedProfile(grid, grid.points @ np.asarray(c), scheme)


def _y2(grid, scheme="spectral"):
    """Unit-norm degree-2 harmonic x1 x2 on the sphere."""
    g = DiscretizedProfile(grid, grid.points[:, 0] * grid.points[:, 1], scheme)
    return g.with_values(g.values / g.norm())


# --- differentiation -------------------------------------------------------


@pytest.mark.parametrize("name", ["q2-over-r", "trig", "exp-mix", "cubic-mix"])
def test_spectral_matches_analytic(name):
    grid = S2Grid.square(32)
    g = DiscretizedProfile.from_function(homogeneous(name), grid)
    num = g.derivatives()
    ref = analytic_derivatives(get_profile(name), grid)
    for k in ref:
        scale = max(1.0, np.abs(ref[k]).max())
        assert np.abs(num[k] - ref[k]).max() < 1e-6 * scale, k


@pytest.mark.parametrize("scheme", ["fd4", "spectral-theta1"])
def test_fd4_converges_at_fourth_order(scheme):
    name = "trig"
    errs = []
    for N in (32, 64):
        grid = S2Grid.square(N)
        num = DiscretizedProfile.from_function(homogeneous(name), grid, scheme).derivatives()
        ref = analytic_derivatives(get_profile(name), grid)
        errs.append(np.abs(num["g22"] - ref["g22"]).max())
    assert errs[0] / errs[1] > 12


def test_unknown_scheme():
    with pytest.raises(ValueError):
        DiscretizedProfile(S2Grid.square(8), np.zeros(32), "fd2")


# --- residual functional ---------------------------------------------------


def test_residual_linear_identity():
    grid = S2Grid.square(32)
    g = _linear(grid)
    assert residual_functional(IDENTITY, g) < 1e-16 * g.norm() ** 2


def test_residual_degree_two_harmonic():
    # (Delta_S2 + 2) Y = -4 Y for a degree-2 harmonic
    grid = S2Grid.square(32)
    g = DiscretizedProfile(grid, grid.points[:, 0] * grid.points[:, 1])
    R = residual_functional(IDENTITY, g)
    assert R == pytest.approx(16 * np.sum(grid.weights * g.values**2), rel=1e-10)


def test_residual_nonnegative_random():
    grid = S2Grid.square(16)
    for s in range(5):
        g = DiscretizedProfile.random(grid, s)
        assert residual_functional(operator_for(random_elliptic_field(s)), g) >= 0


def test_gradient_matches_finite_differences():
    grid = S2Grid.square(16)
    op = discretize_operator(operator_for(random_elliptic_field(3)), grid)
    g = DiscretizedProfile.random(grid, 1)
    R, G = residual_functional(op, g, gradient=True)
    rng = np.random.default_rng(0)
    h = 1e-4
    for _ in range(20):
        v = rng.normal(size=grid.size)
        fd = (residual_functional(op, g.with_values(g.values + h * v))
              - residual_functional(op, g.with_values(g.values - h * v))) / (2 * h)
        assert abs(fd - G @ v) <= 1e-6 * max(abs(fd), 1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_residual_invariant_under_linear_shift(a, b, c):
    grid = S2Grid.square(16)
    op = discretize_operator(IDENTITY, grid)
    g = DiscretizedProfile.random(grid, 7)
    shifted = g.with_values(g.values + grid.points @ np.array([a, b, c]))
    R0, R1 = residual_functional(op, g), residual_functional(op, shifted)
    assert abs(R1 - R0) <= 1e-10 * max(1.0, R0)


def test_fd4_residual_order():
    Rs = []
    for N in (16, 32, 64):
        grid = S2Grid.square(N)
        Rs.append(residual_functional(IDENTITY, _linear(grid, scheme="fd4")))
    assert Rs[0] / Rs[1] >= 8 and Rs[1] / Rs[2] >= 8


# --- nonlinearity ------------------------------------------------------------


def test_nonlinearity_of_sin_theta2():
    grid = S2Grid.square(32)
    g = DiscretizedProfile(grid, np.sin(grid.angles[:, 1]))
    assert nonlinearity_norm(g) < 1e-10
    np.testing.assert_allclose(linear_part(g), [0, 0, 1], atol=1e-12)


@pytest.mark.parametrize("c", [0.5, -2.0])
def test_nonlinearity_of_harmonic(c):
    grid = S2Grid.square(32)
    Y = _y2(grid)
    assert nonlinearity_norm(Y.with_values(c * Y.values)) == pytest.approx(abs(c), rel=1e-10)
    mixed = Y.with_values(c * Y.values + _linear(grid).values)
    assert nonlinearity_norm(mixed) == pytest.approx(abs(c), rel=1e-10)


def test_constant_is_not_linear():
    grid = S2Grid.square(32)
    g = DiscretizedProfile(grid, np.full(grid.size, 2.0))
    assert constant_component(g) == pytest.approx(2.0)
    assert nonlinearity_norm(g) == pytest.approx(g.norm(), rel=1e-12)


@given(st.integers(0, 1000), st.integers(0, 1000), st.floats(-5, 5))
def test_nonlinearity_is_seminorm(s1, s2, t):
    grid = S2Grid.square(16)
    f, g = DiscretizedProfile.random(grid, s1), DiscretizedProfile.random(grid, s2)
    nf, ng = nonlinearity_norm(f), nonlinearity_norm(g)
    assert nonlinearity_norm(f.with_values(f.values + g.values)) <= nf + ng + 1e-10
    assert nonlinearity_norm(f.with_values(t * f.values)) == pytest.approx(abs(t) * nf, abs=1e-10)


# --- minimization ------------------------------------------------------------


def test_linear_init_stops_immediately():
    grid = S2Grid.square(32)
    res = minimize_residual(IDENTITY, _linear(grid))
    assert res.iterations == 0 and res.status == "converged"
    assert res.residual < 1e-10


def test_identity_search_finds_linear():
    grid = S2Grid.square(32)
    res = minimize_residual(IDENTITY, DiscretizedProfile.random(grid, 11))
    assert res.converged
    assert res.nonlinearity < 1e-3 * res.profile.norm()


def test_history_monotone():
    grid = S2Grid.square(16)
    res = minimize_residual(operator_for(random_elliptic_field(2)), DiscretizedProfile.random(grid, 5))
    R = [h["R"] for h in res.history]
    assert all(b <= a for a, b in zip(R, R[1:]))
    assert res.profile.norm() == pytest.approx(1.0)


def test_budget_exhausted_is_reported():
    grid = S2Grid.square(16)
    opts = SearchOptions(max_iter=1, tol=1e-30)
    res = minimize_residual(operator_for(random_elliptic_field(4)), DiscretizedProfile.random(grid, 3), opts)
    assert res.status in ("budget-exhausted", "stagnated")
    assert not res.converged
    assert res.to_dict()["status"] == res.status


def test_search_deterministic():
    grid = S2Grid.square(16)
    a = minimize_residual(operator_for(random_elliptic_field(1)), DiscretizedProfile.random(grid, 1))
    b = minimize_residual(operator_for(random_elliptic_field(1)), DiscretizedProfile.random(grid, 1))
    np.testing.assert_array_equal(a.profile.values, b.profile.values)


# --- obstruction -------------------------------------------------------------


def test_obstruction_q2_infeasible_everywhere():
    curve = obstruction_study(homogeneous("q2-over-r"), (16, 32))
    assert all(e["infeasible_count"] > 0 for e in curve.entries)


def test_obstruction_linear_is_one():
    curve = obstruction_study(homogeneous("linear:mix"), (16, 32))
    assert [e["lambda"] for e in curve.entries] == [1.0, 1.0]


def test_obstruction_sorted_and_rows():
    curve = obstruction_study(homogeneous("lo-scalar"), (12, 8))
    assert [e["N"] for e in curve.entries] == [8, 12]
    assert ObstructionCurve.HEADER == ("N", "lambda", "infeasible_count")
    assert all(0 < r[1] <= 1 and r[2] == 0 for r in curve.rows())


def test_obstruction_all_infeasible_gives_zero():
    # |x| has a positive semidefinite Hessian everywhere: no point admits coefficients
    curve = obstruction_study(homogeneous("radial"), (16,))
    assert curve.entries[0]["lambda"] == 0.0
    assert curve.entries[0]["infeasible_count"] == curve.entries[0]["points"]


def test_obstruction_rejects_bad_resolution():
    with pytest.raises(ValueError):
        obstruction_study(homogeneous("radial"), (0,))
