import numpy as np
import pytest
import sympy as sym
from hypothesis import given
from hypothesis import strategies as st

from rigidity.calculus import (
    CLASSES,
    classify_hessian,
    default_tau,
    evaluate,
    fd_derivatives,
    fd_third,
    gradient_chart,
    hessian_chart,
    hessian_spherical,
)
from rigidity.errors import ChartPoleError, PoleProximityError, StepTooLarge
from rigidity.grids import sphere_angles, sphere_point
from rigidity.profiles import PROFILES, HomogeneousFunction, Profile, homogeneous

from conftest import ORDER_ONE_R3, sphere_sample

X1SQ = Profile("x1sq", 3, "x1^2/x3", "test", chart_plus=lambda p: p[0] * p[0])
X1X2 = Profile("x1x2", 3, "x1 x2/x3", "test", chart_plus=lambda p: p[0] * p[1])
ONE = Profile("one", 3, "x3", "test", chart_plus=lambda p: 1.0 + 0.0 * p[0])


# --- evaluation ------------------------------------------------------------


def test_eval_identity_case():
    assert evaluate(homogeneous("linear:x3"), np.array([0.0, 0.0, 2.0])) == 2.0


def test_eval_lo_first_component_at_e1():
    assert evaluate(homogeneous("lo-f1"), np.array([1.0, 0, 0, 0])) == pytest.approx(np.sqrt(5) / 2, abs=1e-15)


def test_eval_q2_over_r_direct_substitution():
    assert evaluate(homogeneous("q2-over-r"), np.array([3.0, 4.0, 0.0])) == pytest.approx(-7 / 5, abs=1e-15)


def test_eval_chart_pole_error_with_single_chart():
    u = HomogeneousFunction(X1SQ)
    with pytest.raises(ChartPoleError):
        u.eval(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ChartPoleError):
        u.eval(np.array([1.0, 0.0, -1.0]))


def test_eval_rejects_origin():
    with pytest.raises(ValueError):
        homogeneous("radial").eval(np.zeros(3))


# --- projective chart ------------------------------------------------------


@pytest.mark.parametrize("p", [(0.0, 0.0), (0.7, -1.3), (3.0, 2.0)])
def test_gradient_chart_constant_and_linear(p):
    np.testing.assert_allclose(gradient_chart(ONE, p), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(gradient_chart(PROFILES["linear:x1"], p), [1, 0, 0], atol=1e-15)


def test_gradient_chart_x1_squared():
    # u = x1^2/x3: grad = (2 x1/x3, 0, -x1^2/x3^2) at (3, 2, 1)
    np.testing.assert_allclose(gradient_chart(X1SQ, (3.0, 2.0)), [6.0, 0.0, -9.0], atol=1e-14)


def test_hessian_chart_linear_is_zero():
    H = hessian_chart(PROFILES["linear:mix"], (0.4, -0.2))
    np.testing.assert_allclose(H, 0.0, atol=1e-14)


def test_hessian_chart_x1x2_at_origin():
    expected = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], float)
    np.testing.assert_allclose(hessian_chart(X1X2, (0.0, 0.0)), expected, atol=1e-15)


def test_hessian_chart_x1_squared():
    expected = np.array([[2, 0, -2], [0, 0, 0], [-2, 0, 2]], float)
    np.testing.assert_allclose(hessian_chart(X1SQ, (1.0, 0.0)), expected, atol=1e-14)


def test_hessian_chart_annihilates_position(rng):
    P = rng.uniform(-2, 2, size=(50, 2))
    H = hessian_chart(PROFILES["trig"], P)
    X = np.concatenate([P, np.ones((50, 1))], 1)
    assert np.abs(np.einsum("mij,mj->mi", H, X)).max() < 1e-12
    np.testing.assert_allclose(H, np.swapaxes(H, 1, 2), atol=1e-14)


def test_hessian_chart_minus_sign_matches_ambient(rng):
    u = homogeneous("cubic-mix")
    P = rng.uniform(-1, 1, size=(20, 2))
    X = np.concatenate([P, -np.ones((20, 1))], 1)
    np.testing.assert_allclose(hessian_chart(u.profile, P, sign=-1), u.hessian(X), atol=1e-12)
    np.testing.assert_allclose(gradient_chart(u.profile, P, sign=-1), u.gradient(X), atol=1e-12)


# --- spherical chart -------------------------------------------------------


def test_hessian_spherical_linear_profiles():
    from rigidity import jets

    forms = [lambda t: jets.sin(t[1]), lambda t: jets.cos(t[1]) * jets.cos(t[0])]
    T = np.array([[0.3, -0.4], [2.0, 1.1], [-1.0, 0.0]])
    for f in forms:
        np.testing.assert_allclose(hessian_spherical(f, T), 0.0, atol=1e-14)


def test_hessian_spherical_q2_over_r_at_e1():
    H = hessian_spherical(PROFILES["q2-over-r"], (0.0, 0.0))
    np.testing.assert_allclose(H, np.diag([0.0, -3.0, -1.0]), atol=1e-14)


def test_hessian_spherical_pole_error():
    with pytest.raises(PoleProximityError):
        hessian_spherical(PROFILES["q2-over-r"], (0.0, np.pi / 2 - 1e-4))
    hessian_spherical(PROFILES["q2-over-r"], (0.0, np.pi / 2 - 2e-3))


def test_hessian_spherical_off_diagonal_entry_oracle():
    # mixed frame entry H23 is exercised by a profile with g_12 != 0; sympy oracle
    x1, x2, x3 = sym.symbols("x1 x2 x3", real=True)
    r = sym.sqrt(x1**2 + x2**2 + x3**2)
    expr = x1 * x2 * x3 / r**2 + x1**2 * x3 / r**2
    Hs = sym.hessian(expr, (x1, x2, x3))
    prof = Profile(
        "t", 3, "", "", ambient=lambda x: x[0] * x[1] * x[2] / (x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
        + x[0] ** 2 * x[2] / (x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
    )
    for t in [(0.4, 0.7), (-1.2, -0.9), (2.5, 0.2)]:
        x = sphere_point(*t)
        exact = np.array(Hs.subs({x1: x[0], x2: x[1], x3: x[2]}).evalf(30), dtype=float)
        np.testing.assert_allclose(hessian_spherical(prof, t), exact, atol=1e-12)


# --- finite differences ----------------------------------------------------


def test_fd_x1_squared_entry():
    u = HomogeneousFunction(X1SQ)
    H = fd_derivatives(u, np.array([1.0, 0.0, 1.0]), order=2, step=1e-3)
    assert abs(H[0, 0] - 2.0) < 1e-5


def test_fd_linear_gradient():
    u = homogeneous("linear:mix")
    G = fd_derivatives(u, sphere_sample(10, seed=3), order=1, step=1e-3)
    np.testing.assert_allclose(G, np.tile([2.0, -1.0, 0.5], (10, 1)), atol=1e-10)


def test_fd_step_halving_ratio():
    u = homogeneous("trig")
    X = sphere_sample(20, seed=4)
    exact = u.hessian(X)
    e1 = np.abs(fd_derivatives(u, X, 2, 2e-2) - exact).max()
    e2 = np.abs(fd_derivatives(u, X, 2, 1e-2) - exact).max()
    assert 3.5 < e1 / e2 < 4.5


def test_fd_step_too_large():
    with pytest.raises(StepTooLarge):
        fd_derivatives(homogeneous("radial"), np.array([1e-3, 0.0, 0.0]), 2, 1e-3)
    with pytest.raises(ValueError):
        fd_derivatives(homogeneous("radial"), np.array([1.0, 0.0, 0.0]), 3, 1e-3)


# --- classification --------------------------------------------------------


def test_classify_zero():
    s = classify_hessian(np.zeros((3, 3)), np.array([0, 0, 1.0]))
    assert s.classification == "zero"


def test_classify_saddle():
    s = classify_hessian(np.diag([2.0, -2.0, 0.0]), np.array([0, 0, 1.0]))
    assert s.classification == "saddle"
    assert np.prod(s.eigenvalues) == pytest.approx(-4.0)
    assert list(s.eigenvalues) == sorted(s.eigenvalues, reverse=True)


def test_classify_definite_at_e1():
    s = classify_hessian(np.diag([0.0, -3.0, -1.0]), np.array([1.0, 0, 0]))
    assert s.classification == "definite"
    assert np.prod(s.eigenvalues) == pytest.approx(3.0)


def test_classify_semidefinite():
    s = classify_hessian(np.diag([0.0, -3.0, 0.0]), np.array([1.0, 0, 0]))
    assert s.classification == "semidefinite-nonzero"


def test_hessian_sample_serializes_row_major():
    M = np.array([[0, 1, 0], [1, 0, 2], [0, 2, 0]], float)
    d = classify_hessian(M, np.array([1.0, 0, 0])).to_dict()
    assert d["hessian"]["dim"] == 3 and d["hessian"]["data"][5] == 2.0


_EIG = st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-6)


@given(st.lists(_EIG, min_size=2, max_size=2), st.integers(0, 10_000))
def test_classification_matches_eigen_signs(mu, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    x = Q[:, 0]
    M = Q @ np.diag([0.0, *mu]) @ Q.T
    s = classify_hessian(M, x, 1e-8)
    mu = np.array(mu)
    big = np.abs(mu) > 1e-8
    if np.linalg.norm(mu) < 1e-8:
        assert s.classification == "zero"
    elif (mu > 1e-8).any() and (mu < -1e-8).any():
        assert s.classification == "saddle"
    elif big.all():
        assert s.classification == "definite"
    else:
        assert s.classification == "semidefinite-nonzero"
    assert s.classification in CLASSES


# --- invariants ------------------------------------------------------------

ALL_ORDER_ONE = [n for n in PROFILES] + ["random:1", "random:2"]


@pytest.mark.parametrize("name", ALL_ORDER_ONE)
def test_euler_and_radial_kernel(name):
    u = homogeneous(name)
    X = sphere_sample(200, u.dim, seed=7) * np.random.default_rng(1).uniform(0.3, 3.0, size=(200, 1))
    if u.profile.ambient is None:
        X = X[np.abs(X[:, 2]) < 0.95 * np.linalg.norm(X, axis=1)]
    assert np.abs(np.sum(X * u.gradient(X), 1) - u.eval(X)).max() < 1e-10
    assert np.abs(np.einsum("mij,mj->mi", u.hessian(X), X)).max() < 1e-8


@pytest.mark.parametrize("name", ORDER_ONE_R3 + ["lo-scalar", "lo-f2"])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_hessian_scaling(name, t):
    u = homogeneous(name)
    X = sphere_sample(50, u.dim, seed=8)
    np.testing.assert_allclose(u.hessian(t * X), u.hessian(X) / t, atol=1e-8)


def test_sympy_oracle_hessians():
    x = sym.symbols("x1:5", real=True)
    r3 = sym.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
    r4 = sym.sqrt(sum(v**2 for v in x))
    exprs = {
        "q2-over-r": ((x[0] ** 2 - x[1] ** 2) / r3, 3),
        "cubic-mix": ((x[0] ** 3 + x[0] * x[1] * x[2] - 2 * x[2] ** 3) / r3**2, 3),
        "trig": (r3 * sym.sin(x[0] / r3) * sym.cos(x[2] / r3) + x[1], 3),
        "ellipsoidal": (sym.sqrt(x[0] ** 2 + 2 * x[1] ** 2 + 3 * x[2] ** 2), 3),
        "exp-mix": (r3 * sym.exp(x[1] / r3) - x[0] * x[2] / r3, 3),
        "lo-scalar": ((x[0] ** 2 + x[1] ** 2 - x[2] ** 2 - x[3] ** 2) / r4, 4),
    }
    for name, (e, n) in exprs.items():
        H = sym.lambdify(x[:n], sym.hessian(e, x[:n]), "numpy")
        u = homogeneous(name)
        for p in sphere_sample(5, n, seed=9):
            np.testing.assert_allclose(u.hessian(p), np.array(H(*p), float), atol=1e-12, err_msg=name)


def _chart_spherical_ambient(name, X):
    u = homogeneous(name)
    sign = np.where(X[:, 2] > 0, 1, -1)
    out = []
    for s in (1, -1):
        sel = sign == s
        P = X[sel, :2] / np.abs(X[sel, 2:3])
        Hc = hessian_chart(u.profile, P, s) * np.linalg.norm(np.concatenate([P, np.ones((len(P), 1))], 1), axis=1)[:, None, None]
        Hs = hessian_spherical(u.profile, sphere_angles(X[sel]))
        out.append((Hc, Hs, u.hessian(X[sel])))
    return out


@pytest.mark.parametrize("name", ORDER_ONE_R3)
def test_chart_and_spherical_agree(name):
    X = sphere_sample(100, 3, seed=10, min_last=0.1, max_lat=1.4)
    for Hc, Hs, Ha in _chart_spherical_ambient(name, X):
        assert np.abs(Hc - Hs).max() < 1e-8
        assert np.abs(Hs - Ha).max() < 1e-8


@pytest.mark.parametrize("name", ["q2-over-r", "cubic-mix", "trig", "exp-mix", "ellipsoidal"])
def test_value_identities_at_pole(name):
    # after rotating a sample direction to e3: u_3i = 0 and u_3ij = -u_ij (i, j in {1, 2})
    from rigidity.surface import rotation_to_pole

    base = homogeneous(name)
    for x in sphere_sample(3, seed=11):
        Q = rotation_to_pole(x)
        rot = Profile("rot", 3, "", "", ambient=lambda y, Q=Q: base._ambient_expr(None)(
            [Q[i, 0] * y[0] + Q[i, 1] * y[1] + Q[i, 2] * y[2] for i in range(3)]
        ))
        v = HomogeneousFunction(rot)
        p = np.array([0.0, 0.0, 1.0])
        H = v.hessian(p)
        T = fd_third(v, p, 1e-4)
        assert np.abs(H[2, :2]).max() < 1e-12
        np.testing.assert_allclose(T[2][:2, :2], -H[:2, :2], atol=1e-6)
        # analytic third derivatives agree with the finite-difference oracle
        np.testing.assert_allclose(v.third(p), T, atol=1e-6)


def test_default_tau_scales_with_hessians():
    H = np.stack([np.eye(3) * 10.0, np.zeros((3, 3))])
    assert default_tau(H) == pytest.approx(1e-8 * (1 + np.sqrt(300.0)))


@given(st.floats(-np.pi, np.pi), st.floats(-1.4, 1.4))
def test_spherical_matches_ambient_property(t1, t2):
    u = homogeneous("exp-mix")
    np.testing.assert_allclose(
        hessian_spherical(u.profile, (t1, t2)), u.hessian(sphere_point(t1, t2)), atol=1e-10
    )
