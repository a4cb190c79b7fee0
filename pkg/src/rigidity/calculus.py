"""Gradients and Hessians of homogeneous functions in projective and spherical charts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PoleProximityError, StepTooLarge
from .profiles import HomogeneousFunction, Profile, eval_jet

EPS_POLE = 1e-3

CLASSES = ("zero", "saddle", "semidefinite-nonzero", "definite")


def evaluate(u: HomogeneousFunction, x):
    """u(x) for a point (n,) or a batch (m, n)."""
    return u.eval(x)


# ---------------------------------------------------------------------------
# projective chart x_n = +-1


def _chart_jet(h: Profile, p, sign: int, order: int = 2):
    P = np.atleast_2d(np.asarray(p, dtype=float))
    if P.shape[1] != h.dim - 1:
        raise ValueError(f"chart points need {h.dim - 1} coordinates")
    return P, eval_jet(h.chart(sign), P, order)


def gradient_chart(h: Profile, p, sign: int = 1) -> np.ndarray:
    """grad u at (p, sign) from the chart restriction: (grad h, sign (h - p.grad h))."""
    P, J = _chart_jet(h, p, sign)
    last = sign * (J.v - np.sum(P * J.d1, axis=1))
    out = np.concatenate([J.d1, last[:, None]], axis=1)
    return out[0] if np.ndim(p) == 1 else out


def chart_factor(p, sign: int = 1) -> np.ndarray:
    """Lower-triangular factor L with D^2u(p, 1) = L [D^2h 0; 0 0] L^T."""
    P = np.atleast_2d(np.asarray(p, dtype=float))
    m, k = P.shape
    L = np.zeros((m, k + 1, k + 1))
    L[:, range(k), range(k)] = 1.0
    L[:, k, :k] = -P
    L[:, k, k] = 1.0
    if sign < 0:
        L[:, k, :] *= -1.0
    return L


def hessian_chart(h: Profile, p, sign: int = 1) -> np.ndarray:
    P, J = _chart_jet(h, p, sign)
    m, k = P.shape
    Hh = np.zeros((m, k + 1, k + 1))
    Hh[:, :k, :k] = J.d2
    L = chart_factor(P, sign)
    out = L @ Hh @ np.swapaxes(L, 1, 2)
    return out[0] if np.ndim(p) == 1 else out


# ---------------------------------------------------------------------------
# spherical chart (n = 3)


def spherical_frame(theta) -> np.ndarray:
    """Columns (e_r, e_theta1, e_theta2), orthonormal, shape (..., 3, 3)."""
    theta = np.asarray(theta, dtype=float)
    t1, t2 = theta[..., 0], theta[..., 1]
    c1, s1, c2, s2 = np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2)
    z = np.zeros_like(t1)
    er = np.stack([c2 * c1, c2 * s1, s2], -1)
    e1 = np.stack([-s1, c1, z], -1)
    e2 = np.stack([-s2 * c1, -s2 * s1, c2], -1)
    return np.stack([er, e1, e2], -1)


def check_pole(theta, eps_pole: float = EPS_POLE) -> None:
    t2 = np.atleast_2d(np.asarray(theta, dtype=float))[:, 1]
    if np.any(np.abs(t2) >= 0.5 * np.pi - eps_pole):
        raise PoleProximityError(f"|theta2| must stay below pi/2 - {eps_pole}")


def spherical_blocks(gjet, theta):
    """Tangential entries (H22, H23, H33) of the frame Hessian at r = 1.

    H22 = g_11 / cos^2 t2 - tan t2 g_2 + g
    H23 = g_12 / cos t2 + sin t2 / cos^2 t2 g_1
    H33 = g_22 + g
    """
    T = np.atleast_2d(np.asarray(theta, dtype=float))
    c, s = np.cos(T[:, 1]), np.sin(T[:, 1])
    g, g1, g2 = gjet.v, gjet.d1[:, 0], gjet.d1[:, 1]
    g11, g12, g22 = gjet.d2[:, 0, 0], gjet.d2[:, 0, 1], gjet.d2[:, 1, 1]
    h22 = g11 / c**2 - (s / c) * g2 + g
    h23 = g12 / c + s / c**2 * g1
    h33 = g22 + g
    return h22, h23, h33


def hessian_spherical(g, theta, eps_pole: float = EPS_POLE) -> np.ndarray:
    """D^2u at the unit point x(theta) from the spherical profile, as R H R^T."""
    expr = g.spherical_form() if isinstance(g, Profile) else g
    T = np.atleast_2d(np.asarray(theta, dtype=float))
    check_pole(T, eps_pole)
    J = eval_jet(expr, T, 2)
    h22, h23, h33 = spherical_blocks(J, T)
    H = np.zeros((T.shape[0], 3, 3))
    H[:, 1, 1], H[:, 1, 2], H[:, 2, 1], H[:, 2, 2] = h22, h23, h23, h33
    R = spherical_frame(T)
    out = R @ H @ np.swapaxes(R, 1, 2)
    return out[0] if np.ndim(theta) == 1 else out


# ---------------------------------------------------------------------------
# finite differences (oracle)


def _check_step(X, step):
    if step <= 0 or np.any(np.linalg.norm(X, axis=1) <= 2.0 * step):
        raise StepTooLarge(f"step {step} too large: need |x| > 2 step")


def fd_derivatives(u: HomogeneousFunction, x, order: int = 2, step: float = 1e-3) -> np.ndarray:
    """Central-difference gradient (order 1) or Hessian (order 2); error O(step^2)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    _check_step(X, step)
    m, n = X.shape
    E = np.eye(n) * step

    def f(Y):
        return np.asarray(u.eval(Y), dtype=float).reshape(m)

    if order == 1:
        out = np.stack([(f(X + E[i]) - f(X - E[i])) / (2 * step) for i in range(n)], 1)
    elif order == 2:
        out = np.empty((m, n, n))
        f0 = f(X)
        for i in range(n):
            out[:, i, i] = (f(X + E[i]) - 2 * f0 + f(X - E[i])) / step**2
            for j in range(i + 1, n):
                v = (
                    f(X + E[i] + E[j]) - f(X + E[i] - E[j]) - f(X - E[i] + E[j]) + f(X - E[i] - E[j])
                ) / (4 * step**2)
                out[:, i, j] = out[:, j, i] = v
    else:
        raise ValueError("order must be 1 or 2")
    return out[0] if np.ndim(x) == 1 else out


def fd_third(u: HomogeneousFunction, x, step: float = 1e-4) -> np.ndarray:
    """Third derivatives T[i, j, k] = d_k u_ij by central differences of the Hessian."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    _check_step(X, step)
    n = X.shape[1]
    E = np.eye(n) * step
    T = np.stack([(u.hessian(X + E[k]) - u.hessian(X - E[k])) / (2 * step) for k in range(n)], -1)
    return T[0] if np.ndim(x) == 1 else T


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class HessianSample:
    direction: np.ndarray
    hessian: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    frobenius: float

    def to_dict(self) -> dict:
        from .io import matrix_to_json

        return {
            "direction": self.direction.tolist(),
            "hessian": matrix_to_json(self.hessian),
            "eigenvalues": self.eigenvalues.tolist(),
            "classification": self.classification,
            "frobenius": self.frobenius,
        }


def default_tau(hessians) -> float:
    """1e-8 * (1 + largest Frobenius norm over the sample)."""
    H = np.asarray(hessians, dtype=float)
    scale = np.sqrt(np.sum(H * H, axis=(-2, -1))).max() if H.size else 0.0
    return 1e-8 * (1.0 + scale)


def _class_codes(mu, fro, tau):
    pos = (mu > tau).any(-1)
    neg = (mu < -tau).any(-1)
    nonzero = np.abs(mu) > tau
    codes = np.full(mu.shape[0], 2, dtype=np.int8)  # semidefinite-nonzero
    codes[pos & neg] = 1
    codes[nonzero.all(-1) & (pos ^ neg)] = 3
    codes[fro < tau] = 0
    return codes


def classify_batch(H, X, tau: float | None = None):
    """Tangential eigenvalues (descending), class codes into CLASSES, Frobenius norms."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    H = np.asarray(H, dtype=float).reshape(X.shape[0], X.shape[1], X.shape[1])
    if tau is None:
        tau = default_tau(H)
    mu, _ = _kernels.tangential_eigh(H, X)
    fro = np.sqrt(np.sum(H * H, axis=(1, 2)))
    return mu, _class_codes(mu, fro, tau), fro


def classify_hessian(M, x, tau_zero: float = 1e-8) -> HessianSample:
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    mu, codes, fro = classify_batch(M[None], x[None], tau_zero)
    return HessianSample(x, M, mu[0], CLASSES[codes[0]], float(fro[0]))
