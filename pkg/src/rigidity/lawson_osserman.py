"""The Lawson-Osserman cone R^4 -> R^3 and the inverse-metric residual check."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import S3Grid
from .profiles import HomogeneousFunction, homogeneous

LO_CONSTANT = np.sqrt(5.0) / 2.0


def lo_quadratic_forms() -> np.ndarray:
    """Q_k with f^k(x) = x.Q_k.x / (2|x|), shape (3, 4, 4)."""
    Q = np.zeros((3, 4, 4))
    Q[0] = np.diag([2.0, 2.0, -2.0, -2.0])
    Q[1, 0, 2] = Q[1, 2, 0] = Q[1, 1, 3] = Q[1, 3, 1] = 2.0
    Q[2, 1, 2] = Q[2, 2, 1] = 2.0
    Q[2, 0, 3] = Q[2, 3, 0] = -2.0
    return LO_CONSTANT * Q


def _points(x) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise ValueError("cone maps are undefined at the origin")
    return X


class ConeMap:
    """A 1-homogeneous map R^n -> R^K with analytic first and second derivatives."""

    dim: int
    codim: int

    def value(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def second(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class QuadraticConeMap(ConeMap):
    Q: np.ndarray

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    @property
    def codim(self) -> int:
        return self.Q.shape[0]

    def value(self, x):
        X = _points(x)
        v = 0.5 * np.einsum("mi,kij,mj->mk", X, self.Q, X) / np.linalg.norm(X, axis=1)[:, None]
        return v[0] if np.ndim(x) == 1 else v

    def jacobian(self, x):
        J, _ = _kernels.quadratic_cone_derivatives(_points(x), self.Q)
        return J[0] if np.ndim(x) == 1 else J

    def second(self, x):
        _, D2 = _kernels.quadratic_cone_derivatives(_points(x), self.Q)
        return D2[0] if np.ndim(x) == 1 else D2

    def perturbed(self, eps: float, k: int = 0, i: int = 0) -> "QuadraticConeMap":
        """Add eps * x_i^2 / |x| to component k."""
        Q = self.Q.copy()
        Q[k, i, i] += 2.0 * eps
        return QuadraticConeMap(Q)


@dataclass(frozen=True)
class LinearMap(ConeMap):
    M: np.ndarray

    @property
    def dim(self) -> int:
        return self.M.shape[1]

    @property
    def codim(self) -> int:
        return self.M.shape[0]

    def value(self, x):
        v = _points(x) @ self.M.T
        return v[0] if np.ndim(x) == 1 else v

    def jacobian(self, x):
        X = _points(x)
        J = np.broadcast_to(self.M, (len(X),) + self.M.shape).copy()
        return J[0] if np.ndim(x) == 1 else J

    def second(self, x):
        X = _points(x)
        D2 = np.zeros((len(X), self.codim, self.dim, self.dim))
        return D2[0] if np.ndim(x) == 1 else D2


LO_MAP = QuadraticConeMap(lo_quadratic_forms())


def lo_map(x) -> np.ndarray:
    """sqrt(5)/2 (x1^2+x2^2-x3^2-x4^2, 2x1x3+2x2x4, 2x2x3-2x1x4) / |x|."""
    return LO_MAP.value(x)


def lo_jacobian(x) -> np.ndarray:
    return LO_MAP.jacobian(x)


def lo_second(x) -> np.ndarray:
    return LO_MAP.second(x)


@dataclass(frozen=True)
class InducedMetric:
    point: np.ndarray
    g: np.ndarray
    a: np.ndarray

    @property
    def certificate(self) -> float:
        """Largest lambda with lambda I <= a <= I / lambda (a <= I always)."""
        return float(1.0 / np.linalg.eigvalsh(self.g).max())


def induced_metric(x, cone: ConeMap = LO_MAP) -> InducedMetric:
    """g = I + J^T J on the graph of the cone map and its inverse a."""
    x = np.asarray(x, dtype=float)
    J = cone.jacobian(x)
    g = np.eye(x.shape[-1]) + J.T @ J
    if np.linalg.eigvalsh(g).min() <= 0:
        raise ArithmeticError("induced metric lost positive definiteness")
    return InducedMetric(x, g, np.linalg.solve(g, np.eye(len(x))))


def residuals(X, cone: ConeMap = LO_MAP, backend: str | None = None):
    """Per-point sum_ij a_ij d_ij f^k (m, K) and the pointwise certificate (m,)."""
    X = _points(X)
    if isinstance(cone, QuadraticConeMap):
        return _kernels.quadratic_cone_residual(X, cone.Q, backend)
    J = cone.jacobian(X)
    D2 = cone.second(X)
    g = np.eye(X.shape[1])[None] + np.einsum("mki,mkj->mij", J, J)
    a = np.linalg.inv(g)
    res = np.einsum("mij,mkij->mk", a, D2)
    return res, 1.0 / np.linalg.eigvalsh(g)[:, -1]


@dataclass
class ResidualReport:
    residual_max: float
    component_max: list
    lambda_certificate: float
    grid: dict
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "residual_max": self.residual_max,
            "component_max": self.component_max,
            "lambda_certificate": self.lambda_certificate,
            "grid": self.grid,
            "wall_time": self.wall_time,
        }


def minimal_residual(grid=None, cone: ConeMap = LO_MAP, backend: str | None = None) -> ResidualReport:
    """max_k max_x |sum_ij a_ij(x) d_ij f^k(x)| over an S^3 grid (or a point array)."""
    if grid is None:
        grid = S3Grid(32, max_points=10_000)
    t0 = time.perf_counter()
    if isinstance(grid, np.ndarray):
        X, desc = grid, {"kind": "points", "points": int(len(grid))}
    else:
        X, desc = grid.points, grid.describe()
    res, lam = residuals(X, cone, backend)
    comp = np.abs(res).max(axis=0)
    return ResidualReport(
        float(comp.max()), comp.tolist(), float(lam.min()), desc, time.perf_counter() - t0
    )


def lo_scalar_profile() -> HomogeneousFunction:
    """(x1^2 + x2^2 - x3^2 - x4^2)/|x| on R^4."""
    return homogeneous("lo-scalar")
