"""Sample grids on S^2 and S^3."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def sphere_point(theta1, theta2) -> np.ndarray:
    """x = (cos t2 cos t1, cos t2 sin t1, sin t2), stacked on the last axis."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    c2 = np.cos(theta2)
    return np.stack([c2 * np.cos(theta1), c2 * np.sin(theta1), np.sin(theta2)], axis=-1)


def sphere_angles(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    return np.stack([np.arctan2(x[..., 1], x[..., 0]), np.arcsin(np.clip(x[..., 2] / r, -1, 1))], -1)


def fejer_weights(n: int) -> np.ndarray:
    """Fejer's first rule on [-1, 1] at nodes cos((j + 1/2) pi / n)."""
    theta = (np.arange(n) + 0.5) * np.pi / n
    k = np.arange(1, n // 2 + 1)
    s = np.cos(2.0 * np.outer(theta, k)) / (4.0 * k**2 - 1.0)
    return 2.0 / n * (1.0 - 2.0 * s.sum(axis=1))


@dataclass(frozen=True)
class S2Grid:
    """Equiangular (theta1, theta2) product grid, half-offset in theta2.

    ``theta1_i = 2 pi i / n1`` and ``theta2_j = -pi/2 + (j + 1/2) pi / n2``.
    Flattened point order is row-major in (j, i): theta2 rows, theta1 columns.
    """

    n1: int
    n2: int
    dim: int = field(default=3, init=False)

    @classmethod
    def square(cls, N: int) -> "S2Grid":
        return cls(N, max(N // 2, 2))

    @property
    def theta1(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n1) / self.n1

    @property
    def theta2(self) -> np.ndarray:
        return -0.5 * np.pi + (np.arange(self.n2) + 0.5) * np.pi / self.n2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def spacing(self) -> float:
        return np.pi / self.n2

    @property
    def angles(self) -> np.ndarray:
        T1, T2 = np.meshgrid(self.theta1, self.theta2)
        return np.stack([T1.ravel(), T2.ravel()], axis=1)

    @property
    def angle_names(self) -> tuple[str, ...]:
        return ("theta1", "theta2")

    @property
    def points(self) -> np.ndarray:
        a = self.angles
        return sphere_point(a[:, 0], a[:, 1])

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for the area measure, summing to 4 pi."""
        w2 = fejer_weights(self.n2)
        return np.repeat(w2, self.n1) * (2.0 * np.pi / self.n1)

    def describe(self) -> dict:
        return {"kind": "S2", "n1": self.n1, "n2": self.n2, "points": self.size}


@dataclass(frozen=True)
class S3Grid:
    """Hyperspherical three-angle product grid on S^3 with half-offsets.

    x = (cos chi, sin chi cos th, sin chi sin th cos ph, sin chi sin th sin ph),
    chi, th in (0, pi) half-offset, ph in [0, 2 pi).  When ``max_points`` is
    set the grid is thinned by a fixed stride.
    """

    N: int
    max_points: int | None = None
    dim: int = field(default=4, init=False)

    @property
    def full_size(self) -> int:
        return self.N**3

    @property
    def _index(self) -> np.ndarray:
        idx = np.arange(self.full_size)
        if self.max_points is not None and self.full_size > self.max_points:
            stride = self.full_size / self.max_points
            idx = np.unique(np.floor(np.arange(self.max_points) * stride).astype(int))
        return idx

    @property
    def size(self) -> int:
        return len(self._index)

    @property
    def spacing(self) -> float:
        return np.pi / self.N

    @property
    def angles(self) -> np.ndarray:
        N = self.N
        half = (np.arange(N) + 0.5) * np.pi / N
        ph = 2.0 * np.pi * np.arange(N) / N
        C, T, P = np.meshgrid(half, half, ph, indexing="ij")
        a = np.stack([C.ravel(), T.ravel(), P.ravel()], axis=1)
        return a[self._index]

    @property
    def angle_names(self) -> tuple[str, ...]:
        return ("chi", "theta", "phi")

    @property
    def points(self) -> np.ndarray:
        a = self.angles
        c, t, p = a[:, 0], a[:, 1], a[:, 2]
        sc, st = np.sin(c), np.sin(t)
        return np.stack([np.cos(c), sc * np.cos(t), sc * st * np.cos(p), sc * st * np.sin(p)], 1)

    def describe(self) -> dict:
        return {"kind": "S3", "N": self.N, "points": self.size}


def sphere_grid(dim: int, N: int, max_points: int | None = None):
    if dim == 3:
        return S2Grid.square(N)
    if dim == 4:
        return S3Grid(N, max_points)
    raise ValueError("grids exist for dimension 3 and 4")


def random_sphere_points(m: int, dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)
