"""Elliptic coefficient fields: synthesis, certification, chart and sphere reductions.

A coefficient field is a symmetric matrix-valued function on the unit sphere,
extended to R^n minus the origin as a 0-homogeneous function.  Its
ellipticity certificate is the largest ``lam`` with
``lam I <= a(x) <= lam^{-1} I`` over the sampled points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._kernels import BALANCED, CONDITION_EXCEEDED, INFEASIBLE, STATUS_NAMES, ZERO
from .calculus import chart_factor, check_pole, default_tau, spherical_blocks, spherical_frame
from .errors import ConditionExceeded, DegenerateCoefficient, Infeasible
from .io import matrix_to_json
from .profiles import HomogeneousFunction, Profile, eval_jet

KAPPA_MAX = 1e6


def certificate_of(mats) -> float:
    """Largest lam with lam I <= A <= I / lam for every matrix in the stack."""
    ev = np.linalg.eigvalsh(np.asarray(mats, dtype=float))
    return float(np.min(np.minimum(ev[..., 0], 1.0 / ev[..., -1])))


@dataclass(frozen=True)
class CoefficientField:
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    certificate: Optional[float] = None
    name: str = "field"

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        X = X / np.linalg.norm(X, axis=1, keepdims=True)
        return self.fn(X)

    def certify(self, X) -> float:
        return certificate_of(self(X))

    @classmethod
    def identity(cls, n: int = 3) -> "CoefficientField":
        return cls(n, lambda X: np.broadcast_to(np.eye(n), (X.shape[0], n, n)).copy(), 1.0, "identity")

    @classmethod
    def constant(cls, M) -> "CoefficientField":
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        return cls(n, lambda X: np.broadcast_to(M, (X.shape[0], n, n)).copy(), certificate_of(M[None]), "constant")

    @classmethod
    def synthesized(
        cls, u: HomogeneousFunction, kappa_max: float = KAPPA_MAX, tau: float = 1e-8
    ) -> "CoefficientField":
        """Pointwise balanced annihilator of D^2u; NaN where none exists."""

        def fn(X):
            A, _, _, status, _ = _kernels.synthesize_batch(u.hessian(X), X, tau, kappa_max)
            A = A.copy()
            A[status == INFEASIBLE] = np.nan
            return A

        return cls(u.dim, fn, None, f"synthesized:{u.name}")

    def to_json(self, X) -> dict:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        A = self(X)
        return {
            "name": self.name,
            "dim": self.dim,
            "certificate": self.certificate,
            "points": X.tolist(),
            "matrices": [matrix_to_json(M) for M in A],
        }


def random_elliptic_field(seed: int, lam: float = 0.5, n: int = 3) -> CoefficientField:
    """Smooth field Q(x) diag(mu(x)) Q(x)^T with mu in (lam, 1/lam).

    mu_i = exp(|log lam| tanh p_i(x)) with p_i random quadratics, and Q(x) the
    Cayley transform of a skew matrix with random linear entries.
    """
    rng = np.random.default_rng(seed)
    lin = rng.normal(size=(n, n))
    quad = rng.normal(size=(n, n, n)) * 0.5
    const = rng.normal(size=n) * 0.5
    skew = rng.normal(size=(n, n, n)) * 0.6
    skew0 = rng.normal(size=(n, n)) * 0.3
    L = abs(np.log(lam))

    def fn(X):
        p = const + X @ lin.T + np.einsum("kij,mi,mj->mk", quad, X, X)
        mu = np.exp(L * np.tanh(p))
        S = skew0 + np.einsum("ijk,mk->mij", skew, X)
        S = S - np.swapaxes(S, 1, 2)
        eye = np.eye(n)[None]
        Q = np.linalg.solve(eye - S, eye + S)
        return np.einsum("mik,mk,mjk->mij", Q, mu, Q)

    return CoefficientField(n, fn, lam, f"random:{seed}:lam={lam}")


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class Annihilator:
    matrix: np.ndarray
    certificate: float
    condition: float


def synthesize_pointwise(M, x=None, kappa_max: float = KAPPA_MAX, tau: float = 1e-8) -> Annihilator:
    """Positive definite A with tr(A M) = 0, balanced in the eigenbasis of M.

    ``x`` is the radial direction (M x = 0); when omitted the eigenvector of
    the smallest |eigenvalue| is used.  Raises :class:`Infeasible` when the
    tangential part of M is semidefinite and nonzero, and
    :class:`ConditionExceeded` when cond(A) > kappa_max.
    """
    M = np.asarray(M, dtype=float)
    if x is None:
        w, V = np.linalg.eigh(M)
        x = V[:, np.argmin(np.abs(w))]
    x = np.asarray(x, dtype=float)
    A, lam, kappa, status, _ = _kernels.synthesize_batch(M[None], x[None], tau, kappa_max)
    if status[0] == INFEASIBLE:
        raise Infeasible("tangential Hessian is semidefinite and nonzero")
    if status[0] == CONDITION_EXCEEDED:
        raise ConditionExceeded(f"condition number {kappa[0]:.6g} exceeds {kappa_max:.6g}", float(kappa[0]))
    return Annihilator(A[0], float(lam[0]), float(kappa[0]))


@dataclass
class SynthesisReport:
    profile: str
    grid: dict
    points: np.ndarray
    angles: np.ndarray
    angle_names: tuple
    matrices: np.ndarray
    pointwise_lambda: np.ndarray
    condition: np.ndarray
    status: np.ndarray
    eigenvalues: np.ndarray
    trace_residual: np.ndarray
    tau: float
    kappa_max: float

    @property
    def feasible(self) -> np.ndarray:
        return (self.status == ZERO) | (self.status == BALANCED)

    @property
    def infeasible_points(self) -> np.ndarray:
        return np.flatnonzero(self.status == INFEASIBLE)

    @property
    def condition_exceeded_points(self) -> np.ndarray:
        return np.flatnonzero(self.status == CONDITION_EXCEEDED)

    @property
    def certificate(self) -> float:
        f = self.feasible
        return float(self.pointwise_lambda[f].min()) if f.any() else 0.0

    @property
    def max_trace_residual(self) -> float:
        f = self.feasible
        return float(np.abs(self.trace_residual[f]).max()) if f.any() else 0.0

    def counts(self) -> dict:
        return {name: int(np.sum(self.status == k)) for k, name in enumerate(STATUS_NAMES)}

    def summary(self, witnesses: int = 5) -> dict:
        bad = self.infeasible_points[:witnesses]
        return {
            "profile": self.profile,
            "grid": self.grid,
            "certificate": self.certificate,
            "counts": self.counts(),
            "infeasible_count": int(len(self.infeasible_points)),
            "condition_exceeded_count": int(len(self.condition_exceeded_points)),
            "max_trace_residual": self.max_trace_residual,
            "tau": self.tau,
            "kappa_max": self.kappa_max,
            "infeasible_witnesses": [
                {"point": self.points[i].tolist(), "eigenvalues": self.eigenvalues[i].tolist()} for i in bad
            ],
        }

    def feasibility_rows(self):
        for i in range(len(self.points)):
            yield (*self.angles[i], self.pointwise_lambda[i], STATUS_NAMES[self.status[i]])

    def feasibility_header(self):
        return [*self.angle_names, "lambda_pointwise", "status"]

    def field_json(self) -> dict:
        return {
            "profile": self.profile,
            "grid": self.grid,
            "certificate": self.certificate,
            "points": self.points.tolist(),
            "status": [STATUS_NAMES[s] for s in self.status],
            "matrices": [matrix_to_json(M) for M in self.matrices],
        }


def synthesize_field(
    u: HomogeneousFunction,
    grid,
    kappa_max: float = KAPPA_MAX,
    tau: float | None = None,
    backend: str | None = None,
) -> SynthesisReport:
    """Pointwise synthesis over a sphere grid; infeasible points are reported, not raised."""
    if u.alpha != 1:
        raise ValueError("coefficient synthesis needs an order-one function")
    X = grid.points
    H = u.hessian(X)
    if tau is None:
        tau = default_tau(H)
    A, lam, kappa, status, mu = _kernels.synthesize_batch(H, X, tau, kappa_max, backend=backend)
    tr = np.einsum("mij,mij->m", np.nan_to_num(A), H)
    return SynthesisReport(
        profile=u.name,
        grid=grid.describe(),
        points=X,
        angles=grid.angles,
        angle_names=grid.angle_names,
        matrices=A,
        pointwise_lambda=lam,
        condition=kappa,
        status=np.asarray(status),
        eigenvalues=mu,
        trace_residual=tr,
        tau=float(tau),
        kappa_max=float(kappa_max),
    )


# ---------------------------------------------------------------------------
# chart reduction


@dataclass(frozen=True)
class ReducedChartCoefficients:
    """A(p) = upper-left block of L^T a(p, 1) L, so that tr(a D^2u) = tr(A D^2h)."""

    field: CoefficientField
    sign: int = 1

    def matrix(self, p) -> np.ndarray:
        P = np.atleast_2d(np.asarray(p, dtype=float))
        k = P.shape[1]
        X = np.concatenate([P, np.full((P.shape[0], 1), float(self.sign))], axis=1)
        a = self.field(X)
        L = chart_factor(P, self.sign)
        full = np.swapaxes(L, 1, 2) @ a @ L
        out = full[:, :k, :k]
        return out[0] if np.ndim(p) == 1 else out

    __call__ = matrix

    def ellipticity(self, p):
        """Local bound lambda(p) = min(min eig A, 1 / max eig A)."""
        ev = np.linalg.eigvalsh(self.matrix(p))
        return np.minimum(ev[..., 0], 1.0 / ev[..., -1])

    def apply(self, h: Profile, p) -> np.ndarray:
        """sum A_ij h_ij at chart points."""
        P = np.atleast_2d(np.asarray(p, dtype=float))
        J = eval_jet(h.chart(self.sign), P, 2)
        return np.einsum("mij,mij->m", self.matrix(P), J.d2)


def reduce_to_chart(a: CoefficientField, sign: int = 1) -> ReducedChartCoefficients:
    return ReducedChartCoefficients(a, sign)


# ---------------------------------------------------------------------------
# sphere reduction (n = 3)


@dataclass(frozen=True)
class SphericalOperator:
    """sum A_ij g_ij + sum B_i g_i + C g = tr(a D^2u) for u = r g at r = 1."""

    field: CoefficientField
    eps_pole: float = 1e-3

    def coefficients(self, theta):
        T = np.atleast_2d(np.asarray(theta, dtype=float))
        check_pole(T, self.eps_pole)
        R = spherical_frame(T)
        at = np.swapaxes(R, 1, 2) @ self.field(R[:, :, 0]) @ R
        a11, a12, a22 = at[:, 1, 1], at[:, 1, 2], at[:, 2, 2]
        c, s = np.cos(T[:, 1]), np.sin(T[:, 1])
        A = np.empty((T.shape[0], 2, 2))
        A[:, 0, 0] = a11 / c**2
        A[:, 0, 1] = A[:, 1, 0] = a12 / c
        A[:, 1, 1] = a22
        B = np.stack([2.0 * a12 * s / c**2, -a11 * s / c], axis=1)
        C = a11 + a22
        return A, B, C

    def apply(self, g, theta) -> np.ndarray:
        expr = g.spherical_form() if isinstance(g, Profile) else g
        T = np.atleast_2d(np.asarray(theta, dtype=float))
        A, B, C = self.coefficients(T)
        J = eval_jet(expr, T, 2)
        return np.einsum("mij,mij->m", A, J.d2) + np.einsum("mi,mi->m", B, J.d1) + C * J.v

    def frame_trace(self, g, theta) -> np.ndarray:
        """tr(a_frame H) assembled from the frame Hessian entries (cross-check)."""
        expr = g.spherical_form() if isinstance(g, Profile) else g
        T = np.atleast_2d(np.asarray(theta, dtype=float))
        check_pole(T, self.eps_pole)
        R = spherical_frame(T)
        at = np.swapaxes(R, 1, 2) @ self.field(R[:, :, 0]) @ R
        h22, h23, h33 = spherical_blocks(eval_jet(expr, T, 2), T)
        return at[:, 1, 1] * h22 + 2 * at[:, 1, 2] * h23 + at[:, 2, 2] * h33


def reduce_to_sphere(a: CoefficientField, eps_pole: float = 1e-3) -> SphericalOperator:
    if a.dim != 3:
        raise ValueError("the spherical reduction is defined for n = 3")
    return SphericalOperator(a, eps_pole)


# ---------------------------------------------------------------------------
# divergence form


def _divergence_matrix(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    a22 = A[..., 1, 1]
    if np.any(~(a22 > 0)):
        raise DegenerateCoefficient("A_22 must be positive")
    B = np.zeros_like(A)
    B[..., 0, 0] = A[..., 0, 0] / a22
    B[..., 0, 1] = 2.0 * A[..., 0, 1] / a22
    B[..., 1, 1] = 1.0
    return B


def divergence_coefficients(A):
    """B_11 = A_11/A_22, B_12 = 2 A_12/A_22, B_21 = 0, B_22 = 1.

    With sum A_ij h_ij = 0, each h_k solves div(B grad h_k) = 0 weakly.
    Accepts a matrix stack or a callable chart field; returns the same kind.
    """
    if callable(A):
        return lambda P: _divergence_matrix(A(np.atleast_2d(P)))
    return _divergence_matrix(A)


def bump_centers(offset: float = 0.3) -> np.ndarray:
    c = np.array([-offset, 0.0, offset])
    C1, C2 = np.meshgrid(c, c, indexing="ij")
    return np.stack([C1.ravel(), C2.ravel()], 1)


def weak_residual(
    B,
    grad_w: Callable[[np.ndarray], np.ndarray],
    centers=None,
    radius: float = 0.2,
    nodes: int = 16,
) -> tuple[float, np.ndarray]:
    """max over bumps phi of |int (B grad w) . grad phi|, tensor Gauss-Legendre.

    Bumps are cos^2(pi t1 / 2 rho) cos^2(pi t2 / 2 rho) on the square of
    half-width rho around each center.  Returns (max, per-bump values).
    """
    centers = bump_centers() if centers is None else np.atleast_2d(centers)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    T1, T2 = np.meshgrid(xg * radius, xg * radius, indexing="ij")
    W = np.outer(wg, wg).ravel() * radius**2
    k = np.pi / (2.0 * radius)
    t1, t2 = T1.ravel(), T2.ravel()
    c1, c2 = np.cos(k * t1), np.cos(k * t2)
    dphi = np.stack([-k * np.sin(2 * k * t1) * c2**2, -k * np.sin(2 * k * t2) * c1**2], 1)
    vals = np.empty(len(centers))
    for b, c in enumerate(centers):
        P = np.stack([t1 + c[0], t2 + c[1]], 1)
        Bm = B(P) if callable(B) else np.broadcast_to(np.asarray(B, float), (len(P), 2, 2))
        flux = np.einsum("mij,mj->mi", Bm, grad_w(P))
        vals[b] = np.sum(W * np.einsum("mi,mi->m", flux, dphi))
    return float(np.abs(vals).max()), vals


def chart_partial_gradient(h: Profile, i: int, sign: int = 1):
    """grad of the chart partial h_i, as a callable on chart points."""

    def grad(P):
        return eval_jet(h.chart(sign), np.atleast_2d(P), 2).d2[:, i, :]

    return grad
