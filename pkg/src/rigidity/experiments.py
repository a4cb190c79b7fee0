"""Residual functionals, rigidity searches and obstruction studies on S^2.

Profiles g live on the equiangular grid of :class:`S2Grid`.  Derivatives in
theta2 are taken along full great circles through both poles (the double
Fourier sphere extension): past a pole, row ``j`` continues as row
``2 n2 - 1 - j`` in the antipodal meridian.  The grid therefore needs an even
number of columns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import KAPPA_MAX, CoefficientField, SphericalOperator, synthesize_field
from .grids import S2Grid, sphere_grid
from .profiles import HomogeneousFunction, Profile, eval_jet

SCHEMES = ("fd4", "spectral-theta1", "spectral")

_FD4_D1 = {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}
_FD4_D2 = {-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12}


def _periodic_fd4(n: int, h: float):
    def build(stencil, scale):
        M = sp.lil_matrix((n, n))
        for i in range(n):
            for k, c in stencil.items():
                M[i, (i + k) % n] += c * scale
        return M.tocsr()

    return build(_FD4_D1, 1.0 / h), build(_FD4_D2, 1.0 / h**2)


def _periodic_spectral(n: int):
    """Fourier differentiation matrices on n equispaced points of [0, 2 pi), n even."""
    if n % 2:
        raise ValueError("spectral differentiation needs an even number of points")
    h = 2.0 * np.pi / n
    k = np.arange(n)
    diff = k[:, None] - k[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        D1 = 0.5 * sign / np.tan(0.5 * diff * h)
        D2 = -0.5 * sign / np.sin(0.5 * diff * h) ** 2
    np.fill_diagonal(D1, 0.0)
    np.fill_diagonal(D2, -np.pi**2 / (3.0 * h**2) - 1.0 / 6.0)
    return sp.csr_matrix(D1), sp.csr_matrix(D2)


def _periodic(n: int, kind: str):
    if kind == "spectral":
        return _periodic_spectral(n)
    return _periodic_fd4(n, 2.0 * np.pi / n)


@dataclass(frozen=True)
class Differentiation:
    """Sparse matrices acting on row-major (theta2, theta1) nodal vectors."""

    D1: sp.csr_matrix
    D11: sp.csr_matrix
    D2: sp.csr_matrix
    D22: sp.csr_matrix
    D12: sp.csr_matrix


_DIFF_CACHE: dict = {}


def differentiation(grid: S2Grid, scheme: str = "spectral") -> Differentiation:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    key = (grid.n1, grid.n2, scheme)
    if key in _DIFF_CACHE:
        return _DIFF_CACHE[key]
    n1, n2 = grid.n1, grid.n2
    if n1 % 2:
        raise ValueError("the pole continuation needs an even number of theta1 columns")
    kind1 = "fd4" if scheme == "fd4" else "spectral"
    kind2 = "spectral" if scheme == "spectral" else "fd4"
    a1, a11 = _periodic(n1, kind1)
    I2 = sp.identity(n2, format="csr")
    D1 = sp.kron(I2, a1, format="csr")
    D11 = sp.kron(I2, a11, format="csr")

    # great-circle operators: extended index e < n2 is (e, i); e >= n2 is
    # (2 n2 - 1 - e, i + n1/2)
    b1, b2 = _periodic(2 * n2, kind2)
    ext_row = np.concatenate([np.arange(n2), np.arange(n2)[::-1]])
    ext_shift = np.concatenate([np.zeros(n2, int), np.full(n2, n1 // 2)])

    def lift(B):
        B = B.tocoo()
        keep = B.row < n2
        r, e, v = B.row[keep], B.col[keep], B.data[keep]
        rows, cols, vals = [], [], []
        for i in range(n1):
            rows.append(r * n1 + i)
            cols.append(ext_row[e] * n1 + (i + ext_shift[e]) % n1)
            vals.append(v)
        size = n1 * n2
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
        )

    D2, D22 = lift(b1), lift(b2)
    out = Differentiation(D1, D11, D2, D22, (D1 @ D2).tocsr())
    _DIFF_CACHE[key] = out
    return out


@dataclass
class DiscretizedProfile:
    grid: S2Grid
    values: np.ndarray
    scheme: str = "spectral"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.size)
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def from_function(cls, fn, grid: S2Grid, scheme: str = "spectral") -> "DiscretizedProfile":
        """Sample a profile: a Profile, a HomogeneousFunction, or a callable of unit points."""
        if isinstance(fn, Profile):
            fn = HomogeneousFunction(fn)
        if isinstance(fn, HomogeneousFunction):
            vals = fn.eval(grid.points)
        else:
            vals = fn(grid.points)
        return cls(grid, vals, scheme)

    @classmethod
    def random(cls, grid: S2Grid, seed: int, scheme: str = "spectral", degree: int = 6):
        """Smooth random profile: random polynomial of the given degree in x."""
        rng = np.random.default_rng(seed)
        X = grid.points
        vals = np.zeros(grid.size)
        for d in range(degree + 1):
            for a in range(d + 1):
                for b in range(d - a + 1):
                    c = d - a - b
                    vals += rng.normal() / (1 + d) * X[:, 0] ** a * X[:, 1] ** b * X[:, 2] ** c
        return cls(grid, vals, scheme)

    def derivatives(self) -> dict:
        D = differentiation(self.grid, self.scheme)
        g = self.values
        return {"g1": D.D1 @ g, "g2": D.D2 @ g, "g11": D.D11 @ g, "g12": D.D12 @ g, "g22": D.D22 @ g}

    def with_values(self, values) -> "DiscretizedProfile":
        return DiscretizedProfile(self.grid, values, self.scheme)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * self.values**2)))


def analytic_derivatives(g, grid: S2Grid) -> dict:
    """Exact angular derivatives of a spherical-form expression at the grid nodes."""
    expr = g.spherical_form() if isinstance(g, Profile) else g
    J = eval_jet(expr, grid.angles, 2)
    return {
        "g1": J.d1[:, 0],
        "g2": J.d1[:, 1],
        "g11": J.d2[:, 0, 0],
        "g12": J.d2[:, 0, 1],
        "g22": J.d2[:, 1, 1],
    }


# ---------------------------------------------------------------------------
# residual functional


@dataclass(frozen=True)
class DiscreteOperator:
    """L g = A:d^2 g + B.dg + C g at the nodes, with R[g] = sum w (L g)^2."""

    grid: S2Grid
    scheme: str
    L: object  # csr matrix, or ndarray when nearly full
    weights: np.ndarray

    @property
    def K(self):
        if sp.issparse(self.L):
            return (self.L.T @ sp.diags(self.weights) @ self.L).tocsr()
        return self.L.T @ (self.weights[:, None] * self.L)


def discretize_operator(op: SphericalOperator, grid: S2Grid, scheme: str = "spectral") -> DiscreteOperator:
    D = differentiation(grid, scheme)
    A, B, C = op.coefficients(grid.angles)
    dg = sp.diags
    L = (
        dg(A[:, 0, 0]) @ D.D11
        + dg(2.0 * A[:, 0, 1]) @ D.D12
        + dg(A[:, 1, 1]) @ D.D22
        + dg(B[:, 0]) @ D.D1
        + dg(B[:, 1]) @ D.D2
        + dg(C)
    )
    L = L.tocsr()
    if L.nnz > 0.1 * L.shape[0] ** 2:
        L = L.toarray()
    return DiscreteOperator(grid, scheme, L, grid.weights)


def residual_functional(op, g: DiscretizedProfile, gradient: bool = False):
    """R[g] = sum_nodes w (A:d^2g + B.dg + C g)^2; optionally with dR/dg = 2 L^T W L g."""
    dop = op if isinstance(op, DiscreteOperator) else discretize_operator(op, g.grid, g.scheme)
    Lg = dop.L @ g.values
    R = float(np.sum(dop.weights * Lg**2))
    if not gradient:
        return R
    return R, 2.0 * (dop.L.T @ (dop.weights * Lg))


# ---------------------------------------------------------------------------
# distance to linear functions


def linear_basis(grid: S2Grid) -> np.ndarray:
    """Nodal values of x1, x2, x3, shape (size, 3)."""
    return grid.points


def _split(g: DiscretizedProfile):
    W = g.grid.weights
    V = linear_basis(g.grid)
    G = V.T @ (W[:, None] * V)
    c = np.linalg.solve(G, V.T @ (W * g.values))
    return c, g.values - V @ c


def nonlinearity_norm(g: DiscretizedProfile) -> float:
    """Weighted L2 distance from g to span{x1, x2, x3} restricted to the sphere."""
    _, r = _split(g)
    return float(np.sqrt(np.sum(g.grid.weights * r**2)))


def constant_component(g: DiscretizedProfile) -> float:
    """Mean of g over the sphere (u = c r is not linear; reported on its own)."""
    W = g.grid.weights
    return float(np.sum(W * g.values) / np.sum(W))


def linear_part(g: DiscretizedProfile) -> np.ndarray:
    c, _ = _split(g)
    return c


# ---------------------------------------------------------------------------
# minimization


@dataclass
class SearchOptions:
    max_iter: int = 10_000
    tol: float = 1e-10
    shift: float = 1e-8
    initial_step: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    stagnation: float = 1e-15


@dataclass
class SearchResult:
    profile: DiscretizedProfile
    status: str
    iterations: int
    history: list = field(default_factory=list)
    method: str = "preconditioned projected gradient, Armijo backtracking"

    @property
    def residual(self) -> float:
        return self.history[-1]["R"]

    @property
    def nonlinearity(self) -> float:
        return self.history[-1]["nonlinearity"]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "method": self.method,
            "residual": self.residual,
            "nonlinearity": self.nonlinearity,
            "norm": self.profile.norm(),
            "constant_component": constant_component(self.profile),
            "linear_part": linear_part(self.profile).tolist(),
            "history": self.history,
        }


class _Preconditioner:
    def __init__(self, P):
        n = P.shape[0]
        if n <= 4096 or not sp.issparse(P):
            self._cho = scipy.linalg.cho_factor(P.toarray() if sp.issparse(P) else P)
            self._lu = None
        else:
            self._cho = None
            self._lu = spla.splu(P.tocsc())

    def solve(self, b):
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, b)
        return self._lu.solve(b)


def minimize_residual(op, init: DiscretizedProfile, options: SearchOptions | None = None) -> SearchResult:
    """Minimize R[g] subject to |g|_w = 1.

    Each step moves along the preconditioned negative gradient of the
    Rayleigh quotient R[g] / |g|^2, with preconditioner K + shift * W, then
    renormalizes.  The step length is chosen by Armijo backtracking, so the
    recorded R never increases.  The run ends when R < tol (converged), when
    no step decreases R (stagnated), or after max_iter steps
    (budget-exhausted); the last two are non-convergence outcomes and are
    reported in ``status`` rather than raised.
    """
    opt = options or SearchOptions()
    dop = op if isinstance(op, DiscreteOperator) else discretize_operator(op, init.grid, init.scheme)
    W = dop.weights
    K = dop.K

    def norm(v):
        return np.sqrt(np.sum(W * v * v))

    g = init.values / norm(init.values)

    def R_of(v):
        Lv = dop.L @ v
        return float(np.sum(W * Lv * Lv))

    R = R_of(g)
    hist = [{"iteration": 0, "R": R, "nonlinearity": nonlinearity_norm(init.with_values(g)), "step": 0.0}]
    if R < opt.tol:
        return SearchResult(init.with_values(g), "converged", 0, hist)
    scale = max(float(np.abs(np.asarray(K.diagonal())).max()), 1.0)
    pre = _Preconditioner(K + opt.shift * scale * (sp.diags(W) if sp.issparse(K) else np.diag(W)))
    status = "budget-exhausted"
    for it in range(1, opt.max_iter + 1):
        resid = K @ g - R * (W * g)  # half the constrained gradient at |g| = 1
        d = -pre.solve(resid)
        slope = 2.0 * float(resid @ d)
        if not slope < 0:
            status = "stagnated"
            break
        t = opt.initial_step
        while t >= opt.min_step:
            trial = g + t * d
            trial /= norm(trial)
            Rt = R_of(trial)
            if Rt <= R + opt.armijo * t * slope:
                break
            t *= opt.backtrack
        else:
            status = "stagnated"
            break
        decrease = R - Rt
        g, R = trial, Rt
        hist.append({"iteration": it, "R": R, "nonlinearity": nonlinearity_norm(init.with_values(g)), "step": t})
        if R < opt.tol:
            status = "converged"
            break
        if decrease <= opt.stagnation * R:
            status = "stagnated"
            break
    return SearchResult(init.with_values(g), status, len(hist) - 1, hist)


# ---------------------------------------------------------------------------
# obstruction curves


@dataclass
class ObstructionCurve:
    profile: str
    entries: list

    HEADER = ("N", "lambda", "infeasible_count")

    def rows(self):
        return [(e["N"], e["lambda"], e["infeasible_count"]) for e in self.entries]

    def to_dict(self) -> dict:
        return {"profile": self.profile, "entries": self.entries}


def obstruction_study(
    u: HomogeneousFunction,
    resolutions=(16, 32, 64),
    kappa_max: float = KAPPA_MAX,
    tau: float | None = None,
    backend: str | None = None,
    max_points: int | None = None,
) -> ObstructionCurve:
    """Certificate and infeasible count of pointwise synthesis at each resolution."""
    entries = []
    for N in sorted(int(n) for n in resolutions):
        if N <= 0:
            raise ValueError("resolutions must be positive")
        grid = sphere_grid(u.dim, N, max_points)
        t0 = time.perf_counter()
        rep = synthesize_field(u, grid, kappa_max=kappa_max, tau=tau, backend=backend)
        entries.append(
            {
                "N": N,
                "lambda": rep.certificate,
                "infeasible_count": int(len(rep.infeasible_points)),
                "condition_exceeded_count": int(len(rep.condition_exceeded_points)),
                "points": int(grid.size),
                "max_trace_residual": rep.max_trace_residual,
                "seconds": time.perf_counter() - t0,
            }
        )
    return ObstructionCurve(u.name, entries)


def operator_for(field: CoefficientField, eps_pole: float = 1e-3) -> SphericalOperator:
    return SphericalOperator(field, eps_pole)
