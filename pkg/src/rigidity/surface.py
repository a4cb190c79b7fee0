"""Geometry of the gradient surface Sigma = grad u(S^2) for order-one u in R^3."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .calculus import CLASSES, classify_batch, default_tau
from .errors import FitAmbiguous, NoVanishing, SingularPoint
from .grids import S2Grid, sphere_point
from .io import matrix_to_json
from .profiles import HomogeneousFunction


def rotation_to_pole(x) -> np.ndarray:
    """Minimal rotation Q with Q e3 = x (Rodrigues about e3 x x)."""
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    e3 = np.array([0.0, 0.0, 1.0])
    v = np.cross(e3, x)
    c = float(x[2])
    if np.linalg.norm(v) < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1.0 + c)


@dataclass(frozen=True)
class SurfaceSample:
    direction: np.ndarray
    image: np.ndarray
    normal: np.ndarray
    first_form: np.ndarray
    second_form: np.ndarray
    curvatures: np.ndarray
    hessian_eigenvalues: np.ndarray
    normal_angle: float

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.tolist(),
            "image": self.image.tolist(),
            "normal": self.normal.tolist(),
            "first_form": matrix_to_json(self.first_form),
            "second_form": matrix_to_json(self.second_form),
            "curvatures": self.curvatures.tolist(),
            "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
            "normal_angle": self.normal_angle,
        }


def surface_sample(u: HomogeneousFunction, x, tau: float = 1e-8) -> SurfaceSample:
    """Normal, fundamental forms and principal curvatures of Sigma at grad u(x).

    The frame is rotated so that x is the pole; with u_ij the rotated Hessian
    entries, I = U^2 and II = -U for the tangential block U, and the
    curvatures are the eigenvalues of I^{-1} II.
    """
    if u.dim != 3 or u.alpha != 1:
        raise ValueError("surface samples need an order-one function on R^3")
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    H = u.hessian(x)
    if np.sqrt(np.sum(H * H)) < tau:
        raise SingularPoint(f"D^2u vanishes at {x.tolist()}")
    Q = rotation_to_pole(x)
    Hr = Q.T @ H @ Q
    u11, u12, u22 = Hr[0, 0], Hr[0, 1], Hr[1, 1]
    first = np.array(
        [[u11**2 + u12**2, u12 * (u11 + u22)], [u12 * (u11 + u22), u12**2 + u22**2]]
    )
    second = -np.array([[u11, u12], [u12, u22]])
    try:
        shape_op = np.linalg.solve(first, second)
    except np.linalg.LinAlgError:
        raise SingularPoint(f"gradient map degenerates at {x.tolist()}") from None
    if not np.all(np.isfinite(shape_op)) or abs(np.linalg.det(first)) < tau**2:
        raise SingularPoint(f"gradient map degenerates at {x.tolist()}")
    kappa = np.sort(np.linalg.eigvals(shape_op).real)[::-1]
    # F_i = i-th column of the rotated Hessian; normal along F_1 x F_2
    nr = np.cross(Hr[:, 0], Hr[:, 1])
    normal = Q @ (nr / np.linalg.norm(nr))
    if normal @ x < 0:
        normal = -normal
    angle = float(np.arctan2(np.linalg.norm(np.cross(normal, x)), abs(normal @ x)))
    lam = np.sort(np.linalg.eigvalsh(Hr[:2, :2]))[::-1]
    return SurfaceSample(x, u.gradient(x), normal, first, second, kappa, lam, angle)


# ---------------------------------------------------------------------------
# scans


@dataclass
class SaddleScan:
    counts: dict
    witnesses: dict
    tau: float
    grid: dict

    def to_dict(self) -> dict:
        return {"counts": self.counts, "witnesses": self.witnesses, "tau": self.tau, "grid": self.grid}


def saddle_scan(u: HomogeneousFunction, grid, tau: float | None = None, max_witnesses: int = 5) -> SaddleScan:
    X = grid.points
    H = u.hessian(X)
    if tau is None:
        tau = default_tau(H)
    mu, codes, _ = classify_batch(H, X, tau)
    counts = {name: int(np.sum(codes == k)) for k, name in enumerate(CLASSES)}
    witnesses = {}
    for k in (2, 3):
        idx = np.flatnonzero(codes == k)[:max_witnesses]
        witnesses[CLASSES[k]] = [{"point": X[i].tolist(), "eigenvalues": mu[i].tolist()} for i in idx]
    return SaddleScan(counts, witnesses, float(tau), grid.describe())


def _label_s2(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected components on the (n2, n1) grid, periodic in theta1, merged at poles."""
    lab, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return lab, 0
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        if a and b:
            parent[find(a)] = find(b)

    n2, n1 = mask.shape
    for j in range(n2):
        for dj in (-1, 0, 1):
            jj = j + dj
            if 0 <= jj < n2:
                union(lab[j, 0], lab[jj, n1 - 1])
    for row in (0, n2 - 1):
        ids = [v for v in lab[row] if v]
        for a in ids[1:]:
            union(ids[0], a)
    roots = {}
    out = np.zeros_like(lab)
    for j in range(n2):
        for i in range(n1):
            if lab[j, i]:
                r = find(lab[j, i])
                out[j, i] = roots.setdefault(r, len(roots) + 1)
    return out, len(roots)


def _cluster_diameter(P: np.ndarray) -> float:
    if len(P) == 1:
        return 0.0
    G = np.clip(P @ P.T, -1.0, 1.0)
    return float(np.arccos(G.min()))


@dataclass
class SingularSetReport:
    levels: list
    classification: str
    tau: float

    def to_dict(self) -> dict:
        return {"classification": self.classification, "tau": self.tau, "levels": self.levels}


def singular_set_scan(
    u: HomogeneousFunction,
    N: int = 32,
    tau: float = 1e-8,
    refinements: int = 3,
    relative: float = 2.0,
) -> SingularSetReport:
    """Cluster directions where |D^2u| is below threshold, over successive doublings.

    The threshold at spacing h is ``tau + relative * h * max|D^2u|``: an
    isolated zero of |D^2u| vanishing linearly leaves a cluster whose diameter
    (plus one cell) halves per doubling.  Classification: ``whole-sphere`` if
    every point is below threshold at every level, ``empty`` if the finest
    level has no cluster, ``finite`` if clusters persist with a stable count
    and diameters shrinking by a factor <= 0.6 per doubling, else ``other``.
    """
    levels = []
    for level in range(refinements):
        grid = S2Grid.square(N * 2**level)
        X = grid.points
        H = u.hessian(X)
        fro = np.sqrt(np.sum(H * H, axis=(1, 2)))
        thr = tau + relative * grid.spacing * fro.max()
        mask = (fro < thr).reshape(grid.shape)
        lab, ncl = _label_s2(mask)
        flat = lab.ravel()
        clusters = []
        for c in range(1, ncl + 1):
            P = X[flat == c]
            centre = P.mean(0)
            centre = centre / np.linalg.norm(centre) if np.linalg.norm(centre) > 0 else centre
            clusters.append(
                {
                    "size": int(len(P)),
                    "diameter": _cluster_diameter(P) + grid.spacing,
                    "centre": centre.tolist(),
                }
            )
        levels.append(
            {
                "N": grid.n1,
                "threshold": float(thr),
                "below": int(mask.sum()),
                "points": int(grid.size),
                "clusters": clusters,
            }
        )
    if all(lv["below"] == lv["points"] for lv in levels):
        cls = "whole-sphere"
    elif not levels[-1]["clusters"]:
        cls = "empty"
    else:
        counts = [len(lv["clusters"]) for lv in levels]
        diam = [max(c["diameter"] for c in lv["clusters"]) if lv["clusters"] else 0.0 for lv in levels]
        shrink = all(d1 <= 0.6 * d0 for d0, d1 in zip(diam, diam[1:]))
        cls = "finite" if shrink and len(set(counts)) == 1 else "other"
    return SingularSetReport(levels, cls, float(tau))


# ---------------------------------------------------------------------------
# supporting planes


@dataclass
class ContactReport:
    nu: np.ndarray
    value: float
    contact_indices: np.ndarray
    contact_points: np.ndarray
    contact_images: np.ndarray
    argmax_index: int
    gap: float
    near_pm_nu: bool
    angle_to_pm_nu: float

    def to_dict(self) -> dict:
        return {
            "nu": self.nu.tolist(),
            "value": self.value,
            "argmax_index": self.argmax_index,
            "argmax_point": self.contact_points[0].tolist(),
            "contact_count": int(len(self.contact_indices)),
            "contact_images": self.contact_images[:10].tolist(),
            "gap": self.gap,
            "near_pm_nu": self.near_pm_nu,
            "angle_to_pm_nu": self.angle_to_pm_nu,
        }


def supporting_plane_probe(
    u: HomogeneousFunction,
    nu,
    grid: S2Grid,
    rtol: float = 1e-12,
    angle_tol: float | None = None,
) -> ContactReport:
    """Brute-force maximum of nu . grad u(x) over the grid.

    Ties are broken by the lowest flat grid index.  The contact set holds all
    samples within ``rtol`` of the maximum; the gap is measured to the best
    sample farther than three cells from every contact sample.
    """
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    X = grid.points
    G = u.gradient(X)
    vals = G @ nu
    best = int(np.argmax(vals))  # first occurrence
    vmax = float(vals[best])
    tol = rtol * (1.0 + abs(vmax))
    idx = np.flatnonzero(vals >= vmax - tol)
    idx = np.concatenate([[best], idx[idx != best]])
    # distance to the nearest contact sample, in radians
    dist = np.arccos(np.clip(X @ X[idx].T, -1, 1)).min(1)
    far = dist > 3 * grid.spacing
    gap = float(vmax - vals[far].max()) if far.any() else np.inf
    ang = float(np.arccos(np.clip(abs(X[best] @ nu), -1, 1)))
    if angle_tol is None:
        angle_tol = 2.0 * grid.spacing
    return ContactReport(nu, vmax, idx, X[idx], G[idx], best, gap, ang <= angle_tol, ang)


# ---------------------------------------------------------------------------
# leading polynomial


def _monomials(k: int) -> list[tuple[int, int]]:
    return [(k - b, b) for b in range(k + 1)]


@dataclass
class LeadingPolynomial:
    order: int
    coefficients: dict
    remainder_norms: list
    radii: list
    laplacian_coefficients: dict
    harmonicity_defect: float

    def __call__(self, t1, t2):
        return sum(c * t1**a * t2**b for (a, b), c in self.coefficients.items())

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": {f"{a},{b}": c for (a, b), c in self.coefficients.items()},
            "remainder_norms": self.remainder_norms,
            "radii": self.radii,
            "harmonicity_defect": self.harmonicity_defect,
        }


def laplacian_of(coeffs: dict) -> dict:
    """Coefficients of the flat Laplacian of sum c_ab t1^a t2^b."""
    out: dict = {}
    for (a, b), c in coeffs.items():
        if a >= 2:
            out[(a - 2, b)] = out.get((a - 2, b), 0.0) + c * a * (a - 1)
        if b >= 2:
            out[(a, b - 2)] = out.get((a, b - 2), 0.0) + c * b * (b - 1)
    return out


def leading_polynomial(
    g: Callable,
    p=(0.0, 0.0),
    k_max: int = 6,
    radii: Sequence[float] = (0.1, 0.05, 0.025),
    vanish_tol: float = 1e-8,
    rings: int = 6,
    angles: int = 48,
) -> LeadingPolynomial:
    """Lowest-order homogeneous Taylor polynomial of g at p, by annulus least squares.

    On each annulus rho/2 <= |t - p| <= rho the full polynomial of degree
    k_max + 2 is fitted in scaled variables; the coefficients from the
    smallest annulus determine the vanishing order.  Raises NoVanishing when
    a term of degree <= 2 survives and FitAmbiguous when |g - P| / rho^k does
    not decrease as rho shrinks.
    """
    p = np.asarray(p, dtype=float)
    deg = k_max + 2
    mons = [m for d in range(deg + 1) for m in _monomials(d)]
    fits = []
    samples = []
    for rho in radii:
        rr = np.linspace(0.5 * rho, rho, rings)
        aa = 2 * np.pi * np.arange(angles) / angles
        Rr, Aa = np.meshgrid(rr, aa)
        t1, t2 = (Rr * np.cos(Aa)).ravel(), (Rr * np.sin(Aa)).ravel()
        vals = np.asarray(g([t1 + p[0], t2 + p[1]]), dtype=float)
        V = np.stack([(t1 / rho) ** a * (t2 / rho) ** b for a, b in mons], 1)
        c, *_ = np.linalg.lstsq(V, vals, rcond=None)
        coeffs = {m: ci / rho ** (m[0] + m[1]) for m, ci in zip(mons, c)}
        fits.append(coeffs)
        samples.append((t1, t2, vals))
    coeffs = fits[-1]
    scale = max(1.0, max(abs(v) for v in coeffs.values()))
    low = max(abs(coeffs[m]) for m in mons if m[0] + m[1] <= 2)
    if low > vanish_tol * scale:
        raise NoVanishing("profile does not vanish to order three at the point")
    order = None
    for k in range(3, k_max + 1):
        if max(abs(coeffs[m]) for m in _monomials(k)) > vanish_tol * scale:
            order = k
            break
    if order is None:
        raise NoVanishing(f"no nonvanishing term up to order {k_max}")
    P = {m: float(coeffs[m]) for m in _monomials(order)}
    rem = []
    for rho, (t1, t2, vals) in zip(radii, samples):
        Pv = sum(c * t1**a * t2**b for (a, b), c in P.items())
        rem.append(float(np.abs(vals - Pv).max() / rho**order))
    floor = 1e-9 * max(abs(v) for v in P.values())
    if any(r1 > r0 and r1 > floor for r0, r1 in zip(rem, rem[1:])):
        raise FitAmbiguous(f"remainder not decaying: {rem}")
    lap = laplacian_of(P)
    defect = float(np.sqrt(sum(v * v for v in lap.values()))) if lap else 0.0
    return LeadingPolynomial(order, P, rem, list(radii), lap, defect)


def localize(u: HomogeneousFunction, x0) -> Callable:
    """Spherical profile of u - grad u(x0).x in coordinates centred at x0.

    The sphere is rotated so that x0 sits at theta = (0, 0) (the point e1),
    where the round metric is the identity in (theta1, theta2).
    """
    x0 = np.asarray(x0, dtype=float)
    x0 = x0 / np.linalg.norm(x0)
    c = u.gradient(x0)
    # rotation Q with Q e1 = x0
    Q3 = rotation_to_pole(x0)
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])  # e1 -> e3
    Q = Q3 @ P

    def g(t):
        y = sphere_point(t[0], t[1])
        X = y @ Q.T
        return u.eval(X.reshape(-1, 3)) - X.reshape(-1, 3) @ c

    return g


SURFACE_HEADER = (
    "x1", "x2", "x3", "g1", "g2", "g3", "n1", "n2", "n3", "kappa1", "kappa2", "class",
)


def surface_rows(u: HomogeneousFunction, grid, tau: float | None = None) -> list:
    """Rows for the plotting dump; singular samples carry NaN normals and curvatures."""
    X = grid.points
    H = u.hessian(X)
    if tau is None:
        tau = default_tau(H)
    _, codes, fro = classify_batch(H, X, tau)
    G = u.gradient(X)
    rows = []
    for x, gx, c, f in zip(X, G, codes, fro):
        nrm, kap = [np.nan] * 3, [np.nan] * 2
        if f >= tau:
            try:
                s = surface_sample(u, x, tau)
                nrm, kap = s.normal.tolist(), s.curvatures.tolist()
            except SingularPoint:
                pass
        rows.append([*x.tolist(), *gx.tolist(), *nrm, *kap, CLASSES[c]])
    return rows
