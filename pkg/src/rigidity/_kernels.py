"""Per-point small-matrix kernels with a numba path and a pure numpy path.

The backend is chosen by the environment variable ``RIGIDITY_BACKEND``
(``numba`` or ``numpy``); ``numba`` is the default when it imports.  Every
public function also accepts ``backend=`` to force one path, which the tests
and ``benchmarks/bench_kernels.py`` use to compare the two.

``RIGIDITY_THREADS`` caps the number of numba worker threads.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

STATUS_NAMES = ("zero", "balanced", "infeasible", "condition-exceeded")
ZERO, BALANCED, INFEASIBLE, CONDITION_EXCEEDED = range(4)


def _default_backend() -> str:
    name = os.environ.get("RIGIDITY_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"RIGIDITY_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


BACKEND = _default_backend()

if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old for numba; skip probing it
    numba.config.THREADING_LAYER = "omp"

if HAVE_NUMBA and os.environ.get("RIGIDITY_THREADS"):
    numba.set_num_threads(max(1, min(int(os.environ["RIGIDITY_THREADS"]), numba.config.NUMBA_NUM_THREADS)))


def _pick(backend: str | None) -> str:
    b = BACKEND if backend is None else backend
    if b == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return b


# ---------------------------------------------------------------------------
# tangent bases


def _tangent_basis_numpy(X: np.ndarray) -> np.ndarray:
    m, n = X.shape
    cand = np.eye(n)[None, :, :] - X[:, :, None] * X[:, None, :]  # row i: e_i - x_i x
    norms = np.linalg.norm(cand, axis=2)
    order = np.argsort(-norms, axis=1, kind="stable")[:, : n - 1]
    vecs = np.take_along_axis(cand, order[:, :, None], axis=1)
    basis = np.empty((m, n, n - 1))
    for k in range(n - 1):
        v = vecs[:, k, :].copy()
        for j in range(k):
            q = basis[:, :, j]
            v -= np.sum(v * q, axis=1, keepdims=True) * q
        basis[:, :, k] = v / np.linalg.norm(v, axis=1, keepdims=True)
    return basis


def _tangential_eigh_numpy(H, X):
    T = _tangent_basis_numpy(X)
    Mt = np.einsum("mia,mij,mjb->mab", T, H, T)
    Mt = 0.5 * (Mt + np.swapaxes(Mt, 1, 2))
    mu, V = np.linalg.eigh(Mt)
    mu, V = mu[:, ::-1], V[:, :, ::-1]
    return mu, np.einsum("mia,mab->mib", T, V)


def _synthesize_numpy(H, X, tau, kappa_max):
    m, n = X.shape
    mu, W = _tangential_eigh_numpy(H, X)
    fro = np.sqrt(np.sum(H * H, axis=(1, 2)))
    pos = mu > tau
    neg = mu < -tau
    has_pos, has_neg = pos.any(1), neg.any(1)
    zero = (fro < tau) | (~has_pos & ~has_neg)
    balanced = ~zero & has_pos & has_neg
    splus = np.where(mu > 0, mu, 0.0).sum(1)
    sminus = -np.where(mu < 0, mu, 0.0).sum(1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(balanced, np.maximum(splus / sminus, sminus / splus), 1.0)
        up_neg = splus >= sminus
        wneg = np.where(up_neg, splus / sminus, 1.0)
        wpos = np.where(up_neg, 1.0, sminus / splus)
    w = np.ones_like(mu)
    w = np.where(balanced[:, None] & (mu > 0), wpos[:, None], w)
    w = np.where(balanced[:, None] & (mu < 0), wneg[:, None], w)
    A = np.einsum("mia,ma,mja->mij", W, w, W) + X[:, :, None] * X[:, None, :]
    A /= np.sqrt(kappa)[:, None, None]
    status = np.full(m, ZERO, dtype=np.int8)
    status[balanced] = BALANCED
    status[~zero & ~balanced] = INFEASIBLE
    status[balanced & (kappa > kappa_max)] = CONDITION_EXCEEDED
    bad = status == INFEASIBLE
    kappa = np.where(bad, np.inf, kappa)
    A[bad] = np.nan
    return A, 1.0 / np.sqrt(kappa), kappa, status, mu


if HAVE_NUMBA:

    @njit(cache=True)
    def _tangent_basis_point(x, out):
        n = x.shape[0]
        cand = np.empty((n, n))
        norms = np.empty(n)
        for i in range(n):
            for j in range(n):
                cand[i, j] = (1.0 if i == j else 0.0) - x[i] * x[j]
            norms[i] = np.sqrt(np.sum(cand[i] * cand[i]))
        order = np.argsort(-norms, kind="mergesort")
        for k in range(n - 1):
            v = cand[order[k]].copy()
            for j in range(k):
                d = 0.0
                for t in range(n):
                    d += v[t] * out[t, j]
                for t in range(n):
                    v[t] -= d * out[t, j]
            nv = np.sqrt(np.sum(v * v))
            for t in range(n):
                out[t, k] = v[t] / nv

    @njit(cache=True, parallel=True)
    def _synthesize_numba(H, X, tau, kappa_max):
        m, n = X.shape
        A = np.zeros((m, n, n))
        lam = np.empty(m)
        kap = np.empty(m)
        status = np.empty(m, dtype=np.int8)
        mus = np.empty((m, n - 1))
        for p in prange(m):
            T = np.empty((n, n - 1))
            _tangent_basis_point(X[p], T)
            Mt = T.T @ H[p] @ T
            Mt = 0.5 * (Mt + Mt.T)
            mu_a, V_a = np.linalg.eigh(Mt)
            mu = mu_a[::-1].copy()
            W = T @ V_a[:, ::-1].copy()
            mus[p] = mu
            fro = np.sqrt(np.sum(H[p] * H[p]))
            has_pos = False
            has_neg = False
            splus = 0.0
            sminus = 0.0
            for a in range(n - 1):
                if mu[a] > tau:
                    has_pos = True
                if mu[a] < -tau:
                    has_neg = True
                if mu[a] > 0:
                    splus += mu[a]
                elif mu[a] < 0:
                    sminus -= mu[a]
            w = np.ones(n - 1)
            if fro < tau or (not has_pos and not has_neg):
                code = ZERO
                kappa = 1.0
            elif has_pos and has_neg:
                if splus >= sminus:
                    kappa = splus / sminus
                    for a in range(n - 1):
                        if mu[a] < 0:
                            w[a] = kappa
                else:
                    kappa = sminus / splus
                    for a in range(n - 1):
                        if mu[a] > 0:
                            w[a] = kappa
                code = CONDITION_EXCEEDED if kappa > kappa_max else BALANCED
            else:
                code = INFEASIBLE
                kappa = np.inf
            status[p] = code
            kap[p] = kappa
            lam[p] = 1.0 / np.sqrt(kappa)
            if code == INFEASIBLE:
                A[p, :, :] = np.nan
                continue
            s = 1.0 / np.sqrt(kappa)
            for i in range(n):
                for j in range(n):
                    acc = X[p, i] * X[p, j]
                    for a in range(n - 1):
                        acc += W[i, a] * w[a] * W[j, a]
                    A[p, i, j] = acc * s
        return A, lam, kap, status, mus


def tangent_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal tangent frames (m, n, n-1) at unit directions X (m, n).

    Gram-Schmidt on the n - 1 largest of the projected axes e_i - (e_i.x) x.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _tangent_basis_numpy(X)


def tangential_eigh(H: np.ndarray, X: np.ndarray):
    """Eigenvalues (descending) and ambient eigenvectors of the tangential block."""
    H = np.asarray(H, dtype=float).reshape(-1, X.shape[-1], X.shape[-1])
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _tangential_eigh_numpy(H, X)


def synthesize_batch(H, X, tau, kappa_max, backend: str | None = None):
    """Balanced annihilating matrices for a batch of Hessians.

    Returns ``(A, lam, kappa, status, mu)``; see ``STATUS_NAMES``.
    """
    H = np.ascontiguousarray(H, dtype=float)
    X = np.ascontiguousarray(X, dtype=float)
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    if _pick(backend) == "numba":
        return _synthesize_numba(H, X, float(tau), float(kappa_max))
    return _synthesize_numpy(H, X, float(tau), float(kappa_max))


# ---------------------------------------------------------------------------
# second-order residual of quadratic-over-radius cone maps


def _quad_derivs_numpy(X, Q):
    # f^k = x.Q_k.x / (2 r)
    r = np.linalg.norm(X, axis=1)
    Qx = np.einsum("kij,mj->mki", Q, X)
    P = 0.5 * np.einsum("mi,mki->mk", X, Qx)
    r1, r3, r5 = 1.0 / r, r**-3, r**-5
    J = Qx * r1[:, None, None] - P[:, :, None] * X[:, None, :] * r3[:, None, None]
    xx = X[:, :, None] * X[:, None, :]
    D2 = (
        Q[None] * r1[:, None, None, None]
        - (Qx[:, :, :, None] * X[:, None, None, :] + X[:, None, :, None] * Qx[:, :, None, :])
        * r3[:, None, None, None]
        - P[:, :, None, None] * np.eye(X.shape[1])[None, None] * r3[:, None, None, None]
        + 3.0 * P[:, :, None, None] * xx[:, None] * r5[:, None, None, None]
    )
    return J, D2


def _quad_residual_numpy(X, Q):
    J, D2 = _quad_derivs_numpy(X, Q)
    n = X.shape[1]
    g = np.eye(n)[None] + np.einsum("mki,mkj->mij", J, J)
    a = np.linalg.inv(g)
    res = np.einsum("mij,mkij->mk", a, D2)
    lam = 1.0 / np.linalg.eigvalsh(g)[:, -1]
    return res, lam


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _quad_residual_numba(X, Q):
        m, n = X.shape
        K = Q.shape[0]
        res = np.empty((m, K))
        lam = np.empty(m)
        for p in prange(m):
            x = X[p]
            r = np.sqrt(np.sum(x * x))
            r1 = 1.0 / r
            r3 = r1 * r1 * r1
            r5 = r3 * r1 * r1
            J = np.empty((K, n))
            Qx = np.empty((K, n))
            P = np.empty(K)
            for k in range(K):
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += Q[k, i, j] * x[j]
                    Qx[k, i] = acc
                P[k] = 0.5 * np.sum(x * Qx[k])
                for i in range(n):
                    J[k, i] = Qx[k, i] * r1 - P[k] * x[i] * r3
            g = np.eye(n) + J.T @ J
            a = np.linalg.inv(g)
            for k in range(K):
                acc = 0.0
                for i in range(n):
                    for j in range(n):
                        d2 = Q[k, i, j] * r1 - (Qx[k, i] * x[j] + x[i] * Qx[k, j]) * r3
                        d2 += 3.0 * P[k] * x[i] * x[j] * r5
                        if i == j:
                            d2 -= P[k] * r3
                        acc += a[i, j] * d2
                res[p, k] = acc
            lam[p] = 1.0 / np.linalg.eigvalsh(g)[-1]
        return res, lam


def quadratic_cone_derivatives(X, Q):
    """Jacobian (m, K, n) and second derivatives (m, K, n, n) of x.Q_k.x/(2|x|)."""
    return _quad_derivs_numpy(np.atleast_2d(np.asarray(X, float)), np.asarray(Q, float))


def quadratic_cone_residual(X, Q, backend: str | None = None):
    """Per-point tr(g^{-1} D^2 f^k) and min eigenvalue of g^{-1} for f^k = x.Q_k.x/(2|x|)."""
    X = np.ascontiguousarray(X, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    if _pick(backend) == "numba":
        return _quad_residual_numba(X, Q)
    return _quad_residual_numpy(X, Q)
