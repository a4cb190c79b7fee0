import os
import subprocess
import sys

import numpy as np
import pytest

from rigidity import _kernels
from rigidity.grids import random_sphere_points
from rigidity.lawson_osserman import LO_MAP
from rigidity.profiles import homogeneous

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    ok = np.isfinite(a) & np.isfinite(b)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    return np.max(np.abs(a[ok] - b[ok]) / (1 + np.abs(a[ok]))) if ok.any() else 0.0


@needs_numba
@pytest.mark.parametrize("name, dim", [("lo-scalar", 4), ("q2-over-r", 3), ("random:3", 3), ("cubic-over-r2", 3)])
def test_synthesize_backends_agree(name, dim):
    X = random_sphere_points(2000, dim, seed=4)
    H = homogeneous(name).hessian(X)
    a = _kernels.synthesize_batch(H, X, 1e-8, 1e6, backend="numpy")
    b = _kernels.synthesize_batch(H, X, 1e-8, 1e6, backend="numba")
    np.testing.assert_array_equal(a[3], b[3])
    for x, y in zip(a, b):
        assert _rel(x, y) < 1e-9


@needs_numba
def test_cone_residual_backends_agree():
    X = random_sphere_points(5000, 4, seed=5)
    a = _kernels.quadratic_cone_residual(X, LO_MAP.Q, backend="numpy")
    b = _kernels.quadratic_cone_residual(X, LO_MAP.Q, backend="numba")
    for x, y in zip(a, b):
        assert _rel(x, y) < 1e-12


def test_tangent_basis_orthonormal():
    for dim in (3, 4):
        X = random_sphere_points(200, dim, seed=dim)
        T = _kernels.tangent_basis(X)
        G = np.einsum("mki,mkj->mij", T, T)
        assert np.abs(np.einsum("mki,mk->mi", T, X)).max() < 1e-13
        np.testing.assert_allclose(G, np.broadcast_to(np.eye(dim - 1), G.shape), atol=1e-13)


def test_unknown_backend_env():
    env = dict(os.environ, RIGIDITY_BACKEND="fortran")
    p = subprocess.run([sys.executable, "-c", "import rigidity._kernels"], env=env, capture_output=True)
    assert p.returncode != 0 and b"RIGIDITY_BACKEND" in p.stderr


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_backend_env_selects(backend):
    env = dict(os.environ, RIGIDITY_BACKEND=backend)
    code = "import rigidity._kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    expected = backend if (backend == "numpy" or _kernels.HAVE_NUMBA) else "numpy"
    assert out.stdout.strip() == expected


@needs_numba
def test_threads_env_caps_numba():
    env = dict(os.environ, RIGIDITY_THREADS="1")
    code = "import numba, rigidity._kernels; print(numba.get_num_threads())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "1"


def test_explicit_numba_without_numba(monkeypatch):
    monkeypatch.setattr(_kernels, "HAVE_NUMBA", False)
    with pytest.raises(RuntimeError):
        _kernels._pick("numba")
