import subprocess
import sys

import numpy as np
import pytest

from swarmtrack import kernels

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


def test_compiled_backend_built():
    # the extension is part of the normal install; a missing build is worth knowing about
    assert "cython" in BACKENDS, "compiled kernels are not built; run `python3 setup.py build_ext --inplace`"


def test_env_forces_fallback():
    code = "from swarmtrack import kernels; print(kernels.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code], env={"SWARMTRACK_PURE_PYTHON": "1", "PATH": ""},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_sq_euclidean(backend, rng):
    x, y = rng.uniform(size=(13, 2)), rng.uniform(size=(29, 2))
    want = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    np.testing.assert_allclose(backend.sq_euclidean(x, y), want, rtol=1e-14, atol=1e-16)


def _run(backend, C, eps, tol, max_iter):
    n, m = C.shape
    f, g = np.zeros(n), np.zeros(m)
    hist = np.full(max_iter + 1, np.nan)
    it = backend.sinkhorn_log(C, np.full(n, -np.log(n)), np.full(m, -np.log(m)), eps, tol, max_iter, f, g, hist)
    return it, f, g, hist[: it + 1]


@pytest.mark.parametrize("eps", [0.5, 0.05, 0.005])
def test_backends_agree(rng, eps):
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    C = BACKENDS["python"].sq_euclidean(rng.uniform(size=(20, 2)), rng.uniform(size=(120, 2)))
    a = _run(BACKENDS["python"], C, eps, 1e-8, 20000)
    b = _run(BACKENDS["cython"], C, eps, 1e-8, 20000)
    assert a[0] == b[0]
    np.testing.assert_allclose(a[1], b[1], rtol=0, atol=1e-10)
    np.testing.assert_allclose(a[2], b[2], rtol=0, atol=1e-10)
    np.testing.assert_allclose(a[3], b[3], rtol=1e-6, atol=1e-15)


def test_marginals_after_solve(backend, rng):
    C = backend.sq_euclidean(rng.uniform(size=(8, 2)), rng.uniform(size=(50, 2)))
    it, f, g, hist = _run(backend, C, 0.01, 1e-9, 50000)
    P = np.exp((f[:, None] + g[None, :] - C) / 0.01) / (8 * 50)
    assert hist[-1] <= 1e-9
    np.testing.assert_allclose(P.sum(1), 1 / 8, atol=1e-9)
    np.testing.assert_allclose(P.sum(0), 1 / 50, atol=1e-12)


def test_deterministic(backend, rng):
    C = backend.sq_euclidean(rng.uniform(size=(20, 2)), rng.uniform(size=(500, 2)))
    a = _run(backend, C, 0.005, 1e-6, 5000)
    b = _run(backend, C.copy(), 0.005, 1e-6, 5000)
    assert a[0] == b[0]
    assert a[1].tobytes() == b[1].tobytes() and a[2].tobytes() == b[2].tobytes()


def test_budget_respected(backend, rng):
    C = backend.sq_euclidean(rng.uniform(size=(5, 2)), rng.uniform(size=(30, 2)))
    it, *_ = _run(backend, C, 0.001, 1e-15, 7)
    assert it == 7


def test_tiny_epsilon_stays_finite(backend):
    C = np.array([[0.0, 2.0], [2.0, 0.0], [1.0, 1.0]])
    it, f, g, hist = _run(backend, C[:2], 1e-4, 1e-12, 100)
    assert np.all(np.isfinite(f)) and np.all(np.isfinite(g))
