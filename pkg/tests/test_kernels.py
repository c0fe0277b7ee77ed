import numpy as np
import pytest

from spectral_bridge import kernels

BACKENDS = kernels.available_backends()
DTYPES = [np.float32, np.float64]


def tol(dtype):
    return dict(rtol=2e-5, atol=2e-5) if dtype == np.float32 else dict(rtol=1e-10, atol=1e-12)


@pytest.fixture
def ln_inputs(rng):
    def make(dtype):
        x = rng.normal(size=(12, 16)).astype(dtype)
        gamma = rng.normal(1.0, 0.2, size=16).astype(dtype)
        beta = rng.normal(0.0, 0.2, size=16).astype(dtype)
        return x, gamma, beta
    return make


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("dtype", DTYPES)
def test_layer_norm_forward_semantics(backend, dtype, ln_inputs):
    x, gamma, beta = ln_inputs(dtype)
    y, mean, rstd = kernels.layer_norm_forward(x, gamma, beta, 1e-5, backend=backend)
    assert y.dtype == dtype
    ref = (x.astype(np.float64) - x.astype(np.float64).mean(1, keepdims=True))
    ref /= np.sqrt(x.astype(np.float64).var(1, keepdims=True) + 1e-5)
    ref = ref * gamma + beta
    np.testing.assert_allclose(y, ref, **tol(dtype))


@pytest.mark.parametrize("dtype", DTYPES)
def test_backends_agree(dtype, rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    x = rng.normal(size=(9, 12)).astype(dtype)
    gamma = rng.normal(1.0, 0.1, size=12).astype(dtype)
    beta = rng.normal(size=12).astype(dtype)
    outs = {}
    for be in BACKENDS:
        y, mean, rstd = kernels.layer_norm_forward(x, gamma, beta, 1e-5, backend=be)
        dy = np.ones_like(y)
        dx, dg, db = kernels.layer_norm_backward(dy, x, gamma, mean, rstd, backend=be)
        outs[be] = (y, dx, dg, db)
    for a, b in zip(outs[BACKENDS[0]], outs[BACKENDS[1]]):
        np.testing.assert_allclose(a, b, **tol(dtype))

    q, k, v = (rng.normal(size=(6, 5, 8)).astype(dtype) for _ in range(3))
    att = {}
    for be in BACKENDS:
        out, probs = kernels.attention_forward(q, k, v, 0.3, backend=be)
        dq, dk, dv = kernels.attention_backward(np.ones_like(out), q, k, v, probs, 0.3, backend=be)
        att[be] = (out, probs, dq, dk, dv)
    for a, b in zip(att[BACKENDS[0]], att[BACKENDS[1]]):
        np.testing.assert_allclose(a, b, **tol(dtype))

    g = rng.normal(size=(40,)).astype(dtype)
    ge = {be: kernels.gelu_forward(g, backend=be) for be in BACKENDS}
    np.testing.assert_allclose(ge[BACKENDS[0]], ge[BACKENDS[1]], **tol(dtype))
    gb = {be: kernels.gelu_backward(np.ones_like(g), g, backend=be) for be in BACKENDS}
    np.testing.assert_allclose(gb[BACKENDS[0]], gb[BACKENDS[1]], **tol(dtype))


@pytest.mark.parametrize("backend", BACKENDS)
def test_attention_rows_sum_to_one(backend, rng):
    q, k, v = (rng.normal(size=(4, 7, 6)) for _ in range(3))
    out, probs = kernels.attention_forward(q, k, v, 0.41, backend=backend)
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all(probs >= 0)
    assert out.shape == q.shape


@pytest.mark.parametrize("backend", BACKENDS)
def test_attention_single_token(backend, rng):
    q, k, v = (rng.normal(size=(3, 1, 5)) for _ in range(3))
    out, probs = kernels.attention_forward(q, k, v, 1.0, backend=backend)
    np.testing.assert_allclose(probs, 1.0)
    np.testing.assert_allclose(out, v, rtol=1e-12)


def central_diff(f, x, eps=1e-6):
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


@pytest.mark.parametrize("backend", BACKENDS)
def test_layer_norm_backward_matches_fd(backend, rng):
    x = rng.normal(size=(4, 6))
    gamma = rng.normal(1.0, 0.3, size=6)
    beta = rng.normal(size=6)
    dy = rng.normal(size=(4, 6))

    def loss():
        y, _, _ = kernels.layer_norm_forward(x, gamma, beta, 1e-5, backend=backend)
        return float((y * dy).sum())

    y, mean, rstd = kernels.layer_norm_forward(x, gamma, beta, 1e-5, backend=backend)
    dx, dg, db = kernels.layer_norm_backward(dy, x, gamma, mean, rstd, backend=backend)
    np.testing.assert_allclose(dx, central_diff(loss, x), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(dg, central_diff(loss, gamma), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(db, central_diff(loss, beta), rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_attention_backward_matches_fd(backend, rng):
    q = rng.normal(size=(2, 4, 3))
    k = rng.normal(size=(2, 4, 3))
    v = rng.normal(size=(2, 4, 3))
    dy = rng.normal(size=(2, 4, 3))
    scale = 1.0 / np.sqrt(3)

    def loss():
        out, _ = kernels.attention_forward(q, k, v, scale, backend=backend)
        return float((out * dy).sum())

    out, probs = kernels.attention_forward(q, k, v, scale, backend=backend)
    dq, dk, dv = kernels.attention_backward(dy, q, k, v, probs, scale, backend=backend)
    np.testing.assert_allclose(dq, central_diff(loss, q), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(dk, central_diff(loss, k), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(dv, central_diff(loss, v), rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_gelu_backward_matches_fd(backend, rng):
    x = rng.normal(size=(30,))
    dy = rng.normal(size=(30,))

    def loss():
        return float((kernels.gelu_forward(x, backend=backend) * dy).sum())

    dx = kernels.gelu_backward(dy, x, backend=backend)
    np.testing.assert_allclose(dx, central_diff(loss, x), rtol=1e-5, atol=1e-7)


def test_forced_backend_env(monkeypatch):
    # the dispatcher reads the env var at import; invalid names must raise
    import importlib
    import spectral_bridge.kernels as mod
    monkeypatch.setenv("SPECTRAL_BRIDGE_BACKEND", "numpy")
    reloaded = importlib.reload(mod)
    assert reloaded.BACKEND == "numpy"
    monkeypatch.setenv("SPECTRAL_BRIDGE_BACKEND", "nonsense")
    with pytest.raises(ImportError):
        importlib.reload(mod)
    monkeypatch.delenv("SPECTRAL_BRIDGE_BACKEND")
    importlib.reload(mod)
