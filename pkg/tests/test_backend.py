"""Parity between the compiled kernels and the pure-numpy fallback.

exp/log come from different libm implementations, so agreement is checked
to 1e-12 relative rather than bit-for-bit; purely arithmetic kernels
(relu, sgd) must match exactly.
"""

import subprocess
import sys

import numpy as np
import pytest

from divuda import _kernels_py

try:
    from divuda import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")

rng = np.random.default_rng(7)


def close(a, b, tol=1e-12):
    return np.allclose(a, b, rtol=tol, atol=tol)


@needs_ext
def test_backend_tags():
    assert _kernels_py.BACKEND == "python"
    assert _ckernels.BACKEND == "cython"


@needs_ext
@pytest.mark.parametrize("shape", [(1, 2), (17, 5), (64, 31)])
def test_softmax_parity(shape):
    x = np.ascontiguousarray(rng.uniform(-30, 30, shape))
    p_py = _kernels_py.softmax_forward(x)
    p_c = _ckernels.softmax_forward(x)
    assert close(p_py, p_c)
    g = np.ascontiguousarray(rng.uniform(-1, 1, shape))
    assert close(_kernels_py.softmax_backward(p_py, g),
                 _ckernels.softmax_backward(p_py, g))


@needs_ext
def test_relu_parity_exact():
    x = np.ascontiguousarray(rng.uniform(-2, 2, (13, 9)))
    g = np.ascontiguousarray(rng.uniform(-1, 1, (13, 9)))
    assert _kernels_py.relu_forward(x).tobytes() == _ckernels.relu_forward(x).tobytes()
    assert _kernels_py.relu_backward(x, g).tobytes() == \
        _ckernels.relu_backward(x, g).tobytes()


@needs_ext
def test_log_clamped_parity():
    x = np.ascontiguousarray(np.concatenate([
        rng.uniform(0, 1, (5, 4)), np.zeros((1, 4)), np.full((1, 4), 1e-13)]))
    g = np.ascontiguousarray(rng.uniform(-1, 1, x.shape))
    eps = 1e-12
    assert close(_kernels_py.log_clamped_forward(x, eps),
                 _ckernels.log_clamped_forward(x, eps))
    # backward is pure arithmetic plus the clamp test: exact match expected
    assert _kernels_py.log_clamped_backward(x, g, eps).tobytes() == \
        _ckernels.log_clamped_backward(x, g, eps).tobytes()


@needs_ext
def test_sgd_update_parity_exact():
    p1 = np.ascontiguousarray(rng.uniform(-1, 1, (8, 3)))
    g1 = np.ascontiguousarray(rng.uniform(-1, 1, (8, 3)))
    v1 = np.ascontiguousarray(rng.uniform(-1, 1, (8, 3)))
    p2, g2, v2 = p1.copy(), g1.copy(), v1.copy()
    _kernels_py.sgd_update(p1, g1, v1, 0.01, 0.9, 5e-4)
    _ckernels.sgd_update(p2, g2, v2, 0.01, 0.9, 5e-4)
    assert p1.tobytes() == p2.tobytes()
    assert v1.tobytes() == v2.tobytes()


def _run_pure_python(code):
    env = {"DIVUDA_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"}
    return subprocess.run([sys.executable, "-c", code], capture_output=True,
                          text=True, env=env, check=True).stdout


def test_pure_python_fallback_selected():
    out = _run_pure_python("import divuda; print(divuda.backend_name())")
    assert out.strip() == "python"


def test_pure_python_fallback_trains():
    """The fallback must run the full training loop, not just import."""
    out = _run_pure_python(
        "from divuda.synthdata import toy_scenario, make_noisy_scenario\n"
        "from divuda.trainer import Trainer, Hyperparams\n"
        "src, tgt = make_noisy_scenario(toy_scenario(samples_per_class=40))\n"
        "tr = Trainer(src, tgt, hyper=Hyperparams(iterations=20, hidden=16), seed=1)\n"
        "for _ in range(20): tr.run_iteration()\n"
        "import numpy as np\n"
        "print(all(np.isfinite(n.value).all() for _, n in tr.model.params.items()))\n"
    )
    assert out.strip() == "True"
