"""Compare the compiled kernels against the pure-numpy fallback.

Times the four kernel families on realistic shapes, then a short end-to-end
training run under each backend (the fallback run happens in a subprocess
because the backend is chosen at import time).

Usage: python3 benchmarks/bench_backends.py [--iters 200] [--train-iters 300]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from divuda import _kernels_py  # noqa: E402

try:
    from divuda import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, iters):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    return (time.perf_counter() - t0) / iters


def bench_kernels(iters):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.uniform(-5, 5, (256, 64)))
    probs = _kernels_py.softmax_forward(x)
    grad = np.ascontiguousarray(rng.uniform(-1, 1, x.shape))
    vel = np.zeros_like(x)

    cases = {
        "softmax_forward": lambda k: k.softmax_forward(x),
        "softmax_backward": lambda k: k.softmax_backward(probs, grad),
        "relu_forward": lambda k: k.relu_forward(x),
        "log_clamped_forward": lambda k: k.log_clamped_forward(probs, 1e-12),
        "sgd_update": lambda k: k.sgd_update(x.copy(), grad.copy(), vel.copy(),
                                             0.01, 0.9, 5e-4),
    }
    print(f"{'kernel':22s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, call in cases.items():
        t_py = timeit(lambda: call(_kernels_py), iters)
        if _ckernels is None:
            print(f"{name:22s} {t_py * 1e6:10.1f}us {'n/a':>12s}")
            continue
        t_c = timeit(lambda: call(_ckernels), iters)
        print(f"{name:22s} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us "
              f"{t_py / t_c:7.2f}x")


TRAIN_SNIPPET = """
import sys, time
sys.path.insert(0, {src!r})
import divuda
from divuda.synthdata import toy_scenario, make_noisy_scenario
from divuda.trainer import Trainer, Hyperparams
src_ds, tgt_ds = make_noisy_scenario(toy_scenario())
tr = Trainer(src_ds, tgt_ds, hyper=Hyperparams(iterations={iters}), seed=0)
t0 = time.perf_counter()
for _ in range({iters}):
    tr.run_iteration()
print(f"{{divuda.backend_name()}} backend: {{time.perf_counter() - t0:.2f}}s "
      f"for {iters} iterations")
"""


def bench_training(train_iters):
    src = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "src")
    code = TRAIN_SNIPPET.format(src=src, iters=train_iters)
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("DIVUDA_PURE_PYTHON", None)
        if pure:
            env["DIVUDA_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        print(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=200,
                    help="repetitions per kernel timing")
    ap.add_argument("--train-iters", type=int, default=300,
                    help="training iterations per end-to-end run")
    args = ap.parse_args()
    if _ckernels is None:
        print("note: compiled extension not available, python timings only")
    bench_kernels(args.iters)
    print()
    bench_training(args.train_iters)


if __name__ == "__main__":
    main()
