"""Pure-numpy implementations of the hot kernels.

Same signatures as the compiled module ``divuda._ckernels``; the active
backend is chosen once at import time in :mod:`divuda.backend`.
"""

import numpy as np

BACKEND = "python"


def softmax_forward(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(probs, grad_out):
    inner = (grad_out * probs).sum(axis=1, keepdims=True)
    return probs * (grad_out - inner)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return np.where(x > 0.0, grad_out, 0.0)


def log_clamped_forward(x, eps):
    return np.log(np.maximum(x, eps))


def log_clamped_backward(x, grad_out, eps):
    # True subgradient of log(max(x, eps)): flat below the clamp.
    return np.where(x > eps, grad_out / np.maximum(x, eps), 0.0)


def sgd_update(param, grad, vel, lr, momentum, weight_decay):
    vel *= momentum
    vel += grad
    vel += weight_decay * param
    param -= lr * vel
