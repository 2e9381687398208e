# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see _kernels_py for the contract)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND = "cython"


def softmax_forward(cnp.ndarray[cnp.float64_t, ndim=2] logits):
    cdef Py_ssize_t n = logits.shape[0], k = logits.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(k):
            out[i, j] = exp(logits[i, j] - m)
            s += out[i, j]
        for j in range(k):
            out[i, j] /= s
    return out


def softmax_backward(cnp.ndarray[cnp.float64_t, ndim=2] probs,
                     cnp.ndarray[cnp.float64_t, ndim=2] grad_out):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    cdef double inner
    for i in range(n):
        inner = 0.0
        for j in range(k):
            inner += grad_out[i, j] * probs[i, j]
        for j in range(k):
            out[i, j] = probs[i, j] * (grad_out[i, j] - inner)
    return out


def relu_forward(cnp.ndarray[cnp.float64_t, ndim=2] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(k):
            out[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return out


def relu_backward(cnp.ndarray[cnp.float64_t, ndim=2] x,
                  cnp.ndarray[cnp.float64_t, ndim=2] grad_out):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(k):
            out[i, j] = grad_out[i, j] if x[i, j] > 0.0 else 0.0
    return out


def log_clamped_forward(cnp.ndarray[cnp.float64_t, ndim=2] x, double eps):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(k):
            out[i, j] = log(x[i, j] if x[i, j] > eps else eps)
    return out


def log_clamped_backward(cnp.ndarray[cnp.float64_t, ndim=2] x,
                         cnp.ndarray[cnp.float64_t, ndim=2] grad_out,
                         double eps):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, k))
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(k):
            out[i, j] = grad_out[i, j] / x[i, j] if x[i, j] > eps else 0.0
    return out


def sgd_update(cnp.ndarray[cnp.float64_t, ndim=2] param,
               cnp.ndarray[cnp.float64_t, ndim=2] grad,
               cnp.ndarray[cnp.float64_t, ndim=2] vel,
               double lr, double momentum, double weight_decay):
    cdef Py_ssize_t n = param.shape[0], k = param.shape[1]
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(k):
            vel[i, j] = vel[i, j] * momentum + grad[i, j] + weight_decay * param[i, j]
            param[i, j] -= lr * vel[i, j]
    return None
