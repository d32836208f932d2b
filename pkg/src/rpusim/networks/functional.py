"""Digital activations and the softmax cross-entropy loss."""

import numpy as np


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid_grad_from_output(a):
    return a * (1.0 - a)


def tanh_grad_from_output(a):
    return 1.0 - a * a


def softmax(z, axis=0):
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def cross_entropy(p, label, eps=1e-12):
    """Negative log-likelihood of ``label`` under probabilities ``p``."""
    return -float(np.log(max(p[label], eps)))


def activate(kind: str, z):
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    if kind == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, a):
    """Derivative expressed through the activation output ``a``."""
    if kind == "sigmoid":
        return sigmoid_grad_from_output(a)
    if kind == "tanh":
        return tanh_grad_from_output(a)
    if kind == "identity":
        return np.ones_like(a)
    raise ValueError(f"no elementwise derivative for {kind!r}")
