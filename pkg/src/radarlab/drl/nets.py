"""Minimal fully-connected networks with hand-written reverse-mode
gradients, plus Adam. No autograd dependency: the networks here are small
enough (<= 2x256) that explicit numpy backprop is both fast and auditable.
"""

from __future__ import annotations

import numpy as np


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    # Subgradient 0 at exactly 0.
    return (z > 0.0).astype(z.dtype)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    return np.logaddexp(0.0, z)


class Mlp:
    """Affine/rectifier stack: relu hidden layers, configurable output head
    ("linear" or "sigmoid")."""

    def __init__(self, sizes, rng, head: str = "linear", final_scale: float = 3e-3):
        if head not in ("linear", "sigmoid"):
            raise ValueError(f"unsupported head {head!r}")
        self.sizes = list(sizes)
        self.head = head
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if i == len(sizes) - 2:
                w = rng.uniform(-final_scale, final_scale, (fan_out, fan_in))
            else:
                w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    # -- forward -------------------------------------------------------------

    def forward(self, x):
        out, _ = self.forward_cache(x)
        return out

    def forward_cache(self, x):
        """Forward pass keeping pre-activations for the backward pass."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {a.shape[1]} != expected {self.sizes[0]}")
        inputs, preacts = [a], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            preacts.append(z)
            if i < len(self.weights) - 1:
                a = relu(z)
            elif self.head == "sigmoid":
                a = sigmoid(z)
            else:
                a = z
            inputs.append(a)
        cache = (inputs, preacts, squeeze)
        return (a[0] if squeeze else a), cache

    # -- backward ------------------------------------------------------------

    def backward(self, cache, grad_out):
        """Gradients of sum(grad_out * output) w.r.t. parameters and input.

        Returns (param_grads, grad_input) where param_grads is a flat list
        [dW0, db0, dW1, db1, ...] matching `parameters()`.
        """
        inputs, preacts, squeeze = cache
        g = np.asarray(grad_out, dtype=float)
        if squeeze:
            g = g[None, :]
        if g.shape != preacts[-1].shape:
            raise ValueError(f"upstream gradient shape {g.shape} != {preacts[-1].shape}")
        if self.head == "sigmoid":
            s = sigmoid(preacts[-1])
            g = g * s * (1.0 - s)
        param_grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = inputs[i]
            param_grads[2 * i] = g.T @ a_in
            param_grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i]
            if i > 0:
                g = g * relu_grad(preacts[i - 1])
        return param_grads, (g[0] if squeeze else g)

    # -- parameter plumbing ----------------------------------------------------

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def get_state(self):
        return [p.copy() for p in self.parameters()]

    def set_state(self, state):
        params = self.parameters()
        if len(state) != len(params):
            raise ValueError("parameter count mismatch")
        for p, s in zip(params, state):
            if p.shape != np.asarray(s).shape:
                raise ValueError("parameter shape mismatch")
            p[...] = s

    def copy(self):
        clone = object.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.head = self.head
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone


def soft_update(target: Mlp, online: Mlp, rho: float):
    """Polyak averaging: target <- rho * online + (1 - rho) * target."""
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - rho
        tp += rho * op


class Adam:
    """Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def get_state(self):
        return {
            "m": [a.copy() for a in self.m],
            "v": [a.copy() for a in self.v],
            "t": self.t,
        }

    def set_state(self, state):
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            dst[...] = src
