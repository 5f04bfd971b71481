"""Minimal dense-network toolkit: layers with explicit adjoints, Adam, and
checkpoint persistence.

Layers cache what their backward pass needs on every forward call, so the
usage pattern is strictly forward-then-backward per step. Gradients
accumulate into ``grads`` until ``zero_grad``.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict

import numpy as np

from .binio import read_container, write_container
from .errors import CheckpointError

_CKPT_MAGIC = b"SIK1"


class Module:
    """Base class wiring parameter/grad dictionaries through a layer tree."""

    def __init__(self):
        self.params = OrderedDict()
        self.grads = OrderedDict()
        self.children = OrderedDict()

    def add_param(self, name, value):
        self.params[name] = np.asarray(value, dtype=np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def add_child(self, name, module):
        self.children[name] = module
        return module

    def named_parameters(self, prefix=""):
        for name, value in self.params.items():
            yield prefix + name, value
        for cname, child in self.children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def named_grads(self, prefix=""):
        for name, value in self.grads.items():
            yield prefix + name, value
        for cname, child in self.children.items():
            yield from child.named_grads(prefix + cname + ".")

    def zero_grad(self):
        for g in self.grads.values():
            g[...] = 0.0
        for child in self.children.values():
            child.zero_grad()

    def load_state(self, state, prefix=""):
        """Copy values from a flat {name: array} mapping into parameters."""
        for name in self.params:
            key = prefix + name
            if key not in state:
                raise CheckpointError(f"missing parameter '{key}'")
            src = state[key]
            if src.shape != self.params[name].shape:
                raise CheckpointError(
                    f"parameter '{key}' has shape {src.shape}, expected {self.params[name].shape}"
                )
            self.params[name][...] = src
        for cname, child in self.children.items():
            child.load_state(state, prefix + cname + ".")


def parameter_count(module: Module) -> int:
    return sum(v.size for _, v in module.named_parameters())


class Linear(Module):
    """y = x W^T + b over the last axis; leading axes are flattened."""

    def __init__(self, n_in, n_out, rng):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        bound = np.sqrt(6.0 / n_in)
        self.add_param("W", rng.uniform(-bound, bound, size=(n_out, n_in)))
        self.add_param("b", np.zeros(n_out))
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, d_out):
        x2 = self._x.reshape(-1, self.n_in)
        d2 = d_out.reshape(-1, self.n_out)
        self.grads["W"] += d2.T @ x2
        self.grads["b"] += d2.sum(axis=0)
        return d_out @ self.params["W"]


class ReLU(Module):
    def __init__(self):
        super().__init__()
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, d_out):
        return np.where(self._mask, d_out, 0.0)


class LayerNorm(Module):
    """Normalization over the last axis with learned gain and bias."""

    def __init__(self, width, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.add_param("gain", np.ones(width))
        self.add_param("bias", np.zeros(width))
        self._cache = None

    def forward(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        self._cache = (xhat, inv)
        return self.params["gain"] * xhat + self.params["bias"]

    def backward(self, d_out):
        xhat, inv = self._cache
        n = xhat.shape[-1]
        lead = (-1,) if xhat.ndim == 1 else tuple(range(xhat.ndim - 1))
        self.grads["gain"] += np.sum(d_out * xhat, axis=lead)
        self.grads["bias"] += np.sum(d_out, axis=lead)
        dxhat = d_out * self.params["gain"]
        return inv / n * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * np.sum(dxhat * xhat, axis=-1, keepdims=True)
        )


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = layers
        for i, layer in enumerate(layers):
            self.add_child(str(i), layer)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, d_out):
        for layer in reversed(self.layers):
            d_out = layer.backward(d_out)
        return d_out


class ResidualBlock(Module):
    """x + W2 relu(W1 LN(x) + b1) + b2, everything at a fixed width."""

    def __init__(self, width, rng):
        super().__init__()
        self.norm = self.add_child("norm", LayerNorm(width))
        self.fc1 = self.add_child("fc1", Linear(width, width, rng))
        self.act = self.add_child("act", ReLU())
        self.fc2 = self.add_child("fc2", Linear(width, width, rng))

    def forward(self, x):
        h = self.act.forward(self.fc1.forward(self.norm.forward(x)))
        return x + self.fc2.forward(h)

    def backward(self, d_out):
        d = self.fc2.backward(d_out)
        d = self.fc1.backward(self.act.backward(d))
        return d_out + self.norm.backward(d)


def adam_step(param, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on param/m/v. t counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, module: Module, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.module = module
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.state = {
            name: (np.zeros_like(p), np.zeros_like(p))
            for name, p in module.named_parameters()
        }

    def step(self):
        self.t += 1
        grads = dict(self.module.named_grads())
        for name, p in self.module.named_parameters():
            m, v = self.state[name]
            adam_step(p, grads[name], m, v, self.t,
                      self.lr, self.beta1, self.beta2, self.eps)


def save_checkpoint(path, arrays: "OrderedDict[str, np.ndarray]",
                    architecture: dict, extra: dict | None = None) -> None:
    """Write parameters plus an architecture descriptor; byte-deterministic."""
    names = list(arrays.keys())
    blobs = [np.ascontiguousarray(arrays[n], dtype="<f8").tobytes() for n in names]
    payload = b"".join(blobs)
    header = {
        "version": 1,
        "architecture": architecture,
        "names": names,
        "shapes": [list(arrays[n].shape) for n in names],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "extra": extra or {},
    }
    write_container(path, _CKPT_MAGIC, header, payload)


def load_checkpoint(path):
    """Returns (arrays, architecture, extra, content_hash).

    content_hash is the sha256 of the entire file, suitable for reporting
    which model a service is running. Corrupt or truncated payloads raise.
    """
    header, payload = read_container(path, _CKPT_MAGIC)
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: payload hash mismatch, file is corrupt")
    arrays = OrderedDict()
    offset = 0
    for name, shape in zip(header["names"], header["shapes"]):
        size = int(np.prod(shape)) if shape else 1
        nbytes = size * 8
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: payload too short for parameter '{name}'")
        arrays[name] = (
            np.frombuffer(payload, dtype="<f8", count=size, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing payload bytes")
    content = hashlib.sha256(open(path, "rb").read()).hexdigest()
    return arrays, header["architecture"], header["extra"], content
