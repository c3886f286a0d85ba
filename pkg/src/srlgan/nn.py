"""Minimal dense-network core: linear layers, LeakyReLU, Sigmoid, inverted
dropout, hand-written reverse-mode gradients, and Adam.

Everything is float64 (the production learning rate of 1e-6 makes float32
updates vanish into rounding).  Batches are row-major: (batch, features).
A network instance is single-writer during training; clone parameters for
concurrent read-only inference.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


class TrainingError(RuntimeError):
    """Non-finite value encountered during training."""


class Linear:
    """y = x @ W + b with W shaped (in, out)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 init: str = "he"):
        if init == "he":
            bound = np.sqrt(6.0 / in_dim)
        elif init == "xavier":
            bound = np.sqrt(6.0 / (in_dim + out_dim))
        else:
            raise ValueError(f"unknown init {init!r}")
        self.weight = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x, training=False, rng=None):
        if x.shape[1] != self.weight.shape[0]:
            raise ValueError(
                f"input width {x.shape[1]} != layer in-dim {self.weight.shape[0]}"
            )
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.grad_weight += self._x.T @ grad_out
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weight.T

    def params(self):
        return [("weight", self.weight, self.grad_weight),
                ("bias", self.bias, self.grad_bias)]


class LeakyReLU:
    def __init__(self, slope: float = 0.01):
        if not 0.0 < slope < 1.0:
            raise ValueError("slope must be in (0, 1)")
        self.slope = slope
        self._mask = None

    def forward(self, x, training=False, rng=None):
        self._mask = x >= 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, self.slope * grad_out)

    def params(self):
        return []


class Sigmoid:
    def __init__(self):
        self._y = None

    def forward(self, x, training=False, rng=None):
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, grad_out):
        return grad_out * self._y * (1.0 - self._y)

    def params(self):
        return []


class Dropout:
    """Inverted dropout: survivors scaled by 1/(1-rate) at train time,
    identity at eval time."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("rate must be in [0, 1)")
        self.rate = rate
        self._scale = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._scale = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        self._scale = keep / (1.0 - self.rate)
        return x * self._scale

    def backward(self, grad_out):
        if self._scale is None:
            return grad_out
        return grad_out * self._scale

    def params(self):
        return []


class MLP:
    """Sequential dense net: LeakyReLU hiddens (optional dropout), sigmoid
    output.  forward() caches activations for one backward() pass."""

    def __init__(self, sizes, rng: np.random.Generator, slope: float = 0.01,
                 dropout: float = 0.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.slope = slope
        self.dropout = dropout
        self.layers = []
        for k in range(len(sizes) - 1):
            last = k == len(sizes) - 2
            self.layers.append(
                Linear(sizes[k], sizes[k + 1], rng, init="xavier" if last else "he")
            )
            if last:
                self.layers.append(Sigmoid())
            else:
                self.layers.append(LeakyReLU(slope))
                if dropout > 0.0:
                    self.layers.append(Dropout(dropout))

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad_out):
        """Backprop a loss gradient; returns the gradient w.r.t. the input."""
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def zero_grad(self):
        for layer in self.layers:
            for _, _, grad in layer.params():
                grad[...] = 0.0

    def params(self):
        out = []
        for k, layer in enumerate(self.layers):
            for name, value, grad in layer.params():
                out.append((f"layer{k}.{name}", value, grad))
        return out

    def param_vector(self) -> np.ndarray:
        return np.concatenate([v.ravel() for _, v, _ in self.params()])

    def set_param_vector(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for _, value, _ in self.params():
            value[...] = flat[offset:offset + value.size].reshape(value.shape)
            offset += value.size
        if offset != flat.size:
            raise ValueError("parameter vector size mismatch")


class Adam:
    """Bias-corrected adaptive-moment optimizer over a network's params."""

    def __init__(self, net: MLP, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(v) for name, v, _ in net.params()}
        self.v = {name: np.zeros_like(v) for name, v, _ in net.params()}

    def step(self):
        self.t += 1
        for name, value, grad in self.net.params():
            if not np.all(np.isfinite(grad)):
                raise TrainingError(
                    f"non-finite gradient in {name} at step {self.t}"
                )
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# Checkpoint container: .npz with a json header plus one array per parameter
# and per optimizer moment; round-trips bit-exactly (float64 arrays, json
# RNG state).
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def network_state(net: MLP, opt: Adam | None = None) -> dict:
    arrays = {}
    for name, value, _ in net.params():
        arrays[f"param.{name}"] = value
    if opt is not None:
        for name in opt.m:
            arrays[f"adam_m.{name}"] = opt.m[name]
            arrays[f"adam_v.{name}"] = opt.v[name]
    return arrays


def save_checkpoint(path, nets: dict[str, MLP], opts: dict[str, Adam],
                    rng: np.random.Generator | None, meta: dict,
                    extra_arrays: dict | None = None) -> None:
    """Atomic checkpoint write.  `nets` and `opts` are keyed by role
    (e.g. 'generator', 'discriminator'); `meta` must be json-serializable;
    `extra_arrays` holds auxiliary vectors such as the sparsity target."""
    path = Path(path)
    header = {
        "version": CHECKPOINT_VERSION,
        "nets": {name: net.sizes for name, net in nets.items()},
        "dropout": {name: net.dropout for name, net in nets.items()},
        "slope": {name: net.slope for name, net in nets.items()},
        "adam_t": {name: opt.t for name, opt in opts.items()},
        "adam_hparams": {
            name: [opt.lr, opt.beta1, opt.beta2, opt.eps]
            for name, opt in opts.items()
        },
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "meta": meta,
    }
    arrays = {}
    for name, net in nets.items():
        for key, arr in network_state(net, opts.get(name)).items():
            arrays[f"{name}/{key}"] = arr
    for key, arr in (extra_arrays or {}).items():
        arrays[f"extra/{key}"] = np.asarray(arr)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.npz")
    os.close(fd)
    try:
        np.savez(tmp, header=json.dumps(header, sort_keys=True), **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def load_checkpoint(path):
    """Returns (nets, opts, rng, meta, extra_arrays) from a checkpoint file."""
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        nets = {}
        opts = {}
        for name, sizes in header["nets"].items():
            net = MLP(sizes, np.random.default_rng(0),
                      slope=header["slope"][name],
                      dropout=header["dropout"][name])
            for pname, value, _ in net.params():
                value[...] = z[f"{name}/param.{pname}"]
            if name in header["adam_t"]:
                lr, b1, b2, eps = header["adam_hparams"][name]
                opt = Adam(net, lr=lr, beta1=b1, beta2=b2, eps=eps)
                opt.t = header["adam_t"][name]
                for pname in opt.m:
                    key = f"{name}/adam_m.{pname}"
                    if key in z:
                        opt.m[pname][...] = z[key]
                        opt.v[pname][...] = z[f"{name}/adam_v.{pname}"]
                opts[name] = opt
            nets[name] = net
        rng = None
        if header["rng_state"] is not None:
            rng = np.random.default_rng(0)
            rng.bit_generator.state = header["rng_state"]
        extra = {key[len("extra/"):]: np.asarray(z[key])
                 for key in z.files if key.startswith("extra/")}
        return nets, opts, rng, header["meta"], extra
