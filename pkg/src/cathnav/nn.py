"""Minimal differentiable substrate: array-valued reverse-mode autodiff,
multilayer perceptrons over a flat parameter store, an adaptive-moment
optimizer and a squashed-Gaussian policy head.

Everything is float64 and deterministic under seeded generators.
"""

import math
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-9       # keeps actions strictly inside (-1, 1)
LOGPROB_EPS = 1e-6      # tanh Jacobian regularizer
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Reverse-mode tape over numpy arrays
# ---------------------------------------------------------------------------

def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the computation tape; ``data`` is always float64."""

    __slots__ = ("data", "grad", "_backward", "_prev")

    def __init__(self, data, _prev=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._backward = None
        self._prev = _prev

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(np.asarray(g), self.data.shape)

    @staticmethod
    def _wrap(other):
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._wrap(other)
        out = Tensor(self.data + other.data, (self, other))

        def back():
            self._accum(out.grad)
            other._accum(out.grad)
        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out._backward = lambda: self._accum(-out.grad)
        return out

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        other = self._wrap(other)
        out = Tensor(self.data * other.data, (self, other))

        def back():
            self._accum(out.grad * other.data)
            other._accum(out.grad * self.data)
        out._backward = back
        return out

    __rmul__ = __mul__

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, (self, other))

        def back():
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)
        out._backward = back
        return out

    def __getitem__(self, idx):
        out = Tensor(self.data[idx], (self,))

        def back():
            if self.grad is None:
                self.grad = np.zeros_like(self.data)
            np.add.at(self.grad, idx, out.grad)
        out._backward = back
        return out

    def square(self):
        return self * self

    def exp(self):
        out = Tensor(np.exp(self.data), (self,))
        out._backward = lambda: self._accum(out.grad * out.data)
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))
        out._backward = lambda: self._accum(out.grad / self.data)
        return out

    def tanh(self):
        out = Tensor(np.tanh(self.data), (self,))
        out._backward = lambda: self._accum(out.grad * (1.0 - out.data**2))
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), (self,))
        out._backward = lambda: self._accum(out.grad * (self.data > 0.0))
        return out

    def sigmoid(self):
        out = Tensor(1.0 / (1.0 + np.exp(-self.data)), (self,))
        out._backward = lambda: self._accum(out.grad * out.data * (1.0 - out.data))
        return out

    def clip(self, lo, hi):
        """Clamp values; gradient passes only where unclamped."""
        out = Tensor(np.clip(self.data, lo, hi), (self,))
        inside = (self.data > lo) & (self.data < hi)
        out._backward = lambda: self._accum(out.grad * inside)
        return out

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis), (self,))

        def back():
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))
        out._backward = back
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), (self,))
        out._backward = lambda: self._accum(out.grad.reshape(self.data.shape))
        return out

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar loss")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()


def minimum(a, b):
    """Elementwise minimum; ties route their gradient to ``a``."""
    out = Tensor(np.minimum(a.data, b.data), (a, b))
    take_a = a.data <= b.data

    def back():
        a._accum(out.grad * take_a)
        b._accum(out.grad * ~take_a)
    out._backward = back
    return out


def concat(tensors, axis=1):
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back():
        for t, o0, o1 in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.data.ndim
            sl[axis] = slice(o0, o1)
            t._accum(out.grad[tuple(sl)])
    out._backward = back
    return out


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

class Network:
    """Fully-connected net with rectifier hidden layers.

    Parameters live in one flat float64 vector (``params``); weight and
    bias tensors are views into it, so in-place optimizer updates are seen
    by the tape on the next forward pass.
    """

    def __init__(self, sizes, output_activation="linear", seed=0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output_activation not in ("linear", "sigmoid", "tanh"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.output_activation = output_activation
        total = sum((fi + 1) * fo for fi, fo in zip(self.sizes, self.sizes[1:]))
        self.params = np.zeros(total, dtype=np.float64)
        self._tensors = []
        offset = 0
        rng = np.random.default_rng(seed)
        for fan_in, fan_out in zip(self.sizes, self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            w = self.params[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = self.params[offset:offset + fan_out]
            offset += fan_out
            w[:] = rng.uniform(-bound, bound, size=w.shape)
            b[:] = rng.uniform(-bound, bound, size=b.shape)
            self._tensors.append((Tensor(w), Tensor(b)))

    @property
    def n_params(self):
        return self.params.size

    def forward(self, x):
        """Plain numpy forward pass (no tape)."""
        h = np.asarray(x, dtype=np.float64)
        single = h.ndim == 1
        if single:
            h = h[None, :]
        for i, (wt, bt) in enumerate(self._tensors):
            h = h @ wt.data.T + bt.data
            if i < len(self._tensors) - 1:
                h = np.maximum(h, 0.0)
        if self.output_activation == "sigmoid":
            h = 1.0 / (1.0 + np.exp(-h))
        elif self.output_activation == "tanh":
            h = np.tanh(h)
        return h[0] if single else h

    def forward_tensor(self, x):
        """Tape-recorded forward pass; ``x`` is a Tensor of shape (n, in)."""
        h = x
        for i, (wt, bt) in enumerate(self._tensors):
            h = _affine(h, wt, bt)
            if i < len(self._tensors) - 1:
                h = h.relu()
        if self.output_activation == "sigmoid":
            h = h.sigmoid()
        elif self.output_activation == "tanh":
            h = h.tanh()
        return h

    def zero_grad(self):
        for wt, bt in self._tensors:
            wt.grad = None
            bt.grad = None

    def grad_vector(self):
        """Flat gradient aligned with ``params`` (zeros where untouched)."""
        out = np.zeros_like(self.params)
        offset = 0
        for wt, bt in self._tensors:
            n = wt.data.size
            if wt.grad is not None:
                out[offset:offset + n] = wt.grad.ravel()
            offset += n
            n = bt.data.size
            if bt.grad is not None:
                out[offset:offset + n] = bt.grad.ravel()
            offset += n
        return out

    def copy(self):
        net = Network(self.sizes, self.output_activation, seed=0)
        net.params[:] = self.params
        return net


def _affine(x, w, b):
    # x @ w.T + b with correct broadcasting for the bias row
    out = Tensor(x.data @ w.data.T + b.data, (x, w, b))

    def back():
        x._accum(out.grad @ w.data)
        w._accum(out.grad.T @ x.data)
        b._accum(out.grad.sum(axis=0))
    out._backward = back
    return out


@dataclass
class GradientReport:
    loss: float
    gradient: np.ndarray


def forward(net, x):
    """Deterministic network evaluation."""
    x = np.asarray(x, dtype=np.float64)
    expect = net.sizes[0]
    if x.shape[-1] != expect:
        raise ValueError(f"input width {x.shape[-1]} != fan-in {expect}")
    return net.forward(x)


def gradient(net, x, loss_fn):
    """Reverse-mode gradient of a scalar loss of the network outputs.

    ``loss_fn`` maps the output Tensor to a scalar Tensor using tape ops.
    Returns the loss value and the flat per-parameter gradient.
    """
    net.zero_grad()
    out = net.forward_tensor(Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64))))
    loss = loss_fn(out)
    loss.backward()
    value = float(loss.data)
    if not math.isfinite(value):
        raise FloatingPointError("non-finite loss")
    g = net.grad_vector()
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    return GradientReport(loss=value, gradient=g)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def adam_update(params, grads, m, v, t, lr=3e-4, beta1=0.9, beta2=0.999,
                eps=1e-8):
    """One bias-corrected adaptive-moment step, in place. ``t`` is the
    1-based step index after this update."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, n, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n, dtype=np.float64)
        self.v = np.zeros(n, dtype=np.float64)
        self.t = 0
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def step(self, params, grads):
        self.t += 1
        adam_update(params, grads, self.m, self.v, self.t,
                    self.lr, self.beta1, self.beta2, self.eps)


# ---------------------------------------------------------------------------
# Squashed-Gaussian policy head
# ---------------------------------------------------------------------------

@dataclass
class GaussianPolicyOutput:
    mean: np.ndarray
    log_std: np.ndarray
    pre_squash: np.ndarray
    action: np.ndarray
    log_prob: float


def squash_log_prob(pre_squash, mean, log_std):
    """Log-density of tanh(u) for u ~ N(mean, exp(log_std)), elementwise
    summed; includes the tanh change-of-variables correction."""
    u = np.asarray(pre_squash, dtype=np.float64)
    mu = np.asarray(mean, dtype=np.float64)
    ls = np.asarray(log_std, dtype=np.float64)
    z = (u - mu) / np.exp(ls)
    gauss = -0.5 * z**2 - 0.5 * LOG_2PI - ls
    correction = np.log(1.0 - np.tanh(u)**2 + LOGPROB_EPS)
    return float(np.sum(gauss - correction))


def sample_squashed_gaussian(policy_net, state, rng):
    """Reparameterized action sample with its squash-corrected log-prob.

    ``rng`` is a seeded numpy Generator (or an int seed); identical seeds
    give bit-identical samples.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    out = policy_net.forward(np.asarray(state, dtype=np.float64))
    d = out.shape[-1] // 2
    mean = out[:d]
    log_std = np.clip(out[d:], LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    noise = rng.standard_normal(d)
    pre = mean + std * noise
    action = np.clip(np.tanh(pre), -1.0 + SQUASH_EPS, 1.0 - SQUASH_EPS)
    return GaussianPolicyOutput(
        mean=mean, log_std=log_std, pre_squash=pre, action=action,
        log_prob=squash_log_prob(pre, mean, log_std))
