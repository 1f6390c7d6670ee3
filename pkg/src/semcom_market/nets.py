"""Minimal dense-network machinery: forward, exact backprop, Adam, soft updates.

Everything is plain numpy so the whole training computation stays
deterministic and inspectable.  Hidden layers use SiLU (x * sigmoid(x)),
a smooth nonlinearity whose bounded derivative keeps the multi-step
through-chain gradients of the diffusion policy well behaved; outputs are
linear.  float32 is the training default, float64 is available for
finite-difference verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow for very negative x saturates to inf and 1/(1+inf) = 0,
    # which is the correct limit, so silence the warning rather than branch
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def silu(x: np.ndarray) -> np.ndarray:
    return x * _sigmoid(x)


def silu_grad(x: np.ndarray) -> np.ndarray:
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


_ACTIVATIONS = {
    "silu": (silu, silu_grad),
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


@dataclass
class DenseNet:
    """Fully connected net; weights[i] maps layer i to i+1, row-major (in, out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "silu"
    output_activation: str = "identity"

    @classmethod
    def create(
        cls,
        sizes: list[int],
        rng: np.random.Generator,
        hidden_activation: str = "silu",
        output_activation: str = "identity",
        dtype=np.float32,
        final_scale: float = 1.0,
    ) -> "DenseNet":
        """He-style initialization; final_scale shrinks the last layer (small
        initial outputs keep the untrained diffusion chain close to pure noise)."""
        weights, biases = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = np.sqrt(2.0 / n_in)
            if k == len(sizes) - 2:
                scale *= final_scale
            weights.append((rng.standard_normal((n_in, n_out)) * scale).astype(dtype))
            biases.append(np.zeros(n_out, dtype=dtype))
        return cls(weights=weights, biases=biases,
                   hidden_activation=hidden_activation, output_activation=output_activation)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "DenseNet":
        return DenseNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )

    def _act(self, layer: int):
        name = self.output_activation if layer == len(self.weights) - 1 else self.hidden_activation
        return _ACTIVATIONS[name]


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a batch (B, in) or a single vector (in,)."""
    y, _ = forward_cached(net, x)
    return y


def forward_cached(net: DenseNet, x: np.ndarray):
    """Forward pass keeping pre-activations and inputs for the backward pass."""
    x = np.asarray(x, dtype=net.dtype)
    squeeze = x.ndim == 1
    a = x[None, :] if squeeze else x
    if a.shape[1] != net.weights[0].shape[0]:
        raise ValueError(f"input width {a.shape[1]} != first layer width {net.weights[0].shape[0]}")
    inputs, preacts = [], []
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(a)
        z = a @ w + b
        preacts.append(z)
        a = net._act(k)[0](z)
    y = a[0] if squeeze else a
    return y, (inputs, preacts, squeeze)


def backward_from_cache(net: DenseNet, cache, grad_out: np.ndarray):
    """Exact reverse-mode gradients given a forward cache.

    grad_out matches the net output; returns ({'weights': [...], 'biases': [...]},
    gradient w.r.t. the input).  Batch contributions are summed, so mean losses
    should pre-scale grad_out by 1/B.
    """
    inputs, preacts, squeeze = cache
    g = np.asarray(grad_out, dtype=net.dtype)
    if squeeze:
        g = g[None, :]
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for k in reversed(range(len(net.weights))):
        dz = g * net._act(k)[1](preacts[k])
        grads_w[k] = inputs[k].T @ dz
        grads_b[k] = dz.sum(axis=0)
        g = dz @ net.weights[k].T
    grad_in = g[0] if squeeze else g
    return {"weights": grads_w, "biases": grads_b}, grad_in


def backward(net: DenseNet, x: np.ndarray, grad_out: np.ndarray):
    """Convenience wrapper: forward for the cache, then backprop."""
    _, cache = forward_cached(net, x)
    return backward_from_cache(net, cache, grad_out)


def zero_grads(net: DenseNet) -> dict:
    return {
        "weights": [np.zeros_like(w) for w in net.weights],
        "biases": [np.zeros_like(b) for b in net.biases],
    }


def accumulate_grads(total: dict, extra: dict):
    for key in ("weights", "biases"):
        for t, e in zip(total[key], extra[key]):
            t += e


@dataclass
class AdamState:
    """Adam with decoupled weight decay, one moment pair per parameter array."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, lr: float, weight_decay: float = 0.0) -> "AdamState":
        params = net.params()
        return cls(
            lr=lr,
            weight_decay=weight_decay,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(net: DenseNet, grads: dict, state: AdamState):
    """One in-place update of every parameter of the net."""
    params = net.params()
    gs = grads["weights"] + grads["biases"]
    state.t += 1
    b1c = 1.0 - state.beta1 ** state.t
    b2c = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / b1c) / (np.sqrt(v / b2c) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * p
        p -= state.lr * update.astype(p.dtype)


def soft_update(target: DenseNet, online: DenseNet, tau: float):
    """Blend online parameters into the target copy: t' = (1-tau) t + tau o."""
    for tp, op in zip(target.params(), online.params()):
        tp *= 1.0 - tau
        tp += tau * op


def finite_difference_grads(loss_fn, net: DenseNet, h: float = 1e-5) -> dict:
    """Central-difference gradient of a scalar loss over every net parameter.

    Independent of the analytic backward pass; used to verify it.  Use a
    float64 net, h is far below float32 resolution.
    """
    out = zero_grads(net)
    for p, g in zip(net.params(), out["weights"] + out["biases"]):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = loss_fn()
            flat_p[i] = orig - h
            down = loss_fn()
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2.0 * h)
    return out


def net_to_state(net: DenseNet, prefix: str) -> dict:
    """Flatten a net into named arrays for npz-style checkpoints."""
    state = {
        f"{prefix}.meta": np.array(
            [net.hidden_activation, net.output_activation, str(len(net.weights))]
        )
    }
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        state[f"{prefix}.w{k}"] = w
        state[f"{prefix}.b{k}"] = b
    return state


def net_from_state(state: dict, prefix: str) -> DenseNet:
    hidden, output, n = state[f"{prefix}.meta"]
    n = int(n)
    return DenseNet(
        weights=[state[f"{prefix}.w{k}"] for k in range(n)],
        biases=[state[f"{prefix}.b{k}"] for k in range(n)],
        hidden_activation=str(hidden),
        output_activation=str(output),
    )


def adam_to_state(adam: AdamState, prefix: str) -> dict:
    state = {
        f"{prefix}.scalars": np.array(
            [adam.lr, adam.weight_decay, adam.beta1, adam.beta2, adam.eps, float(adam.t)]
        )
    }
    for k, (m, v) in enumerate(zip(adam.m, adam.v)):
        state[f"{prefix}.m{k}"] = m
        state[f"{prefix}.v{k}"] = v
    return state


def adam_from_state(state: dict, prefix: str) -> AdamState:
    lr, wd, b1, b2, eps, t = state[f"{prefix}.scalars"]
    ms, vs, k = [], [], 0
    while f"{prefix}.m{k}" in state:
        ms.append(state[f"{prefix}.m{k}"])
        vs.append(state[f"{prefix}.v{k}"])
        k += 1
    return AdamState(lr=float(lr), weight_decay=float(wd), beta1=float(b1),
                     beta2=float(b2), eps=float(eps), t=int(t), m=ms, v=vs)
