"""Dense feedforward networks and the eight-head coefficient set."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import BadSpec, NonFinite
from . import tape as ad

OUTPUT_ACTIVATIONS = ("identity", "softplus", "tanh")
HIDDEN_ACTIVATIONS = ("tanh", "softplus", "relu")

# The eight coefficient heads, in omega order.
HEADS = (
    "drift_s",      # NN1
    "diffusion_s",  # NN2
    "jump_s",       # NN3
    "drift_v",      # NN4
    "diffusion_v",  # NN5
    "jump_v",       # NN6
    "intensity",    # NN7
    "correlation",  # NN8
)
JUMP_HEADS = ("jump_s", "jump_v", "intensity")

DEFAULT_HEAD_ACTIVATIONS = {
    "drift_s": "identity",
    "diffusion_s": "softplus",
    "jump_s": "softplus",
    "drift_v": "identity",
    "diffusion_v": "softplus",
    "jump_v": "softplus",
    "intensity": "softplus",
    "correlation": "tanh",
}


@dataclass(frozen=True)
class NetSpec:
    layer_sizes: tuple[int, ...] = (4, 32, 32, 1)
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    output_bias: float = 0.0
    output_weight_scale: float = 1.0

    def validate(self):
        sizes = self.layer_sizes
        if len(sizes) < 2 or any(int(n) != n or n < 1 for n in sizes):
            raise BadSpec(f"layer_sizes must be >= 2 positive integers, got {sizes!r}")
        if sizes[-1] != 1:
            raise BadSpec("networks are scalar-valued: last layer size must be 1")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise BadSpec(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise BadSpec(f"unknown output activation {self.output_activation!r}")
        if not np.isfinite(self.output_bias) or not np.isfinite(self.output_weight_scale):
            raise BadSpec("output_bias / output_weight_scale must be finite")


@dataclass
class Network:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    clamped: bool = False  # emits exactly zero, parameters inert

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise BadSpec(f"unknown output activation {self.output_activation!r}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise BadSpec(f"unknown hidden activation {self.hidden_activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise BadSpec("one weight matrix and bias vector per layer required")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise BadSpec(f"layer {k}: weight {w.shape} / bias {b.shape}, expected {shape}")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def with_flat(self, vec) -> "Network":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise BadSpec(f"expected {self.n_params} parameters, got {vec.size}")
        ws, bs, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[i:i + w.size].reshape(w.shape)); i += w.size
            bs.append(vec[i:i + b.size].copy()); i += b.size
        return replace(self, weights=ws, biases=bs)

    def spec_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "clamped": self.clamped,
        }


def init(spec: NetSpec, seed) -> Network:
    """Random network; weights ~ N(0, 1/fan_in), biases zero."""
    spec.validate()
    rng = np.random.default_rng(seed)
    sizes = spec.layer_sizes
    ws, bs = [], []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        if k == len(sizes) - 2:
            w = w * spec.output_weight_scale
        ws.append(w)
        bs.append(np.zeros(fan_out))
    bs[-1][:] = spec.output_bias
    return Network(sizes, ws, bs, spec.hidden_activation, spec.output_activation)


def forward(net: Network, features, tape: ad.Tape | None = None, params=None):
    """Evaluate ``net`` on rows of ``features`` (shape ``(..., n_in)``).

    Returns an array of shape ``features.shape[:-1]``.  When ``tape`` is
    given the parameters are registered as tape variables (unless ``params``
    already holds nodes for them) and the result is a tape node.
    """
    if not np.all(np.isfinite(ad.value(features))):
        raise NonFinite("network input is NaN or infinite")
    if net.clamped:
        return np.zeros(np.shape(ad.value(features))[:-1])
    if params is None:
        params = net.parameters()
        if tape is not None:
            params = [tape.variable(p) for p in params]
    h = features
    n_layers = len(net.weights)
    for k in range(n_layers):
        act = net.hidden_activation if k < n_layers - 1 else net.output_activation
        h = ad.dense(h, params[2 * k], params[2 * k + 1], act)
        if not np.all(np.isfinite(ad.value(h))):
            raise NonFinite(f"layer {k} produced NaN or infinite values")
    out = h
    out = ad.reshape(out, np.shape(ad.value(out))[:-1])
    if not np.all(np.isfinite(ad.value(out))):
        raise NonFinite("network output is NaN or infinite")
    return out


def backward(tape: ad.Tape, output, wrt, seed=1.0):
    """Gradient of ``seed * output`` with respect to the nodes in ``wrt``."""
    return tape.grad(output, wrt, seed)


def value_and_grad(net: Network, features, seed=1.0):
    """Scalar-seeded output, flat parameter gradient and input gradient."""
    tape = ad.Tape()
    x = tape.variable(features)
    params = [tape.variable(p) for p in net.parameters()]
    y = forward(net, x, tape, params)
    if not isinstance(y, ad.Node):
        return np.asarray(y), np.zeros(net.n_params), np.zeros(np.shape(features))
    grads = tape.grad(y, params + [x], seed)
    flat = np.concatenate([g.ravel() for g in grads[:-1]])
    return y.value, flat, grads[-1]


@dataclass
class NetworkSet:
    """The eight coefficient networks, one per entry of :data:`HEADS`.

    All nets share one hidden architecture so they can be evaluated as a
    single batched stack; their parameters stay independent.
    """

    nets: list[Network]
    seed: int | None = None

    def __post_init__(self):
        if len(self.nets) != len(HEADS):
            raise BadSpec(f"NetworkSet needs {len(HEADS)} networks, got {len(self.nets)}")
        first = self.nets[0]
        for net in self.nets[1:]:
            if net.layer_sizes != first.layer_sizes or net.hidden_activation != first.hidden_activation:
                raise BadSpec("all networks in a set must share layer sizes and hidden activation")

    def __getitem__(self, head: str) -> Network:
        return self.nets[HEADS.index(head)]

    @property
    def layer_sizes(self):
        return self.nets[0].layer_sizes

    @property
    def n_params(self) -> int:
        return sum(n.n_params for n in self.nets)

    def head_slices(self) -> dict[str, slice]:
        out, i = {}, 0
        for head, net in zip(HEADS, self.nets):
            out[head] = slice(i, i + net.n_params)
            i += net.n_params
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([n.flat() for n in self.nets])

    def with_flat(self, vec) -> "NetworkSet":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise BadSpec(f"expected {self.n_params} parameters, got {vec.size}")
        nets, i = [], 0
        for net in self.nets:
            nets.append(net.with_flat(vec[i:i + net.n_params]))
            i += net.n_params
        return NetworkSet(nets, self.seed)

    def replace_head(self, head: str, net: Network) -> "NetworkSet":
        nets = list(self.nets)
        nets[HEADS.index(head)] = net
        return NetworkSet(nets, self.seed)

    # -- batched evaluation ---------------------------------------------------

    def stacked_parameters(self) -> list[np.ndarray]:
        """Per layer: weights ``(8, n_in, n_out)`` then biases ``(8, 1, n_out)``."""
        out = []
        for k in range(len(self.layer_sizes) - 1):
            out.append(np.stack([n.weights[k] for n in self.nets]))
            out.append(np.stack([n.biases[k][None, :] for n in self.nets]))
        return out

    def flat_from_stacked(self, grads: Sequence[np.ndarray]) -> np.ndarray:
        """Map gradients of :meth:`stacked_parameters` back to omega order."""
        parts = []
        for h in range(len(HEADS)):
            for k, g in enumerate(grads):
                gh = g[h]
                parts.append(gh.ravel() if k % 2 == 0 else gh[0].ravel())
        return np.concatenate(parts)

    def forward_all(self, features, params=None):
        """Evaluate all eight nets on the same feature rows.

        ``features`` has shape ``(B, n_in)``; returns ``(8, B)``.  ``params``
        may hold tape nodes for :meth:`stacked_parameters`.
        """
        if params is None:
            params = self.stacked_parameters()
        hidden = self.nets[0].hidden_activation
        h = features
        n_layers = len(params) // 2
        for k in range(n_layers):
            h = ad.dense(h, params[2 * k], params[2 * k + 1], hidden if k < n_layers - 1 else "identity")
        raw = ad.reshape(h, np.shape(ad.value(h))[:-1])  # (8, B)
        rows = []
        zeros = None
        for i, net in enumerate(self.nets):
            if net.clamped:
                if zeros is None:
                    zeros = np.zeros(np.shape(ad.value(raw))[1:])
                rows.append(zeros)
            else:
                rows.append(ad.ACTIVATIONS[net.output_activation](ad.getitem(raw, i)))
        return rows

    def spec_dict(self) -> dict:
        return {"heads": list(HEADS), "nets": [n.spec_dict() for n in self.nets], "seed": self.seed}


def disable_jumps(nets: NetworkSet) -> NetworkSet:
    """Copy of ``nets`` whose jump-size and intensity heads emit exact zeros."""
    out = list(nets.nets)
    for head in JUMP_HEADS:
        i = HEADS.index(head)
        out[i] = replace(out[i], clamped=True)
    return NetworkSet(out, nets.seed)


def init_network_set(hidden=(32, 32), n_features=4, seed=0, hidden_activation="tanh",
                     head_activations=None, head_bias=None, output_weight_scale=0.1) -> NetworkSet:
    """Eight independently initialised nets sharing one architecture."""
    acts = dict(DEFAULT_HEAD_ACTIVATIONS)
    acts.update(head_activations or {})
    bias = dict(head_bias or {})
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(HEADS))
    nets = []
    for head, child in zip(HEADS, children):
        spec = NetSpec((n_features, *hidden, 1), hidden_activation, acts[head],
                       float(bias.get(head, 0.0)), output_weight_scale)
        nets.append(init(spec, child))
    return NetworkSet(nets, seed)


_INVERSE = {"identity": lambda y: y, "softplus": lambda y: float(np.log(np.expm1(y))),
            "tanh": lambda y: float(np.arctanh(y))}


def constant_network_set(values: dict, n_features=4, hidden=(2,), hidden_activation="tanh",
                         head_activations=None) -> NetworkSet:
    """Networks whose outputs ignore their inputs: ``values[head]`` (default 0).

    Weights are zero and the output bias is the activation's inverse of the
    target value; heads whose value is zero under a SoftPlus output are
    clamped, since SoftPlus never reaches zero.
    """
    acts = dict(DEFAULT_HEAD_ACTIVATIONS)
    acts.update(head_activations or {})
    unknown = set(values) - set(HEADS)
    if unknown:
        raise BadSpec(f"unknown heads {sorted(unknown)}")
    sizes = (n_features, *hidden, 1)
    nets = []
    for head in HEADS:
        v = float(values.get(head, 0.0))
        ws = [np.zeros((sizes[k], sizes[k + 1])) for k in range(len(sizes) - 1)]
        bs = [np.zeros(sizes[k + 1]) for k in range(len(sizes) - 1)]
        clamp = v == 0.0 and acts[head] == "softplus"
        if not clamp:
            bs[-1][0] = _INVERSE[acts[head]](v)
        nets.append(Network(sizes, ws, bs, hidden_activation, acts[head], clamp))
    return NetworkSet(nets)


# --- checkpoints ---------------------------------------------------------------

CHECKPOINT_FORMAT = "jumpcal-networks"
CHECKPOINT_VERSION = 1


def networks_to_dict(nets: NetworkSet | Network) -> dict:
    if isinstance(nets, Network):
        return {"kind": "network", "spec": nets.spec_dict(), "omega": nets.flat().tolist()}
    return {"kind": "network_set", "spec": nets.spec_dict(), "omega": nets.flat().tolist()}


def networks_from_dict(d: dict) -> NetworkSet | Network:
    if d["kind"] == "network":
        s = d["spec"]
        net = _zero_network(s)
        return net.with_flat(d["omega"])
    spec = d["spec"]
    nets = [_zero_network(s) for s in spec["nets"]]
    return NetworkSet(nets, spec.get("seed")).with_flat(d["omega"])


def _zero_network(s: dict) -> Network:
    sizes = tuple(s["layer_sizes"])
    ws = [np.zeros((sizes[k], sizes[k + 1])) for k in range(len(sizes) - 1)]
    bs = [np.zeros(sizes[k + 1]) for k in range(len(sizes) - 1)]
    return Network(sizes, ws, bs, s["hidden_activation"], s["output_activation"],
                   bool(s.get("clamped", False)))


def save_checkpoint(path, nets, extra: dict | None = None) -> None:
    payload = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION}
    payload.update(networks_to_dict(nets))
    if extra:
        payload["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise BadSpec(f"{path}: not a network checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise BadSpec(f"{path}: unsupported checkpoint version {payload.get('version')}")
    return networks_from_dict(payload), payload.get("extra", {})
