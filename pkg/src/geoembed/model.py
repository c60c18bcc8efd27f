"""Trainable maps: the embedding MLP, the composition net, the MTL head.

Forward passes record a tape (layer inputs + pre-activations) so the
backward pass is an exact analytic chain rule; the finite-difference
suite in the tests is the contract. Nets carry a version counter so a
tape from a stale parameter state is rejected instead of silently
producing wrong gradients.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels as K
from .errors import CheckpointError, ConfigError, DimensionMismatchError, StaleTapeError
from .mathcore import Rng
from .spaces import project_rows, project_rows_backward


class Activation(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    NONE = "none"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths input -> hidden... -> output, one activation per layer
    (the last is typically NONE so the output is a free vector)."""

    layer_widths: tuple
    activations: tuple

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise ConfigError("need at least one layer (two widths)")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError("layer widths must be positive")
        if len(self.activations) != self.num_layers:
            raise ConfigError(
                f"{self.num_layers} layers need {self.num_layers} activations, "
                f"got {len(self.activations)}"
            )

    @property
    def num_layers(self):
        return len(self.layer_widths) - 1

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def output_dim(self):
        return self.layer_widths[-1]

    @staticmethod
    def mlp(input_dim, hidden, output_dim, activation=Activation.RELU):
        """Conventional spec: `activation` on every hidden layer, linear output."""
        widths = (input_dim, *hidden, output_dim)
        acts = (activation,) * len(hidden) + (Activation.NONE,)
        return MlpSpec(tuple(int(w) for w in widths), acts)


class MlpNet:
    """Fully connected net with weights[l] of shape (out, in)."""

    def __init__(self, spec, weights, biases):
        self.spec = spec
        self.weights = weights
        self.biases = biases
        self._version = 0
        for l in range(spec.num_layers):
            o, i = spec.layer_widths[l + 1], spec.layer_widths[l]
            if weights[l].shape != (o, i) or biases[l].shape != (o,):
                raise ConfigError(f"layer {l} parameter shapes do not match spec")

    @staticmethod
    def initialize(spec, seed):
        """He-uniform init for ReLU layers, Xavier-uniform otherwise; zero biases."""
        rng = Rng(seed)
        weights, biases = [], []
        for l in range(spec.num_layers):
            fan_in = spec.layer_widths[l]
            fan_out = spec.layer_widths[l + 1]
            if spec.activations[l] is Activation.RELU:
                limit = math.sqrt(6.0 / fan_in)
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
            u = rng.uniform_block(fan_out * fan_in)
            weights.append(((2.0 * u - 1.0) * limit).reshape(fan_out, fan_in))
            biases.append(np.zeros(fan_out))
        return MlpNet(spec, weights, biases)

    @property
    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params_flat(self):
        """All parameters as one vector, layer by layer (W raveled, then b)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_params_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_params,):
            raise DimensionMismatchError(
                f"expected {self.num_params} parameters, got {flat.shape}"
            )
        pos = 0
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[l] = flat[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[l] = flat[pos : pos + b.size].copy()
            pos += b.size
        self._version += 1

    def copy(self):
        net = MlpNet(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )
        return net


@dataclass
class ForwardTape:
    """Records one forward pass: inputs[l] enters layer l, preacts[l] is
    its affine output (before the activation), output is the final
    activated batch."""

    net: MlpNet
    version: int
    inputs: list
    preacts: list
    output: np.ndarray
    single: bool


def _as_batch(x, input_dim, what="input"):
    x = np.ascontiguousarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise DimensionMismatchError(
            f"{what} has shape {x.shape}, expected (*, {input_dim})"
        )
    return x, single


def forward(net, x):
    """Forward pass; returns (y, tape). Accepts a vector or an (n, d) batch."""
    X, single = _as_batch(x, net.spec.input_dim)
    inputs, preacts = [], []
    for l in range(net.spec.num_layers):
        inputs.append(X)
        Z = K.affine_forward(X, net.weights[l], net.biases[l])
        preacts.append(Z)
        act = net.spec.activations[l]
        if act is Activation.RELU:
            X = K.relu_forward(Z)
        elif act is Activation.TANH:
            X = K.tanh_forward(Z)
        else:
            X = Z
    y = X[0] if single else X
    return y, ForwardTape(net, net._version, inputs, preacts, X, single)


def backward(net, tape, dL_dy):
    """Analytic gradients for a recorded forward pass.

    Returns (param_grads, dL_dx) where param_grads is a list of (dW, db)
    per layer and dL_dx matches the forward input's shape.
    """
    if tape.net is not net or tape.version != net._version:
        raise StaleTapeError("tape does not match this net's current parameters")
    dX, single = _as_batch(dL_dy, net.spec.output_dim, what="upstream gradient")
    if dX.shape[0] != tape.inputs[0].shape[0]:
        raise DimensionMismatchError("upstream gradient batch size mismatch")
    if single != tape.single:
        raise DimensionMismatchError("upstream gradient rank does not match forward")
    grads = [None] * net.spec.num_layers
    for l in range(net.spec.num_layers - 1, -1, -1):
        act = net.spec.activations[l]
        Z = tape.preacts[l]
        if act is Activation.RELU:
            dZ = K.relu_backward(Z, dX)
        elif act is Activation.TANH:
            A = tape.inputs[l + 1] if l + 1 < net.spec.num_layers else tape.output
            dZ = K.tanh_backward(A, dX)
        else:
            dZ = dX
        dX, dW, db = K.affine_backward(tape.inputs[l], net.weights[l], dZ)
        grads[l] = (dW, db)
    dL_dx = dX[0] if tape.single else dX
    return grads, dL_dx


def grads_flat(net, param_grads):
    """Flatten per-layer (dW, db) gradients in params_flat order."""
    parts = []
    for dW, db in param_grads:
        parts.append(dW.ravel())
        parts.append(db)
    return np.concatenate(parts)


# ---------------------------------------------------------------------
# space-aware embedding
# ---------------------------------------------------------------------


@dataclass
class EmbedTape:
    tape: ForwardTape
    projected: np.ndarray
    norms: np.ndarray  # None for Euclidean


def embed(net, space, x):
    """forward + space projection (vector or batch)."""
    y, _ = embed_with_tape(net, space, x)
    return y


def embed_with_tape(net, space, x):
    raw, tape = forward(net, x)
    raw2d = raw[None, :] if tape.single else raw
    Y, norms = project_rows(space, raw2d)
    y = Y[0] if tape.single else Y
    return y, EmbedTape(tape, Y, norms)


def embed_backward(net, space, etape, dL_dy):
    """Chain rule through projection and net; mirrors embed_with_tape."""
    single = etape.tape.single
    dY = np.ascontiguousarray(dL_dy, dtype=np.float64)
    if single:
        dY = dY[None, :]
    dRaw = project_rows_backward(space, etape.projected, etape.norms, dY)
    return backward(net, etape.tape, dRaw[0] if single else dRaw)


# ---------------------------------------------------------------------
# auxiliary nets
# ---------------------------------------------------------------------


def one_hot(labels, K_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], K_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


class CompositionNet:
    """Predicts the embedding of a same-class example with a different
    auxiliary label: input is concat(y_a, onehot(e_a), onehot(e_b))."""

    def __init__(self, net, embed_dim, num_aux):
        if net.spec.input_dim != embed_dim + 2 * num_aux:
            raise ConfigError("composition net input must be d + 2K wide")
        if net.spec.output_dim != embed_dim:
            raise ConfigError("composition net must output an embedding")
        self.net = net
        self.embed_dim = embed_dim
        self.num_aux = num_aux

    @staticmethod
    def initialize(embed_dim, num_aux, seed, hidden=(100, 100)):
        spec = MlpSpec.mlp(embed_dim + 2 * num_aux, hidden, embed_dim)
        return CompositionNet(MlpNet.initialize(spec, seed), embed_dim, num_aux)

    def inputs(self, ya, e_a, e_b):
        ya = np.atleast_2d(np.asarray(ya, dtype=np.float64))
        ea = np.atleast_1d(np.asarray(e_a, dtype=np.int64))
        eb = np.atleast_1d(np.asarray(e_b, dtype=np.int64))
        return np.hstack([ya, one_hot(ea, self.num_aux), one_hot(eb, self.num_aux)])

    def predict(self, ya, e_a, e_b):
        u = self.inputs(ya, e_a, e_b)
        z, _ = forward(self.net, u)
        return z[0] if np.asarray(ya).ndim == 1 else z


class MtlHead:
    """Classification head over embeddings: logits then softmax."""

    def __init__(self, net, num_aux):
        if net.spec.output_dim != num_aux:
            raise ConfigError("head output width must equal the label count")
        self.net = net
        self.num_aux = num_aux

    @staticmethod
    def initialize(embed_dim, num_aux, seed, hidden=(100, 100)):
        spec = MlpSpec.mlp(embed_dim, hidden, num_aux)
        return MtlHead(MlpNet.initialize(spec, seed), num_aux)

    def predict_proba(self, y):
        y2d = np.atleast_2d(np.asarray(y, dtype=np.float64))
        logits, _ = forward(self.net, np.ascontiguousarray(y2d))
        P = K.softmax_rows(logits)
        return P[0] if np.asarray(y).ndim == 1 else P


# ---------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------

_CKPT_HEADER = "#geoembed-model v1"


def _write_net(fh, name, net):
    fh.write(f"[{name}]\n")
    fh.write("widths=" + ",".join(str(w) for w in net.spec.layer_widths) + "\n")
    fh.write(
        "activations=" + ",".join(a.value for a in net.spec.activations) + "\n"
    )
    flat = net.params_flat()
    fh.write(f"params={flat.size}\n")
    for x in flat:
        fh.write("%.17g\n" % x)


def save_checkpoint(path, model, space=None, g=None, head=None, extra=None):
    """Write nets (and optional metadata) as text; load() restores bitwise."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_CKPT_HEADER + "\n")
        if space is not None:
            fh.write(
                f"space={space.kind.value} margin=%.17g basis=%.17g\n"
                % (space.margin, space.basis_magnitude)
            )
        if extra:
            for key, val in extra.items():
                fh.write(f"{key}={val}\n")
        _write_net(fh, "model", model)
        if g is not None:
            fh.write(f"composition_meta={g.embed_dim},{g.num_aux}\n")
            _write_net(fh, "composition", g.net)
        if head is not None:
            fh.write(f"head_meta={head.num_aux}\n")
            _write_net(fh, "head", head.net)


def load_checkpoint(path):
    """Read a checkpoint; returns dict with model / space / g / head / extra."""
    from .spaces import SpaceConfig, SpaceKind  # local import to avoid cycles

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CKPT_HEADER:
        raise CheckpointError(f"not a geoembed checkpoint: {path}")
    out = {"model": None, "space": None, "g": None, "head": None, "extra": {}}
    comp_meta = head_meta = None
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("space="):
            toks = dict(t.partition("=")[::2] for t in line.split())
            out["space"] = SpaceConfig(
                SpaceKind(toks["space"]),
                float(toks["margin"]),
                float(toks["basis"]),
            )
            i += 1
        elif line.startswith("composition_meta="):
            comp_meta = tuple(int(x) for x in line.partition("=")[2].split(","))
            i += 1
        elif line.startswith("head_meta="):
            head_meta = int(line.partition("=")[2])
            i += 1
        elif line.startswith("["):
            name = line.strip("[]")
            try:
                widths = tuple(
                    int(x) for x in lines[i + 1].partition("=")[2].split(",")
                )
                acts = tuple(
                    Activation(x) for x in lines[i + 2].partition("=")[2].split(",")
                )
                count = int(lines[i + 3].partition("=")[2])
                flat = np.array(
                    [float(x) for x in lines[i + 4 : i + 4 + count]]
                )
            except (IndexError, ValueError) as exc:
                raise CheckpointError(f"malformed section [{name}]: {exc}")
            if flat.size != count:
                raise CheckpointError(
                    f"section [{name}] promises {count} params, found {flat.size}"
                )
            spec = MlpSpec(widths, acts)
            net = MlpNet(
                spec,
                [np.zeros((spec.layer_widths[l + 1], spec.layer_widths[l]))
                 for l in range(spec.num_layers)],
                [np.zeros(spec.layer_widths[l + 1]) for l in range(spec.num_layers)],
            )
            net.set_params_flat(flat)
            if name == "model":
                out["model"] = net
            elif name == "composition":
                if comp_meta is None:
                    raise CheckpointError("composition section without metadata")
                out["g"] = CompositionNet(net, *comp_meta)
            elif name == "head":
                if head_meta is None:
                    raise CheckpointError("head section without metadata")
                out["head"] = MtlHead(net, head_meta)
            else:
                raise CheckpointError(f"unknown section [{name}]")
            i += 4 + count
        elif "=" in line:
            key, _, val = line.partition("=")
            out["extra"][key] = val
            i += 1
        else:
            raise CheckpointError(f"unparseable checkpoint line: {line!r}")
    if out["model"] is None:
        raise CheckpointError("checkpoint has no [model] section")
    return out
