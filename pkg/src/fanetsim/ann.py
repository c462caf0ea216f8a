"""Three-layer sigmoid network that scores link stability."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


def sigmoid(x):
    # clipping avoids exp overflow; the result is already 0 or 1 to double precision there
    return 1.0 / (1.0 + np.exp(-np.clip(np.asarray(x, dtype=float), -700.0, 700.0)))


@dataclass
class NetworkWeights:
    w_input_hidden: np.ndarray  # (hidden, input)
    bias_hidden: np.ndarray  # (hidden,)
    w_hidden_output: np.ndarray  # (output, hidden)
    bias_output: np.ndarray  # (output,)
    activation: str = "sigmoid"

    def __post_init__(self):
        h, i = self.w_input_hidden.shape
        o, h2 = self.w_hidden_output.shape
        if h != h2 or self.bias_hidden.shape != (h,) or self.bias_output.shape != (o,):
            raise DimensionError("inconsistent layer dimensions")
        if not all(np.all(np.isfinite(a)) for a in self.arrays()):
            raise ValueError("weights must be finite")

    @property
    def sizes(self) -> tuple[int, int, int]:
        h, i = self.w_input_hidden.shape
        return i, h, self.w_hidden_output.shape[0]

    def arrays(self):
        return (self.w_input_hidden, self.bias_hidden, self.w_hidden_output, self.bias_output)

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(*(a.copy() for a in self.arrays()), activation=self.activation)


def init_weights(rng, input_size: int = 4, hidden_size: int = 8, output_size: int = 1) -> NetworkWeights:
    """Uniform [-0.5, 0.5] initialisation drawn from ``rng`` (a RandomStream)."""
    def block(*shape):
        n = int(np.prod(shape))
        return np.array([rng.uniform(-0.5, 0.5) for _ in range(n)]).reshape(shape)

    return NetworkWeights(block(hidden_size, input_size), block(hidden_size),
                          block(output_size, hidden_size), block(output_size))


def zero_weights(input_size: int, hidden_size: int, output_size: int) -> NetworkWeights:
    return NetworkWeights(np.zeros((hidden_size, input_size)), np.zeros(hidden_size),
                          np.zeros((output_size, hidden_size)), np.zeros(output_size))


def forward(net: NetworkWeights, x):
    """Returns (hidden, output) activations for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.w_input_hidden.shape[1]:
        raise DimensionError(f"input has {x.shape[-1]} features, net expects {net.w_input_hidden.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    hidden = sigmoid(x @ net.w_input_hidden.T + net.bias_hidden)
    output = sigmoid(hidden @ net.w_hidden_output.T + net.bias_output)
    return hidden, output


def nlms_update(w, y, e: float, beta: float):
    """Normalised LMS step ``w + beta * e * y / |y|^2``; a zero input leaves ``w`` unchanged."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    norm2 = float(y @ y)
    if norm2 == 0.0:
        return w.copy()
    return w + beta * e * y / norm2


def mse_loss(net: NetworkWeights, X, T) -> float:
    _, out = forward(net, X)
    return float(np.mean(np.sum((out - np.asarray(T, dtype=float).reshape(out.shape)) ** 2, axis=-1)))


def gradients(net: NetworkWeights, X, T):
    """Loss and analytic gradients of the mean (over samples) squared error."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.asarray(T, dtype=float).reshape(X.shape[0], -1)
    hidden, out = forward(net, X)
    n = X.shape[0]
    loss = float(np.mean(np.sum((out - T) ** 2, axis=1)))
    d_out = 2.0 * (out - T) / n * out * (1.0 - out)  # dL/dz_out
    g_who = d_out.T @ hidden
    g_bo = d_out.sum(axis=0)
    d_hid = (d_out @ net.w_hidden_output) * hidden * (1.0 - hidden)
    g_wih = d_hid.T @ X
    g_bh = d_hid.sum(axis=0)
    return loss, (g_wih, g_bh, g_who, g_bo)


def backprop_step(net: NetworkWeights, batch: Sequence, lr: float):
    """One full-batch gradient-descent step. Returns (new net, pre-step loss)."""
    if not batch:
        raise ValueError("batch must be nonempty")
    if not lr > 0:
        raise ValueError("lr must be > 0")
    X = np.array([np.asarray(x, dtype=float) for x, _ in batch])
    T = np.array([np.atleast_1d(np.asarray(t, dtype=float)) for _, t in batch])
    loss, grads = gradients(net, X, T)
    new = NetworkWeights(*(a - lr * g for a, g in zip(net.arrays(), grads)), activation=net.activation)
    return new, loss


def train(net: NetworkWeights, X, T, lr: float = 0.5, epochs: int = 1000):
    """Full-batch gradient descent; returns (net, loss history)."""
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float).reshape(X.shape[0], -1)
    arrays = [a.copy() for a in net.arrays()]
    history = []
    for _ in range(epochs):
        cur = NetworkWeights(*arrays, activation=net.activation)
        loss, grads = gradients(cur, X, T)
        history.append(loss)
        for a, g in zip(arrays, grads):
            a -= lr * g
    return NetworkWeights(*arrays, activation=net.activation), history


# ---- link features ---------------------------------------------------------------

class LinkFeatures(NamedTuple):
    distance_norm: float
    quality: float
    load: float
    relative_speed_norm: float


def _clamp(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


@dataclass(frozen=True)
class LinkContext:
    pos_a: tuple
    pos_b: tuple
    vel_a: tuple
    vel_b: tuple
    radio_range: float
    quality: float
    load: float
    max_speed: float


def radial_velocity(pos_a, pos_b, vel_a, vel_b) -> float:
    """Rate of change of |b - a|; positive when the endpoints separate."""
    dp = [pb - pa for pa, pb in zip(pos_a, pos_b)]
    dist = math.sqrt(sum(c * c for c in dp))
    if dist == 0.0:
        return 0.0
    dv = [vb - va for va, vb in zip(vel_a, vel_b)]
    return sum(p * v for p, v in zip(dp, dv)) / dist


def extract_features(ctx: LinkContext) -> LinkFeatures:
    """Normalise a link's context into [0, 1]^4.

    relative_speed_norm is 0 for the fastest possible approach (both nodes at
    ``max_speed`` head-on), 0.5 for no radial motion and 1 for the fastest
    separation.
    """
    d = math.dist(ctx.pos_a, ctx.pos_b)
    vr = radial_velocity(ctx.pos_a, ctx.pos_b, ctx.vel_a, ctx.vel_b)
    return LinkFeatures(
        _clamp(d / ctx.radio_range),
        _clamp(ctx.quality),
        _clamp(ctx.load),
        _clamp(0.5 + vr / (4.0 * ctx.max_speed)),
    )


class LinkLabel(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


class LinkStatus(NamedTuple):
    score: float
    label: LinkLabel


def classify_link(net: NetworkWeights, f, threshold: float = 0.5) -> LinkStatus:
    score = float(forward(net, np.asarray(f, dtype=float))[1][0])
    return LinkStatus(score, LinkLabel.STABLE if score >= threshold else LinkLabel.UNSTABLE)


class LinkClassifier:
    """Shared classifier used by all HIROL nodes of a run.

    Inference is done in plain Python on the 4-8-1 net; ``adapt`` applies an
    NLMS step to the output layer.
    """

    def __init__(self, net: NetworkWeights, threshold: float = 0.5, beta: float = 0.5):
        self.net = net.copy()
        self.threshold = threshold
        self.beta = beta
        self.updates = 0
        self._sync()

    def _sync(self):
        self._wih = self.net.w_input_hidden.tolist()
        self._bh = self.net.bias_hidden.tolist()
        self._who = self.net.w_hidden_output[0].tolist()
        self._bo = float(self.net.bias_output[0])

    def hidden(self, f) -> list[float]:
        out = []
        for row, b in zip(self._wih, self._bh):
            z = b + sum(w * x for w, x in zip(row, f))
            out.append(1.0 / (1.0 + math.exp(-z)) if z > -700 else 0.0)
        return out

    def score(self, f) -> float:
        h = self.hidden(f)
        z = self._bo + sum(w * v for w, v in zip(self._who, h))
        return 1.0 / (1.0 + math.exp(-z)) if z > -700 else 0.0

    def classify(self, f) -> LinkStatus:
        s = self.score(f)
        return LinkStatus(s, LinkLabel.STABLE if s >= self.threshold else LinkLabel.UNSTABLE)

    def adapt(self, f, target: float) -> None:
        h = self.hidden(f)
        y = np.array(h + [1.0])
        e = target - self.score(f)
        w = np.concatenate([self.net.w_hidden_output[0], self.net.bias_output])
        w = nlms_update(w, y, e, self.beta)
        self.net.w_hidden_output[0] = w[:-1]
        self.net.bias_output[0] = w[-1]
        self.updates += 1
        self._sync()


class AlwaysStable:
    """Stub classifier: every link scores 1."""

    threshold = 0.5
    updates = 0

    def score(self, f) -> float:
        return 1.0

    def classify(self, f) -> LinkStatus:
        return LinkStatus(1.0, LinkLabel.STABLE)

    def adapt(self, f, target: float) -> None:
        pass


# ---- serialisation ---------------------------------------------------------------

def save_weights(net: NetworkWeights, path) -> None:
    i, h, o = net.sizes
    lines = ["# fanetsim ann weights, row-major", f"dims {i} {h} {o}"]
    for name, arr in zip(("w_input_hidden", "bias_hidden", "w_hidden_output", "bias_output"), net.arrays()):
        shape = arr.shape if arr.ndim == 2 else (arr.shape[0],)
        lines.append(f"{name} {' '.join(str(s) for s in shape)}")
        rows = arr if arr.ndim == 2 else arr.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path) -> NetworkWeights:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    it = iter(lines)
    head = next(it).split()
    if head[0] != "dims":
        raise ValueError(f"{path}: missing dims header")
    arrays = []
    for name in ("w_input_hidden", "bias_hidden", "w_hidden_output", "bias_output"):
        hdr = next(it).split()
        if hdr[0] != name:
            raise ValueError(f"{path}: expected {name}, got {hdr[0]}")
        shape = tuple(int(s) for s in hdr[1:])
        nrows = shape[0] if len(shape) == 2 else 1
        rows = [[float(v) for v in next(it).split()] for _ in range(nrows)]
        arr = np.array(rows, dtype=float)
        arrays.append(arr if len(shape) == 2 else arr.reshape(-1))
    net = NetworkWeights(*arrays)
    if net.sizes != tuple(int(v) for v in head[1:4]):
        raise ValueError(f"{path}: dims header does not match arrays")
    return net
