"""Small dense networks with hand-rolled backprop and Adam.

Three fixed layouts map heuristic features to square-root power outputs.
Every model emits, per AP it serves, K direction components plus one total
transmit power estimate, all through a final relu so outputs are
nonnegative:

  ddnn     K   -> 32 -> 64 -> 32 -> K+1          linear,tanh,tanh,relu
  ddnn-si  2K  -> 64 -> 128 -> 64 -> 32 -> K+1   linear,elu,tanh,tanh,relu
  cdnn     cK  -> 128 -> 512 -> 256 -> 128 -> c(K+1)  linear,elu,tanh,tanh,relu

Training is floating-point deterministic: seeded uniform fan-in init,
seeded shuffles, sequential minibatches.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import TrainingDivergedError
from .scaling import ScalerParams

MODEL_KINDS = ("ddnn", "ddnn-si", "cdnn")


def layer_plan(kind: str, K: int, cluster_size: int = 1):
    """(sizes, activations) for a model kind at K UEs."""
    if kind == "ddnn":
        return [K, 32, 64, 32, K + 1], ["linear", "tanh", "tanh", "relu"]
    if kind == "ddnn-si":
        return ([2 * K, 64, 128, 64, 32, K + 1],
                ["linear", "elu", "tanh", "tanh", "relu"])
    if kind == "cdnn":
        c = cluster_size
        return ([c * K, 128, 512, 256, 128, c * (K + 1)],
                ["linear", "elu", "tanh", "tanh", "relu"])
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass
class DenseLayer:
    W: np.ndarray        # (out, in)
    b: np.ndarray        # (out,)
    activation: str


@dataclass
class MlpModel:
    kind: str
    unit_id: int             # AP index (distributed) or cluster index
    member_aps: tuple        # AP indices whose powers this model emits
    layers: list
    scaler: Optional[ScalerParams] = None

    @property
    def n_inputs(self):
        return self.layers[0].W.shape[1]

    @property
    def n_outputs(self):
        return self.layers[-1].W.shape[0]

    def n_parameters(self) -> int:
        return int(sum(layer.W.size + layer.b.size for layer in self.layers))


def build_model(kind: str, K: int, unit_id: int = 0, member_aps=None,
                cluster_size: int = 1, seed=0) -> MlpModel:
    """Fresh model with uniform fan-in-scaled weights and zero biases."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    sizes, acts = layer_plan(kind, K, cluster_size)
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], acts):
        bound = 1.0 / np.sqrt(n_in)
        W = rng.uniform(-bound, bound, size=(n_out, n_in))
        layers.append(DenseLayer(W=W, b=np.zeros(n_out), activation=act))
    if member_aps is None:
        member_aps = (unit_id,)
    model = MlpModel(kind=kind, unit_id=unit_id,
                     member_aps=tuple(int(a) for a in member_aps),
                     layers=layers)
    expected = sum((i + 1) * o for i, o in zip(sizes[:-1], sizes[1:]))
    assert model.n_parameters() == expected, "layer wiring is inconsistent"
    return model


def _act(z, name):
    if name == "linear":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "elu":
        return np.where(z > 0.0, z, np.expm1(z))
    raise ValueError(f"unknown activation {name!r}")


def _act_deriv(z, a, name):
    if name == "linear":
        return np.ones_like(z)
    if name == "tanh":
        return 1.0 - a ** 2
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "elu":
        return np.where(z > 0.0, 1.0, a + 1.0)
    raise ValueError(f"unknown activation {name!r}")


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network output for a single feature vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    for layer in model.layers:
        a = _act(a @ layer.W.T + layer.b, layer.activation)
    return a[0] if single else a


def _forward_cached(model, X):
    acts = [X]
    pre = []
    a = X
    for layer in model.layers:
        z = a @ layer.W.T + layer.b
        a = _act(z, layer.activation)
        pre.append(z)
        acts.append(a)
    return acts, pre


def mse_loss(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> float:
    """Mean squared error over batch rows and output components."""
    pred = forward(model, X)
    return float(np.mean((pred - Y) ** 2))


def loss_and_grads(model: MlpModel, X: np.ndarray, Y: np.ndarray):
    """MSE and its gradients w.r.t. every weight and bias."""
    n, d_out = Y.shape
    acts, pre = _forward_cached(model, X)
    pred = acts[-1]
    loss = float(np.mean((pred - Y) ** 2))
    delta = (2.0 / (n * d_out)) * (pred - Y)
    grads = []
    for idx in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[idx]
        delta = delta * _act_deriv(pre[idx], acts[idx + 1], layer.activation)
        gW = delta.T @ acts[idx]
        gb = delta.sum(axis=0)
        grads.append((gW, gb))
        if idx > 0:
            delta = delta @ layer.W
    grads.reverse()
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 256
    lr: float = 1e-3
    lr_drop_factor: float = 0.1
    drop_epoch: int = 40          # 0-based epoch at which the drop applies
    validation_fraction: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class TrainResult:
    train_loss: np.ndarray    # per-epoch MSE on the training rows
    val_loss: np.ndarray      # per-epoch MSE on the validation rows


class _Adam:
    """Standard Adam with bias correction."""

    def __init__(self, layers, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in layers]
        self.v = [(np.zeros_like(l.W), np.zeros_like(l.b)) for l in layers]

    def step(self, layers, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, (layer, (gW, gb)) in enumerate(zip(layers, grads)):
            mW, mb = self.m[i]
            vW, vb = self.v[i]
            mW += (1.0 - self.beta1) * (gW - mW)
            mb += (1.0 - self.beta1) * (gb - mb)
            vW += (1.0 - self.beta2) * (gW ** 2 - vW)
            vb += (1.0 - self.beta2) * (gb ** 2 - vb)
            layer.W -= lr * (mW / c1) / (np.sqrt(vW / c2) + self.eps)
            layer.b -= lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)


def train(model: MlpModel, X: np.ndarray, Y: np.ndarray,
          cfg: Optional[TrainConfig] = None, val=None) -> TrainResult:
    """Adam-train the model in place on pre-scaled features.

    When `val` (X_val, Y_val) is omitted, a validation_fraction share of the
    rows is held out through a seeded permutation. Raises
    TrainingDivergedError on non-finite loss.
    """
    if cfg is None:
        cfg = TrainConfig()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise ValueError("need matching, nonempty feature and label rows")
    rng = np.random.default_rng(cfg.seed)
    if val is None and cfg.validation_fraction > 0.0 and X.shape[0] >= 2:
        n_val = max(1, int(round(cfg.validation_fraction * X.shape[0])))
        perm = rng.permutation(X.shape[0])
        val = (X[perm[:n_val]], Y[perm[:n_val]])
        X, Y = X[perm[n_val:]], Y[perm[n_val:]]
    n = X.shape[0]
    opt = _Adam(model.layers)
    train_curve = np.empty(cfg.epochs)
    val_curve = np.full(cfg.epochs, np.nan)
    for epoch in range(cfg.epochs):
        lr = cfg.lr * (cfg.lr_drop_factor if epoch >= cfg.drop_epoch else 1.0)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, X[batch], Y[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}")
            opt.step(model.layers, grads, lr)
        train_curve[epoch] = mse_loss(model, X, Y)
        if val is not None:
            val_curve[epoch] = mse_loss(model, val[0], val[1])
        if not np.isfinite(train_curve[epoch]):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
    return TrainResult(train_loss=train_curve, val_loss=val_curve)
