"""Small GCN / GIN graph classifiers with hand-written backprop and Adam.

Graphs in a mini-batch are stacked into one block-diagonal sparse propagation
matrix; sum pooling is a sparse segment matrix. Everything runs in float64.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph

log = logging.getLogger(__name__)

Arch = Literal["gcn", "gin"]
CHECKPOINT_FORMAT = "motifbackdoor.gnn"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    loss: Literal["hard_cross_entropy", "soft_cross_entropy"] = "hard_cross_entropy"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.loss not in ("hard_cross_entropy", "soft_cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray
    argmax: int


@dataclass
class GnnModel:
    arch: Arch
    in_dim: int
    num_classes: int
    hidden_dim: int = 32
    num_layers: int = 2
    params: dict[str, np.ndarray] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.arch not in ("gcn", "gin"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        expected = param_shapes(self.arch, self.in_dim, self.hidden_dim, self.num_layers, self.num_classes)
        if self.params:
            for name, shape in expected.items():
                if name not in self.params or self.params[name].shape != shape:
                    raise ValueError(f"parameter {name} missing or not of shape {shape}")
                if not np.isfinite(self.params[name]).all():
                    raise ValueError(f"parameter {name} has non-finite entries")
        else:
            self.params = {k: np.zeros(s) for k, s in expected.items()}

    def copy(self) -> GnnModel:
        return GnnModel(
            self.arch,
            self.in_dim,
            self.num_classes,
            self.hidden_dim,
            self.num_layers,
            {k: v.copy() for k, v in self.params.items()},
            copy.deepcopy(self.history),
        )

    def predict_proba(self, graphs: Sequence[Graph], batch_size: int = 512) -> np.ndarray:
        out = [
            _forward(self, make_batch(graphs[i : i + batch_size], self.arch))[0]
            for i in range(0, len(graphs), batch_size)
        ]
        return np.concatenate(out) if out else np.zeros((0, self.num_classes))

    def __call__(self, graph: Graph) -> Prediction:
        return forward(self, graph)


def param_shapes(arch: Arch, in_dim: int, hidden: int, layers: int, classes: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    d = in_dim
    for l in range(layers):
        if arch == "gcn":
            shapes[f"W{l}"] = (d, hidden)
            shapes[f"b{l}"] = (hidden,)
        else:
            shapes[f"Wa{l}"] = (d, hidden)
            shapes[f"ba{l}"] = (hidden,)
            shapes[f"Wb{l}"] = (hidden, hidden)
            shapes[f"bb{l}"] = (hidden,)
        d = hidden
    shapes["Wout"] = (d, classes)
    shapes["bout"] = (classes,)
    return shapes


def init_model(
    arch: Arch, in_dim: int, num_classes: int, seed: int, hidden_dim: int = 32, num_layers: int = 2
) -> GnnModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(arch, in_dim, hidden_dim, num_layers, num_classes).items():
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    return GnnModel(arch, in_dim, num_classes, hidden_dim, num_layers, params)


# --- propagation -----------------------------------------------------------


def normalize_adjacency(graph: Graph) -> np.ndarray:
    """Dense ``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    a = graph.adjacency() + np.eye(graph.num_nodes)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass
class GraphBatch:
    prop: sp.csr_matrix  # block-diagonal propagation operator
    pool: sp.csr_matrix  # [num_graphs, num_nodes] sum-pooling operator
    x: np.ndarray

    @property
    def num_graphs(self) -> int:
        return self.pool.shape[0]


def make_batch(graphs: Sequence[Graph], arch: Arch) -> GraphBatch:
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rows, cols = [np.arange(total)], [np.arange(total)]
    for g, off in zip(graphs, offsets):
        if g.edges:
            e = np.asarray(g.edges, dtype=np.int64) + off
            rows += [e[:, 0], e[:, 1]]
            cols += [e[:, 1], e[:, 0]]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    if arch == "gcn":
        deg = np.bincount(r, minlength=total).astype(np.float64)
        vals = 1.0 / np.sqrt(deg[r] * deg[c])
    else:
        vals = np.ones(len(r))  # A + (1 + eps) I with eps = 0
    prop = sp.csr_matrix((vals, (r, c)), shape=(total, total))
    seg = np.repeat(np.arange(len(graphs)), sizes)
    pool = sp.csr_matrix((np.ones(total), (seg, np.arange(total))), shape=(len(graphs), total))
    x = np.concatenate([g.features for g in graphs]) if graphs else np.zeros((0, 0))
    return GraphBatch(prop, pool, x)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: GnnModel, batch: GraphBatch) -> tuple[np.ndarray, dict]:
    if batch.x.shape[1] != model.in_dim:
        raise ValueError(f"graph feature_dim {batch.x.shape[1]} does not match model input dim {model.in_dim}")
    p = model.params
    h = batch.x
    cache: dict = {"h0": h}
    for l in range(model.num_layers):
        agg = batch.prop @ h
        cache[f"agg{l}"] = agg
        if model.arch == "gcn":
            z = agg @ p[f"W{l}"] + p[f"b{l}"]
        else:
            za = agg @ p[f"Wa{l}"] + p[f"ba{l}"]
            cache[f"za{l}"] = za
            ha = np.maximum(za, 0.0)
            cache[f"ha{l}"] = ha
            z = ha @ p[f"Wb{l}"] + p[f"bb{l}"]
        cache[f"z{l}"] = z
        h = np.maximum(z, 0.0)
        cache[f"h{l + 1}"] = h
    pooled = batch.pool @ h
    cache["pooled"] = pooled
    logits = pooled @ p["Wout"] + p["bout"]
    return _softmax(logits), cache


def _backward(model: GnnModel, batch: GraphBatch, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    p = model.params
    grads = {"Wout": cache["pooled"].T @ dlogits, "bout": dlogits.sum(axis=0)}
    dh = batch.pool.T @ (dlogits @ p["Wout"].T)
    for l in reversed(range(model.num_layers)):
        dz = dh * (cache[f"z{l}"] > 0)
        if model.arch == "gcn":
            grads[f"W{l}"] = cache[f"agg{l}"].T @ dz
            grads[f"b{l}"] = dz.sum(axis=0)
            dagg = dz @ p[f"W{l}"].T
        else:
            grads[f"Wb{l}"] = cache[f"ha{l}"].T @ dz
            grads[f"bb{l}"] = dz.sum(axis=0)
            dza = (dz @ p[f"Wb{l}"].T) * (cache[f"za{l}"] > 0)
            grads[f"Wa{l}"] = cache[f"agg{l}"].T @ dza
            grads[f"ba{l}"] = dza.sum(axis=0)
            dagg = dza @ p[f"Wa{l}"].T
        if l > 0:
            dh = batch.prop.T @ dagg
    return grads


def forward(model: GnnModel, graph: Graph) -> Prediction:
    probs = _forward(model, make_batch([graph], model.arch))[0][0]
    return Prediction(probs, int(np.argmax(probs)))


def _as_targets(targets: Sequence, num_classes: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        onehot = np.zeros((len(t), num_classes))
        onehot[np.arange(len(t)), t.astype(np.int64)] = 1.0
        return onehot
    if t.shape[1] != num_classes:
        raise ValueError(f"soft targets need {num_classes} columns")
    return t


def loss_and_grads(
    model: GnnModel, graphs: Sequence[Graph], targets: Sequence, batch: GraphBatch | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its parameter gradients.

    Integer targets are treated as one-hot rows, so hard and soft losses share
    one code path.
    """
    batch = batch or make_batch(graphs, model.arch)
    t = _as_targets(targets, model.num_classes)
    probs, cache = _forward(model, batch)
    n = len(t)
    loss = float(-(t * np.log(np.clip(probs, 1e-300, None))).sum() / n)
    return loss, _backward(model, batch, cache, (probs - t) / n)


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, (self.b1, self.b2), self.eps = lr, betas, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def train(
    model: GnnModel,
    graphs: Sequence[Graph],
    targets: Sequence,
    config: TrainConfig,
    val: tuple[Sequence[Graph], Sequence[int]] | None = None,
) -> GnnModel:
    """Mini-batch Adam on cross-entropy; returns a trained copy of ``model``.

    With ``val`` given, the parameters of the epoch with the best validation
    accuracy are returned (later epochs win ties).
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("empty training set")
    t = _as_targets(targets, model.num_classes)
    if config.loss == "hard_cross_entropy" and np.asarray(targets).ndim != 1:
        raise ValueError("hard_cross_entropy expects class-id targets")
    out = model.copy()
    out.history = []
    opt = Adam(out.params, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    val_batch = make_batch(list(val[0]), out.arch) if val is not None and len(val[0]) else None
    best_acc, best_params = -1.0, None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(graphs))
        total = 0.0
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            loss, grads = loss_and_grads(out, [graphs[i] for i in idx], t[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss {loss} at epoch {epoch}, batch starting {s}")
            opt.step(out.params, grads)
            total += loss * len(idx)
        rec = {"epoch": epoch, "loss": total / len(graphs)}
        if val_batch is not None:
            pred = _forward(out, val_batch)[0].argmax(axis=1)
            acc = float((pred == np.asarray(val[1])).mean())
            rec["val_acc"] = acc
            if acc >= best_acc:
                best_acc, best_params = acc, {k: v.copy() for k, v in out.params.items()}
        out.history.append(rec)
    if best_params is not None:
        out.params = best_params
    log.debug("trained %s for %d epochs, final loss %.4f", out.arch, config.epochs, out.history[-1]["loss"])
    return out


def accuracy(model: GnnModel, graphs: Sequence[Graph], labels: Sequence[int] | None = None) -> float:
    """Fraction of argmax predictions matching the labels (ties resolve to the lower class)."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("accuracy of an empty list")
    labels = np.array([g.label for g in graphs] if labels is None else labels)
    return float((model.predict_proba(graphs).argmax(axis=1) == labels).mean())


# --- checkpoints -------------------------------------------------------------


def save_model(model: GnnModel, path: str | Path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "in_dim": model.in_dim,
        "num_classes": model.num_classes,
        "hidden_dim": model.hidden_dim,
        "num_layers": model.num_layers,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in model.params.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path: str | Path) -> GnnModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} checkpoint")
    params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["params"].items()}
    return GnnModel(
        doc["arch"], doc["in_dim"], doc["num_classes"], doc["hidden_dim"], doc["num_layers"], params
    )
