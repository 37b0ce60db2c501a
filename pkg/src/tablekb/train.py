"""Training loop, finite-difference gradient check, checkpoint format.

Plain full-batch gradient descent with global-norm gradient clipping; no
momentum, no schedules. Loss per table is cross-entropy over header nodes
plus the weighted constraint term; the batch loss is the mean over tables.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import CheckpointMismatchError, DataError, InternalError
from .gat import GATModel, constraint_loss, cross_entropy, forward, uniqueness_ratios
from .graph import TableGraph

__all__ = [
    "TrainConfig",
    "EpochStats",
    "train",
    "table_loss",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT",
]

CHECKPOINT_FORMAT = "tablekb-gat/1"


@dataclass(frozen=True)
class TrainConfig:
    hidden1: int = 64
    hidden2: int = 32
    heads: int = 4
    embed_dim: int = 64
    epochs: int = 200
    lr: float = 0.5
    dropout: float = 0.2
    constraint_weight: float = 50.0
    grad_clip: float = 5.0
    alpha_threshold: float = 0.7
    seed: int = 0

    def corpus_scale(self) -> "TrainConfig":
        """Dimensions used at corpus scale; desk defaults stay the default."""
        return replace(self, hidden1=2048, hidden2=1024)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    ce: float
    constraint: float


def table_loss(
    model: GATModel,
    graph: TableGraph,
    lam: float,
    training: bool = False,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[ad.Tensor, float, float]:
    """Loss for one table: (tensor, ce value, constraint value)."""
    res = forward(model, graph, training=training, dropout=dropout, rng=rng)
    labels = graph.header_labels()
    ce = cross_entropy(res.header_logp, labels)
    cons, _ = constraint_loss(res.header_probs, graph.table, uniqueness_ratios(graph.table))
    total = ad.add(ce, ad.mul(cons, ad.constant(lam)))
    return total, ce.item(), cons.item()


def _clip_gradients(model: GATModel, max_norm: float) -> None:
    sq = 0.0
    for t in model.params.values():
        if t.grad is not None:
            sq += float((t.grad * t.grad).sum())
    norm = math.sqrt(sq)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for t in model.params.values():
            if t.grad is not None:
                t.grad *= scale


def train(
    graphs: list[TableGraph], config: TrainConfig, model: GATModel | None = None
) -> tuple[GATModel, list[EpochStats]]:
    if not graphs:
        raise DataError("training set is empty")
    d_in = graphs[0].features.shape[1]
    for g in graphs:
        if g.features.shape[1] != d_in:
            raise DataError(
                f"{g.table.pii}[{g.table.table_index}]: feature dim "
                f"{g.features.shape[1]} != {d_in}"
            )
    if model is None:
        model = GATModel(
            d_in,
            hidden1=config.hidden1,
            hidden2=config.hidden2,
            heads=config.heads,
            seed=config.seed,
        )
    rng = np.random.default_rng(config.seed + 1)
    trace: list[EpochStats] = []
    n = len(graphs)
    for epoch in range(config.epochs):
        model.zero_grad()
        losses: list[ad.Tensor] = []
        ce_sum = 0.0
        cons_sum = 0.0
        for g in graphs:
            loss, ce_v, cons_v = table_loss(
                model,
                g,
                config.constraint_weight,
                training=True,
                dropout=config.dropout,
                rng=rng,
            )
            if not math.isfinite(loss.item()):
                raise InternalError(
                    f"non-finite loss at epoch {epoch} on "
                    f"{g.table.pii}[{g.table.table_index}]"
                )
            losses.append(loss)
            ce_sum += ce_v
            cons_sum += cons_v
        batch = losses[0]
        for extra in losses[1:]:
            batch = ad.add(batch, extra)
        batch = ad.mul(batch, ad.constant(1.0 / n))
        batch.backward()
        _clip_gradients(model, config.grad_clip)
        for t in model.params.values():
            if t.grad is not None:
                t.data = t.data - config.lr * t.grad
        trace.append(
            EpochStats(
                epoch=epoch,
                total=batch.item(),
                ce=ce_sum / n,
                constraint=cons_sum / n,
            )
        )
    return model, trace


def gradient_check(
    model: GATModel, graph: TableGraph, lam: float = 50.0, h: float = 1e-5
) -> float:
    """Max relative disagreement between backprop and central differences.

    Every parameter element is perturbed by +-h with dropout off. The
    per-element error is |analytic - numeric| / max(|analytic| + |numeric|,
    1e-3); the floor keeps finite-difference roundoff on near-zero entries
    from dominating the ratio.
    """

    def loss_value() -> float:
        t, _, _ = table_loss(model, graph, lam)
        return t.item()

    model.zero_grad()
    loss, _, _ = table_loss(model, graph, lam)
    loss.backward()
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for k, t in model.params.items()}

    worst = 0.0
    for name, t in model.params.items():
        flat = t.data.reshape(-1)
        a = analytic[name].reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value()
            flat[i] = orig - h
            down = loss_value()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            err = abs(a[i] - numeric) / max(abs(a[i]) + abs(numeric), 1e-3)
            worst = max(worst, err)
    return worst


def save_checkpoint(model: GATModel, path: str) -> None:
    meta = {
        "format": CHECKPOINT_FORMAT,
        "d_in": model.d_in,
        "hidden1": model.hidden1,
        "hidden2": model.hidden2,
        "heads": model.heads,
        "num_classes": model.num_classes,
        "attention_slope": model.attention_slope,
        "seed": model.seed,
    }
    arrays = {name: t.data for name, t in model.params.items()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path: str, expected_d_in: int | None = None) -> GATModel:
    try:
        handle = np.load(path)
    except OSError as exc:
        raise CheckpointMismatchError(f"cannot read checkpoint {path}: {exc}") from exc
    with handle as data:
        if "__meta__" not in data:
            raise CheckpointMismatchError(f"{path}: not a model checkpoint")
        meta = json.loads(bytes(data["__meta__"].tobytes()).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointMismatchError(
                f"{path}: unsupported checkpoint format {meta.get('format')!r}"
            )
        if expected_d_in is not None and meta["d_in"] != expected_d_in:
            raise CheckpointMismatchError(
                f"{path}: checkpoint input dim {meta['d_in']} != expected {expected_d_in}"
            )
        model = GATModel(
            meta["d_in"],
            hidden1=meta["hidden1"],
            hidden2=meta["hidden2"],
            heads=meta["heads"],
            num_classes=meta["num_classes"],
            attention_slope=meta["attention_slope"],
            seed=meta["seed"],
        )
        for name, t in model.params.items():
            if name not in data:
                raise CheckpointMismatchError(f"{path}: missing parameter {name}")
            arr = np.asarray(data[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise CheckpointMismatchError(
                    f"{path}: parameter {name} shape {arr.shape} != {t.data.shape}"
                )
            t.data = arr
    return model
