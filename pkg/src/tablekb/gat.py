"""Graph attention classifier with table-structure constraint losses.

Two attention layers: the first concatenates its heads, the second averages
them before the shared linear output head. Attention scores use a LeakyReLU
with slope 0.2; node updates use ELU. Messages flow along directed edges,
and each node normalizes attention over its incoming edges only; a node
with no incoming edges keeps a zero update (logged, not fatal).

The constraint term scores the label-probability layout of a table's
headers: a material-identifier line and a property line on the same axis
pair, two identifier lines, or property lines on both axes are each
penalized, and a claimed identifier line must actually look unique. All
terms are clamped at zero and averaged over the number of generated terms.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import TableGraph
from .props import MATERIAL_ID, NUM_CLASSES
from .table import Table

__all__ = [
    "GATModel",
    "ForwardResult",
    "forward",
    "edge_softmax",
    "log_softmax",
    "cross_entropy",
    "constraint_loss",
    "constraint_loss_reference",
    "uniqueness_ratios",
    "apply_confidence_threshold",
    "predict_labels",
    "attention_maps",
]

log = logging.getLogger(__name__)

_GID_GATE = 0.25
_UNIQUENESS_FLOOR = 0.5


class GATModel:
    """Parameter container; all tensors live in `params` keyed by name."""

    def __init__(
        self,
        d_in: int,
        hidden1: int = 64,
        hidden2: int = 32,
        heads: int = 4,
        num_classes: int = NUM_CLASSES,
        attention_slope: float = 0.2,
        seed: int = 0,
    ):
        if hidden1 % heads != 0:
            raise ValueError(f"hidden1={hidden1} not divisible by heads={heads}")
        self.d_in = d_in
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.heads = heads
        self.num_classes = num_classes
        self.attention_slope = attention_slope
        self.seed = seed
        self.per_head1 = hidden1 // heads
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        for k in range(heads):
            self.params[f"W1.{k}"] = ad.parameter(_glorot(rng, d_in, self.per_head1))
            self.params[f"a1.{k}"] = ad.parameter(_glorot(rng, 2 * self.per_head1, 1))
            self.params[f"W2.{k}"] = ad.parameter(_glorot(rng, hidden1, hidden2))
            self.params[f"a2.{k}"] = ad.parameter(_glorot(rng, 2 * hidden2, 1))
        self.params["Wout"] = ad.parameter(_glorot(rng, hidden2, num_classes))
        self.params["bout"] = ad.parameter(np.zeros((num_classes,)))

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


@dataclass
class ForwardResult:
    header_logits: Tensor
    header_logp: Tensor
    header_probs: Tensor
    header_index: np.ndarray
    attention: list[list[np.ndarray]] | None = None


def edge_softmax(score: Tensor, dst: np.ndarray, num_nodes: int) -> Tensor:
    """Per-destination softmax over edge scores, shape (E, 1) in and out.

    The per-segment maximum is subtracted as a detached constant; softmax is
    invariant to it, so values and gradients are exact.
    """
    m = np.full(num_nodes, -np.inf)
    np.maximum.at(m, dst, score.data[:, 0])
    shifted = ad.sub(score, ad.constant(m[dst][:, None]))
    e = ad.exp(shifted)
    denom = ad.segment_sum(e, dst, num_nodes)
    return ad.div(e, ad.gather_rows(denom, dst))


def log_softmax(logits: Tensor) -> Tensor:
    mx = logits.data.max(axis=1, keepdims=True)
    z = ad.sub(logits, ad.constant(mx))
    lse = ad.log(ad.tsum(ad.exp(z), axis=1, keepdims=True))
    return ad.sub(z, lse)


def _attention_layer(
    h: Tensor,
    w: Tensor,
    a: Tensor,
    graph: TableGraph,
    slope: float,
    per_dim: int,
) -> tuple[Tensor, Tensor]:
    """One attention head: returns (aggregated messages (N,d'), alpha (E,1))."""
    n = graph.num_nodes
    z = ad.matmul(h, w)
    a_dst = ad.slice_rows(a, 0, per_dim)
    a_src = ad.slice_rows(a, per_dim, 2 * per_dim)
    sd = ad.matmul(z, a_dst)
    ss = ad.matmul(z, a_src)
    score = ad.leaky_relu(
        ad.add(ad.gather_rows(sd, graph.edge_dst), ad.gather_rows(ss, graph.edge_src)),
        slope,
    )
    alpha = edge_softmax(score, graph.edge_dst, n)
    weighted = ad.mul(alpha, ad.gather_rows(z, graph.edge_src))
    msg = ad.segment_sum(weighted, graph.edge_dst, n)
    return msg, alpha


def forward(
    model: GATModel,
    graph: TableGraph,
    training: bool = False,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    collect_attention: bool = False,
) -> ForwardResult:
    isolated = graph.isolated_nodes()
    if isolated:
        log.debug(
            "%s[%d]: %d node(s) with empty neighborhood keep zero updates",
            graph.table.pii,
            graph.table.table_index,
            len(isolated),
        )
    h0 = ad.constant(graph.features)
    att1: list[np.ndarray] = []
    att2: list[np.ndarray] = []

    heads_out = []
    for k in range(model.heads):
        msg, alpha = _attention_layer(
            h0,
            model.params[f"W1.{k}"],
            model.params[f"a1.{k}"],
            graph,
            model.attention_slope,
            model.per_head1,
        )
        heads_out.append(ad.elu(msg))
        if collect_attention:
            att1.append(alpha.data[:, 0].copy())
    h1 = ad.concat(heads_out, axis=1)

    if training and dropout > 0.0:
        if rng is None:
            raise ValueError("dropout during training needs an rng")
        keep = (rng.random(h1.shape) >= dropout) / (1.0 - dropout)
        h1 = ad.mul(h1, ad.constant(keep))

    acc: Tensor | None = None
    for k in range(model.heads):
        msg, alpha = _attention_layer(
            h1,
            model.params[f"W2.{k}"],
            model.params[f"a2.{k}"],
            graph,
            model.attention_slope,
            model.hidden2,
        )
        acc = msg if acc is None else ad.add(acc, msg)
        if collect_attention:
            att2.append(alpha.data[:, 0].copy())
    h2 = ad.elu(ad.mul(acc, ad.constant(1.0 / model.heads)))

    idx = np.asarray(graph.header_index, dtype=np.int64)
    logits = ad.add(ad.matmul(ad.gather_rows(h2, idx), model.params["Wout"]), model.params["bout"])
    logp = log_softmax(logits)
    probs = ad.exp(logp)
    return ForwardResult(
        header_logits=logits,
        header_logp=logp,
        header_probs=probs,
        header_index=idx,
        attention=[att1, att2] if collect_attention else None,
    )


def attention_maps(model: GATModel, graph: TableGraph) -> list[list[np.ndarray]]:
    """Per-layer, per-head attention coefficients for inspection/tests."""
    return forward(model, graph, collect_attention=True).attention


def cross_entropy(logp: Tensor, labels: np.ndarray) -> Tensor:
    n, c = logp.shape
    onehot = np.zeros((n, c))
    onehot[np.arange(n), np.asarray(labels, dtype=np.int64)] = 1.0
    return ad.mul(ad.neg(ad.tsum(ad.mul(logp, ad.constant(onehot)))), ad.constant(1.0 / n))


def uniqueness_ratios(table: Table) -> list[float | None]:
    """Uniqueness of each header's data cells, rows first then columns.

    Ratio |distinct non-empty| / |non-empty| over the line excluding its
    header cell; None when the line has no non-empty data cells.
    """
    out: list[float | None] = []
    for i in range(table.num_rows):
        cells = [c.strip() for c in table.cells[i][1:]]
        cells = [c for c in cells if c]
        out.append(len(set(cells)) / len(cells) if cells else None)
    for j in range(table.num_cols):
        cells = [table.cells[i][j].strip() for i in range(1, table.num_rows)]
        cells = [c for c in cells if c]
        out.append(len(set(cells)) / len(cells) if cells else None)
    return out


def constraint_loss(
    probs: Tensor, table: Table, uniqueness: list[float | None] | None = None
) -> tuple[Tensor, int]:
    """Structural constraint penalty for one table's header probabilities.

    `probs` rows are ordered rows-then-columns like the graph's header
    nodes. Returns (loss, number of generated terms); the loss is already
    normalized by that count.
    """
    r, c = table.num_rows, table.num_cols
    h = r + c
    if probs.shape[0] != h:
        raise ValueError(f"probs rows {probs.shape[0]} != header count {h}")
    if uniqueness is None:
        uniqueness = uniqueness_ratios(table)

    sel_gid = np.zeros((NUM_CLASSES, 1))
    sel_gid[MATERIAL_ID, 0] = 1.0
    sel_prop = np.zeros((NUM_CLASSES, 1))
    sel_prop[4:NUM_CLASSES, 0] = 1.0
    g = ad.matmul(probs, ad.constant(sel_gid))  # (H,1)
    p = ad.matmul(probs, ad.constant(sel_prop))

    gr = ad.reshape(ad.slice_rows(g, 0, r), (r, 1))
    gc = ad.reshape(ad.slice_rows(g, r, h), (1, c))
    pr = ad.reshape(ad.slice_rows(p, 0, r), (r, 1))
    pc = ad.reshape(ad.slice_rows(p, r, h), (1, c))

    # identifier on one axis against property on the other, both directions
    t_gp = ad.tsum(ad.relu(ad.sub(ad.add(gr, pc), ad.constant(1.0))))
    t_pg = ad.tsum(ad.relu(ad.sub(ad.add(pr, gc), ad.constant(1.0))))
    # at most one identifier line overall
    gflat = ad.reshape(g, (h,))
    pair = ad.sub(
        ad.add(ad.reshape(gflat, (h, 1)), ad.reshape(gflat, (1, h))), ad.constant(1.0)
    )
    upper = np.triu(np.ones((h, h)), k=1)
    t_gg = ad.tsum(ad.mul(ad.relu(pair), ad.constant(upper)))
    # properties should live on a single axis
    t_pp = ad.tsum(ad.relu(ad.sub(ad.add(pr, pc), ad.constant(1.0))))

    # claimed identifier lines must look unique; gate and ratio are data,
    # not parameters, so this term carries value but no gradient
    gid_scores = g.data[:, 0]
    const_sum = 0.0
    n_gid_terms = 0
    for i in range(h):
        u = uniqueness[i]
        if gid_scores[i] > _GID_GATE and u is not None:
            const_sum += max(0.0, _UNIQUENESS_FLOOR - u)
            n_gid_terms += 1

    n_terms = 2 * r * c + h * (h - 1) // 2 + r * c + n_gid_terms
    total = ad.add(ad.add(ad.add(t_gp, t_pg), ad.add(t_gg, t_pp)), ad.constant(const_sum))
    return ad.mul(total, ad.constant(1.0 / n_terms)), n_terms


def constraint_loss_reference(
    probs: np.ndarray, table: Table, uniqueness: list[float | None] | None = None
) -> float:
    """Loop-based oracle for `constraint_loss`, plain floats, no vectorization."""
    r, c = table.num_rows, table.num_cols
    h = r + c
    if uniqueness is None:
        uniqueness = uniqueness_ratios(table)
    g = [float(probs[i, MATERIAL_ID]) for i in range(h)]
    p = [float(sum(probs[i, 4:NUM_CLASSES])) for i in range(h)]
    terms: list[float] = []
    for i in range(r):
        for j in range(c):
            terms.append(max(0.0, g[i] + p[r + j] - 1.0))
            terms.append(max(0.0, p[i] + g[r + j] - 1.0))
    for i in range(h):
        for j in range(i + 1, h):
            terms.append(max(0.0, g[i] + g[j] - 1.0))
    for i in range(r):
        for j in range(c):
            terms.append(max(0.0, p[i] + p[r + j] - 1.0))
    for i in range(h):
        u = uniqueness[i]
        if g[i] > _GID_GATE and u is not None:
            terms.append(max(0.0, _UNIQUENESS_FLOOR - u))
    return sum(terms) / len(terms) if terms else 0.0


def apply_confidence_threshold(prob_row: np.ndarray, alpha: float) -> int:
    """Argmax label with low-confidence composition-role predictions zeroed.

    Classes 1-3 fall back to 0 when the winning probability is below alpha;
    property classes keep their argmax regardless.
    """
    c = int(np.argmax(prob_row))
    if 1 <= c <= 3 and float(prob_row[c]) < alpha:
        return 0
    return c


def predict_labels(
    model: GATModel, graph: TableGraph, alpha_thr: float = 0.7
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    res = forward(model, graph)
    probs = res.header_probs.data
    r = graph.table.num_rows
    labels = [apply_confidence_threshold(probs[i], alpha_thr) for i in range(probs.shape[0])]
    return tuple(labels[:r]), tuple(labels[r:])
