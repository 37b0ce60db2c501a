"""Table-to-graph conversion for the header classifier.

Node set: one node per cell, one per row header, one per column header, one
for the caption. Edge types: cell-cell (bidirectional within a shared row or
column), cell-header (directed, cell to its two headers), caption-header
(directed, caption to every header). No self-loops, no duplicate arcs.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .table import Table

__all__ = [
    "EmbeddingProvider",
    "HashEmbedder",
    "TableGraph",
    "build_graph",
    "POSITIONAL_DIM",
    "ZONES",
]

# positional zones, one-hot appended after the text embedding
ZONES = (
    "first_row",
    "last_row",
    "first_col",
    "last_col",
    "interior",
    "header",
    "caption",
    "other",
)
POSITIONAL_DIM = len(ZONES)
_ZONE_INDEX = {z: i for i, z in enumerate(ZONES)}


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def _stable_hash(data: str) -> int:
    return int.from_bytes(hashlib.blake2b(data.encode("utf-8"), digest_size=8).digest(), "big")


class HashEmbedder:
    """Character-trigram feature hashing, L2-normalized.

    Deterministic across runs and platforms; empty or whitespace text maps
    to the zero vector.
    """

    def __init__(self, dimension: int = 64):
        if dimension < 1:
            raise ValueError("embedding dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        s = text.strip().lower()
        if not s:
            return vec
        padded = f"^{s}$"
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3]
            h = _stable_hash(gram)
            bucket = h % self.dimension
            sign = 1.0 if (h >> 63) & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


@dataclass(frozen=True)
class TableGraph:
    table: Table
    features: np.ndarray  # (num_nodes, feature_dim) float64
    edge_src: np.ndarray  # (num_edges,) int64
    edge_dst: np.ndarray  # (num_edges,) int64
    edge_kind: tuple[str, ...]  # per-edge type tag
    cell_index: dict[tuple[int, int], int] = field(repr=False)
    row_header_index: tuple[int, ...] = ()
    col_header_index: tuple[int, ...] = ()
    caption_index: int = -1

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_src.shape[0]

    @property
    def header_index(self) -> tuple[int, ...]:
        return self.row_header_index + self.col_header_index

    def header_labels(self) -> np.ndarray:
        t = self.table
        return np.array(list(t.row_labels) + list(t.col_labels), dtype=np.int64)

    def isolated_nodes(self) -> tuple[int, ...]:
        indeg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(indeg, self.edge_dst, 1)
        return tuple(int(i) for i in np.nonzero(indeg == 0)[0])


def _header_feature(pii: str, table_index: int, axis: str, index: int, dim: int) -> np.ndarray:
    # header nodes carry no text of their own; a keyed counter-based stream
    # gives them a reproducible random signature
    seed = _stable_hash(f"{pii}|{table_index}|{axis}|{index}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    vec = rng.standard_normal(dim)
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def _zone_for_cell(i: int, j: int, rows: int, cols: int) -> str:
    if i == 0:
        return "first_row"
    if i == rows - 1:
        return "last_row"
    if j == 0:
        return "first_col"
    if j == cols - 1:
        return "last_col"
    return "interior"


def build_graph(table: Table, provider: EmbeddingProvider) -> TableGraph:
    """Build the classifier graph for one table.

    Node order: cells row-major, then row headers, then column headers,
    then the caption node. Feature layout: provider embedding followed by
    the positional one-hot.
    """
    rows, cols = table.num_rows, table.num_cols
    dim = provider.dimension
    n_nodes = rows * cols + rows + cols + 1
    feats = np.zeros((n_nodes, dim + POSITIONAL_DIM), dtype=np.float64)

    cell_index: dict[tuple[int, int], int] = {}
    node = 0
    for i in range(rows):
        for j in range(cols):
            cell_index[(i, j)] = node
            feats[node, :dim] = provider.embed(table.cells[i][j])
            feats[node, dim + _ZONE_INDEX[_zone_for_cell(i, j, rows, cols)]] = 1.0
            node += 1
    row_hdr = []
    for i in range(rows):
        row_hdr.append(node)
        feats[node, :dim] = _header_feature(table.pii, table.table_index, "row", i, dim)
        feats[node, dim + _ZONE_INDEX["header"]] = 1.0
        node += 1
    col_hdr = []
    for j in range(cols):
        col_hdr.append(node)
        feats[node, :dim] = _header_feature(table.pii, table.table_index, "col", j, dim)
        feats[node, dim + _ZONE_INDEX["header"]] = 1.0
        node += 1
    caption = node
    feats[caption, :dim] = provider.embed(table.caption)
    feats[caption, dim + _ZONE_INDEX["caption"]] = 1.0

    src: list[int] = []
    dst: list[int] = []
    kind: list[str] = []

    for i in range(rows):
        for j in range(cols):
            u = cell_index[(i, j)]
            for jj in range(cols):
                if jj != j:
                    src.append(u)
                    dst.append(cell_index[(i, jj)])
                    kind.append("cell_cell")
            for ii in range(rows):
                if ii != i:
                    src.append(u)
                    dst.append(cell_index[(ii, j)])
                    kind.append("cell_cell")
            src.append(u)
            dst.append(row_hdr[i])
            kind.append("cell_header")
            src.append(u)
            dst.append(col_hdr[j])
            kind.append("cell_header")
    for h in (*row_hdr, *col_hdr):
        src.append(caption)
        dst.append(h)
        kind.append("caption_header")

    return TableGraph(
        table=table,
        features=feats,
        edge_src=np.array(src, dtype=np.int64),
        edge_dst=np.array(dst, dtype=np.int64),
        edge_kind=tuple(kind),
        cell_index=cell_index,
        row_header_index=tuple(row_hdr),
        col_header_index=tuple(col_hdr),
        caption_index=caption,
    )
