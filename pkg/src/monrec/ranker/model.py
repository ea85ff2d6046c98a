"""Attention message passing over heterogeneous neighbourhoods, and candidate scoring."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..autodiff import Tensor, glorot, ops
from .schema import RankedList, RankerConfig
from .taskgraph import TaskGraph


def attention_scores(q: np.ndarray, keys: np.ndarray, d_h: int, d_o: int) -> np.ndarray:
    """Softmax over ``(q . k_j) / sqrt(d_h * d_o)`` for one head's query and keys."""
    keys = np.atleast_2d(np.asarray(keys, dtype=np.float64))
    if keys.shape[0] == 0:
        return np.zeros(0)
    raw = keys @ np.asarray(q, dtype=np.float64) / math.sqrt(d_h * d_o)
    e = np.exp(raw - raw.max())
    return e / e.sum()


def layer_param_names(tg: TaskGraph, layer: int) -> list[str]:
    names = [f"l{layer}.q.{k.value}" for k in tg.kinds]
    for r in tg.relations:
        names += [f"l{layer}.k.{r.name}", f"l{layer}.v.{r.name}"]
    return names + [f"l{layer}.w"]


def init_params(tg: TaskGraph, config: RankerConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    d_in = tg.width
    for layer, width in enumerate(config.widths):
        for k in tg.kinds:
            params[f"l{layer}.q.{k.value}"] = glorot(rng, d_in, width, f"l{layer}.q.{k.value}")
        for r in tg.relations:
            params[f"l{layer}.k.{r.name}"] = glorot(rng, d_in, width, f"l{layer}.k.{r.name}")
            params[f"l{layer}.v.{r.name}"] = glorot(rng, d_in, width, f"l{layer}.v.{r.name}")
        params[f"l{layer}.w"] = glorot(rng, d_in + width, width, f"l{layer}.w")
        d_in = width
    cand = config.out + (tg.width if config.metapaths else 0)
    nq = len(config.schema.query_kinds)
    params["proj"] = glorot(rng, nq * cand, cand, "proj")
    return params


def mp_layer(x: Tensor, tg: TaskGraph, params: dict[str, Tensor], layer: int, heads: int,
             conventional_scaling: bool = False) -> Tensor:
    """One round of edge-aware multi-head attention message passing.

    ``x_i' = ReLU(W [x_i ; sum_j alpha_ij v_j])`` where keys and values use
    per-relation projections and queries per-node-kind projections. Attention
    is normalised over each node's whole heterogeneous neighbourhood; nodes
    without neighbours receive a zero message.
    """
    n = len(tg)
    w = params[f"l{layer}.w"]
    width = w.shape[1]
    d_o = width // heads
    scale = 1.0 / math.sqrt(d_o if conventional_scaling else heads * d_o)
    q_all = ops.concat([ops.matmul(ops.index(x, tg.blocks[k]), params[f"l{layer}.q.{k.value}"])
                        for k in tg.kinds], axis=0)
    keys, vals, srcs, dsts = [], [], [], []
    offset = 0
    for r in tg.relations:
        if len(r.src) == 0:
            continue
        if f"l{layer}.k.{r.name}" not in params:
            raise KeyError(f"unknown edge kind {r.name!r} for layer {layer}")
        src_x = ops.index(x, tg.blocks[r.src_kind])
        keys.append(ops.matmul(src_x, params[f"l{layer}.k.{r.name}"]))
        vals.append(ops.matmul(src_x, params[f"l{layer}.v.{r.name}"]))
        srcs.append(r.src + offset)
        dsts.append(r.dst)
        offset += src_x.shape[0]
    if not dsts:
        msg = Tensor(np.zeros((n, width)))
    else:
        msg = ops.edge_attention(q_all, ops.concat(keys, axis=0), ops.concat(vals, axis=0),
                                 np.concatenate(srcs), np.concatenate(dsts), heads, scale)
    return ops.relu(ops.matmul(ops.concat([x, msg], axis=1), w))


def attention_weights(x: np.ndarray, tg: TaskGraph, params: dict[str, Tensor], layer: int,
                      heads: int) -> tuple[np.ndarray, np.ndarray]:
    """``(dst, alpha)`` for inspection: per-edge attention of one layer."""
    width = params[f"l{layer}.w"].shape[1]
    d_o = width // heads
    q_all = np.concatenate([x[tg.blocks[k]] @ params[f"l{layer}.q.{k.value}"].data for k in tg.kinds])
    raws, dsts = [], []
    for r in tg.relations:
        if len(r.src) == 0:
            continue
        kk = (x[tg.blocks[r.src_kind]] @ params[f"l{layer}.k.{r.name}"].data)[r.src]
        raws.append((q_all[r.dst] * kk).reshape(len(r.dst), heads, d_o).sum(-1) / math.sqrt(heads * d_o))
        dsts.append(r.dst)
    if not dsts:
        return np.zeros(0, dtype=np.int64), np.zeros((0, heads))
    dst = np.concatenate(dsts)
    alpha = ops.segment_softmax(Tensor(np.concatenate(raws)), dst, len(tg)).data
    return dst, alpha


class HeteroRanker:
    """Parameters plus the encode/score functions for one task."""

    def __init__(self, config: RankerConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, tg: TaskGraph, config: RankerConfig) -> "HeteroRanker":
        config.validate()
        return cls(config, init_params(tg, config, np.random.default_rng(config.seed)))

    def encode(self, tg: TaskGraph, context: np.ndarray | None = None) -> Tensor:
        # unit-norm text embeddings have tiny entries; rescale to unit variance
        x = Tensor(tg.x0 * math.sqrt(tg.width))
        for layer in range(self.config.layers):
            x = mp_layer(x, tg, self.params, layer, self.config.heads, self.config.conventional_scaling)
        if self.config.metapaths:
            if context is None:
                raise ValueError("metapath model needs context vectors")
            x = ops.concat([x, Tensor(context)], axis=1)
        return x

    def query_vectors(self, final: Tensor, query_rows: np.ndarray) -> Tensor:
        """Project concatenated final states of each query tuple (rows: Q x kinds)."""
        query_rows = np.atleast_2d(np.asarray(query_rows, dtype=np.int64))
        parts = [ops.gather_rows(final, query_rows[:, j]) for j in range(query_rows.shape[1])]
        return ops.matmul(ops.concat(parts, axis=1), self.params["proj"])

    def pair_scores(self, final: Tensor, qvec: Tensor, q_idx: np.ndarray, cand_rows: np.ndarray) -> Tensor:
        return ops.sum(ops.mul(ops.gather_rows(qvec, q_idx), ops.gather_rows(final, cand_rows)), axis=-1)


def score_candidates(query: Sequence[str], query_vec: np.ndarray, candidates: Sequence[tuple[int, str]],
                     cand_vecs: np.ndarray) -> RankedList:
    """Rank candidates by dot product with the query vector; ties by candidate id.

    ``candidates`` pairs each candidate's node id with its key, aligned with
    the rows of ``cand_vecs``.
    """
    if len(candidates) == 0:
        return RankedList(tuple(query), ())
    scores = np.asarray(cand_vecs, dtype=np.float64) @ np.asarray(query_vec, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError("non-finite candidate score")
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i][0]))
    return RankedList(tuple(query), tuple((candidates[i][1], float(scores[i])) for i in order))
