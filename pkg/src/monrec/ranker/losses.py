"""Ranking objectives: BCE on link scores and TOP1-max over sampled negatives."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, ops
from ..metric_select import loss_bce


def loss_top1max(r_pos, r_negs) -> Tensor:
    """``sum_j s_j [sigmoid(r_j - r_pos) + sigmoid(r_j^2)]`` with ``s = softmax(r_negs)``."""
    r_pos, r_negs = ops.as_tensor(r_pos), ops.as_tensor(r_negs)
    if r_negs.data.size == 0:
        raise ValueError("TOP1-max needs at least one negative")
    r_negs = ops.reshape(r_negs, (-1,))
    s = ops.softmax(r_negs)
    terms = ops.add(ops.sigmoid(ops.sub(r_negs, ops.reshape(r_pos, (1,)))), ops.sigmoid(ops.square(r_negs)))
    return ops.sum(ops.mul(s, terms))


def batch_top1max(r_pos: Tensor, r_neg: Tensor, owner: np.ndarray) -> Tensor:
    """Mean TOP1-max over positives; ``owner[m]`` is the positive of negative ``m``."""
    owner = np.asarray(owner, dtype=np.int64)
    n = r_pos.shape[0]
    col = ops.reshape(r_neg, (-1, 1))
    s = ops.segment_softmax(col, owner, n)
    diff = ops.sub(col, ops.reshape(ops.gather_rows(ops.reshape(r_pos, (-1, 1)), owner), (-1, 1)))
    terms = ops.add(ops.sigmoid(diff), ops.sigmoid(ops.square(col)))
    per_pos = ops.segment_sum(ops.mul(s, terms), owner, n)
    return ops.mean(per_pos)


def link_bce(r_pos: Tensor, r_neg: Tensor) -> Tensor:
    """BCE of ``sigmoid(score)`` against link labels (positives 1, negatives 0)."""
    scores = ops.concat([ops.reshape(r_pos, (-1,)), ops.reshape(r_neg, (-1,))], axis=0)
    labels = np.r_[np.ones(r_pos.data.size), np.zeros(r_neg.data.size)]
    return loss_bce(ops.sigmoid(scores), labels)


def loss_rec(r_pos: Tensor, r_neg: Tensor, owner: np.ndarray, ranking: bool = True) -> Tensor:
    """Unweighted sum of link BCE and TOP1-max (BCE alone when ``ranking`` is off)."""
    bce = link_bce(r_pos, r_neg)
    if not ranking:
        return bce
    return ops.add(bce, batch_top1max(r_pos, r_neg, owner))
