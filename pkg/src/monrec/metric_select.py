"""Which metrics deserve a monitor.

Three decision variants share one MLP encoder over text features:

* ``BCE``: a global classifier head, trained with binary cross entropy;
* ``KNN``: a vote among the nearest labelled metrics of the same account in
  the encoder's latent space, trained with a contrastive objective;
* ``Ens``: the mean of both scores, trained with the joint loss.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import (DivergenceError, NonFiniteError, OptimizerState, Tensor, TrainControl,
                       adam_step, backward, control_step, glorot, ops, zeros)
from .autodiff import checkpoint
from .datagen import SelectRecord
from .embed import EmbeddingProvider, embed_set

log = logging.getLogger(__name__)

VARIANTS = ("BCE", "KNN", "Ens")
CLAMP = 1e-7


class NoHistoryError(LookupError):
    """The account has no labelled metrics to vote with."""


# features

def metric_feature(record: SelectRecord, provider: EmbeddingProvider) -> np.ndarray:
    """Concatenated set embeddings: service, dependencies, metric, dimensions."""
    w = provider.width
    service = provider.embed_text(record.service_text)
    deps = provider.embed_text(record.dependency_text) if record.dependency_text else np.zeros(w)
    metric = provider.embed_text(record.metric_text)
    dims = embed_set(provider.embed_many(record.dimension_texts), width=w)
    return np.concatenate([service, deps, metric, dims])


def feature_matrix(records: Sequence[SelectRecord], provider: EmbeddingProvider | None = None) -> np.ndarray:
    provider = provider or EmbeddingProvider()
    if not records:
        return np.zeros((0, 4 * provider.width))
    return np.stack([metric_feature(r, provider) for r in records])


# losses

def loss_bce(p: Tensor, y) -> Tensor:
    """Mean negative log-likelihood of labels ``y`` under probabilities ``p``."""
    p = ops.as_tensor(p)
    y = np.asarray(y, dtype=np.float64).reshape(p.shape)
    if np.any((p.data < 0) | (p.data > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    pc = ops.clip(p, CLAMP, 1.0 - CLAMP)
    ll = ops.add(ops.mul(y, ops.log(pc)), ops.mul(1.0 - y, ops.log(ops.sub(1.0, pc))))
    return ops.neg(ops.mean(ll))


def loss_contrastive(anchor: Tensor, positives: Tensor, negatives: Tensor, gamma: float = 1.0,
                     literal_centroid: bool = False) -> Tensor:
    """Hinged triplet term over every (positive, negative) pair plus a centroid margin.

    Shapes: ``anchor`` (h,) or (B, h); ``positives`` (P, h) or (B, P, h);
    ``negatives`` likewise. Batched inputs are averaged over the batch.
    The centroid term is ``[gamma - |c+ - c-|]_+`` unless ``literal_centroid``
    selects ``[gamma + |c+ - c-|]_+``.
    """
    anchor, positives, negatives = (ops.as_tensor(t) for t in (anchor, positives, negatives))
    if anchor.ndim == 1:
        anchor = ops.reshape(anchor, (1,) + anchor.shape)
        positives = ops.reshape(positives, (1,) + positives.shape)
        negatives = ops.reshape(negatives, (1,) + negatives.shape)
    B, h = anchor.shape
    if positives.shape[1] == 0 or negatives.shape[1] == 0:
        raise ValueError("contrastive loss needs at least one positive and one negative")
    if positives.shape[2] != h or negatives.shape[2] != h:
        raise ValueError(f"embedding widths differ: {anchor.shape}, {positives.shape}, {negatives.shape}")
    a = ops.reshape(anchor, (B, 1, h))
    dp = ops.l2norm(ops.sub(positives, a), axis=-1)              # (B, P)
    dn = ops.l2norm(ops.sub(negatives, a), axis=-1)              # (B, N)
    P, N = dp.shape[1], dn.shape[1]
    diff = ops.add(ops.sub(ops.reshape(dp, (B, P, 1)), ops.reshape(dn, (B, 1, N))), gamma)
    triplet = ops.mean(ops.mean(ops.hinge(diff), axis=-1), axis=-1)  # (B,)
    gap = ops.l2norm(ops.sub(ops.mean(positives, axis=1), ops.mean(negatives, axis=1)), axis=-1)
    centroid = ops.hinge(ops.add(gap, gamma) if literal_centroid else ops.sub(gamma, gap))
    return ops.mean(ops.add(triplet, centroid))


def loss_joint(bce, contrastive, alpha: float = 0.5):
    """``alpha * bce + (1 - alpha) * contrastive`` for floats or tensors."""
    if isinstance(bce, Tensor) or isinstance(contrastive, Tensor):
        if alpha == 1.0:
            return ops.as_tensor(bce)
        if alpha == 0.0:
            return ops.as_tensor(contrastive)
        return ops.add(ops.scale(bce, alpha), ops.scale(contrastive, 1.0 - alpha))
    return alpha * bce + (1.0 - alpha) * contrastive


# decisions

def decide(variant: str, p_global: float, knn_fraction: float | None) -> bool:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if knn_fraction is None or variant == "BCE":
        return p_global > 0.5
    if variant == "KNN":
        return knn_fraction > 0.5
    return (p_global + knn_fraction) / 2.0 > 0.5


@dataclass(frozen=True)
class SelectDecision:
    metric: str
    p_global: float
    knn_vote: float | None
    decision: bool
    variant: str

    def to_record(self) -> dict:
        return asdict(self)


class KnnIndex:
    """Labelled latent vectors grouped by account."""

    def __init__(self, latents: np.ndarray, labels: Sequence[int], accounts: Sequence[str],
                 keys: Sequence[str] | None = None):
        self.latents = np.asarray(latents, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.accounts = list(accounts)
        self.keys = list(keys) if keys is not None else [str(i) for i in range(len(self.accounts))]
        self._by_account: dict[str, np.ndarray] = {}
        for i, a in enumerate(self.accounts):
            self._by_account.setdefault(a, []).append(i)
        self._by_account = {a: np.array(v) for a, v in self._by_account.items()}

    def vote(self, e: np.ndarray, account: str, k: int = 5, exclude: str | None = None) -> float:
        rows = self._by_account.get(account)
        if rows is not None and exclude is not None:
            rows = np.array([r for r in rows if self.keys[r] != exclude])
        if rows is None or len(rows) == 0:
            raise NoHistoryError(f"account {account!r} has no labelled metrics")
        d = np.linalg.norm(self.latents[rows] - np.asarray(e)[None, :], axis=1)
        order = np.lexsort((rows, d))[:k]
        return float(self.labels[rows[order]].mean())


def knn_vote(e_k: np.ndarray, account: str, index: KnnIndex, k: int = 5) -> float:
    return index.vote(e_k, account, k)


# model

@dataclass
class SelectConfig:
    hidden: int = 256
    alpha: float = 0.5
    gamma: float = 1.0
    k: int = 5
    positives: int = 5
    negatives: int = 10
    epochs: int = 60
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-5
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    literal_centroid: bool = False
    variant: str = "Ens"
    seed: int = 0

    def validate(self) -> None:
        if self.hidden <= 0 or self.k <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("hidden, k, epochs and batch_size must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not (0.0 < self.val_fraction and 0.0 <= self.test_fraction and self.val_fraction + self.test_fraction < 1.0):
            raise ValueError("val_fraction and test_fraction must be positive and leave training data")
        if self.negatives < 1 or self.negatives > 10:
            raise ValueError("negatives must lie in [1, 10]")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


class SelectModel:
    """Two ReLU layers (the latent ``e_k``) and a sigmoid head."""

    def __init__(self, in_width: int, hidden: int = 256, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.params = {
            "w1": glorot(rng, in_width, hidden, "w1"), "b1": zeros((hidden,), "b1"),
            "w2": glorot(rng, hidden, hidden, "w2"), "b2": zeros((hidden,), "b2"),
            "wh": glorot(rng, hidden, 1, "wh"), "bh": zeros((1,), "bh"),
        }

    @property
    def in_width(self) -> int:
        return self.params["w1"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["w1"].shape[1]

    def forward(self, x) -> tuple[Tensor, Tensor]:
        p = self.params
        x = ops.as_tensor(x)
        h = ops.relu(ops.add(ops.matmul(x, p["w1"]), p["b1"]))
        z = ops.relu(ops.add(ops.matmul(h, p["w2"]), p["b2"]))
        prob = ops.sigmoid(ops.reshape(ops.add(ops.matmul(z, p["wh"]), p["bh"]), (x.shape[0],)))
        return z, prob

    def latent(self, x: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(x))[0].data

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(x))[1].data

    def state(self) -> dict[str, Tensor]:
        return self.params

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        checkpoint.save(path, self.params, meta)

    @classmethod
    def load(cls, path: str | Path) -> tuple["SelectModel", dict]:
        params, meta = checkpoint.load(path)
        model = cls.__new__(cls)
        model.params = {k: Tensor(v.data, requires_grad=True, name=k) for k, v in params.items()}
        return model, meta


@dataclass
class SelectResult:
    model: SelectModel
    config: SelectConfig
    index: KnnIndex
    train_keys: list[str]
    val_keys: list[str]
    test_keys: list[str] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    stopped_early: bool = False

    def decisions(self, records: Sequence[SelectRecord], x: np.ndarray | None = None,
                  variant: str | None = None, provider: EmbeddingProvider | None = None) -> list[SelectDecision]:
        variant = variant or self.config.variant
        if x is None:
            x = feature_matrix(records, provider)
        if len(records) == 0:
            return []
        z, p = self.model.forward(Tensor(x))
        out = []
        for i, r in enumerate(records):
            try:
                vote = self.index.vote(z.data[i], r.account, self.config.k, exclude=r.metric)
            except NoHistoryError:
                vote = None
            out.append(SelectDecision(r.metric, float(p.data[i]), vote,
                                      decide(variant, float(p.data[i]), vote), variant))
        return out


def time_split(records: Sequence[SelectRecord], val_fraction: float,
               test_fraction: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Oldest records train, the next slice validates, the newest test."""
    order = sorted(range(len(records)), key=lambda i: (records[i].timestamp, records[i].metric))
    n = len(order)
    n_test = int(round(test_fraction * n))
    n_val = int(round(val_fraction * n))
    n_tr = n - n_val - n_test
    return np.array(order[:n_tr]), np.array(order[n_tr:n_tr + n_val]), np.array(order[n_tr + n_val:], dtype=np.int64)


def _pairs(rng, train_idx, labels, accounts, anchors, n_pos, n_neg):
    """Sample same-account positives/negatives (falling back to global pools)."""
    groups: dict[tuple[str, int], list[int]] = {}
    for i in train_idx:
        groups.setdefault((accounts[i], labels[i]), []).append(i)
    pools = {lab: [i for i in train_idx if labels[i] == lab] for lab in (0, 1)}
    keep, pos, neg = [], [], []
    for a in anchors:
        lab = labels[a]
        same = [i for i in groups.get((accounts[a], lab), []) if i != a]
        other = groups.get((accounts[a], 1 - lab), [])
        if not same:
            same = [i for i in pools[lab] if i != a]
        if not other:
            other = pools[1 - lab]
        if not same or not other:
            continue
        keep.append(a)
        pos.append(rng.choice(same, size=n_pos, replace=len(same) < n_pos))
        neg.append(rng.choice(other, size=n_neg, replace=len(other) < n_neg))
    return np.array(keep, dtype=np.int64), np.array(pos, dtype=np.int64), np.array(neg, dtype=np.int64)


def _alpha_for(variant: str, alpha: float) -> float:
    return {"BCE": 1.0, "KNN": 0.0}.get(variant, alpha)


def train_select(records: Sequence[SelectRecord], config: SelectConfig | None = None,
                 x: np.ndarray | None = None, provider: EmbeddingProvider | None = None) -> SelectResult:
    """Train one variant; BCE uses alpha=1, KNN alpha=0, Ens the configured alpha."""
    config = config or SelectConfig()
    config.validate()
    if len(records) < 4:
        raise ValueError("need at least four labelled metrics")
    if x is None:
        x = feature_matrix(records, provider)
    labels = np.array([r.label for r in records], dtype=np.int64)
    accounts = [r.account for r in records]
    keys = [r.metric for r in records]
    tr, va, te = time_split(records, config.val_fraction, config.test_fraction)
    alpha = _alpha_for(config.variant, config.alpha)
    rng = np.random.default_rng(config.seed)
    model = SelectModel(x.shape[1], config.hidden, config.seed)
    params = list(model.params.values())
    state = OptimizerState(lr=config.lr, weight_decay=config.weight_decay)
    control = TrainControl(lr=config.lr)
    best = {k: v.data.copy() for k, v in model.params.items()}
    history = []
    stopped = False

    def build_index():
        return KnnIndex(model.latent(x[tr]), labels[tr], [accounts[i] for i in tr], [keys[i] for i in tr])

    def val_accuracy() -> float:
        res = SelectResult(model, config, build_index(), [], [])
        dec = res.decisions([records[i] for i in va], x[va], config.variant)
        return float(np.mean([d.decision == bool(labels[i]) for d, i in zip(dec, va)]))

    for epoch in range(config.epochs):
        perm = rng.permutation(tr)
        losses = []
        for start in range(0, len(perm), config.batch_size):
            batch = perm[start:start + config.batch_size]
            try:
                loss = _batch_loss(model, x, labels, accounts, tr, batch, alpha, config, rng)
            except NonFiniteError as exc:
                raise DivergenceError(f"metric selection diverged at epoch {epoch}: {exc}") from exc
            for p in params:
                p.grad = None
            backward(loss)
            adam_step(params, [p.grad for p in params], state)
            losses.append(loss.item())
        if not np.all(np.isfinite([p.data for p in params][0])):
            raise DivergenceError(f"metric selection parameters non-finite at epoch {epoch}")
        acc = val_accuracy()
        improved = control.improved(acc)
        lr, stop = control_step(control, acc)
        state.lr = lr
        if improved:
            best = {k: v.data.copy() for k, v in model.params.items()}
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "val_accuracy": acc, "lr": lr})
        log.debug("select %s epoch %d loss %.4f val_acc %.4f", config.variant, epoch, history[-1]["loss"], acc)
        if stop:
            stopped = True
            break
    for k, v in best.items():
        model.params[k].data[...] = v
    return SelectResult(model, config, build_index(), [keys[i] for i in tr], [keys[i] for i in va],
                        [keys[i] for i in te], history, stopped)


def _batch_loss(model, x, labels, accounts, tr, batch, alpha, config, rng) -> Tensor:
    parts = [batch]
    if alpha < 1.0:
        anchors, pos, neg = _pairs(rng, tr, labels, accounts, batch, config.positives, config.negatives)
        parts += [pos.reshape(-1), neg.reshape(-1)]
    rows, inv = np.unique(np.concatenate(parts), return_inverse=True)
    z, prob = model.forward(Tensor(x[rows]))
    where = {r: i for i, r in enumerate(rows)}
    bce = con = None
    if alpha > 0.0:
        bce = loss_bce(ops.gather_rows(prob, [where[b] for b in batch]), labels[batch])
    if alpha < 1.0:
        if len(anchors) == 0:
            con = Tensor(0.0)
        else:
            h = z.shape[1]
            za = ops.gather_rows(z, [where[a] for a in anchors])
            zp = ops.reshape(ops.gather_rows(z, [where[i] for i in pos.reshape(-1)]), pos.shape + (h,))
            zn = ops.reshape(ops.gather_rows(z, [where[i] for i in neg.reshape(-1)]), neg.shape + (h,))
            con = loss_contrastive(za, zp, zn, config.gamma, config.literal_centroid)
    if bce is None:
        return con
    if con is None:
        return bce
    return loss_joint(bce, con, alpha)


def train_variants(records: Sequence[SelectRecord], config: SelectConfig | None = None,
                   x: np.ndarray | None = None, provider: EmbeddingProvider | None = None,
                   variants: Sequence[str] = VARIANTS) -> dict[str, SelectResult]:
    config = config or SelectConfig()
    if x is None:
        x = feature_matrix(records, provider)
    out = {}
    for v in variants:
        cfg = SelectConfig(**{**asdict(config), "variant": v})
        out[v] = train_select(records, cfg, x=x)
    return out
