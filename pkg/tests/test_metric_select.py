import math

import numpy as np
import pytest

from monrec.autodiff import Tensor
from monrec.datagen import generate_select_dataset
from monrec.metric_select import (KnnIndex, NoHistoryError, SelectConfig, SelectModel, decide, feature_matrix,
                                  loss_bce, loss_contrastive, loss_joint, time_split, train_select)


def test_bce_matches_closed_form():
    p = np.array([0.9, 0.2, 0.6])
    y = np.array([1, 0, 0])
    expected = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert loss_bce(Tensor(p), y).item() == pytest.approx(expected)


def test_bce_clamps_extremes_and_rejects_bad_input():
    assert math.isfinite(loss_bce(Tensor(np.array([0.0, 1.0])), [1, 0]).item())
    with pytest.raises(ValueError):
        loss_bce(Tensor(np.array([1.2])), [1])
    with pytest.raises(ValueError):
        loss_bce(Tensor(np.array([0.5])), [2])


def test_contrastive_matches_loop_oracle():
    rng = np.random.default_rng(0)
    a, pos, neg = rng.normal(size=4), rng.normal(size=(2, 4)), rng.normal(size=(3, 4))
    gamma = 0.7
    trip = np.mean([max(0.0, np.linalg.norm(p - a) - np.linalg.norm(n - a) + gamma) for p in pos for n in neg])
    cen = max(0.0, gamma - np.linalg.norm(pos.mean(0) - neg.mean(0)))
    assert loss_contrastive(Tensor(a), Tensor(pos), Tensor(neg), gamma).item() == pytest.approx(trip + cen)
    lit = max(0.0, gamma + np.linalg.norm(pos.mean(0) - neg.mean(0)))
    got = loss_contrastive(Tensor(a), Tensor(pos), Tensor(neg), gamma, literal_centroid=True).item()
    assert got == pytest.approx(trip + lit)


def test_contrastive_zero_when_well_separated():
    a = np.zeros(2)
    pos = np.array([[0.1, 0.0]])
    neg = np.array([[10.0, 0.0], [0.0, 10.0]])
    assert loss_contrastive(Tensor(a), Tensor(pos), Tensor(neg), 1.0).item() == 0.0
    with pytest.raises(ValueError):
        loss_contrastive(Tensor(a), Tensor(np.zeros((0, 2))), Tensor(neg))


def test_joint_endpoints():
    assert loss_joint(2.0, 4.0, 1.0) == 2.0
    assert loss_joint(2.0, 4.0, 0.0) == 4.0
    assert loss_joint(2.0, 4.0, 0.25) == pytest.approx(3.5)


def test_decide_rules():
    assert decide("BCE", 0.6, 0.0)
    assert not decide("KNN", 0.9, 0.4)
    assert decide("Ens", 0.7, 0.4)
    assert not decide("Ens", 0.5, 0.5)
    assert decide("KNN", 0.9, None)
    with pytest.raises(ValueError):
        decide("SVM", 0.5, 0.5)


def test_knn_vote_uses_only_same_account():
    lat = np.array([[0.0], [0.1], [5.0], [0.05]])
    idx = KnnIndex(lat, [1, 1, 0, 0], ["a", "a", "a", "b"], ["m0", "m1", "m2", "m3"])
    assert idx.vote(np.array([0.0]), "a", k=2) == 1.0
    assert idx.vote(np.array([0.0]), "a", k=3) == pytest.approx(2 / 3)
    assert idx.vote(np.array([0.0]), "a", k=2, exclude="m0") == 0.5
    with pytest.raises(NoHistoryError):
        idx.vote(np.array([0.0]), "zzz")


def test_config_validation():
    for bad in (dict(hidden=0), dict(alpha=1.5), dict(negatives=11), dict(variant="X"),
                dict(val_fraction=0.6, test_fraction=0.5)):
        with pytest.raises(ValueError):
            SelectConfig(**bad).validate()


def test_time_split_orders_by_timestamp():
    recs = generate_select_dataset("separable", n_metrics=40, seed=1)
    tr, va, te = time_split(recs, 0.2, 0.1)
    assert len(tr) + len(va) + len(te) == 40 and len(va) == 8 and len(te) == 4
    assert max(recs[i].timestamp for i in tr) <= min(recs[i].timestamp for i in va)
    assert max(recs[i].timestamp for i in va) <= min(recs[i].timestamp for i in te)


def test_model_save_load_round_trip(tmp_path):
    m = SelectModel(8, hidden=4, seed=3)
    m.save(tmp_path / "m.json", {"variant": "Ens"})
    m2, meta = SelectModel.load(tmp_path / "m.json")
    x = np.random.default_rng(0).normal(size=(5, 8))
    np.testing.assert_allclose(m2.predict_proba(x), m.predict_proba(x), atol=1e-12)
    assert meta["variant"] == "Ens" and m2.hidden == 4


def test_small_separable_training_learns():
    recs = generate_select_dataset("separable", n_metrics=240, seed=0)
    x = feature_matrix(recs)
    res = train_select(recs, SelectConfig(hidden=32, epochs=25, variant="Ens", seed=0), x=x)
    test = [i for i, r in enumerate(recs) if r.metric in set(res.test_keys)]
    dec = res.decisions([recs[i] for i in test], x[test])
    acc = np.mean([d.decision == bool(recs[i].label) for d, i in zip(dec, test)])
    assert acc >= 0.8
    assert all(0.0 <= d.p_global <= 1.0 for d in dec)
    assert res.decisions([], np.zeros((0, x.shape[1]))) == []


def test_unknown_account_falls_back_to_global():
    recs = generate_select_dataset("separable", n_metrics=60, seed=2)
    x = feature_matrix(recs)
    res = train_select(recs, SelectConfig(hidden=8, epochs=2, variant="KNN"), x=x)
    r = recs[0]
    from dataclasses import replace
    stranger = replace(r, account="never-seen")
    d = res.decisions([stranger], x[:1])[0]
    assert d.knn_vote is None and d.decision == (d.p_global > 0.5)


def test_too_few_records():
    with pytest.raises(ValueError):
        train_select(generate_select_dataset("null", n_metrics=3, seed=0))
