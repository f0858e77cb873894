"""Smoke tests for the embkit python bindings.

Deeper coverage lives in the C++ suites; these check that the bindings
expose the core operations faithfully and deterministically.
"""

import math

import numpy as np
import pytest

import embkit


def test_splitmix64_known_answers():
    # Published SplitMix64 outputs for seed 0.
    assert embkit.splitmix64(0, 3) == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]
    assert embkit.mix64(0) == 0xE220A8397B1DCDAF


def test_derive_seed_chains_mix64():
    tag = embkit.SEED_TAGS["dropout"]
    assert embkit.derive_seed(7, tag) == embkit.mix64(7 ^ embkit.mix64(tag))
    child = embkit.derive_seed(7, tag)
    assert embkit.derive_seed(7, tag, 3) == embkit.mix64(child ^ embkit.mix64(3))


def test_margin_staircase():
    for epoch in range(1, 12):
        want = min(0.15 + 0.05 * (epoch - 1), 0.4)
        assert embkit.margin_at_epoch(0.15, 0.05, 0.4, epoch) == want
    assert embkit.margin_table(0.1, 0.1, 0.5, 6) == [
        min(0.1 + 0.1 * e, 0.5) for e in range(6)
    ]
    with pytest.raises(ValueError):
        embkit.margin_at_epoch(0.1, 0.1, 0.5, 0)


def test_cosine_lr_endpoints():
    assert embkit.cosine_lr(1.0, 0.0, 3, 1) == 1.0
    assert embkit.cosine_lr(1.0, 0.0, 3, 2) == pytest.approx(0.5)
    assert embkit.cosine_lr(1.0, 0.0, 3, 3) == 0.0
    assert embkit.cosine_lr(0.9, 0.1, 5, 5) == 0.1
    assert embkit.backbone_lr(0.01, 1e-3) == pytest.approx(1e-5)


def unit_rows(rng, n, dim):
    rows = rng.standard_normal((n, dim))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)


def test_top_k_matches_numpy():
    rng = np.random.default_rng(11)
    index = unit_rows(rng, 200, 16)
    queries = unit_rows(rng, 20, 16)
    hits = embkit.top_k(index, queries, k=5)
    sims = queries.astype(np.float64) @ index.astype(np.float64).T
    assert len(hits) == 20
    for q, row in enumerate(hits):
        want = np.argsort(-sims[q], kind="stable")[:5]
        got_ids = [h[0] for h in row]
        assert got_ids == list(want)
        for rank, (idx, sim) in enumerate(row):
            assert sim == pytest.approx(sims[q][idx], abs=1e-6)
            if rank > 0:
                assert sim <= row[rank - 1][1]


def test_top_k_exclude_self_and_ids():
    rng = np.random.default_rng(3)
    store = unit_rows(rng, 10, 8)
    ids = list(range(100, 110))
    hits = embkit.top_k(store, store, k=3, index_ids=ids, query_ids=ids,
                        exclude_self=True)
    for q, row in enumerate(hits):
        assert ids[q] not in [h[0] for h in row]
        assert len(row) == 3


def test_fuse_views():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    fused = embkit.fuse_views(np.stack([e1, e2]))
    assert fused == pytest.approx([math.sqrt(0.5), math.sqrt(0.5)])
    with pytest.raises(ArithmeticError):
        embkit.fuse_views(np.stack([e1, -e1]))


def test_p_at_5_conventions():
    preds = [99, 10, 11, 98, 97]
    rel = [10, 11]
    # Two relevant ids: truncated judges ranks 1..2, clipped judges 1..5.
    assert embkit.p_at_5(preds, rel) == 0.5
    assert embkit.p_at_5(preds, rel, convention="clipped") == 1.0
    with pytest.raises(ValueError):
        embkit.p_at_5([1, 1], rel)


def test_mp_at_5_aggregate():
    report = embkit.mp_at_5(
        predictions={1: [9, 1, 2], 2: [], 3: [4]},
        relevant={1: [1, 2], 2: [5], 3: []},
    )
    assert report["mp_at_5"] == pytest.approx(0.25)
    assert report["counted"] == 2
    assert report["skipped"] == 1


def test_arcface_zero_margin_is_scaled_cosine():
    rng = np.random.default_rng(5)
    weights = rng.standard_normal((7, 6))
    emb = rng.standard_normal(6)
    emb /= np.linalg.norm(emb)
    logits = embkit.arcface_logits(weights, emb, target=2, margin=0.0, scale=20.0)
    unit_w = weights / np.linalg.norm(weights, axis=1, keepdims=True)
    np.testing.assert_allclose(logits, 20.0 * unit_w @ emb, atol=1e-12)
    loss = embkit.arcface_loss(weights, emb, target=2, margin=0.0, scale=20.0)
    shifted = logits - logits.max()
    want = -(shifted[2] - math.log(np.exp(shifted).sum()))
    assert loss == pytest.approx(want, abs=1e-12)


def test_arcface_grad_matches_finite_differences():
    rng = np.random.default_rng(9)
    weights = rng.standard_normal((4, 5))
    raw = rng.standard_normal(5)
    loss, d_raw, d_w = embkit.arcface_grad(weights, raw, target=1, margin=0.3)
    assert d_raw.shape == (5,) and d_w.shape == (4, 5)
    h = 1e-6
    for i in range(5):
        up, dn = raw.copy(), raw.copy()
        up[i] += h
        dn[i] -= h
        fd = (embkit.arcface_grad(weights, up, 1, 0.3)[0]
              - embkit.arcface_grad(weights, dn, 1, 0.3)[0]) / (2 * h)
        assert d_raw[i] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_synthesize_deterministic():
    a_ids, a_labels, a_vecs = embkit.synthesize(4, 6, 3, 5, 0.1, seed=42)
    b_ids, b_labels, b_vecs = embkit.synthesize(4, 6, 3, 5, 0.1, seed=42)
    c_ids, c_labels, c_vecs = embkit.synthesize(4, 6, 3, 5, 0.1, seed=43)
    assert np.array_equal(a_ids, b_ids) and a_labels == b_labels
    assert np.array_equal(a_vecs, b_vecs)
    assert not np.array_equal(a_vecs, c_vecs)
    assert a_vecs.shape[1] == 6 and len(a_labels) == a_vecs.shape[0]


def test_plan_dataset_balances_classes():
    ids = list(range(1, 6)) + [10, 11]
    labels = ["a"] * 5 + ["b"] * 2  # b sits below min_keep and is dropped
    rows = embkit.plan_dataset(ids, labels, cap=100, min_keep=3,
                               resample_floor=20, k_folds=5, val_fold=0, seed=1)
    assert {r["class_index"] for r in rows} == {0}
    assert sorted(r["sample_id"] for r in rows) == list(range(1, 6))
    val = [r for r in rows if r["split"] == "validation"]
    assert len(val) == 1 and val[0]["multiplicity"] == 1
    # Pre-fold multiplicity reaches the floor of 20; the one validation id
    # then collapses to 1, so the train side keeps whatever remains.
    train_mult = sum(r["multiplicity"] for r in rows if r["split"] == "train")
    assert 4 <= train_mult <= 19


def test_store_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    vecs = unit_rows(rng, 12, 8)
    path = str(tmp_path / "t.emb")
    embkit.write_store(path, vecs, ids=list(range(50, 62)))
    ids, back = embkit.read_store(path)
    assert list(ids) == list(range(50, 62))
    np.testing.assert_array_equal(back, vecs)


def test_train_and_encode(tmp_path):
    ids, labels, vecs = embkit.synthesize(6, 5, 8, 8, 0.05, seed=7)
    features = str(tmp_path / "t.ftr")
    embkit.write_features(features, vecs, ids=list(ids))
    rows = embkit.plan_dataset(list(ids), labels, cap=100, min_keep=3,
                               resample_floor=8, k_folds=4, val_fold=0, seed=7)
    plan = str(tmp_path / "plan.csv")
    embkit.write_plan(plan, rows)
    assert open(plan).readline() == "sample_id,class_index,fold,split,multiplicity\n"
    assert embkit.read_plan(plan) == rows
    with pytest.raises(ValueError):
        embkit.write_plan(plan, [dict(rows[0], split="test")])

    ckpt = str(tmp_path / "model.ekc")
    report = embkit.train(plan, features, phases=[(1, False), (1, True)],
                          hidden=[8], embed_dim=4, batch=8, lr=0.02,
                          eta_min=0.002, dropout=0.1, c=0.1, seed=7,
                          out_ckpt=ckpt)
    assert [r["epoch"] for r in report] == [1, 2]
    assert report[0]["margin"] == pytest.approx(0.1)
    assert all(math.isfinite(r["loss"]) for r in report)
    assert 0.0 <= report[-1]["val_mp5"] <= 1.0

    emb = embkit.encode(ckpt, vecs)
    assert emb.shape == (vecs.shape[0], 4)
    np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-9)
    again = embkit.encode(ckpt, vecs)
    np.testing.assert_array_equal(emb, again)
