import math

import numpy as np
import pytest

from conbandit.data import Catalog, DatasetSplit, InteractionLog, ItemRecord, split_cold_start
from conbandit.embeddings import EmbeddingStore, write_embeddings
from conbandit.errors import EntityLookupError, TrainingError
from conbandit.fm import (
    ATTR_TASK,
    ITEM_TASK,
    FmHyperParams,
    bpr_loss,
    bpr_step,
    fm_score_item,
    train_fm,
)
from conbandit.synth import SynthParams, generate_synthetic


def fresh_store(seed=0, d=4, n_users=3, n_items=6, n_attrs=5, scale=0.3):
    rng = np.random.default_rng(seed)
    return EmbeddingStore(
        d=d,
        users={u: rng.standard_normal(d) * scale for u in range(n_users)},
        items={v: rng.standard_normal(d) * scale for v in range(n_items)},
        attributes={a: rng.standard_normal(d) * scale for a in range(n_attrs)},
    )


def clone(store: EmbeddingStore) -> EmbeddingStore:
    return EmbeddingStore(
        d=store.d,
        users={k: v.copy() for k, v in store.users.items()},
        items={k: v.copy() for k, v in store.items.items()},
        attributes={k: v.copy() for k, v in store.attributes.items()},
    )


class TestScore:
    def test_plain_dot(self):
        assert fm_score_item(np.array([1.0, 0.0]), np.array([1.0, 0.0]), []) == 1.0

    def test_attribute_term_only(self):
        e2 = np.array([0.0, 1.0])
        assert fm_score_item(np.zeros(2), e2, [e2]) == 1.0

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            d = 8
            u, v = rng.standard_normal(d), rng.standard_normal(d)
            p_vecs = [rng.standard_normal(d) for _ in range(rng.integers(0, 4))]
            got = fm_score_item(u, v, p_vecs)
            want = sum(u[i] * v[i] for i in range(d))
            for p in p_vecs:
                want += sum(v[i] * p[i] for i in range(d))
            assert got == pytest.approx(want, abs=1e-12)


class TestBprStep:
    def test_zero_embeddings_give_ln2(self):
        store = fresh_store(scale=0.0)
        params = FmHyperParams(d=4)
        loss = bpr_loss(ITEM_TASK, 0, 1, 2, params, store)
        assert loss == pytest.approx(math.log(2.0), rel=1e-15)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(2)
        params = FmHyperParams(d=4, learning_rate=1.0, l2_reg=0.01)
        eps = 1e-5
        for task in (ITEM_TASK, ATTR_TASK):
            for trial in range(10):
                store = fresh_store(seed=trial, d=4)
                u_id, pos, neg = 0, 1, 2
                before = clone(store)
                bpr_step(task, u_id, pos, neg, params, store)
                mapping = before.items if task == ITEM_TASK else before.attributes
                touched = {("user", u_id), ("x", pos), ("x", neg)}
                for kind, ident in touched:
                    vec = before.users[u_id] if kind == "user" else mapping[ident]
                    after_map = store.users if kind == "user" else (
                        store.items if task == ITEM_TASK else store.attributes
                    )
                    analytic = vec - after_map[u_id if kind == "user" else ident]
                    for i in range(4):
                        probe = clone(before)
                        target = probe.users[u_id] if kind == "user" else (
                            probe.items[ident] if task == ITEM_TASK else probe.attributes[ident]
                        )
                        target[i] += eps
                        up = bpr_loss(task, u_id, pos, neg, params, probe)
                        target[i] -= 2 * eps
                        down = bpr_loss(task, u_id, pos, neg, params, probe)
                        fd = (up - down) / (2 * eps)
                        assert analytic[i] == pytest.approx(fd, rel=1e-4, abs=1e-9)

    def test_step_increases_pairwise_margin(self):
        store = fresh_store(seed=5)
        params = FmHyperParams(d=4, learning_rate=1e-3, l2_reg=0.0)
        def margin(s):
            return float(s.users[0] @ s.items[1]) - float(s.users[0] @ s.items[2])
        before = margin(store)
        bpr_step(ITEM_TASK, 0, 1, 2, params, store)
        assert margin(store) > before

    def test_only_triple_vectors_change(self):
        store = fresh_store(seed=6)
        before = clone(store)
        bpr_step(ATTR_TASK, 0, 1, 2, FmHyperParams(d=4), store)
        for v in store.items:
            assert np.array_equal(store.items[v], before.items[v])
        for a in store.attributes:
            changed = not np.array_equal(store.attributes[a], before.attributes[a])
            assert changed == (a in (1, 2))
        for u in store.users:
            changed = not np.array_equal(store.users[u], before.users[u])
            assert changed == (u == 0)

    def test_heavy_regularisation_shrinks_norms(self):
        store = fresh_store(seed=7)
        params = FmHyperParams(d=4, learning_rate=0.01, l2_reg=10.0)
        def norms(s):
            return (np.linalg.norm(s.users[0]) + np.linalg.norm(s.items[1])
                    + np.linalg.norm(s.items[2]))
        prev = norms(store)
        for _ in range(20):
            bpr_step(ITEM_TASK, 0, 1, 2, params, store)
            now = norms(store)
            assert now < prev
            prev = now

    def test_unknown_ids_raise(self):
        store = fresh_store()
        with pytest.raises(EntityLookupError):
            bpr_step(ITEM_TASK, 99, 0, 1, FmHyperParams(d=4), store)


class TestTrainFm:
    def test_one_user_two_items_orders_correctly(self):
        catalog = Catalog(
            items=(ItemRecord(0, frozenset({0})), ItemRecord(1, frozenset({1}))),
            attributes=(0, 1),
        )
        log = InteractionLog(((0, 0),))
        split = DatasetSplit(frozenset({0}), frozenset(), log, InteractionLog(()))
        store = train_fm(split, catalog, FmHyperParams(seed=0, d=8))
        assert float(store.users[0] @ store.items[0]) > float(store.users[0] @ store.items[1])

    def test_deterministic_files(self, tmp_path):
        params = SynthParams(n_users=12, n_items=30, n_attrs=6, d=6, records_per_user=4)
        catalog, log, _ = generate_synthetic(params, seed=1)
        split = split_cold_start(log, 0.7, seed=1)
        hp = FmHyperParams(seed=9, d=6, epochs_item=10, epochs_attr=5)
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        write_embeddings(train_fm(split, catalog, hp), a)
        write_embeddings(train_fm(split, catalog, hp), b)
        assert a.read_bytes() == b.read_bytes()

    def test_train_auc_exceeds_bar(self):
        params = SynthParams(n_users=30, n_items=60, n_attrs=10, d=8, records_per_user=5)
        catalog, log, _ = generate_synthetic(params, seed=0)
        split = split_cold_start(log, 0.7, seed=0)
        store = train_fm(split, catalog, FmHyperParams(seed=0, d=8))
        positives: dict[int, set[int]] = {}
        for u, v in split.train_records.records:
            positives.setdefault(u, set()).add(v)
        wins = ties = total = 0
        for u, items in positives.items():
            scores = {v: float(store.users[u] @ store.items[v]) for v in range(catalog.n_items)}
            for p in items:
                for n in range(catalog.n_items):
                    if n in items:
                        continue
                    total += 1
                    if scores[p] > scores[n]:
                        wins += 1
                    elif scores[p] == scores[n]:
                        ties += 1
        assert (wins + 0.5 * ties) / total > 0.8

    def test_u_init_matches_user_mean(self):
        params = SynthParams(n_users=10, n_items=20, n_attrs=5, d=4, records_per_user=3)
        catalog, log, _ = generate_synthetic(params, seed=2)
        split = split_cold_start(log, 0.7, seed=2)
        store = train_fm(split, catalog, FmHyperParams(seed=2, d=4, epochs_item=5, epochs_attr=2))
        manual = np.mean([store.users[u] for u in sorted(store.users)], axis=0)
        assert np.allclose(store.u_init, manual, atol=1e-12, rtol=0)

    def test_empty_training_set_rejected(self):
        catalog = Catalog(items=(ItemRecord(0, frozenset({0})),), attributes=(0,))
        split = DatasetSplit(frozenset(), frozenset(), InteractionLog(()), InteractionLog(()))
        with pytest.raises(TrainingError):
            train_fm(split, catalog, FmHyperParams(d=4))
