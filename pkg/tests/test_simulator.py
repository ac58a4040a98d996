from dataclasses import replace

import numpy as np
import pytest

from conbandit.bandit import ArmKind, ArmRef
from conbandit.config import ExperimentConfig
from conbandit.data import Catalog, ItemRecord, QuestionSetting
from conbandit.embeddings import EmbeddingStore
from conbandit.errors import ContractViolation
from conbandit.policies import Action, PolicyConfig, init_policy_state
from conbandit.simulator import (
    ATTR_ACCEPTED,
    ATTR_REJECTED,
    REC_ACCEPTED,
    REC_REJECTED,
    apply_feedback,
    derive_session_seed,
    new_session,
    run_session,
    run_user,
    simulate_feedback,
)
from conbandit.synth import SynthParams, generate_synthetic


def item_arm(store, v):
    return ArmRef(ArmKind.ITEM, v, store.items[v])


def attr_arm(store, a):
    return ArmRef(ArmKind.ATTRIBUTE, a, store.attributes[a])


class TestSimulateFeedback:
    def test_binary_membership(self, tiny_store):
        target = ItemRecord(9, frozenset({3, 7}))
        setting = QuestionSetting("binary", 1)
        fb = simulate_feedback(Action("ask", (attr_arm(tiny_store, 3),)), target, setting, None)
        assert fb.kind == ATTR_ACCEPTED and fb.accepted_attrs == (3,)
        fb = simulate_feedback(Action("ask", (attr_arm(tiny_store, 1),)), target, setting, None)
        assert fb.kind == ATTR_REJECTED and fb.rejected_attrs == (1,)

    def test_recommend_without_target_rejects_all(self, tiny_store):
        target = ItemRecord(99, frozenset({0}))
        arms = tuple(item_arm(tiny_store, v) for v in range(4))
        fb = simulate_feedback(Action("recommend", arms), target,
                               QuestionSetting("binary", 1), None)
        assert fb.kind == REC_REJECTED
        assert set(fb.rejected_items) == {0, 1, 2, 3}

    def test_recommend_with_target_accepts(self, tiny_store):
        target = ItemRecord(2, frozenset({2, 3}))
        arms = tuple(item_arm(tiny_store, v) for v in range(4))
        fb = simulate_feedback(Action("recommend", arms), target,
                               QuestionSetting("binary", 1), None)
        assert fb.kind == REC_ACCEPTED and fb.accepted_item == 2

    def test_enumerated_reveals_preferred_children(self, tiny_store):
        taxonomy = {0: frozenset({1, 2, 3})}
        parent = ArmRef(ArmKind.PARENT_ATTRIBUTE, 0, np.zeros(4))
        target = ItemRecord(0, frozenset({2, 9}))
        fb = simulate_feedback(Action("ask", (parent,)), target,
                               QuestionSetting("enumerated", 1), taxonomy)
        assert fb.kind == ATTR_ACCEPTED
        assert fb.accepted_attrs == (2,)
        assert fb.parent_id == 0

    def test_enumerated_rejection_reports_parent_with_children(self, tiny_store):
        taxonomy = {0: frozenset({1, 2, 3})}
        parent = ArmRef(ArmKind.PARENT_ATTRIBUTE, 0, np.zeros(4))
        target = ItemRecord(0, frozenset({9}))
        fb = simulate_feedback(Action("ask", (parent,)), target,
                               QuestionSetting("enumerated", 1), taxonomy)
        assert fb.kind == ATTR_REJECTED
        assert fb.parent_id == 0
        assert fb.rejected_attrs == (1, 2, 3)

    def test_multi_mode_per_attribute_verdicts(self, tiny_store):
        target = ItemRecord(0, frozenset({0, 2}))
        arms = tuple(attr_arm(tiny_store, a) for a in (0, 1, 2))
        fb = simulate_feedback(Action("ask", arms), target, QuestionSetting("multi", 3), None)
        assert fb.kind == ATTR_ACCEPTED
        assert fb.accepted_attrs == (0, 2)
        assert fb.rejected_attrs == (1,)


class TestApplyFeedback:
    def test_accept_filters_item_pool(self, tiny_catalog, binary_setting):
        session = new_session(tiny_catalog, binary_setting)
        fb = Feedback = None
        from conbandit.simulator import Feedback
        fb = Feedback(ATTR_ACCEPTED, accepted_attrs=(0,))
        after = apply_feedback(session, fb, tiny_catalog)
        assert after.item_pool == {
            v for v in session.item_pool if 0 in tiny_catalog.item(v).attribute_ids
        }
        assert after.accepted_attrs == (0,)
        assert 0 not in after.attr_pool
        assert after.turn == session.turn + 1

    def test_reject_items_shrinks_pool_exactly(self, tiny_catalog, binary_setting):
        from conbandit.simulator import Feedback
        session = new_session(tiny_catalog, binary_setting)
        fb = Feedback(REC_REJECTED, rejected_items=(1, 3))
        after = apply_feedback(session, fb, tiny_catalog)
        assert len(after.item_pool) == len(session.item_pool) - 2
        assert after.item_pool == session.item_pool - {1, 3}

    def test_enumerated_removes_parent_only(self, tiny_catalog):
        from conbandit.simulator import Feedback
        setting = QuestionSetting("enumerated", 1)
        session = new_session(tiny_catalog, setting)
        assert session.attr_pool == {0, 1}
        fb = Feedback(ATTR_ACCEPTED, accepted_attrs=(2,), parent_id=1)
        after = apply_feedback(session, fb, tiny_catalog)
        assert after.attr_pool == {0}
        assert after.accepted_attrs == (2,)

    def test_rejected_attrs_leave_accepted_alone(self, tiny_catalog):
        from conbandit.simulator import Feedback
        setting = QuestionSetting("multi", 2)
        session = new_session(tiny_catalog, setting)
        fb = Feedback(ATTR_ACCEPTED, accepted_attrs=(1,), rejected_attrs=(2,))
        after = apply_feedback(session, fb, tiny_catalog)
        assert after.attr_pool == {0, 3}
        assert after.accepted_attrs == (1,)


def synth_env(seed=0, **kw):
    params = SynthParams(
        n_users=12, n_items=25, n_attrs=8, d=6, records_per_user=3,
        n_parents=kw.pop("n_parents", 0),
    )
    catalog, log, store = generate_synthetic(params, seed)
    return catalog, log, store


class TestRunSession:
    def test_single_item_catalog_succeeds_first_turn(self):
        rng = np.random.default_rng(0)
        store = EmbeddingStore(
            d=3,
            users={0: rng.standard_normal(3)},
            items={0: rng.standard_normal(3)},
            attributes={0: rng.standard_normal(3)},
        )
        catalog = Catalog(items=(ItemRecord(0, frozenset({0})),), attributes=(0,))
        cfg = ExperimentConfig(d=3, T=5, k=3)
        policy = PolicyConfig(kind="AbsGreedy", k=3)
        pstate = init_policy_state(policy, store, cfg.l)
        result, _ = run_session(policy, pstate, 0, catalog.item(0), catalog, store, cfg,
                                np.random.default_rng(1))
        assert result.success and result.end_turn == 1

    def test_turn_budget_of_one_fails_when_first_action_asks(self):
        store = EmbeddingStore(
            d=2,
            users={0: np.array([0.0, 1.0])},
            items={0: np.array([1.0, 0.0]), 1: np.array([0.3, 0.0])},
            attributes={0: np.array([0.0, 1.0])},
        )
        catalog = Catalog(
            items=(ItemRecord(0, frozenset({0})), ItemRecord(1, frozenset({0}))),
            attributes=(0,),
        )
        cfg = ExperimentConfig(d=2, T=1, k=1, l=0.0)
        policy = PolicyConfig(kind="ConTS", k=1)
        pstate = init_policy_state(policy, store, 0.0)  # mu = e2 -> attr arm wins
        result, _ = run_session(policy, pstate, 0, catalog.item(1), catalog, store, cfg,
                                np.random.default_rng(0), keep_transcript=True)
        assert not result.success
        assert result.end_turn == 1
        assert result.transcript[0][1].kind == "ask"

    def test_transcript_replays_bit_identically(self):
        catalog, log, store = synth_env(seed=3)
        cfg = ExperimentConfig(d=6, T=10, k=4)
        policy = PolicyConfig(kind="ConTS", k=4)
        target = catalog.item(log.records[0][1])

        def play():
            pstate = init_policy_state(policy, store, cfg.l)
            result, _ = run_session(policy, pstate, 0, target, catalog, store, cfg,
                                    np.random.default_rng(123), keep_transcript=True)
            return result

        a, b = play(), play()
        assert a.success == b.success and a.end_turn == b.end_turn
        assert len(a.transcript) == len(b.transcript)
        for (t1, act1, fb1), (t2, act2, fb2) in zip(a.transcript, b.transcript):
            assert t1 == t2 and act1.kind == act2.kind
            assert act1.arm_ids() == act2.arm_ids()
            assert fb1 == fb2

    def test_session_invariants_across_settings(self):
        """Pool monotonicity, target preservation, attribute consistency, and
        the turn cap, checked turn by turn on live sessions."""
        from conbandit.policies import select_action, observe_feedback
        from conbandit.simulator import simulate_feedback as sim_fb

        counts = 0
        for mode, per_ask, n_parents in (("binary", 1, 0), ("multi", 3, 0), ("enumerated", 1, 4)):
            params = SynthParams(n_users=10, n_items=30, n_attrs=8, d=6,
                                 records_per_user=3, n_parents=n_parents)
            catalog, log, store = generate_synthetic(params, seed=11)
            cfg = ExperimentConfig(d=6, T=8, k=3, setting=QuestionSetting(mode, per_ask))
            policy = PolicyConfig(kind="ConTS", k=3)
            for idx, (u, v) in enumerate(log.records[:30]):
                target = catalog.item(v)
                pstate = init_policy_state(policy, store, cfg.l)
                session = new_session(catalog, cfg.setting)
                rng = np.random.default_rng(idx)
                while session.turn <= cfg.T:
                    action = select_action(policy, pstate, session, store, rng)
                    fb = sim_fb(action, target, cfg.setting, catalog.taxonomy)
                    if fb.kind == REC_ACCEPTED:
                        break
                    pstate = observe_feedback(policy, pstate, action, fb, store,
                                              cfg.rewards, session.accepted_attrs)
                    after = apply_feedback(session, fb, catalog)
                    assert after.item_pool <= session.item_pool
                    assert after.attr_pool <= session.attr_pool
                    assert v in after.item_pool
                    assert set(after.accepted_attrs) <= target.attribute_ids
                    session = after
                assert session.turn <= cfg.T + 1
                counts += 1
        assert counts == 90


class TestRunUser:
    def test_one_result_per_record(self):
        catalog, log, store = synth_env(seed=4)
        user = log.records[0][0]
        records = [r for r in log.records if r[0] == user]
        cfg = ExperimentConfig(d=6, T=6, k=3)
        results = run_user(PolicyConfig(kind="ConTS", k=3), user, records, catalog, store,
                           cfg, experiment_seed=5)
        assert len(results) == len(records) == 3
        assert all(r.user_id == user for r in results)
        # transcript retained only for the final session
        assert results[-1].transcript is not None
        assert all(r.transcript is None for r in results[:-1])

    def test_state_persists_across_sessions(self):
        """Replaying the chain manually with the same seeds reproduces run_user,
        which fails if state were reset between sessions."""
        catalog, log, store = synth_env(seed=6)
        user = log.records[0][0]
        records = [r for r in log.records if r[0] == user]
        cfg = ExperimentConfig(d=6, T=6, k=3)
        policy = PolicyConfig(kind="ConTS", k=3)
        expected = run_user(policy, user, records, catalog, store, cfg, experiment_seed=9)

        pstate = init_policy_state(policy, store, cfg.l)
        manual = []
        for idx, (_, v) in enumerate(records):
            rng = np.random.default_rng(derive_session_seed(9, user, idx))
            res, pstate = run_session(policy, pstate, user, catalog.item(v), catalog,
                                      store, cfg, rng)
            manual.append(res)
        assert [(r.success, r.end_turn) for r in expected] == [
            (r.success, r.end_turn) for r in manual
        ]

    def test_rejects_foreign_records(self):
        catalog, log, store = synth_env(seed=7)
        cfg = ExperimentConfig(d=6, T=6, k=3)
        with pytest.raises(ContractViolation):
            run_user(PolicyConfig(kind="ConTS"), 0, [(1, 0)], catalog, store, cfg, 0)


class TestSeedDerivation:
    def test_stable_and_distinct(self):
        assert derive_session_seed(1, 2, 3) == derive_session_seed(1, 2, 3)
        seeds = {derive_session_seed(1, u, i) for u in range(50) for i in range(4)}
        assert len(seeds) == 200
