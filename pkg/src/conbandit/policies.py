"""Action selection: posterior-sampling policies, their ablations, and UCB baselines.

All policies act over one unified candidate arm set (attributes and items
together, except where a baseline is defined otherwise) and expose the same
two operations: ``select_action`` and ``observe_feedback``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.linalg import cho_solve

from .bandit import (
    ArmKind,
    ArmRef,
    PosteriorState,
    debias_reward,
    init_posterior,
    sample_user,
    update_f_only,
    update_posterior,
)
from .data import RewardTable
from .embeddings import EmbeddingStore
from .errors import ConfigError, ContractViolation, PoolExhaustedError

if TYPE_CHECKING:
    from .simulator import Feedback, SessionState

POLICY_KINDS = (
    "ConTS",
    "ConTS_NoInit",
    "ConTS_NoPu",
    "ConTS_NoExp",
    "AbsGreedy",
    "SeamlessUCB",
    "ConUCB",
)
POSTERIOR_KINDS = ("ConTS", "ConTS_NoInit", "ConTS_NoPu", "ConTS_NoExp", "AbsGreedy")

ATTR_CHOOSERS = ("maximal_confidence", "modified_fm")

# Ask-timing schedules b(t); the ask turns are those where floor(b) increments.
SCHEDULES = {
    "floor_5_log": lambda t, base: 5.0 * math.floor(math.log(t, base)),
    "5_log": lambda t, base: 5.0 * math.log(t, base),
    "10_log": lambda t, base: 10.0 * math.log(t, base),
    "15_log": lambda t, base: 15.0 * math.log(t, base),
}


def schedule_value(name: str, t: int, base: float = math.e) -> float:
    """b(t) for the named schedule, with b(0) = 0 by convention."""
    if t < 0:
        raise ContractViolation("turn must be >= 0")
    if t == 0:
        return 0.0
    return SCHEDULES[name](t, base)


def schedule_asks(name: str, t: int, base: float = math.e) -> bool:
    """True when floor(b(t)) > floor(b(t-1))."""
    return math.floor(schedule_value(name, t, base)) > math.floor(
        schedule_value(name, t - 1, base)
    )


def ask_turns(name: str, max_turn: int, base: float = math.e) -> set[int]:
    return {t for t in range(1, max_turn + 1) if schedule_asks(name, t, base)}


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "ConTS"
    k: int = 10
    alpha: float = 1.0
    bt_schedule: str = "floor_5_log"
    attr_chooser: str = "maximal_confidence"
    bt_log_base: float = math.e
    freeze_scale_matrix: bool = False

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.bt_schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.bt_schedule!r}")
        if self.attr_chooser not in ATTR_CHOOSERS:
            raise ConfigError(f"unknown attribute chooser {self.attr_chooser!r}")
        if self.bt_log_base <= 1.0:
            raise ConfigError("bt_log_base must be > 1")


@dataclass(frozen=True, eq=False)
class UcbState:
    """Linear-UCB sufficient statistics: A (scale matrix), b, and u = A^{-1} b."""

    A: np.ndarray
    b: np.ndarray
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class PolicyState:
    """Per-user decision state, persisted across that user's sessions."""

    u_init: np.ndarray
    posterior: PosteriorState | None = None
    ucb: UcbState | None = None
    conucb_item: UcbState | None = None
    conucb_attr: UcbState | None = None


def init_policy_state(policy: PolicyConfig, store: EmbeddingStore, l: float) -> PolicyState:
    d = store.d
    u_init = np.zeros(d) if policy.kind == "ConTS_NoInit" else store.u_init
    if policy.kind in POSTERIOR_KINDS:
        return PolicyState(u_init=u_init, posterior=init_posterior(u_init, l))
    if policy.kind == "SeamlessUCB":
        return PolicyState(
            u_init=u_init,
            ucb=UcbState(A=np.eye(d), b=u_init.copy(), u=u_init.copy()),
        )
    if policy.kind == "ConUCB":
        fresh = lambda: UcbState(A=np.eye(d), b=np.zeros(d), u=np.zeros(d))
        return PolicyState(u_init=u_init, conucb_item=fresh(), conucb_attr=fresh())
    raise ConfigError(f"unknown policy kind {policy.kind!r}")


@dataclass(frozen=True)
class Action:
    """Either an attribute question or a ranked top-k recommendation."""

    kind: str  # "ask" | "recommend"
    arms: tuple[ArmRef, ...]

    def arm_ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.arms)


def _item_arms(session: "SessionState", store: EmbeddingStore) -> list[ArmRef]:
    return [
        ArmRef(ArmKind.ITEM, v, store.item_vector(v)) for v in sorted(session.item_pool)
    ]


def _attr_arms(session: "SessionState", store: EmbeddingStore) -> list[ArmRef]:
    if session.setting.mode == "enumerated":
        taxonomy = session.catalog.taxonomy or {}
        return [
            ArmRef(ArmKind.PARENT_ATTRIBUTE, p, store.mean_attribute_vector(taxonomy[p]))
            for p in sorted(session.attr_pool)
        ]
    return [
        ArmRef(ArmKind.ATTRIBUTE, a, store.attribute_vector(a))
        for a in sorted(session.attr_pool)
    ]


def _stack(arms: Sequence[ArmRef]) -> np.ndarray:
    return np.stack([a.x for a in arms])


def _confidence_widths(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ContractViolation("scale matrix must be positive definite") from exc
    W = cho_solve((chol, True), X.T, check_finite=False)
    return np.sqrt(np.maximum(np.einsum("ij,ji->i", X, W), 0.0))


def _ranked(arms: Sequence[ArmRef], scores: np.ndarray, count: int) -> tuple[ArmRef, ...]:
    # arms arrive sorted by (kind, id); stable sort keeps that order among ties.
    order = np.argsort(-scores, kind="stable")
    return tuple(arms[int(i)] for i in order[:count])


def _accepted_vectors(
    session: "SessionState", store: EmbeddingStore, policy: PolicyConfig
) -> list[np.ndarray]:
    if policy.kind == "ConTS_NoPu":
        return []
    return [store.attribute_vector(a) for a in session.accepted_attrs]


def select_action(
    policy: PolicyConfig,
    pstate: PolicyState,
    session: "SessionState",
    store: EmbeddingStore,
    rng: np.random.Generator,
) -> Action:
    """Pick the next action from the current candidate pools.

    Posterior policies score every candidate arm with the unified estimate and
    let the argmax's kind decide between asking and recommending; AbsGreedy
    only ever recommends; ConUCB asks on its schedule and recommends by
    LinUCB score otherwise.
    """
    item_arms = _item_arms(session, store)
    attr_arms = _attr_arms(session, store)
    if not item_arms and not attr_arms:
        raise PoolExhaustedError("both candidate pools are empty")

    if policy.kind == "AbsGreedy":
        if not item_arms:
            raise PoolExhaustedError("item pool is empty")
        scores = _stack(item_arms) @ pstate.posterior.mu
        return Action("recommend", _ranked(item_arms, scores, min(policy.k, len(item_arms))))

    if policy.kind == "ConUCB":
        return _select_conucb(policy, pstate, session, store, item_arms, attr_arms)

    p_vecs = _accepted_vectors(session, store, policy)
    p_sum = np.add.reduce(p_vecs) if p_vecs else 0.0

    arms = sorted(attr_arms + item_arms, key=ArmRef.sort_key)
    X = _stack(arms)
    if policy.kind == "SeamlessUCB":
        st = pstate.ucb
        scores = X @ (st.u + p_sum) + policy.alpha * _confidence_widths(st.A, X)
    else:
        if policy.kind == "ConTS_NoExp":
            u_eff = pstate.posterior.mu
        else:
            u_eff = sample_user(pstate.posterior, rng)
        scores = X @ (u_eff + p_sum)

    best = arms[int(np.argmax(scores))]
    if best.kind is ArmKind.ITEM:
        mask = [i for i, a in enumerate(arms) if a.kind is ArmKind.ITEM]
        picked = _ranked(
            [arms[i] for i in mask], scores[mask], min(policy.k, len(mask))
        )
        return Action("recommend", picked)
    mask = [i for i, a in enumerate(arms) if a.kind is not ArmKind.ITEM]
    batch = min(session.setting.attributes_per_ask, len(mask))
    picked = _ranked([arms[i] for i in mask], scores[mask], batch)
    return Action("ask", picked)


def _select_conucb(
    policy: PolicyConfig,
    pstate: PolicyState,
    session: "SessionState",
    store: EmbeddingStore,
    item_arms: list[ArmRef],
    attr_arms: list[ArmRef],
) -> Action:
    wants_ask = bool(attr_arms) and schedule_asks(
        policy.bt_schedule, session.turn, policy.bt_log_base
    )
    if wants_ask:
        X = _stack(attr_arms)
        if policy.attr_chooser == "maximal_confidence":
            criterion = _confidence_widths(pstate.conucb_attr.A, X)
        else:
            p_vecs = [store.attribute_vector(a) for a in session.accepted_attrs]
            p_sum = np.add.reduce(p_vecs) if p_vecs else 0.0
            criterion = X @ (pstate.conucb_item.u + p_sum)
        batch = min(session.setting.attributes_per_ask, len(attr_arms))
        return Action("ask", _ranked(attr_arms, criterion, batch))
    if not item_arms:
        raise PoolExhaustedError("item pool is empty")
    st = pstate.conucb_item
    X = _stack(item_arms)
    scores = X @ st.u + policy.alpha * _confidence_widths(st.A, X)
    return Action("recommend", _ranked(item_arms, scores, min(policy.k, len(item_arms))))


def _linucb_update(st: UcbState, x: np.ndarray, reward: float) -> UcbState:
    A = st.A + np.outer(x, x)
    b = st.b + reward * x
    return UcbState(A=A, b=b, u=np.linalg.solve(A, b))


def _feedback_updates(
    feedback: "Feedback", store: EmbeddingStore, rewards: RewardTable
) -> list[tuple[ArmRef, float]]:
    updates: list[tuple[ArmRef, float]] = []
    for a in feedback.accepted_attrs:
        updates.append((ArmRef(ArmKind.ATTRIBUTE, a, store.attribute_vector(a)), rewards.suc_ask))
    for a in feedback.rejected_attrs:
        updates.append((ArmRef(ArmKind.ATTRIBUTE, a, store.attribute_vector(a)), rewards.fail_ask))
    for v in feedback.rejected_items:
        updates.append((ArmRef(ArmKind.ITEM, v, store.item_vector(v)), rewards.fail_rec))
    updates.sort(key=lambda pair: pair[0].sort_key())
    return updates


def observe_feedback(
    policy: PolicyConfig,
    pstate: PolicyState,
    action: Action,
    feedback: "Feedback",
    store: EmbeddingStore,
    rewards: RewardTable,
    accepted_attrs: Sequence[int] = (),
) -> PolicyState:
    """Fold one turn of feedback into the decision state.

    Every played arm gets one update, applied in (kind, id) order: each
    accepted attribute earns the ask-success reward, each rejected attribute
    (all children of a rejected parent) the ask-failure reward, and each
    rejected recommended item the recommendation-failure reward. An accepted
    recommendation ends the session, so no update is applied. The de-bias term
    uses the accepted-attribute set with this turn's acceptances already
    included.
    """
    if action.kind == "ask" and feedback.kind.startswith("rec_"):
        raise ContractViolation("recommendation feedback for an ask action")
    if action.kind == "recommend" and feedback.kind.startswith("attr_"):
        raise ContractViolation("attribute feedback for a recommend action")
    if feedback.kind == "rec_accepted":
        return pstate

    updates = _feedback_updates(feedback, store, rewards)
    p_ids = list(accepted_attrs)
    for a in feedback.accepted_attrs:
        if a not in p_ids:
            p_ids.append(a)

    if policy.kind in POSTERIOR_KINDS:
        if policy.kind == "ConTS_NoPu":
            p_vecs: list[np.ndarray] = []
        else:
            p_vecs = [store.attribute_vector(a) for a in p_ids]
        freeze = policy.kind == "ConTS_NoExp" or policy.freeze_scale_matrix
        post = pstate.posterior
        for arm, r in updates:
            r_prime = debias_reward(r, arm, pstate.u_init, p_vecs)
            post = (
                update_f_only(post, arm, r_prime)
                if freeze
                else update_posterior(post, arm, r_prime)
            )
        return replace(pstate, posterior=post)

    if policy.kind == "SeamlessUCB":
        p_vecs = [store.attribute_vector(a) for a in p_ids]
        st = pstate.ucb
        for arm, r in updates:
            r_prime = debias_reward(r, arm, pstate.u_init, p_vecs)
            st = _linucb_update(st, arm.x, r_prime)
        return replace(pstate, ucb=st)

    # ConUCB keeps two plain LinUCB blocks fed with raw rewards.
    item_st, attr_st = pstate.conucb_item, pstate.conucb_attr
    for arm, r in updates:
        if arm.kind is ArmKind.ITEM:
            item_st = _linucb_update(item_st, arm.x, r)
        else:
            attr_st = _linucb_update(attr_st, arm.x, r)
    return replace(pstate, conucb_item=item_st, conucb_attr=attr_st)
