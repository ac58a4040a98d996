"""Multi-round conversation environment with a record-driven simulated user.

Each session replays one historical (user, item) interaction: the user likes
exactly that target item and its attributes, answers attribute questions
accordingly, and accepts a recommendation only if it contains the target.
Candidate pools shrink with every answer and the target survives every turn
by construction.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data import Catalog, ItemRecord, QuestionSetting
from .embeddings import EmbeddingStore
from .errors import ConfigError, ContractViolation, PoolExhaustedError
from .policies import (
    Action,
    PolicyConfig,
    PolicyState,
    init_policy_state,
    observe_feedback,
    select_action,
)

ATTR_ACCEPTED = "attr_accepted"
ATTR_REJECTED = "attr_rejected"
REC_ACCEPTED = "rec_accepted"
REC_REJECTED = "rec_rejected"


@dataclass(frozen=True)
class Feedback:
    """Simulated user reaction to one action.

    Attribute feedback may carry both verdict sets (multi-attribute questions
    answer each asked attribute); in enumerated mode ``parent_id`` names the
    asked parent and the verdict sets hold child attribute ids.
    """

    kind: str
    accepted_attrs: tuple[int, ...] = ()
    rejected_attrs: tuple[int, ...] = ()
    parent_id: int | None = None
    accepted_item: int | None = None
    rejected_items: tuple[int, ...] = ()


@dataclass(frozen=True)
class SessionState:
    """One conversation: candidate pools, accepted attributes, and transcript."""

    catalog: Catalog
    setting: QuestionSetting
    turn: int
    item_pool: frozenset[int]
    attr_pool: frozenset[int]
    accepted_attrs: tuple[int, ...]
    transcript: tuple = ()


@dataclass(frozen=True)
class SessionResult:
    user_id: int
    target_item: int
    success: bool
    end_turn: int
    pool_exhausted: bool = False
    transcript: tuple | None = None


def new_session(catalog: Catalog, setting: QuestionSetting) -> SessionState:
    if setting.mode == "enumerated":
        if not catalog.taxonomy:
            raise ConfigError("enumerated questions require a taxonomy")
        attr_pool = frozenset(catalog.taxonomy)
    else:
        attr_pool = frozenset(catalog.attributes)
    return SessionState(
        catalog=catalog,
        setting=setting,
        turn=1,
        item_pool=frozenset(rec.item_id for rec in catalog.items),
        attr_pool=attr_pool,
        accepted_attrs=(),
    )


def simulate_feedback(
    action: Action,
    target: ItemRecord,
    setting: QuestionSetting,
    taxonomy: dict[int, frozenset[int]] | None,
) -> Feedback:
    """Answer one action on behalf of a user whose preferences are the target item."""
    liked = target.attribute_ids
    if action.kind == "recommend":
        ids = action.arm_ids()
        if target.item_id in ids:
            return Feedback(REC_ACCEPTED, accepted_item=target.item_id)
        return Feedback(REC_REJECTED, rejected_items=ids)

    if setting.mode == "enumerated":
        if taxonomy is None:
            raise ConfigError("enumerated questions require a taxonomy")
        parent = action.arms[0].id
        children = taxonomy[parent]
        accepted = tuple(sorted(children & liked))
        if accepted:
            return Feedback(ATTR_ACCEPTED, accepted_attrs=accepted, parent_id=parent)
        return Feedback(
            ATTR_REJECTED, rejected_attrs=tuple(sorted(children)), parent_id=parent
        )

    asked = action.arm_ids()
    accepted = tuple(a for a in asked if a in liked)
    rejected = tuple(a for a in asked if a not in liked)
    kind = ATTR_ACCEPTED if accepted else ATTR_REJECTED
    return Feedback(kind, accepted_attrs=accepted, rejected_attrs=rejected)


def apply_feedback(session: SessionState, feedback: Feedback, catalog: Catalog) -> SessionState:
    """Shrink the candidate pools per the feedback and advance the turn counter."""
    item_pool = session.item_pool
    attr_pool = session.attr_pool
    accepted = session.accepted_attrs

    if feedback.kind in (ATTR_ACCEPTED, ATTR_REJECTED):
        if feedback.parent_id is not None:
            attr_pool = attr_pool - {feedback.parent_id}
        else:
            attr_pool = attr_pool - set(feedback.accepted_attrs) - set(feedback.rejected_attrs)
        if feedback.accepted_attrs:
            accepted = accepted + feedback.accepted_attrs
            wanted = set(feedback.accepted_attrs)
            item_pool = frozenset(
                v for v in item_pool if wanted <= catalog.item(v).attribute_ids
            )
    elif feedback.kind == REC_REJECTED:
        item_pool = item_pool - set(feedback.rejected_items)

    return replace(
        session,
        turn=session.turn + 1,
        item_pool=item_pool,
        attr_pool=attr_pool,
        accepted_attrs=accepted,
    )


def derive_session_seed(experiment_seed: int, user_id: int, session_index: int) -> int:
    """Stable 64-bit seed for one session so any session can be replayed alone."""
    packed = struct.pack(
        "<3Q",
        experiment_seed & 0xFFFFFFFFFFFFFFFF,
        user_id & 0xFFFFFFFFFFFFFFFF,
        session_index & 0xFFFFFFFFFFFFFFFF,
    )
    digest = hashlib.blake2b(packed, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def run_session(
    policy: PolicyConfig,
    pstate: PolicyState,
    user_id: int,
    target: ItemRecord,
    catalog: Catalog,
    store: EmbeddingStore,
    config,
    rng: np.random.Generator,
    *,
    keep_transcript: bool = False,
) -> tuple[SessionResult, PolicyState]:
    """Play one conversation to success or the turn cap.

    Loops select -> simulate feedback -> update policy -> shrink pools. On an
    accepted recommendation the session ends successfully at the current turn;
    otherwise it fails with the end turn recorded as the cap. An exhausted
    candidate pool fails at the current turn and is marked in the transcript
    with a (turn, None, None) entry.
    """
    if target.item_id >= catalog.n_items:
        raise ContractViolation(f"target item {target.item_id} not in catalog")
    session = new_session(catalog, config.setting)
    success = False
    pool_exhausted = False
    end_turn = config.T
    while session.turn <= config.T:
        t = session.turn
        try:
            action = select_action(policy, pstate, session, store, rng)
        except PoolExhaustedError:
            pool_exhausted = True
            end_turn = t
            session = replace(session, transcript=session.transcript + ((t, None, None),))
            break
        feedback = simulate_feedback(action, target, config.setting, catalog.taxonomy)
        session = replace(session, transcript=session.transcript + ((t, action, feedback),))
        if feedback.kind == REC_ACCEPTED:
            success = True
            end_turn = t
            break
        pstate = observe_feedback(
            policy, pstate, action, feedback, store, config.rewards, session.accepted_attrs
        )
        session = apply_feedback(session, feedback, catalog)
    result = SessionResult(
        user_id=user_id,
        target_item=target.item_id,
        success=success,
        end_turn=end_turn,
        pool_exhausted=pool_exhausted,
        transcript=session.transcript if keep_transcript else None,
    )
    return result, pstate


def run_user(
    policy: PolicyConfig,
    user_id: int,
    user_records: Sequence[tuple[int, int]],
    catalog: Catalog,
    store: EmbeddingStore,
    config,
    experiment_seed: int,
) -> list[SessionResult]:
    """One session per interaction record, in order, with the decision state
    initialised before the first session and carried across the rest. Only the
    last session's transcript is retained."""
    pstate = init_policy_state(policy, store, config.l)
    results: list[SessionResult] = []
    n = len(user_records)
    for idx, (u, v) in enumerate(user_records):
        if u != user_id:
            raise ContractViolation("record does not belong to this user")
        rng = np.random.default_rng(derive_session_seed(experiment_seed, user_id, idx))
        result, pstate = run_session(
            policy,
            pstate,
            user_id,
            catalog.item(v),
            catalog,
            store,
            config,
            rng,
            keep_transcript=(idx == n - 1),
        )
        results.append(result)
    return results
