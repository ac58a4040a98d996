"""Seeded synthetic dataset generator.

A desk-scale test fixture. Raw user/item/attribute vectors are drawn from a
seeded standard normal scaled by 1/sqrt(d); item attribute sets are the
nearest attributes of the raw item vector by dot-product affinity. To give
attribute feedback real signal (mimicking the geometry of embeddings trained
jointly over items and attributes), the final item vector mixes in the sum of
its attribute vectors and the final user vector mixes in the mean of that
user's preferred attributes; setting the three weights to (0, 1, 0) recovers
plain normal vectors. Each user's interaction records are their top-scoring
items (general preference plus affinity to the user's preferred attributes)
under seeded noise. Deterministic for a fixed (params, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Catalog, InteractionLog, ItemRecord
from .embeddings import EmbeddingStore
from .errors import ConfigError


@dataclass(frozen=True)
class SynthParams:
    n_users: int
    n_items: int
    n_attrs: int
    d: int
    attrs_per_item: tuple[int, int] = (2, 4)
    records_per_user: int = 3
    n_parents: int = 0
    prefs_per_user: int = 3
    noise_scale: float = 0.1
    user_attr_weight: float = 1.0
    item_raw_weight: float = 0.3
    item_attr_mix: float = 0.7

    def __post_init__(self) -> None:
        if min(self.n_users, self.n_items, self.n_attrs, self.d) < 1:
            raise ConfigError("n_users, n_items, n_attrs, d must all be >= 1")
        lo, hi = self.attrs_per_item
        if not (1 <= lo <= hi):
            raise ConfigError("attrs_per_item range must satisfy 1 <= min <= max")
        if hi > self.n_attrs:
            raise ConfigError("attrs_per_item exceeds the number of attributes")
        if not (1 <= self.records_per_user <= self.n_items):
            raise ConfigError("records_per_user must lie in [1, n_items]")
        if self.prefs_per_user > self.n_attrs:
            raise ConfigError("prefs_per_user exceeds the number of attributes")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")
        if min(self.user_attr_weight, self.item_raw_weight, self.item_attr_mix) < 0:
            raise ConfigError("mixing weights must be >= 0")


def _top_ids(scores: np.ndarray, count: int) -> list[int]:
    # Stable sort: descending score, ties broken by lowest id.
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:count]]


def generate_synthetic(
    params: SynthParams, seed: int
) -> tuple[Catalog, InteractionLog, EmbeddingStore]:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(params.d)
    attr_vecs = rng.standard_normal((params.n_attrs, params.d)) * scale
    raw_items = rng.standard_normal((params.n_items, params.d)) * scale
    raw_users = rng.standard_normal((params.n_users, params.d)) * scale

    lo, hi = params.attrs_per_item
    item_records = []
    item_vecs = np.zeros_like(raw_items)
    for v in range(params.n_items):
        count = int(rng.integers(lo, hi + 1))
        affinity = attr_vecs @ raw_items[v]
        ids = _top_ids(affinity, count)
        item_records.append(ItemRecord(v, frozenset(ids)))
        item_vecs[v] = (
            params.item_raw_weight * raw_items[v]
            + params.item_attr_mix * attr_vecs[ids].sum(axis=0)
        )

    user_vecs = np.zeros_like(raw_users)
    pref_sets: list[list[int]] = []
    for u in range(params.n_users):
        pref_ids = _top_ids(attr_vecs @ raw_users[u], params.prefs_per_user)
        pref_sets.append(pref_ids)
        user_vecs[u] = raw_users[u] + params.user_attr_weight * attr_vecs[pref_ids].mean(axis=0)

    taxonomy: dict[int, frozenset[int]] | None = None
    if params.n_parents > 0:
        directions = rng.standard_normal((params.n_parents, params.d))
        assignment = np.argmax(directions @ attr_vecs.T, axis=0)
        groups: dict[int, list[int]] = {}
        for a in range(params.n_attrs):
            groups.setdefault(int(assignment[a]), []).append(a)
        # Drop empty parents and re-densify parent ids.
        taxonomy = {
            dense: frozenset(groups[raw]) for dense, raw in enumerate(sorted(groups))
        }

    records: list[tuple[int, int]] = []
    for u in range(params.n_users):
        pref_sum = attr_vecs[pref_sets[u]].sum(axis=0)
        base = item_vecs @ (user_vecs[u] + pref_sum)
        noisy = base + rng.normal(0.0, params.noise_scale, params.n_items)
        for v in _top_ids(noisy, params.records_per_user):
            records.append((u, v))

    catalog = Catalog(
        items=tuple(item_records),
        attributes=tuple(range(params.n_attrs)),
        taxonomy=taxonomy,
    )
    log = InteractionLog(tuple(records))
    store = EmbeddingStore(
        d=params.d,
        users={u: user_vecs[u].copy() for u in range(params.n_users)},
        items={v: item_vecs[v].copy() for v in range(params.n_items)},
        attributes={a: attr_vecs[a].copy() for a in range(params.n_attrs)},
    )
    return catalog, log, store
