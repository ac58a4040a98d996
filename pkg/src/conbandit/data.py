"""Domain types and dataset ingestion for conversational recommendation runs.

Items carry categorical attribute sets; interaction logs are ordered
(user, item) pairs. All ids are dense, zero-based integers assigned in
first-seen file order; item and attribute ids live in disjoint namespaces.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateSplitError,
    IntegrityError,
)

import numpy as np

QUESTION_MODES = ("enumerated", "binary", "multi")

DEFAULT_MIN_USER_RECORDS = 10
DEFAULT_MIN_ATTR_OCCURRENCES = 5


@dataclass(frozen=True)
class ItemRecord:
    """One item and the set of attributes that describe it."""

    item_id: int
    attribute_ids: frozenset[int]


@dataclass(frozen=True)
class Catalog:
    """All items and attributes, plus an optional two-level attribute taxonomy.

    The taxonomy maps a parent-attribute id (its own dense namespace) to the set
    of child attribute ids it groups; no child belongs to two parents.
    """

    items: tuple[ItemRecord, ...]
    attributes: tuple[int, ...]
    taxonomy: dict[int, frozenset[int]] | None = None

    def __post_init__(self) -> None:
        attr_set = set(self.attributes)
        if list(self.attributes) != list(range(len(self.attributes))):
            raise IntegrityError("attribute ids must be dense and zero-based")
        for idx, rec in enumerate(self.items):
            if rec.item_id != idx:
                raise IntegrityError("item ids must be dense and zero-based")
            missing = rec.attribute_ids - attr_set
            if missing:
                raise IntegrityError(
                    f"item {rec.item_id} references unknown attributes {sorted(missing)}"
                )
        if self.taxonomy is not None:
            seen: set[int] = set()
            if sorted(self.taxonomy) != list(range(len(self.taxonomy))):
                raise IntegrityError("parent ids must be dense and zero-based")
            for parent, children in self.taxonomy.items():
                unknown = children - attr_set
                if unknown:
                    raise IntegrityError(
                        f"parent {parent} references unknown attributes {sorted(unknown)}"
                    )
                overlap = children & seen
                if overlap:
                    raise IntegrityError(
                        f"attributes {sorted(overlap)} assigned to two parents"
                    )
                seen |= children

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def item(self, item_id: int) -> ItemRecord:
        return self.items[item_id]


@dataclass(frozen=True)
class InteractionLog:
    """(user_id, item_id) pairs in file order."""

    records: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.records)

    def users(self) -> list[int]:
        """Distinct user ids in first-appearance order."""
        seen: dict[int, None] = {}
        for u, _ in self.records:
            seen.setdefault(u)
        return list(seen)

    def records_per_user(self) -> dict[int, int]:
        return dict(Counter(u for u, _ in self.records))

    def for_user(self, user_id: int) -> list[tuple[int, int]]:
        return [r for r in self.records if r[0] == user_id]


@dataclass(frozen=True)
class DatasetSplit:
    """Cold-start partition: existing users train the embeddings, new users are tested."""

    existing_users: frozenset[int]
    new_users: frozenset[int]
    train_records: InteractionLog
    test_records: InteractionLog


@dataclass(frozen=True)
class QuestionSetting:
    """How attribute questions are posed to the simulated user.

    Modes: ``binary`` asks one attribute for a yes/no answer, ``multi`` asks a
    batch of attributes each answered yes/no, ``enumerated`` asks one parent
    attribute whose preferred children the user reveals.
    """

    mode: str = "binary"
    attributes_per_ask: int = 1

    def __post_init__(self) -> None:
        if self.mode not in QUESTION_MODES:
            raise ConfigError(f"unknown question mode {self.mode!r}")
        if self.attributes_per_ask < 1:
            raise ConfigError("attributes_per_ask must be >= 1")
        if self.mode in ("binary", "enumerated") and self.attributes_per_ask != 1:
            raise ConfigError(f"{self.mode} questions ask exactly one attribute")


@dataclass(frozen=True)
class RewardTable:
    """Feedback values for the four user reactions."""

    fail_rec: float = -0.15
    fail_ask: float = -0.03
    suc_ask: float = 5.0
    suc_rec: float = 5.0

    def __post_init__(self) -> None:
        if not (self.suc_ask > 0.0 > self.fail_ask):
            raise ConfigError("need suc_ask > 0 > fail_ask")
        if not (self.suc_rec > 0.0 > self.fail_rec):
            raise ConfigError("need suc_rec > 0 > fail_rec")


def _parse_lines(path: str | Path, n_fields: int):
    """Yield (line_no, fields) for each non-empty line; enforce the field count."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != n_fields or any(not f for f in fields):
                raise DataFormatError(
                    str(path), line_no, f"expected {n_fields} tab-separated fields"
                )
            yield line_no, fields


def _split_keys(field_value: str, path: str, line_no: int) -> list[str]:
    keys = field_value.split(",")
    if any(not k for k in keys):
        raise DataFormatError(path, line_no, "empty key in comma-separated list")
    return keys


def load_dataset(
    interactions_path: str | Path,
    item_attributes_path: str | Path,
    taxonomy_path: str | Path | None = None,
    *,
    filter_low_frequency: bool = True,
    min_user_records: int = DEFAULT_MIN_USER_RECORDS,
    min_attr_occurrences: int = DEFAULT_MIN_ATTR_OCCURRENCES,
    id_map_path: str | Path | None = None,
) -> tuple[Catalog, InteractionLog]:
    """Parse the three dataset files into a Catalog and InteractionLog.

    Low-frequency filtering drops users with fewer than ``min_user_records``
    interactions and attributes occurring in fewer than ``min_attr_occurrences``
    items; items left without attributes (and their interactions) are dropped
    too. Dense ids are assigned after filtering, in first-seen file order.
    When ``id_map_path`` is given, the external-key -> dense-id mapping is
    written there as a TSV sidecar.
    """
    # Pass 1: parse with external keys.
    item_attrs: dict[str, list[str]] = {}
    item_order: list[str] = []
    ia_path = str(item_attributes_path)
    for line_no, (item_key, attrs_field) in _parse_lines(item_attributes_path, 2):
        if item_key in item_attrs:
            raise IntegrityError(f"{ia_path}:{line_no}: duplicate item {item_key!r}")
        keys = _split_keys(attrs_field, ia_path, line_no)
        deduped = list(dict.fromkeys(keys))
        item_attrs[item_key] = deduped
        item_order.append(item_key)

    known_attrs: set[str] = {a for attrs in item_attrs.values() for a in attrs}

    interactions: list[tuple[str, str]] = []
    in_path = str(interactions_path)
    for line_no, (user_key, item_key) in _parse_lines(interactions_path, 2):
        if item_key not in item_attrs:
            raise IntegrityError(
                f"{in_path}:{line_no}: interaction references unknown item {item_key!r}"
            )
        interactions.append((user_key, item_key))

    taxonomy_raw: list[tuple[str, list[str]]] = []
    if taxonomy_path is not None:
        tx_path = str(taxonomy_path)
        seen_children: set[str] = set()
        seen_parents: set[str] = set()
        for line_no, (parent_key, children_field) in _parse_lines(taxonomy_path, 2):
            if parent_key in seen_parents:
                raise IntegrityError(f"{tx_path}:{line_no}: duplicate parent {parent_key!r}")
            seen_parents.add(parent_key)
            children = _split_keys(children_field, tx_path, line_no)
            for child in children:
                if child not in known_attrs:
                    raise IntegrityError(
                        f"{tx_path}:{line_no}: unknown child attribute {child!r}"
                    )
                if child in seen_children:
                    raise IntegrityError(
                        f"{tx_path}:{line_no}: attribute {child!r} has two parents"
                    )
                seen_children.add(child)
            taxonomy_raw.append((parent_key, children))

    # Pass 2: frequency filtering.
    if filter_low_frequency:
        user_counts = Counter(u for u, _ in interactions)
        kept_users = {u for u, c in user_counts.items() if c >= min_user_records}
        attr_occ = Counter(a for attrs in item_attrs.values() for a in attrs)
        kept_attrs = {a for a, c in attr_occ.items() if c >= min_attr_occurrences}
    else:
        kept_users = {u for u, _ in interactions}
        kept_attrs = set(known_attrs)

    filtered_items: dict[str, list[str]] = {}
    for item_key in item_order:
        attrs = [a for a in item_attrs[item_key] if a in kept_attrs]
        if attrs:
            filtered_items[item_key] = attrs
    interactions = [
        (u, v) for u, v in interactions if u in kept_users and v in filtered_items
    ]

    # Pass 3: dense ids in first-seen order among survivors.
    item_ids = {key: i for i, key in enumerate(k for k in item_order if k in filtered_items)}
    attr_ids: dict[str, int] = {}
    for item_key in item_order:
        if item_key not in filtered_items:
            continue
        for a in filtered_items[item_key]:
            attr_ids.setdefault(a, len(attr_ids))
    user_ids: dict[str, int] = {}
    for u, _ in interactions:
        user_ids.setdefault(u, len(user_ids))

    items = tuple(
        ItemRecord(item_ids[key], frozenset(attr_ids[a] for a in filtered_items[key]))
        for key in item_order
        if key in filtered_items
    )
    taxonomy: dict[int, frozenset[int]] | None = None
    parent_ids: dict[str, int] = {}
    if taxonomy_path is not None:
        taxonomy = {}
        for parent_key, children in taxonomy_raw:
            kept = frozenset(attr_ids[c] for c in children if c in kept_attrs)
            if not kept:
                continue
            parent_ids[parent_key] = len(parent_ids)
            taxonomy[parent_ids[parent_key]] = kept

    catalog = Catalog(items=items, attributes=tuple(range(len(attr_ids))), taxonomy=taxonomy)
    log = InteractionLog(tuple((user_ids[u], item_ids[v]) for u, v in interactions))

    if id_map_path is not None:
        write_id_map(id_map_path, user_ids, item_ids, attr_ids, parent_ids)
    return catalog, log


def write_id_map(
    path: str | Path,
    user_ids: dict[str, int],
    item_ids: dict[str, int],
    attr_ids: dict[str, int],
    parent_ids: dict[str, int] | None = None,
) -> None:
    """Persist external-key -> dense-id mappings as `kind<TAB>key<TAB>id` lines."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for kind, mapping in (
            ("user", user_ids),
            ("item", item_ids),
            ("attr", attr_ids),
            ("parent", parent_ids or {}),
        ):
            for key, dense in sorted(mapping.items(), key=lambda kv: kv[1]):
                fh.write(f"{kind}\t{key}\t{dense}\n")


def save_dataset(
    catalog: Catalog,
    log: InteractionLog,
    interactions_path: str | Path,
    item_attributes_path: str | Path,
    taxonomy_path: str | Path | None = None,
) -> None:
    """Write a dataset back out in the ingestion formats, keyed by dense id.

    Attribute keys within each item line are ordered by id, so re-loading with
    filtering disabled reproduces the exact same structures.
    """
    with Path(item_attributes_path).open("w", encoding="utf-8") as fh:
        for rec in catalog.items:
            attrs = ",".join(str(a) for a in sorted(rec.attribute_ids))
            fh.write(f"{rec.item_id}\t{attrs}\n")
    with Path(interactions_path).open("w", encoding="utf-8") as fh:
        for u, v in log.records:
            fh.write(f"{u}\t{v}\n")
    if taxonomy_path is not None and catalog.taxonomy is not None:
        with Path(taxonomy_path).open("w", encoding="utf-8") as fh:
            for parent in sorted(catalog.taxonomy):
                children = ",".join(str(c) for c in sorted(catalog.taxonomy[parent]))
                fh.write(f"{parent}\t{children}\n")


def split_cold_start(log: InteractionLog, fraction: float, seed: int) -> DatasetSplit:
    """Partition users into existing/new by accumulated record share.

    Users are drawn in a seeded uniform-random order; the first prefix whose
    accumulated record count reaches ``fraction`` of all records becomes the
    existing set (so the train share may slightly exceed the fraction). The
    remaining users are the new users.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("fraction must lie strictly between 0 and 1")
    if len(log) == 0:
        raise DegenerateSplitError("cannot split an empty interaction log")

    counts = log.records_per_user()
    users = sorted(counts)
    rng = np.random.default_rng(seed)
    order = [users[i] for i in rng.permutation(len(users))]

    total = len(log)
    threshold = fraction * total
    existing: set[int] = set()
    accumulated = 0
    for u in order:
        existing.add(u)
        accumulated += counts[u]
        if accumulated >= threshold:
            break
    new = set(users) - existing
    if not new:
        raise DegenerateSplitError(
            "every user is needed to reach the requested train fraction"
        )

    train = InteractionLog(tuple(r for r in log.records if r[0] in existing))
    test = InteractionLog(tuple(r for r in log.records if r[0] in new))
    return DatasetSplit(frozenset(existing), frozenset(new), train, test)
