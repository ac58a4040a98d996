"""Shared d-dimensional embeddings for users, items, and attributes."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DataFormatError, EntityLookupError


@dataclass
class EmbeddingStore:
    """Vectors for every known user, item, and attribute.

    The cold-start mean ``u_init`` is always recomputed from the user vectors
    (in ascending-id order, so the value is bit-reproducible).
    """

    d: int
    users: dict[int, np.ndarray] = field(default_factory=dict)
    items: dict[int, np.ndarray] = field(default_factory=dict)
    attributes: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def u_init(self) -> np.ndarray:
        if not self.users:
            raise EntityLookupError("no user vectors to average for the cold-start mean")
        stacked = np.stack([self.users[u] for u in sorted(self.users)])
        return stacked.mean(axis=0)

    def item_vector(self, item_id: int) -> np.ndarray:
        try:
            return self.items[item_id]
        except KeyError:
            raise EntityLookupError(f"no embedding for item {item_id}") from None

    def attribute_vector(self, attr_id: int) -> np.ndarray:
        try:
            return self.attributes[attr_id]
        except KeyError:
            raise EntityLookupError(f"no embedding for attribute {attr_id}") from None

    def mean_attribute_vector(self, attr_ids) -> np.ndarray:
        """Unweighted mean of the given attribute vectors (used for parent arms)."""
        ids = sorted(attr_ids)
        if not ids:
            raise ContractViolation("cannot average an empty attribute set")
        return np.stack([self.attribute_vector(a) for a in ids]).mean(axis=0)

    def validate(self) -> None:
        for kind, mapping in (("user", self.users), ("item", self.items), ("attr", self.attributes)):
            for ident, vec in mapping.items():
                if vec.shape != (self.d,):
                    raise ContractViolation(f"{kind} {ident}: expected length {self.d}")
                if not np.all(np.isfinite(vec)):
                    raise ContractViolation(f"{kind} {ident}: non-finite entries")


def _format_vector(vec: np.ndarray) -> str:
    return " ".join(f"{x:.17g}" for x in vec)


def write_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write the store as a TSV: `d=<n>`, one `kind<TAB>id<TAB>values` line per
    vector (users, items, attrs, each in ascending id order), then the
    cold-start mean as a final `u_init` line."""
    store.validate()
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"d={store.d}\n")
        for kind, mapping in (("user", store.users), ("item", store.items), ("attr", store.attributes)):
            for ident in sorted(mapping):
                fh.write(f"{kind}\t{ident}\t{_format_vector(mapping[ident])}\n")
        fh.write(f"u_init\t-\t{_format_vector(store.u_init)}\n")


def read_embeddings(path: str | Path) -> EmbeddingStore:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("d="):
        raise DataFormatError(str(path), 1, "expected a leading d=<int> line")
    try:
        d = int(lines[0][2:])
    except ValueError:
        raise DataFormatError(str(path), 1, "bad dimension") from None

    store = EmbeddingStore(d=d)
    stored_u_init: np.ndarray | None = None
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataFormatError(str(path), line_no, "expected 3 tab-separated fields")
        kind, ident, values = fields
        try:
            vec = np.array([float(x) for x in values.split()], dtype=np.float64)
        except ValueError:
            raise DataFormatError(str(path), line_no, "bad float value") from None
        if vec.shape != (d,):
            raise DataFormatError(str(path), line_no, f"expected {d} values")
        if kind == "u_init":
            stored_u_init = vec
            continue
        try:
            target = {"user": store.users, "item": store.items, "attr": store.attributes}[kind]
        except KeyError:
            raise DataFormatError(str(path), line_no, f"unknown kind {kind!r}") from None
        target[int(ident)] = vec

    store.validate()
    if stored_u_init is not None and store.users:
        if not np.allclose(stored_u_init, store.u_init, atol=1e-9, rtol=0):
            raise DataFormatError(
                str(path), len(lines), "stored u_init disagrees with the user-vector mean"
            )
    return store
