import numpy as np
import pytest

from conbandit.data import Catalog, ItemRecord, QuestionSetting
from conbandit.embeddings import EmbeddingStore


@pytest.fixture
def tiny_catalog() -> Catalog:
    """Four items over four attributes, with a two-parent taxonomy."""
    items = (
        ItemRecord(0, frozenset({0, 1})),
        ItemRecord(1, frozenset({1, 2})),
        ItemRecord(2, frozenset({2, 3})),
        ItemRecord(3, frozenset({0, 3})),
    )
    taxonomy = {0: frozenset({0, 1}), 1: frozenset({2, 3})}
    return Catalog(items=items, attributes=(0, 1, 2, 3), taxonomy=taxonomy)


@pytest.fixture
def tiny_store(tiny_catalog) -> EmbeddingStore:
    rng = np.random.default_rng(42)
    d = 4
    return EmbeddingStore(
        d=d,
        users={u: rng.standard_normal(d) * 0.5 for u in range(3)},
        items={rec.item_id: rng.standard_normal(d) * 0.5 for rec in tiny_catalog.items},
        attributes={a: rng.standard_normal(d) * 0.5 for a in tiny_catalog.attributes},
    )


@pytest.fixture
def binary_setting() -> QuestionSetting:
    return QuestionSetting("binary", 1)
