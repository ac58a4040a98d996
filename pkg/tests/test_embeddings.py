import numpy as np
import pytest

from conbandit.embeddings import EmbeddingStore, read_embeddings, write_embeddings
from conbandit.errors import ContractViolation, DataFormatError, EntityLookupError


def make_store(seed=0, d=5, n=4):
    rng = np.random.default_rng(seed)
    return EmbeddingStore(
        d=d,
        users={u: rng.standard_normal(d) for u in range(n)},
        items={v: rng.standard_normal(d) for v in range(n)},
        attributes={a: rng.standard_normal(d) for a in range(n)},
    )


def test_u_init_is_user_mean():
    store = make_store()
    manual = np.mean([store.users[u] for u in sorted(store.users)], axis=0)
    assert np.allclose(store.u_init, manual, atol=1e-12, rtol=0)
    # recomputed on write: mutating a user vector moves u_init
    store.users[0] += 1.0
    assert np.allclose(store.u_init, manual + 1.0 / len(store.users), atol=1e-12)


def test_u_init_requires_users():
    store = EmbeddingStore(d=3)
    with pytest.raises(EntityLookupError):
        _ = store.u_init


def test_file_round_trip_and_stability(tmp_path):
    store = make_store(seed=3)
    p1, p2 = tmp_path / "e1.tsv", tmp_path / "e2.tsv"
    write_embeddings(store, p1)
    loaded = read_embeddings(p1)
    assert loaded.d == store.d
    for kind in ("users", "items", "attributes"):
        got, want = getattr(loaded, kind), getattr(store, kind)
        assert got.keys() == want.keys()
        for key in want:
            assert np.array_equal(got[key], want[key])
    write_embeddings(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_corrupt_u_init_rejected(tmp_path):
    store = make_store()
    path = tmp_path / "e.tsv"
    write_embeddings(store, path)
    lines = path.read_text().splitlines()
    parts = lines[-1].split("\t")
    parts[2] = " ".join(["9.9"] * store.d)
    path.write_text("\n".join(lines[:-1] + ["\t".join(parts)]) + "\n")
    with pytest.raises(DataFormatError):
        read_embeddings(path)


def test_dimension_validation():
    store = make_store()
    store.items[0] = np.zeros(3)
    with pytest.raises(ContractViolation):
        store.validate()


def test_non_finite_rejected():
    store = make_store()
    store.users[1] = np.array([np.nan] * store.d)
    with pytest.raises(ContractViolation):
        store.validate()


def test_mean_attribute_vector():
    store = make_store()
    mean = store.mean_attribute_vector([0, 2])
    assert np.allclose(mean, (store.attributes[0] + store.attributes[2]) / 2.0)
    with pytest.raises(ContractViolation):
        store.mean_attribute_vector([])
    with pytest.raises(EntityLookupError):
        store.mean_attribute_vector([99])
