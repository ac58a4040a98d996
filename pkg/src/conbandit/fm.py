"""Offline pairwise-ranking training of the shared embeddings.

Embeddings for existing users, items, and attributes are fitted with BPR-style
SGD on two sequential tasks: item prediction first, then attribute prediction
once the item task has converged. Both tasks share one embedding space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Catalog, DatasetSplit
from .embeddings import EmbeddingStore
from .errors import ConfigError, ContractViolation, EntityLookupError, TrainingError

ITEM_TASK = "item"
ATTR_TASK = "attr"


@dataclass(frozen=True)
class FmHyperParams:
    learning_rate: float = 0.05
    l2_reg: float = 0.001
    epochs_item: int = 50
    epochs_attr: int = 20
    negatives_per_positive: int = 1
    seed: int = 0
    d: int = 64
    init_scale: float = 0.1
    early_stop_tol: float = 1e-4
    early_stop_patience: int = 3

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.l2_reg < 0:
            raise ConfigError("l2_reg must be >= 0")
        if min(self.epochs_item, self.epochs_attr) < 0:
            raise ConfigError("epoch budgets must be >= 0")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")


def fm_score_item(u: np.ndarray, v: np.ndarray, P_u_vectors) -> float:
    """u.v plus the item's affinity to each accepted attribute (biases omitted)."""
    if u.shape != v.shape:
        raise ContractViolation("user/item dimension mismatch")
    score = float(u @ v)
    for p in P_u_vectors:
        if p.shape != v.shape:
            raise ContractViolation("attribute dimension mismatch")
        score += float(v @ p)
    return score


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _task_vectors(task: str, store: EmbeddingStore, u_id: int, pos_id: int, neg_id: int):
    try:
        u = store.users[u_id]
        if task == ITEM_TASK:
            pos, neg = store.items[pos_id], store.items[neg_id]
        elif task == ATTR_TASK:
            pos, neg = store.attributes[pos_id], store.attributes[neg_id]
        else:
            raise ConfigError(f"unknown task {task!r}")
    except KeyError as exc:
        raise EntityLookupError(f"unknown id in triple ({u_id}, {pos_id}, {neg_id})") from exc
    return u, pos, neg


def bpr_loss(
    task: str,
    u_id: int,
    pos_id: int,
    neg_id: int,
    params: FmHyperParams,
    store: EmbeddingStore,
) -> float:
    """-ln sigma(score_pos - score_neg) + l2_reg * ||vectors in the two scores||^2."""
    u, pos, neg = _task_vectors(task, store, u_id, pos_id, neg_id)
    s = float(u @ pos) - float(u @ neg)
    penalty = params.l2_reg * (float(u @ u) + float(pos @ pos) + float(neg @ neg))
    return -math.log(_sigmoid(s)) + penalty


def bpr_step(
    task: str,
    u_id: int,
    pos_id: int,
    neg_id: int,
    params: FmHyperParams,
    store: EmbeddingStore,
) -> float:
    """One SGD step on the pairwise loss; mutates only the three vectors in the
    triple and returns the loss at the pre-step point."""
    u, pos, neg = _task_vectors(task, store, u_id, pos_id, neg_id)
    s = float(u @ pos) - float(u @ neg)
    loss = -math.log(_sigmoid(s)) + params.l2_reg * (
        float(u @ u) + float(pos @ pos) + float(neg @ neg)
    )
    g = _sigmoid(s) - 1.0
    lr = params.learning_rate
    reg2 = 2.0 * params.l2_reg
    grad_u = g * (pos - neg) + reg2 * u
    grad_pos = g * u + reg2 * pos
    grad_neg = -g * u + reg2 * neg
    u -= lr * grad_u
    pos -= lr * grad_pos
    neg -= lr * grad_neg
    return loss


def _sample_negative(rng: np.random.Generator, n: int, positives: set[int]) -> int:
    if len(positives) >= n:
        raise TrainingError("no negative candidates available")
    while True:
        cand = int(rng.integers(n))
        if cand not in positives:
            return cand


def _run_phase(
    task: str,
    triples_base: list[tuple[int, int]],
    epochs: int,
    params: FmHyperParams,
    store: EmbeddingStore,
    rng: np.random.Generator,
    user_positives: dict[int, set[int]],
    catalog: Catalog,
) -> None:
    # "Converged": epoch-mean loss has not improved on its best value by at
    # least the tolerance for `patience` consecutive epochs.
    best_mean = math.inf
    stalled = 0
    n_items = catalog.n_items
    n_attrs = catalog.n_attributes
    for _ in range(epochs):
        order = rng.permutation(len(triples_base))
        total = 0.0
        count = 0
        for idx in order:
            u_id, item_id = triples_base[idx]
            for _ in range(params.negatives_per_positive):
                if task == ITEM_TASK:
                    pos = item_id
                    neg = _sample_negative(rng, n_items, user_positives[u_id])
                else:
                    attrs = sorted(catalog.item(item_id).attribute_ids)
                    pos = attrs[int(rng.integers(len(attrs)))]
                    if len(attrs) >= n_attrs:
                        continue
                    neg = _sample_negative(rng, n_attrs, set(attrs))
                total += bpr_step(task, u_id, pos, neg, params, store)
                count += 1
        if count == 0:
            break
        mean = total / count
        if best_mean - mean < params.early_stop_tol:
            stalled += 1
            if stalled >= params.early_stop_patience:
                break
        else:
            stalled = 0
        best_mean = min(best_mean, mean)


def train_fm(split: DatasetSplit, catalog: Catalog, params: FmHyperParams) -> EmbeddingStore:
    """Fit embeddings on the existing users' records.

    Runs the item-prediction task to its epoch budget or early stop, then the
    attribute-prediction task (positive attribute drawn from the interacted
    item's set, negative sampled uniformly from its complement). Deterministic
    for a fixed seed.
    """
    records = list(split.train_records.records)
    if not records:
        raise TrainingError("empty training set")

    rng = np.random.default_rng(params.seed)
    d = params.d
    users = sorted({u for u, _ in records})
    store = EmbeddingStore(
        d=d,
        users={u: rng.standard_normal(d) * params.init_scale for u in users},
        items={v: rng.standard_normal(d) * params.init_scale for v in range(catalog.n_items)},
        attributes={
            a: rng.standard_normal(d) * params.init_scale for a in range(catalog.n_attributes)
        },
    )
    user_positives: dict[int, set[int]] = {u: set() for u in users}
    for u, v in records:
        user_positives[u].add(v)

    _run_phase(ITEM_TASK, records, params.epochs_item, params, store, rng, user_positives, catalog)
    _run_phase(ATTR_TASK, records, params.epochs_attr, params, store, rng, user_positives, catalog)
    store.validate()
    return store
