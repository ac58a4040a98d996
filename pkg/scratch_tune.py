"""Scratch: tune synthetic-generator knobs for the directional experiment."""
import numpy as np
import time

from conbandit.data import Catalog, InteractionLog, ItemRecord, split_cold_start
from conbandit.embeddings import EmbeddingStore
from conbandit.config import ExperimentConfig
from conbandit.policies import PolicyConfig
from conbandit.experiments import run_policy
from conbandit.metrics import paired_test


def gen2(seed, n_users=200, n_items=500, n_attrs=20, d=16, attrs_lo=2, attrs_hi=4,
         records_per_user=2, prefs=3, noise=0.1, user_w=1.0, item_mix=0.7):
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(d)
    P = rng.standard_normal((n_attrs, d)) * scale
    W = rng.standard_normal((n_items, d)) * scale      # raw item vectors
    T = rng.standard_normal((n_users, d)) * scale      # raw user taste
    items = []
    V = np.zeros_like(W)
    for v in range(n_items):
        m = int(rng.integers(attrs_lo, attrs_hi + 1))
        ids = list(np.argsort(-(P @ W[v]), kind="stable")[:m])
        items.append(ItemRecord(v, frozenset(int(i) for i in ids)))
        V[v] = (1.0 - item_mix) * W[v] + item_mix * P[ids].mean(axis=0)
    U = np.zeros_like(T)
    pref_sets = []
    for u in range(n_users):
        pref_ids = list(np.argsort(-(P @ T[u]), kind="stable")[:prefs])
        pref_sets.append(pref_ids)
        U[u] = T[u] + user_w * P[pref_ids].mean(axis=0)
    records = []
    for u in range(n_users):
        psum = P[pref_sets[u]].sum(axis=0)
        noisy = V @ (U[u] + psum) + rng.normal(0, noise, n_items)
        for v in np.argsort(-noisy, kind="stable")[:records_per_user]:
            records.append((u, int(v)))
    catalog = Catalog(tuple(items), tuple(range(n_attrs)))
    log = InteractionLog(tuple(records))
    store = EmbeddingStore(d=d,
        users={u: U[u].copy() for u in range(n_users)},
        items={v: V[v].copy() for v in range(n_items)},
        attributes={a: P[a].copy() for a in range(n_attrs)})
    return catalog, log, store


def trial(user_w, item_mix, rpu=2, noise=0.1, l=0.01, seeds=(1, 2, 3)):
    pols = ("ConTS", "ConTS_NoPu", "AbsGreedy")
    turns = {p: [] for p in pols}
    sr = {p: [] for p in pols}
    for seed in seeds:
        cfg = ExperimentConfig(d=16, T=15, k=10, l=l, seed=seed, synth=None)
        catalog, log, store = gen2(seed, records_per_user=rpu, noise=noise,
                                   user_w=user_w, item_mix=item_mix)
        split = split_cold_start(log, 0.7, seed)
        for pol in pols:
            rep, rows = run_policy(cfg, PolicyConfig(kind=pol, k=10), catalog, store, split)
            turns[pol].extend(r["turn"] for r in rows)
            sr[pol].append(rep.sr_at[-1])
    srm = {p: float(np.mean(sr[p])) for p in sr}
    atm = {p: float(np.mean(turns[p])) for p in pols}
    p1 = paired_test(turns["ConTS"], turns["ConTS_NoPu"]).p_value
    p2 = paired_test(turns["ConTS"], turns["AbsGreedy"]).p_value
    return srm, atm, p1, p2


for user_w, item_mix, rpu in [
    (0.5, 0.6, 2),
    (1.0, 0.6, 2),
    (1.0, 0.8, 2),
    (1.5, 0.8, 2),
    (1.0, 0.9, 2),
    (1.5, 0.9, 2),
]:
    t0 = time.time()
    srs, ats, p1, p2 = trial(user_w, item_mix, rpu)
    print(
        f"w={user_w} mix={item_mix} rpu={rpu} "
        f"SR: ConTS={srs['ConTS']:.3f} NoPu={srs['ConTS_NoPu']:.3f} Abs={srs['AbsGreedy']:.3f} "
        f"AT: ConTS={ats['ConTS']:.2f} NoPu={ats['ConTS_NoPu']:.2f} Abs={ats['AbsGreedy']:.2f} "
        f"p(NoPu)={p1:.2g} p(Abs)={p2:.2g} [{time.time()-t0:.0f}s]"
    )
