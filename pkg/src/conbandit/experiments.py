"""Experiment orchestration: data preparation, seeded runs, and output files.

Users are sharded across a worker pool (capped by the CONBANDIT_THREADS
environment variable); every user owns an independent rng stream derived from
(experiment seed, user id, session index), and results are merged by user id,
so the pool size never changes the outputs.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import Catalog, DatasetSplit, load_dataset, split_cold_start
from .embeddings import EmbeddingStore, read_embeddings
from .errors import ConfigError, StartupError
from .metrics import MetricsReport, compute_metrics
from .policies import PolicyConfig
from .simulator import derive_session_seed, run_user
from .synth import generate_synthetic

THREADS_ENV = "CONBANDIT_THREADS"


def pool_size() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def prepare_environment(
    cfg: ExperimentConfig,
) -> tuple[Catalog, EmbeddingStore, DatasetSplit]:
    """Load (or generate) the catalog, embeddings, and cold-start split."""
    if cfg.synth is not None:
        catalog, log, store = generate_synthetic(cfg.synth, cfg.seed)
    else:
        if cfg.interactions is None or cfg.item_attrs is None:
            raise StartupError("dataset paths are required when synth is disabled")
        if cfg.embeddings is None:
            raise StartupError("an embeddings file is required when synth is disabled")
        for path in (cfg.interactions, cfg.item_attrs, cfg.embeddings):
            if not Path(path).exists():
                raise StartupError(f"missing input file {path}")
        catalog, log = load_dataset(
            cfg.interactions,
            cfg.item_attrs,
            cfg.taxonomy,
            filter_low_frequency=cfg.filter_low_frequency,
        )
        store = read_embeddings(cfg.embeddings)
        if store.d != cfg.d:
            raise StartupError(f"embedding dimension {store.d} != configured d {cfg.d}")
    if cfg.setting.mode == "enumerated" and not catalog.taxonomy:
        raise ConfigError("enumerated questions require a taxonomy")
    split = split_cold_start(log, cfg.split_fraction, cfg.seed)
    return catalog, store, split


def _test_sessions_by_user(cfg: ExperimentConfig, split: DatasetSplit) -> dict[int, list]:
    per_user: dict[int, list[tuple[int, int]]] = {}
    for record in split.test_records.records:
        per_user.setdefault(record[0], []).append(record)
    if cfg.session_shuffle_seed is not None:
        for user, records in per_user.items():
            rng = np.random.default_rng(
                derive_session_seed(cfg.session_shuffle_seed, user, 0)
            )
            order = rng.permutation(len(records))
            per_user[user] = [records[i] for i in order]
    return per_user


def run_policy(
    cfg: ExperimentConfig,
    policy: PolicyConfig,
    catalog: Catalog,
    store: EmbeddingStore,
    split: DatasetSplit,
) -> tuple[MetricsReport, list[dict]]:
    """Run every new-user record through the simulator under one policy."""
    per_user = _test_sessions_by_user(cfg, split)
    workers = pool_size()

    def one_user(user: int):
        return run_user(policy, user, per_user[user], catalog, store, cfg, cfg.seed)

    users = sorted(per_user)
    if workers == 1:
        by_user = {u: one_user(u) for u in users}
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {u: pool.submit(one_user, u) for u in users}
            by_user = {u: futures[u].result() for u in users}

    results = [r for u in users for r in by_user[u]]
    rows = [
        {
            "user": r.user_id,
            "target": r.target_item,
            "success": r.success,
            "turn": r.end_turn,
            "policy": policy.kind,
            "seed": cfg.seed,
        }
        for r in results
    ]
    report = compute_metrics(results, cfg.T, policy=policy.kind, seed=cfg.seed)
    return report, rows


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path | None = None
) -> tuple[list[MetricsReport], list[dict]]:
    """Run the configured policy (or each policy in the sweep) and, when an
    output directory is given, write sessions.jsonl and summary.csv there."""
    catalog, store, split = prepare_environment(cfg)
    names = cfg.sweep or (cfg.policy.kind,)
    reports: list[MetricsReport] = []
    all_rows: list[dict] = []
    for name in names:
        policy = replace(cfg.policy, kind=name, k=cfg.k)
        report, rows = run_policy(cfg, policy, catalog, store, split)
        reports.append(report)
        all_rows.extend(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sessions_jsonl(all_rows, out / "sessions.jsonl")
        write_summary_csv(reports, cfg.T, out / "summary.csv")
    return reports, all_rows


def write_sessions_jsonl(rows: list[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_sessions_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_summary_csv(reports: list[MetricsReport], T: int, path: str | Path) -> None:
    header = "policy,seed,n,AT," + ",".join(f"SR@{t}" for t in range(1, T + 1))
    lines = [header]
    for rep in reports:
        values = [rep.policy, str(rep.seed), str(rep.n_sessions), repr(rep.at)]
        values += [repr(v) for v in rep.sr_at]
        lines.append(",".join(values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
