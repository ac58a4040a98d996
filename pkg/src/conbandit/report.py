"""Recompute metrics from a session log and render the SR@t figure."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import MetricsError
from .metrics import MetricsReport, compute_metrics
from .simulator import SessionResult


def reports_from_rows(rows: list[dict], T: int | None = None) -> tuple[list[MetricsReport], int]:
    """Group a session log by policy (first-seen order) and recompute metrics.

    The turn cap is inferred as the largest recorded turn unless given; failed
    sessions always record the cap, so the inference is exact whenever any
    session failed.
    """
    if not rows:
        raise MetricsError("empty session log")
    if T is None:
        T = max(int(r["turn"]) for r in rows)
    by_policy: dict[str, list[SessionResult]] = {}
    seeds: dict[str, int] = {}
    for r in rows:
        name = r["policy"]
        by_policy.setdefault(name, []).append(
            SessionResult(
                user_id=int(r["user"]),
                target_item=int(r["target"]),
                success=bool(r["success"]),
                end_turn=int(r["turn"]),
            )
        )
        seeds.setdefault(name, int(r["seed"]))
    reports = [
        compute_metrics(results, T, policy=name, seed=seeds[name])
        for name, results in by_policy.items()
    ]
    return reports, T


def render_sr_curves(reports: list[MetricsReport], T: int, path: str | Path) -> None:
    """Success rate by turn, one line per policy, written as a PNG."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    turns = range(1, T + 1)
    for rep in reports:
        ax.plot(turns, rep.sr_at, marker="o", markersize=3, label=rep.policy)
    ax.set_xlabel("conversation turn")
    ax.set_ylabel("success rate by turn")
    ax.set_xlim(1, T)
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_at_bars(reports: list[MetricsReport], path: str | Path) -> None:
    """Average turns per policy as a bar chart."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    names = [rep.policy for rep in reports]
    ax.bar(names, [rep.at for rep in reports], color="tab:blue", alpha=0.8)
    ax.set_ylabel("average turns")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
