"""Command-line entry points: train-fm, synth, run, compare, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .data import load_dataset, save_dataset, split_cold_start
from .embeddings import write_embeddings
from .errors import ConbanditError
from .experiments import read_sessions_jsonl, run_experiment, write_summary_csv
from .fm import FmHyperParams, train_fm
from .metrics import paired_test
from .report import render_at_bars, render_sr_curves, reports_from_rows
from .synth import SynthParams, generate_synthetic


def _cmd_train_fm(args: argparse.Namespace) -> int:
    catalog, log = load_dataset(
        args.interactions,
        args.item_attrs,
        args.taxonomy,
        filter_low_frequency=not args.no_filter,
        id_map_path=str(args.out) + ".idmap.tsv",
    )
    split = split_cold_start(log, args.split_fraction, args.seed)
    params = FmHyperParams(
        learning_rate=args.lr,
        l2_reg=args.reg,
        epochs_item=args.epochs_item,
        epochs_attr=args.epochs_attr,
        seed=args.seed,
        d=args.dim,
    )
    store = train_fm(split, catalog, params)
    write_embeddings(store, args.out)
    print(
        f"trained d={store.d} embeddings for {len(store.users)} users, "
        f"{len(store.items)} items, {len(store.attributes)} attributes -> {args.out}"
    )
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    params = SynthParams(
        n_users=args.users,
        n_items=args.items,
        n_attrs=args.attrs,
        d=args.dim,
        attrs_per_item=(args.attrs_per_item_min, args.attrs_per_item_max),
        records_per_user=args.records_per_user,
        n_parents=args.parents,
    )
    catalog, log, store = generate_synthetic(params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taxonomy_path = out / "taxonomy.tsv" if catalog.taxonomy else None
    save_dataset(catalog, log, out / "interactions.tsv", out / "item_attrs.tsv", taxonomy_path)
    write_embeddings(store, out / "embeddings.tsv")
    print(
        f"wrote synthetic dataset ({params.n_users} users, {params.n_items} items, "
        f"{params.n_attrs} attributes) and ground-truth embeddings to {out}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    reports, rows = run_experiment(cfg, out_dir=args.out)
    for rep in reports:
        print(
            f"{rep.policy}: n={rep.n_sessions} AT={rep.at:.4f} "
            f"SR@{cfg.T}={rep.sr_at[-1]:.4f}"
        )
    print(f"wrote {args.out}/sessions.jsonl and {args.out}/summary.csv "
          f"({len(rows)} sessions)")
    return 0


def _aligned_turns(rows_a: list[dict], rows_b: list[dict]) -> tuple[list[int], list[int]]:
    def keyed(rows):
        seen: dict[tuple[int, int], int] = {}
        out = {}
        for r in rows:
            base = (int(r["user"]), int(r["target"]))
            occurrence = seen.get(base, 0)
            seen[base] = occurrence + 1
            out[base + (occurrence,)] = int(r["turn"])
        return out

    a, b = keyed(rows_a), keyed(rows_b)
    if set(a) != set(b):
        raise ConbanditError("session logs do not cover the same (user, target) sessions")
    keys = [k for k in a]  # first log's order
    return [a[k] for k in keys], [b[k] for k in keys]


def _cmd_compare(args: argparse.Namespace) -> int:
    rows_a = read_sessions_jsonl(args.log_a)
    rows_b = read_sessions_jsonl(args.log_b)
    name_a = rows_a[0]["policy"] if rows_a else "a"
    name_b = rows_b[0]["policy"] if rows_b else "b"
    turns_a, turns_b = _aligned_turns(rows_a, rows_b)
    res = paired_test(turns_a, turns_b, policy_a=name_a, policy_b=name_b)
    print(
        f"policy_a={res.policy_a} policy_b={res.policy_b} n={res.n} "
        f"mean_diff_at={res.mean_diff_at:.6f} p_value={res.p_value:.6g}"
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = read_sessions_jsonl(args.log)
    reports, T = reports_from_rows(rows, T=args.max_turns)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(reports, T, out / "summary.csv")
    render_sr_curves(reports, T, out / "sr_curves.png")
    render_at_bars(reports, out / "at_bars.png")
    print(f"wrote {out}/summary.csv, {out}/sr_curves.png, {out}/at_bars.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conbandit",
        description="Conversational bandit recommender experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-fm", help="train embeddings offline on existing users")
    p.add_argument("--interactions", required=True)
    p.add_argument("--item-attrs", required=True, dest="item_attrs")
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--reg", type=float, default=0.001)
    p.add_argument("--epochs-item", type=int, default=50, dest="epochs_item")
    p.add_argument("--epochs-attr", type=int, default=20, dest="epochs_attr")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--split-fraction", type=float, default=0.7, dest="split_fraction")
    p.add_argument("--no-filter", action="store_true", dest="no_filter")
    p.set_defaults(func=_cmd_train_fm)

    p = sub.add_parser("synth", help="emit a synthetic dataset with ground-truth embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--attrs", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--records-per-user", type=int, default=3, dest="records_per_user")
    p.add_argument("--attrs-per-item-min", type=int, default=2, dest="attrs_per_item_min")
    p.add_argument("--attrs-per-item-max", type=int, default=4, dest="attrs_per_item_max")
    p.add_argument("--parents", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="paired test over two session logs")
    p.add_argument("log_a")
    p.add_argument("log_b")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="recompute metrics and figures from a session log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="report")
    p.add_argument("--max-turns", type=int, default=None, dest="max_turns")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConbanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
