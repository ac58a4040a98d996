"""Flat `key = value` experiment configuration, diff-able and round-trippable."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .data import QUESTION_MODES, QuestionSetting, RewardTable
from .errors import ConfigError
from .policies import ATTR_CHOOSERS, POLICY_KINDS, SCHEDULES, PolicyConfig
from .synth import SynthParams

_DEFAULT_PER_ASK = {"binary": 1, "enumerated": 1, "multi": 12}


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 64
    T: int = 15
    k: int = 10
    l: float = 0.01
    seed: int = 0
    rewards: RewardTable = field(default_factory=RewardTable)
    setting: QuestionSetting = field(default_factory=QuestionSetting)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    split_fraction: float = 0.7
    session_shuffle_seed: int | None = None
    filter_low_frequency: bool = True
    interactions: str | None = None
    item_attrs: str | None = None
    taxonomy: str | None = None
    embeddings: str | None = None
    synth: SynthParams | None = None
    sweep: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        problems = []
        if self.d < 1:
            problems.append("d must be >= 1")
        if self.T < 1:
            problems.append("T must be >= 1")
        if self.k < 1:
            problems.append("k must be >= 1")
        if self.l < 0:
            problems.append("l must be >= 0")
        if not 0.0 < self.split_fraction < 1.0:
            problems.append("split_fraction must lie strictly between 0 and 1")
        for name in self.sweep:
            if name not in POLICY_KINDS:
                problems.append(f"unknown policy {name!r} in sweep")
        if problems:
            raise ConfigError("; ".join(problems))


def _parse_bool(value: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_log_base(value: str) -> float:
    if value.lower() == "e":
        return math.e
    return float(value)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the flat key = value format; `#` starts a comment. Every invalid
    key or value is collected and reported together."""
    kv: dict[str, str] = {}
    errors: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{line_no}: expected key = value")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            errors.append(f"{source}:{line_no}: empty key or value")
            continue
        if key in kv:
            errors.append(f"{source}:{line_no}: duplicate key {key!r}")
            continue
        kv[key] = value

    def take(key: str, convert, default):
        if key not in kv:
            return default
        raw = kv.pop(key)
        try:
            return convert(raw)
        except (ValueError, ConfigError) as exc:
            errors.append(f"bad value for {key!r}: {exc}")
            return default

    d = take("d", int, 64)
    T = take("T", int, 15)
    k = take("k", int, 10)
    l = take("l", float, 0.01)
    seed = take("seed", int, 0)
    rewards = RewardTable(
        fail_rec=take("fail_rec", float, -0.15),
        fail_ask=take("fail_ask", float, -0.03),
        suc_ask=take("suc_ask", float, 5.0),
        suc_rec=take("suc_rec", float, 5.0),
    )
    mode = take("setting", str, "binary")
    if mode not in QUESTION_MODES:
        errors.append(f"bad value for 'setting': unknown mode {mode!r}")
        mode = "binary"
    per_ask = take("attributes_per_ask", int, _DEFAULT_PER_ASK[mode])

    policy_kind = take("policy", str, "ConTS")
    if policy_kind not in POLICY_KINDS:
        errors.append(f"bad value for 'policy': unknown policy {policy_kind!r}")
        policy_kind = "ConTS"
    bt_schedule = take("bt_schedule", str, "floor_5_log")
    if bt_schedule not in SCHEDULES:
        errors.append(f"bad value for 'bt_schedule': unknown schedule {bt_schedule!r}")
        bt_schedule = "floor_5_log"
    attr_chooser = take("attr_chooser", str, "maximal_confidence")
    if attr_chooser not in ATTR_CHOOSERS:
        errors.append(f"bad value for 'attr_chooser': {attr_chooser!r}")
        attr_chooser = "maximal_confidence"
    alpha = take("alpha", float, 1.0)
    bt_log_base = take("bt_log_base", _parse_log_base, math.e)

    split_fraction = take("split_fraction", float, 0.7)
    shuffle = take("session_shuffle_seed", int, None)
    filter_lf = take("filter_low_frequency", _parse_bool, True)

    interactions = take("interactions", str, None)
    item_attrs = take("item_attrs", str, None)
    taxonomy = take("taxonomy", str, None)
    embeddings = take("embeddings", str, None)

    synth = None
    if take("synth", _parse_bool, False):
        try:
            synth = SynthParams(
                n_users=take("synth_users", int, 100),
                n_items=take("synth_items", int, 200),
                n_attrs=take("synth_attrs", int, 20),
                d=d,
                attrs_per_item=(
                    take("synth_attrs_per_item_min", int, 2),
                    take("synth_attrs_per_item_max", int, 4),
                ),
                records_per_user=take("synth_records_per_user", int, 3),
                n_parents=take("synth_parents", int, 0),
                prefs_per_user=take("synth_prefs_per_user", int, 3),
                noise_scale=take("synth_noise_scale", float, 0.1),
                user_attr_weight=take("synth_user_attr_weight", float, 1.0),
                item_raw_weight=take("synth_item_raw_weight", float, 0.3),
                item_attr_mix=take("synth_item_attr_mix", float, 0.7),
            )
        except ConfigError as exc:
            errors.append(f"bad synthetic parameters: {exc}")

    sweep_raw = take("sweep", str, "")
    sweep = tuple(s.strip() for s in sweep_raw.split(",") if s.strip())

    for key in kv:
        errors.append(f"unknown key {key!r}")
    if errors:
        raise ConfigError("\n".join(errors))

    try:
        return ExperimentConfig(
            d=d,
            T=T,
            k=k,
            l=l,
            seed=seed,
            rewards=rewards,
            setting=QuestionSetting(mode=mode, attributes_per_ask=per_ask),
            policy=PolicyConfig(
                kind=policy_kind,
                k=k,
                alpha=alpha,
                bt_schedule=bt_schedule,
                attr_chooser=attr_chooser,
                bt_log_base=bt_log_base,
            ),
            split_fraction=split_fraction,
            session_shuffle_seed=shuffle,
            filter_low_frequency=filter_lf,
            interactions=interactions,
            item_attrs=item_attrs,
            taxonomy=taxonomy,
            embeddings=embeddings,
            synth=synth,
            sweep=sweep,
        )
    except ConfigError:
        raise


def load_config(path: str | Path, seed_override: int | None = None) -> ExperimentConfig:
    cfg = parse_config_text(Path(path).read_text(encoding="utf-8"), source=str(path))
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override)
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "e" if value == math.e else repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit a config text that parses back to an equal ExperimentConfig."""
    lines = [
        f"d = {cfg.d}",
        f"T = {cfg.T}",
        f"k = {cfg.k}",
        f"l = {repr(cfg.l)}",
        f"seed = {cfg.seed}",
        f"fail_rec = {repr(cfg.rewards.fail_rec)}",
        f"fail_ask = {repr(cfg.rewards.fail_ask)}",
        f"suc_ask = {repr(cfg.rewards.suc_ask)}",
        f"suc_rec = {repr(cfg.rewards.suc_rec)}",
        f"setting = {cfg.setting.mode}",
        f"attributes_per_ask = {cfg.setting.attributes_per_ask}",
        f"policy = {cfg.policy.kind}",
        f"alpha = {repr(cfg.policy.alpha)}",
        f"bt_schedule = {cfg.policy.bt_schedule}",
        f"bt_log_base = {_fmt(cfg.policy.bt_log_base)}",
        f"attr_chooser = {cfg.policy.attr_chooser}",
        f"split_fraction = {repr(cfg.split_fraction)}",
        f"filter_low_frequency = {_fmt(cfg.filter_low_frequency)}",
    ]
    if cfg.session_shuffle_seed is not None:
        lines.append(f"session_shuffle_seed = {cfg.session_shuffle_seed}")
    for key in ("interactions", "item_attrs", "taxonomy", "embeddings"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {value}")
    if cfg.synth is not None:
        sp = cfg.synth
        lines += [
            "synth = true",
            f"synth_users = {sp.n_users}",
            f"synth_items = {sp.n_items}",
            f"synth_attrs = {sp.n_attrs}",
            f"synth_attrs_per_item_min = {sp.attrs_per_item[0]}",
            f"synth_attrs_per_item_max = {sp.attrs_per_item[1]}",
            f"synth_records_per_user = {sp.records_per_user}",
            f"synth_parents = {sp.n_parents}",
            f"synth_prefs_per_user = {sp.prefs_per_user}",
            f"synth_noise_scale = {repr(sp.noise_scale)}",
            f"synth_user_attr_weight = {repr(sp.user_attr_weight)}",
            f"synth_item_raw_weight = {repr(sp.item_raw_weight)}",
            f"synth_item_attr_mix = {repr(sp.item_attr_mix)}",
        ]
    if cfg.sweep:
        lines.append("sweep = " + ", ".join(cfg.sweep))
    return "\n".join(lines) + "\n"
