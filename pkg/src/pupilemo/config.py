"""Run configuration: a flat ``key = value`` file, overridable from the CLI.

Blank lines and ``#`` comments are ignored. Grid keys (``grid_*``) take
comma-separated lists; an empty value drops that axis from the grid.

Seeds: ``seed`` is the root. The synthetic data uses it directly; the
train/test split, the inner grid split and the boosting draws use
``SeedSequence(seed, spawn_key=(i,)).generate_state(1)[0]`` with ``i`` =
1, 2, 3 respectively. Setting ``gbm_seed`` pins the boosting seed instead.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from pupilemo.errors import ConfigError
from pupilemo.evaluation import SplitConfig
from pupilemo.features import WindowConfig
from pupilemo.gbm import Hyperparams
from pupilemo.synth import SynthConfig

_STAGE_STREAMS = {"split": 1, "grid": 2, "gbm": 3}

GRID_KEYS = {
    "grid_learning_rate": ("learning_rate", float),
    "grid_n_estimators": ("n_estimators", int),
    "grid_max_depth": ("max_depth", int),
    "grid_min_samples_split": ("min_samples_split", int),
    "grid_min_samples_leaf": ("min_samples_leaf", int),
    "grid_max_features": ("max_features", int),
    "grid_subsample": ("subsample", float),
}


def derive_seed(root: int, stage: str) -> int:
    ss = np.random.SeedSequence(root, spawn_key=(_STAGE_STREAMS[stage],))
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    # synthetic data
    duration_s: float = 600.0
    sample_rate_hz: float = 120.0
    noise_sigma_mm: float = 0.05
    drift_sigma_mm: float = 0.2
    blink_rate_per_min: float = 15.0
    one_eye_dropout_prob: float = 0.002
    # preprocessing and windows
    artifact_margin_ms: float = 0.0
    window_s: float = 5.0
    hop_s: float = 2.5
    min_fill: float = 0.8
    # selection
    mrmr_k: int = 51
    mrmr_bins: int = 10
    # boosting
    max_depth: int = 5
    learning_rate: float = 0.05
    n_estimators: int = 20
    max_features: int = 7
    min_samples_split: int = 200
    min_samples_leaf: int = 30
    subsample: float = 0.8
    gbm_seed: Optional[int] = None
    grid_learning_rate: str = "0.05,0.051,0.1"
    grid_n_estimators: str = "100"
    grid_max_depth: str = ""
    grid_min_samples_split: str = "200,60"
    grid_min_samples_leaf: str = ""
    grid_max_features: str = ""
    grid_subsample: str = ""
    # evaluation
    train_fraction: float = 0.7
    stratified: bool = True
    paper_faithful_selection: bool = False
    stage_select_rule: str = "mse"

    def __post_init__(self):
        if self.stage_select_rule not in ("mse", "deviance"):
            raise ConfigError("stage_select_rule must be 'mse' or 'deviance'")
        try:
            self.window_config().validate(self.sample_rate_hz)
            self.hyperparams().validate()
            self.split_config(0)
            self.synth_config().validate()
            self.grid()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def synth_config(self) -> SynthConfig:
        return SynthConfig(duration_s=self.duration_s, sample_rate_hz=self.sample_rate_hz,
                           noise_sigma_mm=self.noise_sigma_mm, drift_sigma_mm=self.drift_sigma_mm,
                           blink_rate_per_min=self.blink_rate_per_min,
                           one_eye_dropout_prob=self.one_eye_dropout_prob, seed=self.seed)

    def window_config(self) -> WindowConfig:
        return WindowConfig(self.window_s, self.hop_s, self.min_fill)

    def hyperparams(self) -> Hyperparams:
        seed = self.gbm_seed if self.gbm_seed is not None else derive_seed(self.seed, "gbm")
        return Hyperparams(self.max_depth, self.learning_rate, self.n_estimators, self.max_features,
                           self.min_samples_split, self.min_samples_leaf, self.subsample, seed)

    def split_config(self, seed: Optional[int] = None) -> SplitConfig:
        if seed is None:
            seed = derive_seed(self.seed, "split")
        return SplitConfig(self.train_fraction, seed, self.stratified)

    def grid(self) -> dict:
        out = {}
        for key, (param, cast) in GRID_KEYS.items():
            raw = getattr(self, key).strip()
            if raw:
                out[param] = [cast(v) for v in raw.split(",")]
        return out


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key: str, value: str):
    default = getattr(RunConfig, key, None)
    kind = _FIELDS[key].type
    value = value.strip()
    if kind in ("bool", bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if kind in ("str", str):
        return value
    if kind == "Optional[int]":
        return None if value.lower() in ("", "none") else int(value)
    try:
        return type(default)(value) if not isinstance(default, float) else float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None


def parse_assignments(lines, source: str = "config") -> dict:
    values = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from None
    return values


def load_config(path=None, overrides=None) -> RunConfig:
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_assignments(fh, str(path)))
    if overrides:
        values.update(parse_assignments(overrides, "--set"))
    return replace(RunConfig(), **values)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'' if v is None else str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
