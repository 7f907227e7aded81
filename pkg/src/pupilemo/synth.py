"""Seeded synthetic pupil recordings with class-dependent dynamics.

Left eye::

    baseline + drift(t) + amp * sin(2 pi f t + phase) + AR(1) noise

clamped to [2, 5] mm. The right eye is 0.97 times the unclamped left trace
plus its own AR(1) noise, clamped the same way. ``drift`` is a slow
Ornstein-Uhlenbeck wander shared by both eyes; it blurs the class baselines
so that window means alone do not separate the classes. Blinks arrive as a
Poisson process and write -1 to both eyes; one-eye dropouts write -1 to a
single eye.

Seeding: each class draws from ``SeedSequence(seed, spawn_key=(label, c))``
with a fixed component index ``c`` per noise source, so classes (and
sources) never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from pupilemo.ingest import SENTINEL, Recording, synth_clock, write_recording
from pupilemo.labels import LABELS, EmotionLabel

CLAMP_MM = (2.0, 5.0)
RIGHT_GAIN = 0.97

# spawn-key component ids
_PHASE, _NOISE_LEFT, _NOISE_RIGHT, _DRIFT, _BLINKS, _DROPOUT = range(6)


@dataclass(frozen=True)
class ClassParams:
    baseline_mm: float
    osc_freq_hz: float
    osc_amp_mm: float


DEFAULT_CLASS_PARAMS = (
    ClassParams(3.2, 0.2, 0.3),   # happy
    ClassParams(2.6, 0.4, 0.3),   # sad
    ClassParams(3.8, 0.8, 0.3),   # anger
    ClassParams(4.2, 1.5, 0.3),   # fear
)


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 600.0
    sample_rate_hz: float = 120.0
    class_params: tuple[ClassParams, ...] = DEFAULT_CLASS_PARAMS
    noise_sigma_mm: float = 0.05
    ar_coef: float = 0.95
    drift_sigma_mm: float = 0.2
    drift_tau_s: float = 20.0
    blink_rate_per_min: float = 15.0
    blink_duration_ms: tuple[float, float] = (100.0, 300.0)
    one_eye_dropout_prob: float = 0.002
    seed: int = 42

    def validate(self) -> None:
        if self.duration_s < 0 or self.sample_rate_hz <= 0:
            raise ValueError("duration must be >= 0 and sample rate > 0")
        if len(self.class_params) != len(LABELS):
            raise ValueError("need parameters for each of the four classes")
        if not 0 <= self.ar_coef < 1:
            raise ValueError("ar_coef must lie in [0, 1)")
        if min(self.noise_sigma_mm, self.drift_sigma_mm, self.blink_rate_per_min) < 0:
            raise ValueError("noise, drift and blink rate must be non-negative")
        lo, hi = self.blink_duration_ms
        if not 0 < lo <= hi:
            raise ValueError("blink duration range must satisfy 0 < low <= high")
        if not 0 <= self.one_eye_dropout_prob <= 1:
            raise ValueError("one_eye_dropout_prob must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class SyntheticSession:
    recording: Recording
    blink_mask: np.ndarray      # rows overwritten by a blink (both eyes)
    dropout_mask: np.ndarray    # rows with exactly one eye overwritten by a dropout

    @property
    def sentinel_rows(self) -> int:
        return int((self.blink_mask | self.dropout_mask).sum())


def _rng(cfg: SynthConfig, label: EmotionLabel, component: int) -> np.random.Generator:
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(int(label), component))
    return np.random.Generator(np.random.PCG64(ss))


def _ar1(rng: np.random.Generator, n: int, coef: float, sigma: float) -> np.ndarray:
    """Stationary AR(1): x[i] = coef * x[i-1] + e[i], e ~ N(0, sigma^2)."""
    if n == 0:
        return np.zeros(0)
    e = rng.normal(0.0, sigma, n)
    x0 = rng.normal(0.0, sigma / np.sqrt(1.0 - coef * coef))
    out, _ = lfilter([1.0], [1.0, -coef], e, zi=[coef * x0])
    return out


def _blink_mask(cfg: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    rate_per_s = cfg.blink_rate_per_min / 60.0
    if rate_per_s == 0 or n == 0:
        return mask
    lo, hi = cfg.blink_duration_ms
    t = rng.exponential(1.0 / rate_per_s)
    while t < cfg.duration_s:
        dur = rng.uniform(lo, hi) / 1000.0
        a = int(np.ceil(t * cfg.sample_rate_hz))
        b = int(np.ceil((t + dur) * cfg.sample_rate_hz))
        mask[a:b] = True
        t += rng.exponential(1.0 / rate_per_s)
    return mask


def simulate(cfg: SynthConfig, label: EmotionLabel) -> SyntheticSession:
    """Generate one recording together with the injected artifact masks."""
    cfg.validate()
    label = EmotionLabel(label)
    fs = cfg.sample_rate_hz
    n = int(round(cfg.duration_s * fs))
    params = cfg.class_params[label]
    t = np.arange(n) / fs

    phase = _rng(cfg, label, _PHASE).uniform(0.0, 2.0 * np.pi)
    drift_coef = np.exp(-1.0 / (cfg.drift_tau_s * fs))
    drift = _ar1(_rng(cfg, label, _DRIFT), n, drift_coef,
                 cfg.drift_sigma_mm * np.sqrt(1.0 - drift_coef ** 2))
    left = (params.baseline_mm + drift
            + params.osc_amp_mm * np.sin(2.0 * np.pi * params.osc_freq_hz * t + phase)
            + _ar1(_rng(cfg, label, _NOISE_LEFT), n, cfg.ar_coef, cfg.noise_sigma_mm))
    right = RIGHT_GAIN * left + _ar1(_rng(cfg, label, _NOISE_RIGHT), n, cfg.ar_coef, cfg.noise_sigma_mm)
    left = np.clip(left, *CLAMP_MM)
    right = np.clip(right, *CLAMP_MM)

    blinks = _blink_mask(cfg, _rng(cfg, label, _BLINKS), n)
    drng = _rng(cfg, label, _DROPOUT)
    hit = drng.random(n) < cfg.one_eye_dropout_prob
    which_left = drng.random(n) < 0.5
    dropout = hit & ~blinks
    left[blinks | (dropout & which_left)] = SENTINEL
    right[blinks | (dropout & ~which_left)] = SENTINEL

    rec = Recording(synth_clock(n, fs), left, right, label, f"session_{label.token}.csv", fs)
    return SyntheticSession(rec, blinks, dropout)


def generate(cfg: SynthConfig, label: EmotionLabel) -> Recording:
    return simulate(cfg, label).recording


def generate_dataset(cfg: SynthConfig = SynthConfig()) -> list[Recording]:
    """One recording per emotion, in canonical label order."""
    return [generate(cfg, label) for label in LABELS]


def write_dataset(recordings, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in recordings:
        path = directory / f"session_{rec.label.token}.csv"
        write_recording(rec, path)
        paths.append(path)
    return paths
