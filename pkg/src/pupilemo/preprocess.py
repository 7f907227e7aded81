"""Blink and one-eye-closure removal.

The headset writes -1 whenever a pupil cannot be measured. Any row with the
sentinel on either eye is dropped outright (no interpolation); the gaps are
kept in the time axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pupilemo.errors import ImplausibleValue, InputError
from pupilemo.ingest import SENTINEL, Recording, _frozen
from pupilemo.labels import EmotionLabel

MAX_DIAMETER_MM = 8.0


@dataclass(frozen=True, eq=False)
class CleanSeries:
    t_ms: np.ndarray
    left_mm: np.ndarray
    right_mm: np.ndarray
    label: EmotionLabel
    sample_rate_hz: float
    dropped_count: int
    source_name: str
    span_ms: float

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen(self.t_ms, np.int64))
        object.__setattr__(self, "left_mm", _frozen(self.left_mm, np.float64))
        object.__setattr__(self, "right_mm", _frozen(self.right_mm, np.float64))

    def __len__(self) -> int:
        return len(self.t_ms)

    def __eq__(self, other):
        if not isinstance(other, CleanSeries):
            return NotImplemented
        return (self.label == other.label
                and self.source_name == other.source_name
                and self.sample_rate_hz == other.sample_rate_hz
                and self.dropped_count == other.dropped_count
                and self.span_ms == other.span_ms
                and np.array_equal(self.t_ms, other.t_ms)
                and np.array_equal(self.left_mm, other.left_mm)
                and np.array_equal(self.right_mm, other.right_mm))


def _sentinel_mask(left, right) -> np.ndarray:
    return (left == SENTINEL) | (right == SENTINEL)


def _widen(mask: np.ndarray, t_ms: np.ndarray, margin_ms: float) -> np.ndarray:
    """Extend a drop mask to every sample within ``margin_ms`` of a dropped one."""
    hits = t_ms[mask]
    if margin_ms <= 0 or hits.size == 0:
        return mask
    lo = np.searchsorted(hits, t_ms - margin_ms, side="left")
    hi = np.searchsorted(hits, t_ms + margin_ms, side="right")
    return mask | (hi > lo)


def remove_artifacts(rec, margin_ms: float = 0.0) -> CleanSeries:
    """Drop every sample where either eye reports the -1 sentinel.

    Parameters
    ----------
    rec : Recording or CleanSeries
        Input series. Passing a CleanSeries is allowed (a no-op unless
        ``margin_ms`` > 0 and sentinels remain, which they cannot).
    margin_ms : float
        Also drop samples within this many milliseconds of a sentinel row.
        Defaults to 0 (only the sentinel rows themselves).

    Raises
    ------
    ImplausibleValue
        If a surviving diameter is <= 0 or above 8 mm.
    """
    t, left, right = rec.t_ms, rec.left_mm, rec.right_mm
    drop = _widen(_sentinel_mask(left, right), t, margin_ms)
    keep = ~drop
    for name, col in (("left_mm", left), ("right_mm", right)):
        bad = keep & ((col <= 0) | (col > MAX_DIAMETER_MM))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ImplausibleValue(
                f"{rec.source_name}: {name}={col[i]!r} at t_ms={int(t[i])} is outside (0, 8] mm")
    prior_drops = getattr(rec, "dropped_count", 0)
    span = rec.span_ms
    return CleanSeries(t[keep], left[keep], right[keep], rec.label, rec.sample_rate_hz,
                       prior_drops + int(drop.sum()), rec.source_name, span)


def report_line(series: CleanSeries) -> str:
    return f"{series.source_name},{len(series)},{series.dropped_count}"


# Clean-series file: '#'-prefixed key=value header, then a t_ms,left_mm,right_mm table.

_HEADER_KEYS = ("source_name", "label", "sample_rate_hz", "dropped_count", "span_ms")


def write_clean(series: CleanSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# source_name={series.source_name}\n")
        fh.write(f"# label={series.label.token}\n")
        fh.write(f"# sample_rate_hz={series.sample_rate_hz!r}\n")
        fh.write(f"# dropped_count={series.dropped_count}\n")
        fh.write(f"# span_ms={series.span_ms!r}\n")
        fh.write("t_ms,left_mm,right_mm\n")
        for t, l, r in zip(series.t_ms.tolist(), series.left_mm.tolist(), series.right_mm.tolist()):
            fh.write(f"{t},{l!r},{r!r}\n")


def read_clean(path) -> CleanSeries:
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line.startswith("t_ms"):
                continue
            else:
                rows.append(line.split(","))
    missing = [k for k in _HEADER_KEYS if k not in meta]
    if missing:
        raise InputError(f"{Path(path).name}: clean-series header lacks {', '.join(missing)}")
    table = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return CleanSeries(
        table[:, 0].astype(np.int64), table[:, 1], table[:, 2],
        EmotionLabel.from_token(meta["label"]), float(meta["sample_rate_hz"]),
        int(meta["dropped_count"]), meta["source_name"], float(meta["span_ms"]))
