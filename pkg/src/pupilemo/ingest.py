"""Reading raw eye-tracker logs.

One record per line, no header::

    3/3/2023 6:09:33 AM,3.234989,2.993118, happy

The wall-clock column has one-second resolution, so it is only checked for
monotonicity and then replaced by a uniform clock derived from the sample
index and the nominal sample rate.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from pupilemo.errors import (
    ClockRegression,
    LabelUndeterminable,
    MalformedLine,
    MixedLabels,
)
from pupilemo.labels import TOKENS, EmotionLabel

SENTINEL = -1.0
DEFAULT_SAMPLE_RATE_HZ = 120.0
WALLCLOCK_FORMAT = "%m/%d/%Y %I:%M:%S %p"


@dataclass(frozen=True)
class PupilSample:
    t_ms: int
    left_mm: float
    right_mm: float

    @property
    def has_sentinel(self) -> bool:
        return self.left_mm == SENTINEL or self.right_mm == SENTINEL


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Recording:
    """A labeled pupil recording stored column-wise.

    ``t_ms``, ``left_mm`` and ``right_mm`` are read-only arrays of equal
    length; ``samples`` gives the row view.
    """

    t_ms: np.ndarray
    left_mm: np.ndarray
    right_mm: np.ndarray
    label: EmotionLabel
    source_name: str
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen(self.t_ms, np.int64))
        object.__setattr__(self, "left_mm", _frozen(self.left_mm, np.float64))
        object.__setattr__(self, "right_mm", _frozen(self.right_mm, np.float64))
        if not len(self.t_ms) == len(self.left_mm) == len(self.right_mm):
            raise ValueError("t_ms, left_mm and right_mm must have equal length")

    def __len__(self) -> int:
        return len(self.t_ms)

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (self.label == other.label
                and self.source_name == other.source_name
                and self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.t_ms, other.t_ms)
                and np.array_equal(self.left_mm, other.left_mm)
                and np.array_equal(self.right_mm, other.right_mm))

    @property
    def samples(self) -> list[PupilSample]:
        return [PupilSample(int(t), float(l), float(r))
                for t, l, r in zip(self.t_ms, self.left_mm, self.right_mm)]

    @property
    def span_ms(self) -> float:
        """Nominal duration covered by the recording, in milliseconds."""
        return len(self) * 1000.0 / self.sample_rate_hz


def synth_clock(n: int, sample_rate_hz: float) -> np.ndarray:
    """Uniform millisecond clock ``round(i * 1000 / rate)``."""
    return np.round(np.arange(n) * (1000.0 / sample_rate_hz)).astype(np.int64)


def _parse_number(text: str, lineno: int, field: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedLine(lineno, field, f"not a decimal number: {text!r}") from None
    if not math.isfinite(value):
        raise MalformedLine(lineno, field, f"non-finite value {text!r}")
    return value


def parse_line(line: str, lineno: int = 1):
    """Split one log line into ``(wallclock, left_mm, right_mm, label)``.

    ``label`` is None for three-column rows. Whitespace around the label
    token is ignored; the -1 sentinel is passed through untouched.
    """
    fields = line.rstrip("\r\n").split(",")
    if len(fields) not in (3, 4):
        raise MalformedLine(lineno, "field count", f"expected 3 or 4 fields, got {len(fields)}")
    wallclock = fields[0].strip()
    left = _parse_number(fields[1].strip(), lineno, "left_mm")
    right = _parse_number(fields[2].strip(), lineno, "right_mm")
    label = None
    if len(fields) == 4:
        try:
            label = EmotionLabel.from_token(fields[3])
        except ValueError:
            raise MalformedLine(lineno, "label", f"unknown label token {fields[3].strip()!r}") from None
    return wallclock, left, right, label


def label_from_name(name: str) -> Optional[EmotionLabel]:
    """Find exactly one emotion token in a file name, or return None."""
    words = re.split(r"[^a-z]+", Path(name).stem.lower())
    found = {w for w in words if w in TOKENS}
    if len(found) != 1:
        return None
    return EmotionLabel.from_token(found.pop())


def _parse_wallclock(text: str, lineno: int) -> datetime:
    try:
        return datetime.strptime(text, WALLCLOCK_FORMAT)
    except ValueError:
        raise MalformedLine(lineno, "wallclock", f"unparseable timestamp {text!r}") from None


def parse_lines(lines: Sequence[str], source_name: str,
                sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Recording:
    lefts, rights = [], []
    row_labels = set()
    unlabeled_rows = 0
    prev_clock = None
    clock_cache: dict[str, datetime] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        wallclock, left, right, label = parse_line(line, lineno)
        clock = clock_cache.get(wallclock)
        if clock is None:
            clock = clock_cache[wallclock] = _parse_wallclock(wallclock, lineno)
        if prev_clock is not None and clock < prev_clock:
            raise ClockRegression(f"{source_name}: line {lineno}: wall clock goes backwards")
        prev_clock = clock
        lefts.append(left)
        rights.append(right)
        if label is None:
            unlabeled_rows += 1
        else:
            row_labels.add(label)

    if len(row_labels) > 1:
        names = ", ".join(sorted(lab.token for lab in row_labels))
        raise MixedLabels(f"{source_name}: label column holds several emotions ({names})")
    name_label = label_from_name(source_name)
    if row_labels and (unlabeled_rows == 0 or name_label is not None):
        # the label column wins over the file name
        label = row_labels.pop()
    elif name_label is not None:
        label = name_label
    else:
        raise LabelUndeterminable(
            f"{source_name}: no label column on every row and no emotion token in the file name")

    return Recording(synth_clock(len(lefts), sample_rate_hz), lefts, rights,
                     label, source_name, sample_rate_hz)


def load_recording(path, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Recording:
    path = Path(path)
    with open(path, encoding="latin-1", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    return parse_lines(lines, path.name, sample_rate_hz)


def format_wallclock(dt: datetime) -> str:
    # no zero padding on month, day or hour, as the headset writes it
    hour = dt.hour % 12 or 12
    ampm = "AM" if dt.hour < 12 else "PM"
    return f"{dt.month}/{dt.day}/{dt.year} {hour}:{dt.minute:02d}:{dt.second:02d} {ampm}"


def _format_value(v: float) -> str:
    return "-1" if v == SENTINEL else repr(float(v))


def format_rows(rec: Recording, start: datetime = datetime(2023, 3, 3, 6, 9, 33),
                with_label: bool = True) -> list[str]:
    """Render a recording back into the raw log row shape.

    The wall-clock column advances in whole seconds derived from each
    sample's synthesized ``t_ms``.
    """
    rows = []
    clocks: dict[int, str] = {}
    for t, left, right in zip(rec.t_ms.tolist(), rec.left_mm.tolist(), rec.right_mm.tolist()):
        sec = t // 1000
        if sec not in clocks:
            clocks[sec] = format_wallclock(start + timedelta(seconds=sec))
        row = f"{clocks[sec]},{_format_value(left)},{_format_value(right)}"
        if with_label:
            row += f", {rec.label.token}"
        rows.append(row)
    return rows


def write_recording(rec: Recording, path, **kwargs) -> None:
    rows = format_rows(rec, **kwargs)
    with open(path, "w", encoding="latin-1", newline="\n") as fh:
        for row in rows:
            fh.write(row + "\n")
