"""Sliding-window feature extraction.

Each window yields 25 features per eye (10 time-domain, 7 spectral,
8 time-frequency) plus 3 cross-eye statistics, 53 columns in all. Column
names follow ``{le|re|xy}_{time|freq|tf}_{name}``.

Spectral features come from a Welch estimate (Hann taper, per-segment mean
removal, one-sided density in mm^2/Hz). Bands are [0, 0.5), [0.5, 1),
[1, 2) and [2, 4) Hz.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from pupilemo.errors import DegenerateWindow, EmptyOutput, InputError, TooShort
from pupilemo.labels import EmotionLabel
from pupilemo.preprocess import CleanSeries

log = logging.getLogger(__name__)

BANDS = ((0.0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0))
BAND_NAMES = ("bp_0_05", "bp_05_1", "bp_1_2", "bp_2_4")
SPECTRUM_MAX_HZ = 4.0
N_SUBWINDOWS = 4
MIN_SUBWINDOW = 64

TIME_NAMES = ("mean", "std", "kurtosis", "min", "max", "range", "median",
              "mean_abs_diff", "std_diff", "skewness")
FREQ_NAMES = BAND_NAMES + ("total_power", "peak_freq", "spectral_entropy")
TF_NAMES = tuple(f"{b}_{stat}" for b in BAND_NAMES for stat in ("mean", "std"))
CROSS_NAMES = ("cov", "corr", "mean_diff")

# features the source method names explicitly; the rest widen the catalog
_CORE = {"mean", "std", "kurtosis", "cov"} | set(BAND_NAMES) | {"total_power"}

_DOMAIN_PREFIX = {"time": "time", "freq": "freq", "timefreq": "tf"}
_PREFIX_DOMAIN = {v: k for k, v in _DOMAIN_PREFIX.items()}
_EYE_PREFIX = {"LE": "le", "RE": "re", "cross": "xy"}
_PREFIX_EYE = {v: k for k, v in _EYE_PREFIX.items()}


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    eye: str       # LE, RE or cross
    domain: str    # time, freq or timefreq
    tier: str      # core or extended


def descriptor_from_name(name: str) -> FeatureDescriptor:
    try:
        eye_p, dom_p, stat = name.split("_", 2)
        eye, domain = _PREFIX_EYE[eye_p], _PREFIX_DOMAIN[dom_p]
    except (ValueError, KeyError):
        raise InputError(f"feature name {name!r} is not of the form <eye>_<domain>_<stat>") from None
    tier = "core" if stat in _CORE else "extended"
    return FeatureDescriptor(name, eye, domain, tier)


def _build_catalog() -> tuple[FeatureDescriptor, ...]:
    names = []
    for eye in ("le", "re"):
        names += [f"{eye}_time_{n}" for n in TIME_NAMES]
        names += [f"{eye}_freq_{n}" for n in FREQ_NAMES]
        names += [f"{eye}_tf_{n}" for n in TF_NAMES]
    names += [f"xy_time_{n}" for n in CROSS_NAMES]
    return tuple(descriptor_from_name(n) for n in names)


CATALOG = _build_catalog()
FEATURE_NAMES = tuple(d.name for d in CATALOG)


@dataclass(frozen=True)
class WindowConfig:
    window_s: float = 5.0
    hop_s: float = 2.5
    min_fill: float = 0.8

    def validate(self, sample_rate_hz: float) -> None:
        if not 0 < self.hop_s <= self.window_s:
            raise ValueError("need 0 < hop_s <= window_s")
        if not 0 < self.min_fill <= 1:
            raise ValueError("min_fill must lie in (0, 1]")
        if self.window_s * sample_rate_hz < 64:
            raise ValueError("window must hold at least 64 samples")


@dataclass(frozen=True)
class Window:
    start_ms: float
    t_ms: np.ndarray
    left: np.ndarray
    right: np.ndarray


def make_windows(series: CleanSeries, cfg: WindowConfig = WindowConfig()) -> list[Window]:
    """Cut a clean series into time-based windows ``[start, start + window_s)``.

    Starts are ``k * hop_s``; a window is kept only if it still holds at
    least ``min_fill`` of its nominal sample count after artifact removal.
    """
    fs = series.sample_rate_hz
    cfg.validate(fs)
    window_ms = cfg.window_s * 1000.0
    hop_ms = cfg.hop_s * 1000.0
    need = cfg.min_fill * cfg.window_s * fs - 1e-9
    t = series.t_ms
    out = []
    k = 0
    while k * hop_ms + window_ms <= series.span_ms + 1e-6:
        start = k * hop_ms
        lo = np.searchsorted(t, start, side="left")
        hi = np.searchsorted(t, start + window_ms, side="left")
        if hi - lo >= need:
            out.append(Window(start, t[lo:hi], series.left_mm[lo:hi], series.right_mm[lo:hi]))
        k += 1
    return out


def _central_moments(x: np.ndarray):
    d = x - x.mean()
    d2 = d * d
    return d2.mean(), (d2 * d).mean(), (d2 * d2).mean()


def time_features(values) -> np.ndarray:
    """Ten time-domain statistics of one eye's window.

    Order: mean, std (N-1), kurtosis (m4/m2^2, non-excess), min, max,
    range, median, mean |first difference|, std of first differences (N-1),
    skewness (m3/m2^1.5).
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 3:
        raise TooShort(f"time features need at least 3 samples, got {x.size}")
    if x.max() == x.min():
        raise DegenerateWindow("constant window: kurtosis and skewness undefined")
    m2, m3, m4 = _central_moments(x)
    dx = np.diff(x)
    lo, hi = x.min(), x.max()
    return np.array([
        x.mean(), x.std(ddof=1), m4 / (m2 * m2), lo, hi, hi - lo, np.median(x),
        np.abs(dx).mean(), dx.std(ddof=1), m3 / m2 ** 1.5,
    ])


def cross_features(left, right) -> np.ndarray:
    """Covariance (N-1), Pearson correlation and mean(left - right)."""
    a = np.asarray(left, dtype=np.float64)
    b = np.asarray(right, dtype=np.float64)
    if a.shape != b.shape or a.size < 3:
        raise TooShort("cross features need paired windows of at least 3 samples")
    if a.max() == a.min() or b.max() == b.min():
        raise DegenerateWindow("constant eye: correlation undefined")
    da, db = a - a.mean(), b - b.mean()
    cov = (da * db).sum() / (a.size - 1)
    corr = (da * db).sum() / math.sqrt((da * da).sum() * (db * db).sum())
    return np.array([cov, min(1.0, max(-1.0, corr)), (a - b).mean()])


def hann(n: int) -> np.ndarray:
    """Periodic Hann taper of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _periodograms(segments: np.ndarray, fs: float) -> np.ndarray:
    """One-sided, mean-removed, Hann-tapered densities for each row."""
    n = segments.shape[-1]
    w = hann(n)
    x = (segments - segments.mean(axis=-1, keepdims=True)) * w
    p = np.abs(np.fft.rfft(x, axis=-1)) ** 2 / (fs * (w * w).sum())
    if n % 2 == 0:
        p[..., 1:-1] *= 2.0
    else:
        p[..., 1:] *= 2.0
    return p


def welch_psd(values, fs: float, seg_len: int = 256, overlap: float = 0.5):
    """Welch power spectral density.

    Parameters
    ----------
    values : array_like
        Uniformly sampled series (gaps left by artifact removal are ignored).
    fs : float
        Sample rate in Hz.
    seg_len : int
        Segment length in samples, a power of two.
    overlap : float
        Fractional overlap between consecutive segments.

    Returns
    -------
    freqs, psd : ndarray
        Bin centers in Hz and the averaged one-sided density, so that
        ``psd.sum() * fs / seg_len`` approximates the signal variance.
    """
    x = np.asarray(values, dtype=np.float64)
    if seg_len < 2 or seg_len & (seg_len - 1):
        raise ValueError("seg_len must be a power of two")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    if x.size < seg_len:
        raise TooShort(f"need at least {seg_len} samples, got {x.size}")
    step = seg_len - int(round(overlap * seg_len))
    starts = np.arange(0, x.size - seg_len + 1, step)
    segments = np.stack([x[s:s + seg_len] for s in starts])
    psd = _periodograms(segments, fs).mean(axis=0)
    return np.fft.rfftfreq(seg_len, 1.0 / fs), psd


def _band_powers(freqs, psd, df) -> np.ndarray:
    return np.array([psd[(freqs >= lo) & (freqs < hi)].sum() * df for lo, hi in BANDS])


def freq_features(values, fs: float, seg_len: int = 256) -> np.ndarray:
    """Band powers, total 0-4 Hz power, peak frequency and spectral entropy (bits)."""
    freqs, psd = welch_psd(values, fs, seg_len)
    df = fs / seg_len
    bands = _band_powers(freqs, psd, df)
    in_range = freqs < SPECTRUM_MAX_HZ
    p = psd[in_range]
    total = p.sum() * df
    if total <= 0.0:
        return np.concatenate([bands, [0.0, 0.0, 0.0]])
    peak = freqs[in_range][int(np.argmax(p))]  # argmax picks the lowest bin on ties
    q = p / p.sum()
    q = q[q > 0]
    entropy = float(-(q * np.log2(q)).sum())
    return np.concatenate([bands, [total, peak, entropy]])


def timefreq_features(values, fs: float) -> np.ndarray:
    """Mean and std (N-1) of each band's power over four equal sub-windows.

    Sub-windows split the surviving samples into four near-equal runs; each
    gets a single Hann periodogram.
    """
    x = np.asarray(values, dtype=np.float64)
    chunks = np.array_split(x, N_SUBWINDOWS)
    if min(c.size for c in chunks) < MIN_SUBWINDOW:
        raise TooShort(f"sub-windows need at least {MIN_SUBWINDOW} samples each")
    per_chunk = []
    for c in chunks:
        psd = _periodograms(c, fs)
        freqs = np.fft.rfftfreq(c.size, 1.0 / fs)
        per_chunk.append(_band_powers(freqs, psd, fs / c.size))
    bp = np.array(per_chunk)            # (4 chunks, 4 bands)
    out = np.empty(2 * len(BANDS))
    out[0::2] = bp.mean(axis=0)
    out[1::2] = bp.std(axis=0, ddof=1)
    return out


def eye_features(values, fs: float) -> np.ndarray:
    return np.concatenate([time_features(values), freq_features(values, fs),
                           timefreq_features(values, fs)])


def window_features(win: Window, fs: float) -> np.ndarray:
    return np.concatenate([eye_features(win.left, fs), eye_features(win.right, fs),
                           cross_features(win.left, win.right)])


@dataclass(eq=False)
class FeatureMatrix:
    X: np.ndarray
    labels: np.ndarray
    catalog: tuple[FeatureDescriptor, ...] = CATALOG
    provenance: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.catalog = tuple(self.catalog)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.shape != (len(self.labels), len(self.catalog)):
            raise ValueError(f"matrix shape {self.X.shape} does not match "
                             f"{len(self.labels)} labels x {len(self.catalog)} features")
        if self.provenance and len(self.provenance) != len(self.labels):
            raise ValueError("provenance length does not match the row count")
        if not np.isfinite(self.X).all():
            raise ValueError("feature matrix holds non-finite values")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.catalog]

    def columns(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(self.X[:, idx], self.labels,
                             tuple(self.catalog[i] for i in idx), list(self.provenance))

    def columns_by_name(self, names: Iterable[str]) -> "FeatureMatrix":
        lookup = {n: i for i, n in enumerate(self.names)}
        try:
            return self.columns([lookup[n] for n in names])
        except KeyError as e:
            raise InputError(f"feature {e.args[0]!r} not in matrix") from None

    def rows(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        prov = [self.provenance[i] for i in idx] if self.provenance else []
        return FeatureMatrix(self.X[idx], self.labels[idx], self.catalog, prov)


def extract(series_list: Sequence[CleanSeries], cfg: WindowConfig = WindowConfig()) -> FeatureMatrix:
    """Featurize every window of every series, in input order.

    Windows where an eye is constant are dropped and counted in the log.
    """
    rows, labels, prov = [], [], []
    dropped = 0
    for series in series_list:
        for win in make_windows(series, cfg):
            try:
                rows.append(window_features(win, series.sample_rate_hz))
            except DegenerateWindow:
                dropped += 1
                continue
            labels.append(int(series.label))
            prov.append((series.source_name, win.start_ms))
    if dropped:
        log.info("dropped %d degenerate window(s)", dropped)
    if not rows:
        raise EmptyOutput("no window survived feature extraction")
    return FeatureMatrix(np.vstack(rows), np.array(labels), CATALOG, prov)


def write_matrix(fm: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + fm.names)
        for lab, row in zip(fm.labels.tolist(), fm.X.tolist()):
            w.writerow([EmotionLabel(lab).token] + [repr(v) for v in row])


def read_matrix(path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty feature file") from None
        if not header or header[0] != "label":
            raise InputError(f"{path}: first column must be 'label'")
        catalog = tuple(descriptor_from_name(n) for n in header[1:])
        labels, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise InputError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                labels.append(int(EmotionLabel.from_token(rec[0])))
                rows.append([float(v) for v in rec[1:]])
            except ValueError as e:
                raise InputError(f"{path}: line {lineno}: {e}") from None
    return FeatureMatrix(np.array(rows).reshape(len(labels), len(catalog)), np.array(labels), catalog)
