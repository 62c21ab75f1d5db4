"""Price series, synthetic generators, normalization, windowing and splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSeries,
    EmptySplit,
    InvalidSpec,
    MissingColumn,
    NonFiniteValue,
    NonMonotoneTimestamps,
    SeriesTooShort,
)

SYNTH_KINDS = ("constant", "sinusoid-trend-noise", "ar1-noise")


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray
    values: np.ndarray
    name: str = "series"

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vs = np.asarray(self.values, dtype=float)
        if vs.ndim != 1 or vs.size < 1:
            raise InvalidSpec("series must be a nonempty 1-d sequence")
        if ts.shape != vs.shape:
            raise InvalidSpec("timestamps and values differ in length")
        bad = np.flatnonzero(~np.isfinite(vs))
        if bad.size:
            raise NonFiniteValue(int(bad[0]) + 1)
        steps = np.flatnonzero(np.diff(ts) <= 0)
        if steps.size:
            raise NonMonotoneTimestamps(int(steps[0]) + 2)
        ts.setflags(write=False)
        vs.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class WindowSample:
    x: np.ndarray
    y: np.ndarray
    origin_index: int
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def target_indices(self) -> range:
        return range(self.origin_index + 1, self.origin_index + 1 + len(self.y))


@dataclass(frozen=True)
class DatasetSplits:
    train: list[WindowSample]
    calibration: list[WindowSample]
    test: list[WindowSample]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.calibration), len(self.test)


@dataclass(frozen=True)
class NormalizerStats:
    mean: float
    std: float

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.std)):
            raise DegenerateSeries(f"normalizer std must be positive, got {self.std}")


@dataclass(frozen=True)
class SynthSpec:
    kind: str = "sinusoid-trend-noise"
    length: int = 1000
    amplitude: float = 1.0
    period: float = 24.0
    trend_slope: float = 0.0
    noise_std: float = 0.0
    ar_coefficient: float = 0.5
    base: float = 100.0
    seed: int = 0
    name: str = "synthetic"

    def validate(self, min_length: int = 1) -> None:
        if self.kind not in SYNTH_KINDS:
            raise InvalidSpec(f"kind: unknown synthetic kind {self.kind!r}")
        if int(self.length) != self.length or self.length < 1:
            raise InvalidSpec(f"length: must be a positive integer, got {self.length}")
        if self.length <= min_length:
            raise InvalidSpec(f"length: {self.length} too short, need > {min_length}")
        if not self.noise_std >= 0:
            raise InvalidSpec(f"noise_std: must be >= 0, got {self.noise_std}")
        if self.kind == "sinusoid-trend-noise" and not self.period > 0:
            raise InvalidSpec(f"period: must be > 0, got {self.period}")
        if self.kind == "ar1-noise" and not abs(self.ar_coefficient) < 1:
            raise InvalidSpec(f"ar_coefficient: |phi| must be < 1, got {self.ar_coefficient}")
        for key in ("amplitude", "period", "trend_slope", "ar_coefficient", "base"):
            if not math.isfinite(getattr(self, key)):
                raise InvalidSpec(f"{key}: must be finite")


def load_csv(path: str | Path, value_column: str) -> PriceSeries:
    """Read a ``timestamp,<value_column>`` CSV. Rows are numbered from 1 after the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or value_column not in reader.fieldnames:
            raise MissingColumn(f"column {value_column!r} not found in {path}")
        if "timestamp" not in reader.fieldnames:
            raise MissingColumn(f"column 'timestamp' not found in {path}")
        ts, vs = [], []
        for row_no, row in enumerate(reader, start=1):
            try:
                v = float(row[value_column])
            except (TypeError, ValueError):
                raise NonFiniteValue(row_no, f"unparseable value in row {row_no}") from None
            if not math.isfinite(v):
                raise NonFiniteValue(row_no)
            t = int(row["timestamp"])
            if ts and t <= ts[-1]:
                raise NonMonotoneTimestamps(row_no)
            ts.append(t)
            vs.append(v)
    if not vs:
        raise InvalidSpec(f"{path} has no data rows")
    return PriceSeries(np.array(ts, dtype=np.int64), np.array(vs), name=path.stem)


def series_to_csv(series: PriceSeries, value_column: str = "price") -> str:
    # repr() keeps doubles round-trippable through load_csv
    lines = [f"timestamp,{value_column}"]
    lines += [f"{int(t)},{float(v)!r}" for t, v in zip(series.timestamps, series.values)]
    return "\n".join(lines) + "\n"


def write_csv(series: PriceSeries, path: str | Path, value_column: str = "price") -> None:
    Path(path).write_text(series_to_csv(series, value_column), encoding="utf-8")


def generate_synthetic(spec: SynthSpec) -> PriceSeries:
    spec.validate()
    n = int(spec.length)
    t = np.arange(n, dtype=float)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "constant":
        values = np.full(n, float(spec.amplitude))
    elif spec.kind == "sinusoid-trend-noise":
        values = (
            spec.amplitude * np.sin(2.0 * np.pi * t / spec.period)
            + spec.trend_slope * t
            + spec.base
        )
        if spec.noise_std > 0:
            values = values + rng.normal(0.0, spec.noise_std, size=n)
    else:
        phi = spec.ar_coefficient
        eps = rng.normal(0.0, spec.noise_std, size=n) if spec.noise_std > 0 else np.zeros(n)
        z = np.empty(n)
        # stationary start
        z[0] = eps[0] / math.sqrt(1.0 - phi * phi)
        for i in range(1, n):
            z[i] = phi * z[i - 1] + eps[i]
        values = spec.base + z
    return PriceSeries(np.arange(n, dtype=np.int64), values, name=spec.name)


def fit_normalizer(train_windows: Sequence[WindowSample], allow_degenerate: bool = False) -> NormalizerStats:
    """z-score statistics over the training lookbacks (population std).

    ``allow_degenerate`` turns the constant-series error into centering with std 1.
    """
    if not train_windows:
        raise EmptySplit("cannot fit a normalizer on an empty training split")
    xs = np.concatenate([w.x for w in train_windows])
    std = float(xs.std())
    if not std > 0:
        if allow_degenerate:
            return NormalizerStats(float(xs.mean()), 1.0)
        raise DegenerateSeries("training inputs are constant; z-score undefined")
    return NormalizerStats(float(xs.mean()), std)


def normalize(v, stats: NormalizerStats):
    if isinstance(v, WindowSample):
        return replace(v, x=normalize(v.x, stats), y=normalize(v.y, stats))
    return (np.asarray(v, dtype=float) - stats.mean) / stats.std if np.ndim(v) else (float(v) - stats.mean) / stats.std


def denormalize(v, stats: NormalizerStats):
    if isinstance(v, WindowSample):
        return replace(v, x=denormalize(v.x, stats), y=denormalize(v.y, stats))
    return np.asarray(v, dtype=float) * stats.std + stats.mean if np.ndim(v) else float(v) * stats.std + stats.mean


def make_windows(series: PriceSeries, M: int, H: int) -> list[WindowSample]:
    if M < 1 or H < 1:
        raise InvalidSpec(f"lookback and horizon must be >= 1, got M={M}, H={H}")
    n = len(series)
    if n < M + H:
        raise SeriesTooShort(f"series of length {n} cannot hold M+H={M + H} points")
    v = series.values
    out = []
    for start in range(n - M - H + 1):
        T = start + M - 1
        x = v[start : T + 1].copy()
        y = v[T + 1 : T + 1 + H].copy()
        out.append(WindowSample(x=x, y=y, origin_index=T))
    return out


def split_by_counts(
    windows: Sequence[WindowSample], counts: tuple[int, int, int], gap: int | None = None
) -> DatasetSplits:
    """Contiguous chronological split with ``gap`` windows purged at each boundary.

    ``gap`` defaults to H-1, the smallest purge that keeps target ranges of
    neighbouring splits disjoint for stride-1 windows.
    """
    ordered = sorted(windows, key=lambda w: w.origin_index)
    if gap is None:
        gap = len(ordered[0].y) - 1 if ordered else 0
    n_tr, n_ca, n_te = counts
    if min(counts) < 1:
        raise EmptySplit(f"split sizes {counts} leave a split empty")
    if n_tr + n_ca + n_te + 2 * gap > len(ordered):
        raise EmptySplit(f"need {n_tr + n_ca + n_te + 2 * gap} windows, have {len(ordered)}")
    a = n_tr
    b = a + gap
    c = b + n_ca
    d = c + gap
    return DatasetSplits(
        train=list(ordered[:a]),
        calibration=list(ordered[b:c]),
        test=list(ordered[d : d + n_te]),
    )


def split_chronological(
    windows: Sequence[WindowSample],
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2),
    gap: int | None = None,
) -> DatasetSplits:
    if len(fractions) != 3 or min(fractions) <= 0:
        raise InvalidSpec(f"fractions must be three positive numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidSpec(f"fractions must sum to 1, got {sum(fractions)}")
    if not windows:
        raise EmptySplit("no windows to split")
    if gap is None:
        gap = len(windows[0].y) - 1
    usable = len(windows) - 2 * gap
    n_tr = int(math.floor(fractions[0] * usable + 1e-9))
    n_ca = int(math.floor(fractions[1] * usable + 1e-9))
    n_te = usable - n_tr - n_ca
    if min(n_tr, n_ca, n_te) < 1:
        names = ("train", "calibration", "test")
        empty = names[[n_tr, n_ca, n_te].index(min(n_tr, n_ca, n_te))]
        raise EmptySplit(f"{empty} split would be empty with {len(windows)} windows")
    return split_by_counts(windows, (n_tr, n_ca, n_te), gap=gap)


def stack(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.stack([s.x for s in samples])
    Y = np.stack([s.y for s in samples])
    C = np.stack([np.asarray(s.c, dtype=float) for s in samples])
    return X, Y, C
