"""Traffic series loading, calendar features, windowing, splits and synthetic data."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ParseError, SpecError

SECONDS_PER_DAY = 86400
# 1970-01-01 was a Thursday; weekday index counts from Monday = 0.
EPOCH_WEEKDAY = 3
AR_COEFF = 0.8
EVENT_STEPS = 6


@dataclass
class TrafficSeries:
    values: np.ndarray
    start_timestamp: int = 0
    interval_seconds: int = 300
    node_ids: list = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParseError(f"series values must be steps x nodes, got shape {self.values.shape}")
        if np.isnan(self.values).any():
            row, col = np.argwhere(np.isnan(self.values))[0]
            raise ParseError(f"NaN value at row {row}, column {col}")
        if self.interval_seconds <= 0:
            raise ParseError("interval_seconds must be positive")
        if self.node_ids is None:
            self.node_ids = [str(i) for i in range(self.values.shape[1])]
        self.node_ids = [str(n) for n in self.node_ids]

    @property
    def steps(self):
        return self.values.shape[0]

    @property
    def num_nodes(self):
        return self.values.shape[1]

    @property
    def steps_per_day(self):
        return steps_per_day(self.interval_seconds)

    def calendar(self):
        """Time-of-day slot and weekday index (Monday = 0) for every step."""
        return calendar_indices(self.start_timestamp, self.interval_seconds, self.steps)


def steps_per_day(interval_seconds):
    if SECONDS_PER_DAY % interval_seconds:
        raise ParseError(f"interval {interval_seconds}s does not divide a day evenly")
    return SECONDS_PER_DAY // interval_seconds


def calendar_indices(start_timestamp, interval_seconds, steps):
    t = int(start_timestamp) + interval_seconds * np.arange(steps, dtype=np.int64)
    tod = (t % SECONDS_PER_DAY) // interval_seconds
    dow = (t // SECONDS_PER_DAY + EPOCH_WEEKDAY) % 7
    return tod.astype(np.int64), dow.astype(np.int64)


# -- file IO ---------------------------------------------------------------------


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, interval_seconds=300, start_timestamp=0):
    """Read a steps x nodes CSV with an optional header row of node ids."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    node_ids = None
    if any(_parse_float(c) is None for c in rows[0]):
        node_ids = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")
    width = len(node_ids) if node_ids else len(rows[0])
    offset = 1 if node_ids else 0
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {i + offset} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            v = _parse_float(cell)
            if v is None:
                raise ParseError(f"{path}: non-numeric cell {cell!r} at row {i + offset}, column {j}")
            values[i, j] = v
    if np.isnan(values).any():
        r, c = np.argwhere(np.isnan(values))[0]
        raise ParseError(f"{path}: NaN at row {r + offset}, column {c}")
    return TrafficSeries(values, start_timestamp, interval_seconds, node_ids)


def metadata_path(csv_path):
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


def load_series(csv_path):
    """Load a CSV and its ``<stem>.meta.json`` sidecar when present."""
    meta_file = metadata_path(csv_path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    return load_csv(
        csv_path,
        interval_seconds=int(meta.get("interval_seconds", 300)),
        start_timestamp=int(meta.get("start_timestamp", 0)),
    )


def save_series(series, csv_path, extra_meta=None):
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(series.node_ids)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])
    meta = {"start_timestamp": int(series.start_timestamp), "interval_seconds": int(series.interval_seconds)}
    if extra_meta:
        meta.update(extra_meta)
    metadata_path(csv_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def fingerprint(csv_path):
    h = hashlib.sha256(Path(csv_path).read_bytes())
    meta_file = metadata_path(csv_path)
    if meta_file.exists():
        h.update(meta_file.read_bytes())
    return h.hexdigest()


# -- normalization and windows ----------------------------------------------------


@dataclass
class Normalizer:
    """Z-score transform of the flow channel."""

    mean: float
    std: float
    fitted_on: str = "train"

    def __post_init__(self):
        if not self.std > 0:
            raise InsufficientDataError(f"normalizer std must be positive, got {self.std}")

    @classmethod
    def fit(cls, values, fitted_on="train"):
        values = np.asarray(values, dtype=np.float64)
        return cls(float(values.mean()), float(values.std()), fitted_on)

    def normalize(self, v):
        return (v - self.mean) / self.std

    def denormalize(self, v):
        return v * self.std + self.mean


@dataclass
class WindowBatch:
    """Inputs ``x`` (B,T,N,3), raw-unit targets ``y`` (B,H,N) and calendar indices (B,T)."""

    x: np.ndarray
    y: np.ndarray
    tod_index: np.ndarray
    dow_index: np.ndarray

    def __len__(self):
        return self.x.shape[0]

    @property
    def flow(self):
        return self.x[..., 0]


@dataclass
class WindowSet:
    """An ordered collection of stride-1 windows stored as stacked arrays."""

    x: np.ndarray
    y: np.ndarray
    tod_index: np.ndarray
    dow_index: np.ndarray
    start: np.ndarray
    node_ids: list = field(default_factory=list)

    def __len__(self):
        return self.x.shape[0]

    def subset(self, idx):
        return WindowSet(self.x[idx], self.y[idx], self.tod_index[idx], self.dow_index[idx],
                         self.start[idx], self.node_ids)

    def batch(self, idx=None):
        if idx is None:
            idx = slice(None)
        return WindowBatch(self.x[idx], self.y[idx], self.tod_index[idx], self.dow_index[idx])

    def batches(self, batch_size, rng=None):
        """Yield batches in order, or in a permutation drawn from ``rng``."""
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for lo in range(0, len(self), batch_size):
            yield self.batch(order[lo:lo + batch_size])


def make_windows(series, T, H, normalizer):
    """Cut every stride-1 window of ``T`` inputs followed by ``H`` targets."""
    if T < 1 or H < 1:
        raise InsufficientDataError(f"T and H must be positive, got T={T}, H={H}")
    count = series.steps - T - H + 1
    if count < 1:
        raise InsufficientDataError(f"{series.steps} steps cannot hold a window of T+H={T + H}")
    spd = series.steps_per_day
    tod, dow = series.calendar()
    starts = np.arange(count)
    in_idx = starts[:, None] + np.arange(T)
    out_idx = starts[:, None] + T + np.arange(H)
    flow = normalizer.normalize(series.values[in_idx])
    x = np.empty(flow.shape + (3,))
    x[..., 0] = flow
    x[..., 1] = (tod[in_idx] / spd)[..., None]
    x[..., 2] = (dow[in_idx] / 7.0)[..., None]
    return WindowSet(x, series.values[out_idx].copy(), tod[in_idx], dow[in_idx], starts, list(series.node_ids))


def split_sizes(count):
    if count < 5:
        raise InsufficientDataError(f"need at least 5 windows to split 6:2:2, got {count}")
    n_train = int(np.floor(0.6 * count))
    n_val = int(np.floor(0.2 * count))
    return n_train, n_val, count - n_train - n_val


def split_6_2_2(windows):
    """Chronological train/val/test split; leftover windows go to test."""
    n_train, n_val, _ = split_sizes(len(windows))
    return (windows.subset(slice(0, n_train)),
            windows.subset(slice(n_train, n_train + n_val)),
            windows.subset(slice(n_train + n_val, None)))


@dataclass
class DatasetSplits:
    train: WindowSet
    val: WindowSet
    test: WindowSet
    normalizer: Normalizer
    steps_per_day: int
    node_ids: list

    def get(self, name):
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def prepare_splits(series, T, H, normalizer=None):
    """Window and split ``series``.

    Without a ``normalizer`` one is fitted on the steps covered by training
    windows; pass a stored one to reproduce a trained model's input scaling.
    """
    count = series.steps - T - H + 1
    if count < 1:
        raise InsufficientDataError(f"{series.steps} steps cannot hold a window of T+H={T + H}")
    n_train, _, _ = split_sizes(count)
    if normalizer is None:
        normalizer = Normalizer.fit(series.values[: n_train - 1 + T + H])
    train, val, test = split_6_2_2(make_windows(series, T, H, normalizer))
    return DatasetSplits(train, val, test, normalizer, series.steps_per_day, list(series.node_ids))


# -- synthetic data ---------------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Clustered periodic traffic with AR(1) noise and sparse event pulses.

    ``base_level`` keeps flows positive and ``start_timestamp`` anchors the
    calendar; both extend the minimal field set so generated data behaves
    like vehicle counts.
    """

    N: int = 6
    steps: int = 288 * 4
    interval_seconds: int = 300
    cluster_assignment: list = None
    daily_amplitude: float = 50.0
    weekly_amplitude: float = 5.0
    noise_std: float = 0.0
    event_rate: float = 0.0
    event_magnitude: float = 0.0
    seed: int = 0
    base_level: float = 100.0
    start_timestamp: int = 0

    def __post_init__(self):
        if self.cluster_assignment is None:
            self.cluster_assignment = [0] * self.N
        self.cluster_assignment = [int(c) for c in self.cluster_assignment]

    def validate(self):
        if self.N < 2:
            raise SpecError(f"need at least 2 nodes, got N={self.N}")
        if len(self.cluster_assignment) != self.N:
            raise SpecError(f"cluster_assignment has {len(self.cluster_assignment)} entries for N={self.N}")
        if min(self.cluster_assignment) < 0:
            raise SpecError("cluster ids must be non-negative")
        if self.num_clusters > 8:
            raise SpecError("at most 8 clusters keep latent phases pi/4 apart")
        if self.daily_amplitude <= 0 or self.weekly_amplitude <= 0:
            raise SpecError("daily_amplitude and weekly_amplitude must be positive")
        if self.noise_std < 0 or self.event_rate < 0 or self.event_magnitude < 0:
            raise SpecError("noise_std, event_rate and event_magnitude must be non-negative")
        if self.steps < 1:
            raise SpecError("steps must be positive")
        if self.interval_seconds <= 0 or SECONDS_PER_DAY % self.interval_seconds:
            raise SpecError("interval_seconds must divide a day evenly")

    @property
    def num_clusters(self):
        return max(self.cluster_assignment) + 1

    def cluster_phases(self):
        k = self.num_clusters
        return 2 * np.pi * np.arange(k) / k

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


def generate_synthetic(spec, return_components=False):
    """Generate a :class:`TrafficSeries` that is a pure function of ``spec``.

    Node ``n`` in cluster ``c`` gets
    ``base + daily * sin(2 pi tod + phase_c) + weekly * sin(2 pi week_frac)``
    plus AR(1) noise and half-cosine event pulses.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    t = spec.start_timestamp + spec.interval_seconds * np.arange(spec.steps, dtype=np.int64)
    tod_frac = (t % SECONDS_PER_DAY) / SECONDS_PER_DAY
    week_frac = ((t // SECONDS_PER_DAY + EPOCH_WEEKDAY) % 7 + tod_frac) / 7.0
    phases = spec.cluster_phases()[np.asarray(spec.cluster_assignment)]
    periodic = (spec.base_level
                + spec.daily_amplitude * np.sin(2 * np.pi * tod_frac[:, None] + phases[None, :])
                + spec.weekly_amplitude * np.sin(2 * np.pi * week_frac)[:, None])

    noise = np.zeros((spec.steps, spec.N))
    if spec.noise_std > 0:
        innov = rng.normal(0.0, spec.noise_std, size=(spec.steps, spec.N))
        noise[0] = innov[0] / np.sqrt(1 - AR_COEFF**2)
        for s in range(1, spec.steps):
            noise[s] = AR_COEFF * noise[s - 1] + innov[s]

    events = np.zeros((spec.steps, spec.N))
    if spec.event_rate > 0 and spec.event_magnitude > 0:
        per_step = spec.event_rate / steps_per_day(spec.interval_seconds)
        arrivals = rng.poisson(per_step, size=(spec.steps, spec.N)).astype(np.float64)
        pulse = spec.event_magnitude * np.sin(np.pi * (np.arange(EVENT_STEPS) + 0.5) / EVENT_STEPS)
        for k, amp in enumerate(pulse):
            events[k:] += amp * arrivals[: spec.steps - k]

    values = periodic + noise + events
    series = TrafficSeries(values, spec.start_timestamp, spec.interval_seconds,
                           [f"n{i}" for i in range(spec.N)])
    if return_components:
        return series, {"periodic": periodic, "noise": noise, "events": events}
    return series
