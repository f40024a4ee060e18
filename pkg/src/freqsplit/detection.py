"""
Gated photon counting: Poisson sampling of expected rates, TDC-style
histograms, 200 ps post-selection of the middle peak and visibility
estimation.

Seeding contract: every random stream is drawn from
``numpy.random.PCG64(SeedSequence(seed, spawn_key=key))`` where ``key`` is a
tuple of non-negative integers naming the stream (for a fringe scan,
``key + (point_index, detector)``). Streams therefore do not depend on the
order or the thread in which scan points are evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .circuit import CircuitConfig, Peak, PeakRates, fringe_scan
from .converter import ConverterParams
from .errors import DomainError
from .modes import Band

PEAK_LABELS = ("early", "middle", "late", "background")
SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def make_rng(seed: SeedLike, key: Sequence[int] = ()) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        seq = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    else:
        seq = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def sample_counts(rate: float, duration: float, seed: SeedLike = None) -> int:
    """Poisson counts with mean ``rate * duration``."""
    if not rate >= 0:
        raise DomainError(f"rate must be non-negative, got {rate}")
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration}")
    if rate == 0:
        return 0
    return int(make_rng(seed).poisson(rate * duration))


@dataclass(frozen=True)
class CountRecord:
    detector: Band
    peak: str
    duration: float
    counts: int

    def __post_init__(self):
        if self.peak not in PEAK_LABELS:
            raise DomainError(f"unknown peak label {self.peak!r}")
        if self.counts < 0 or int(self.counts) != self.counts:
            raise DomainError("counts must be a non-negative integer")
        if not self.duration > 0:
            raise DomainError("duration must be positive")


def acquire(rates: PeakRates, config: CircuitConfig, duration: float,
            seed: SeedLike = None, bands: Iterable[Band] = tuple(Band)) -> List[CountRecord]:
    """
    Sample one accumulation of both detectors.

    The background record holds counts over the whole inter-pulse slot,
    i.e. ``slot / window`` times the in-window background.
    """
    rng = make_rng(seed)
    records = []
    for band in bands:
        for peak in Peak:
            mean = rates[band, peak] * duration
            records.append(CountRecord(band, peak.name.lower(), duration, int(rng.poisson(mean))))
        bg_mean = rates.background[band] * (config.slot / config.window) * duration
        records.append(CountRecord(band, "background", duration, int(rng.poisson(bg_mean))))
    return records


@dataclass
class Histogram:
    """Counts versus arrival time within one source slot; times in seconds."""

    detector: Band
    duration: float
    edges: np.ndarray
    counts: np.ndarray
    peak_times: Tuple[float, float, float]

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def middle_time(self) -> float:
        return self.peak_times[1]

    def total(self) -> int:
        return int(self.counts.sum())


def histogram(records: Iterable[CountRecord], bin_width: float, *,
              delay: float = 600e-12, slot: float = 1.0 / 82e6,
              rng: Optional[np.random.Generator] = None) -> Histogram:
    """
    Bin peak-labelled records of one detector onto the gate-relative time axis.

    Peaks are point events at 0, ``delay`` and ``2 delay``. The bin width is
    adjusted so that a whole number of bins tiles one slot, with a bin edge
    on the middle peak. Background counts are scattered uniformly, by
    multinomial draw when ``rng`` is given and by an even deterministic
    spread otherwise.
    """
    if not bin_width > 0:
        raise DomainError("bin width must be positive")
    records = list(records)
    if not records:
        raise DomainError("no records to bin")
    detectors = {r.detector for r in records}
    durations = {r.duration for r in records}
    if len(detectors) != 1 or len(durations) != 1:
        raise DomainError("records must share one detector and one duration")
    if not 0 < 2 * delay < slot:
        raise DomainError("peaks must fit inside one slot")

    n = max(1, int(round(slot / bin_width)))
    width = slot / n
    t_mid = delay
    k0 = n // 2
    edges = t_mid + (np.arange(n + 1) - k0) * width
    counts = np.zeros(n, dtype=np.int64)
    peak_times = (0.0, delay, 2 * delay)
    lookup = dict(zip(("early", "middle", "late"), peak_times))

    for rec in records:
        if rec.peak == "background":
            if rng is not None:
                counts += rng.multinomial(rec.counts, np.full(n, 1.0 / n))
            else:
                base, rem = divmod(rec.counts, n)
                counts += base
                if rem:
                    counts[(np.arange(rem) * n) // rem] += 1
        else:
            idx = int(math.floor((lookup[rec.peak] - edges[0]) / width + 1e-9))
            counts[idx] += rec.counts
    return Histogram(records[0].detector, records[0].duration, edges, counts, peak_times)


def _bins_inside(hist: Histogram, lo: float, hi: float) -> np.ndarray:
    tol = 1e-6 * hist.bin_width
    return (hist.edges[:-1] >= lo - tol) & (hist.edges[1:] <= hi + tol)


def postselect_middle(hist: Histogram, window: float = 200e-12, strict: bool = True) -> int:
    """
    Counts in bins lying entirely inside ``window`` centred on the middle peak.

    With ``strict`` a window wider than the peak spacing is rejected, since
    it would admit the early and late peaks.
    """
    if not window > 0:
        raise DomainError("window must be positive")
    spacing = hist.peak_times[1] - hist.peak_times[0]
    if strict and window > spacing:
        raise DomainError(f"window {window:g} s exceeds the peak spacing {spacing:g} s")
    t = hist.middle_time
    return int(hist.counts[_bins_inside(hist, t - window / 2, t + window / 2)].sum())


def background_in_window(hist: Histogram, window: float = 200e-12,
                         guard: Optional[float] = None) -> Tuple[float, float]:
    """
    Background counts expected inside one window, estimated from bins far
    from all three peaks. Returns ``(estimate, variance)``.
    """
    if guard is None:
        guard = window
    keep = np.ones(len(hist.counts), dtype=bool)
    for t in hist.peak_times:
        lo, hi = hist.edges[:-1], hist.edges[1:]
        keep &= (hi <= t - guard) | (lo >= t + guard)
    used = keep.sum() * hist.bin_width
    if used <= 0:
        raise DomainError("no off-peak region left for background estimation")
    t = hist.middle_time
    # same bins as postselect_middle, so the estimate subtracts cleanly
    selected = _bins_inside(hist, t - window / 2, t + window / 2).sum() * hist.bin_width
    total = float(hist.counts[keep].sum())
    scale = selected / used
    return total * scale, total * scale ** 2


@dataclass(frozen=True)
class VisibilityEstimate:
    V: float
    sigma: float
    N_max: float
    N_min: float
    phase: Optional[float] = None


def visibility_sigma(n_max: float, n_min: float) -> float:
    """Delta-method standard deviation of V for independent Poisson counts."""
    total = n_max + n_min
    if total <= 0:
        raise DomainError("visibility undefined for zero counts")
    return 2.0 * math.sqrt(max(n_max * n_min, 0.0) / total ** 3)


def estimate_visibility(scan_counts: Iterable[Tuple[float, float]]) -> VisibilityEstimate:
    """Visibility from the largest and smallest counts over the scan grid."""
    pts = list(scan_counts)
    if len(pts) < 2:
        raise DomainError("need at least two scan points")
    counts = np.array([c for _, c in pts], dtype=float)
    if np.any(counts < 0):
        raise DomainError("counts must be non-negative")
    n_max, n_min = counts.max(), counts.min()
    if n_max + n_min <= 0:
        raise DomainError("visibility undefined: no counts")
    V = (n_max - n_min) / (n_max + n_min)
    return VisibilityEstimate(float(V), visibility_sigma(n_max, n_min), float(n_max), float(n_min))


def fit_visibility(scan_counts: Iterable[Tuple[float, float]]) -> VisibilityEstimate:
    """
    Visibility from a weighted sinusoid fit N = a + c cos(delta) + s sin(delta).

    Unlike the grid estimator this is not biased low when the scan grid
    misses the fringe extrema.
    """
    pts = list(scan_counts)
    if len(pts) < 3:
        raise DomainError("need at least three scan points for a sinusoid fit")
    delta = np.array([d for d, _ in pts], dtype=float)
    n = np.array([c for _, c in pts], dtype=float)
    X = np.column_stack([np.ones_like(delta), np.cos(delta), np.sin(delta)])
    w = 1.0 / np.maximum(n, 1.0)
    XtW = X.T * w
    cov = np.linalg.pinv(XtW @ X)
    a, c, s = cov @ (XtW @ n)
    if a <= 0:
        raise DomainError("fitted mean count is not positive")
    amp = math.hypot(c, s)
    V = amp / a
    # gradient of amp/a with respect to (a, c, s)
    if amp > 0:
        g = np.array([-amp / a ** 2, c / (amp * a), s / (amp * a)])
    else:
        g = np.array([0.0, 1.0 / a, 0.0])
    sigma = float(math.sqrt(max(g @ cov @ g, 0.0)))
    return VisibilityEstimate(float(V), sigma, float(a + amp), float(a - amp),
                              phase=float(math.atan2(s, c)))


@dataclass
class FringeData:
    """Post-selected middle-peak counts of a seeded fringe scan."""

    deltas: np.ndarray
    duration: float
    middle: Dict[Band, np.ndarray] = field(default_factory=dict)
    background: Dict[Band, np.ndarray] = field(default_factory=dict)
    background_var: Dict[Band, np.ndarray] = field(default_factory=dict)
    expected: Dict[Band, np.ndarray] = field(default_factory=dict)

    def scan(self, band: Band) -> List[Tuple[float, int]]:
        return list(zip(self.deltas.tolist(), self.middle[band].tolist()))

    def visibility(self, band: Band) -> VisibilityEstimate:
        return estimate_visibility(self.scan(band))

    def mean_background(self, band: Band) -> Tuple[float, float]:
        """Per-point background estimate averaged over the scan, with its variance."""
        b = self.background[band]
        return float(b.mean()), float(self.background_var[band].sum() / len(b) ** 2)

    def net_visibility(self, band: Band) -> VisibilityEstimate:
        from .analysis import net_visibility
        b, var = self.mean_background(band)
        vis = self.visibility(band)
        return net_visibility(vis.N_max, vis.N_min, b, b_var=var)


def measure_fringe(config: CircuitConfig, params: ConverterParams, deltas: Iterable[float],
                   duration: float, seed: SeedLike, key: Sequence[int] = (),
                   bin_width: float = 10e-12) -> FringeData:
    """
    Simulate a fringe scan end to end: expected rates, Poisson records,
    histogram per detector, 200 ps post-selection and off-peak background.
    """
    if not duration > 0:
        raise DomainError("duration must be positive")
    points = fringe_scan(config, params, deltas)
    data = FringeData(np.array([d for d, _ in points], dtype=float), duration)
    for band in Band:
        mids, bgs, bvars, exp = [], [], [], []
        for i, (_, rates) in enumerate(points):
            rng = make_rng(seed, tuple(key) + (i, int(band)))
            recs = acquire(rates, config, duration, rng, bands=(band,))
            hist = histogram(recs, bin_width, delay=config.delay, slot=config.slot, rng=rng)
            mids.append(postselect_middle(hist, config.window))
            b, v = background_in_window(hist, config.window)
            bgs.append(b)
            bvars.append(v)
            exp.append(rates.middle(band, with_background=True) * duration)
        data.middle[band] = np.array(mids, dtype=np.int64)
        data.background[band] = np.array(bgs)
        data.background_var[band] = np.array(bvars)
        data.expected[band] = np.array(exp)
    return data
