"""
Time-bin interferometer around the converter.

The first unbalanced interferometer (S1/L1) makes two time bins; the
converter acts on each bin; per band, a second interferometer (S2/L2) with
the same 600 ps delay plus a +45 degree projection produces three arrival
peaks. The middle peak mixes the S1-L2 and L1-S2 paths and carries the
fringe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Dict, Iterable, List, Tuple

import numpy as np

from . import converter
from .converter import ConverterParams, REFERENCE_WINDOW
from .errors import DomainError
from .modes import (Band, ModeLabel, OpticalState, TimeBin, apply_loss, apply_phase)


class Peak(IntEnum):
    EARLY = 0   # S1-S2
    MIDDLE = 1  # S1-L2 and L1-S2, interfering
    LATE = 2    # L1-L2


@dataclass(frozen=True)
class CircuitConfig:
    alpha2: float = 0.1
    T_in: float = 0.3
    T_V: float = 0.1
    T_T: float = 0.15
    f_clock: float = 1e6
    f_rep: float = 82e6
    delay: float = 600e-12
    window: float = 200e-12
    pump_P: float = 165.0
    scan_phase: float = 0.0
    phase_offset: float = 0.0
    split_ratio: float = 0.5     # fraction of the input sent to the early bin
    mode_overlap: float = 1.0    # intrinsic visibility of the recombination
    dark_rate: float = 0.0       # detector dark counts, counts/s (ungated)

    def __post_init__(self):
        for name in ("T_in", "T_V", "T_T", "split_ratio", "mode_overlap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        if self.alpha2 < 0:
            raise DomainError("alpha2 must be non-negative")
        if self.pump_P < 0:
            raise DomainError("pump power must be non-negative")
        if self.f_clock <= 0 or self.f_rep <= 0:
            raise DomainError("clock frequencies must be positive")
        if self.dark_rate < 0:
            raise DomainError("dark count rate must be non-negative")
        if not 0 < self.window < self.delay < 1.0 / self.f_rep:
            raise DomainError("need 0 < window < delay < 1/f_rep")

    @property
    def slot(self) -> float:
        """Time between source pulses, s."""
        return 1.0 / self.f_rep

    def transmittance(self, band: Band) -> float:
        return self.T_V if band is Band.VISIBLE else self.T_T


@dataclass(frozen=True)
class PeakRates:
    """Expected signal counts/s per detector and peak, plus in-window background."""

    signal: Dict[Band, Dict[Peak, float]] = field(default_factory=dict)
    background: Dict[Band, float] = field(default_factory=dict)

    def __getitem__(self, key: Tuple[Band, Peak]) -> float:
        band, peak = key
        return self.signal[band][peak]

    def middle(self, band: Band, with_background: bool = False) -> float:
        rate = self.signal[band][Peak.MIDDLE]
        return rate + self.background[band] if with_background else rate


def build_input(alpha2: float, delta: float, split_ratio: float = 0.5) -> OpticalState:
    """Two visible time-bin pulses of mean photon number alpha2 each (balanced split)."""
    if alpha2 < 0:
        raise DomainError("alpha2 must be non-negative")
    total = 2.0 * alpha2
    state = OpticalState({
        ModeLabel(Band.VISIBLE, TimeBin.EARLY): math.sqrt(total * split_ratio),
        ModeLabel(Band.VISIBLE, TimeBin.LATE): math.sqrt(total * (1.0 - split_ratio)),
    })
    return apply_phase(state, ModeLabel(Band.VISIBLE, TimeBin.LATE), delta)


def recombine(early: complex, late: complex, overlap: float = 1.0) -> Dict[Peak, float]:
    """
    Mean photon numbers of the three peaks behind the second interferometer.

    Each arm of the balanced S2/L2 pair and the +45 degree projection pass
    amplitude 1/sqrt(2). ``overlap`` scales the cross term of the middle peak.
    """
    via_long = early / 2.0    # early bin through L2
    via_short = late / 2.0    # late bin through S2
    middle = (abs(via_long) ** 2 + abs(via_short) ** 2
              + 2.0 * overlap * (via_long.conjugate() * via_short).real)
    return {
        Peak.EARLY: abs(early / 2.0) ** 2,
        Peak.MIDDLE: max(middle, 0.0),
        Peak.LATE: abs(late / 2.0) ** 2,
    }


def output_state(config: CircuitConfig, params: ConverterParams) -> OpticalState:
    """State after input loss, conversion and band-dependent output loss."""
    state = build_input(config.alpha2, config.scan_phase - config.phase_offset,
                        config.split_ratio)
    for tb in TimeBin:
        state = apply_loss(state, ModeLabel(Band.VISIBLE, tb), config.T_in)
    state = converter.apply_conversion(state, params, config.pump_P)
    for band in Band:
        for tb in TimeBin:
            state = apply_loss(state, ModeLabel(band, tb), config.transmittance(band))
    return state


def window_background(config: CircuitConfig, params: ConverterParams, band: Band) -> float:
    """Background counts/s inside one post-selection window of the given detector."""
    noise = converter.background_rate(params, band, config.pump_P, config.alpha2)
    dark = config.dark_rate * config.window * config.f_clock
    return float(noise * config.window / REFERENCE_WINDOW + dark)


def propagate(config: CircuitConfig, params: ConverterParams) -> PeakRates:
    state = output_state(config, params)
    signal = {}
    background = {}
    for band in Band:
        peaks = recombine(state[ModeLabel(band, TimeBin.EARLY)],
                          state[ModeLabel(band, TimeBin.LATE)], config.mode_overlap)
        signal[band] = {p: config.f_clock * n for p, n in peaks.items()}
        background[band] = window_background(config, params, band)
    return PeakRates(signal, background)


def fringe_scan(config: CircuitConfig, params: ConverterParams,
                deltas: Iterable[float]) -> List[Tuple[float, PeakRates]]:
    deltas = list(deltas)
    if not deltas:
        raise DomainError("phase list must be non-empty")
    return [(d, propagate(replace(config, scan_phase=d), params)) for d in deltas]


def total_signal_rate(config: CircuitConfig, params: ConverterParams, band: Band) -> float:
    """Phase-averaged signal counts/s summed over all three peaks."""
    a = propagate(config, params)
    b = propagate(replace(config, scan_phase=config.scan_phase + math.pi), params)
    return (a[band, Peak.EARLY] + a[band, Peak.LATE]
            + 0.5 * (a[band, Peak.MIDDLE] + b[band, Peak.MIDDLE]))


def conversion_curve(config: CircuitConfig, params: ConverterParams,
                     powers: Iterable[float]) -> List[Tuple[float, float, float]]:
    """
    Total detected rates (visible, telecom) versus pump power.

    With balanced splitting these are f alpha2 T_in T(P) T_V and
    f alpha2 T_in R(P) T_T.
    """
    rows = []
    for P in powers:
        if P < 0:
            raise DomainError("pump power must be non-negative")
        cfg = replace(config, pump_P=float(P))
        rows.append((float(P), total_signal_rate(cfg, params, Band.VISIBLE),
                     total_signal_rate(cfg, params, Band.TELECOM)))
    return rows


def expected_middle_signal(config: CircuitConfig, params: ConverterParams, band: Band) -> float:
    """Closed form of the delta = 0 middle-peak rate, S = f alpha2 T_all."""
    T, R = converter.efficiency(params, config.pump_P)
    share = T if band is Band.VISIBLE else R
    return config.f_clock * config.alpha2 * config.T_in * share * config.transmittance(band)


def phase_grid(n: int) -> np.ndarray:
    """``n`` equally spaced scan phases over one period starting at 0."""
    if n < 2:
        raise DomainError("a scan needs at least two phases")
    return 2.0 * np.pi * np.arange(n) / n
