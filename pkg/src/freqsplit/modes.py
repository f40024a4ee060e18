"""
Coherent-state mode algebra.

Light is carried as complex coherent amplitudes over four labelled modes
(visible/telecom band x early/late time bin). The mean photon number of a
mode is the squared magnitude of its amplitude. All operations return new
states.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import IntEnum
from types import MappingProxyType
from typing import Iterator, Mapping

from .errors import DomainError

#: tolerance for exact algebraic identities
ALGEBRAIC_TOL = 1e-12
#: tolerance for quantities accumulated over many operations
ACCUMULATED_TOL = 1e-9


class Band(IntEnum):
    VISIBLE = 0  # 780 nm signal band
    TELECOM = 1  # 1522 nm converted band

    @property
    def wavelength_nm(self) -> float:
        return 780.0 if self is Band.VISIBLE else 1522.0


class TimeBin(IntEnum):
    EARLY = 0
    LATE = 1


@dataclass(frozen=True, order=True)
class ModeLabel:
    band: Band
    time_bin: TimeBin

    def __str__(self):
        return f"{self.band.name.lower()}/{self.time_bin.name.lower()}"


ALL_MODES = tuple(ModeLabel(b, t) for b in Band for t in TimeBin)


def mode(band: Band, time_bin: TimeBin) -> ModeLabel:
    return ModeLabel(Band(band), TimeBin(time_bin))


@dataclass(frozen=True)
class OpticalState:
    """Sparse map from mode label to complex amplitude; absent modes are vacuum."""

    amplitudes: Mapping[ModeLabel, complex] = field(default_factory=dict)

    def __post_init__(self):
        amps = {}
        for label, amp in dict(self.amplitudes).items():
            if not isinstance(label, ModeLabel):
                raise TypeError(f"mode label expected, got {label!r}")
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise DomainError(f"non-finite amplitude on {label}")
            if amp != 0:
                amps[label] = amp
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))

    def __getitem__(self, label: ModeLabel) -> complex:
        return self.amplitudes.get(label, 0j)

    def __iter__(self) -> Iterator[ModeLabel]:
        return iter(sorted(self.amplitudes))

    def __eq__(self, other):
        if not isinstance(other, OpticalState):
            return NotImplemented
        return dict(self.amplitudes) == dict(other.amplitudes)

    def __hash__(self):
        return hash(frozenset(self.amplitudes.items()))

    def replace(self, updates: Mapping[ModeLabel, complex]) -> "OpticalState":
        amps = dict(self.amplitudes)
        amps.update(updates)
        return OpticalState(amps)

    def total_photon_number(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def isclose(self, other: "OpticalState", tol: float = ALGEBRAIC_TOL) -> bool:
        labels = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self[m] - other[m]) <= tol for m in labels)


VACUUM = OpticalState()


def _check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


def apply_beamsplitter(state: OpticalState, a: ModeLabel, b: ModeLabel,
                       r: float, phi: float) -> OpticalState:
    """
    Mix modes ``a`` and ``b`` with reflectance ``r`` and phase ``phi``.

        b' = exp(-i phi) sqrt(r) a + sqrt(1-r) b
        a' = sqrt(1-r) a - exp(+i phi) sqrt(r) b

    The inverse is the same splitter with ``phi + pi``.
    """
    if a == b:
        raise DomainError("beamsplitter needs two distinct modes")
    r = _check_fraction(r, "reflectance")
    s = math.sqrt(r)
    c = math.sqrt(1.0 - r)
    return mix_pair(state, a, b, c, s, phi)


def mix_pair(state: OpticalState, a: ModeLabel, b: ModeLabel,
             c: float, s: float, phi: float) -> OpticalState:
    """Apply [[c, -e^{i phi} s], [e^{-i phi} s, c]] to (a, b); unitary iff c^2 + s^2 = 1."""
    if a == b:
        raise DomainError("two distinct modes required")
    amp_a, amp_b = state[a], state[b]
    new_a = c * amp_a - cmath.exp(1j * phi) * s * amp_b
    new_b = cmath.exp(-1j * phi) * s * amp_a + c * amp_b
    return state.replace({a: new_a, b: new_b})


def apply_phase(state: OpticalState, m: ModeLabel, delta: float) -> OpticalState:
    return state.replace({m: cmath.exp(1j * delta) * state[m]})


def apply_loss(state: OpticalState, m: ModeLabel, t: float) -> OpticalState:
    """Attenuate mode ``m`` to transmittance ``t``; a coherent state stays coherent."""
    t = _check_fraction(t, "transmittance")
    return state.replace({m: math.sqrt(t) * state[m]})


def mean_photon_number(state: OpticalState, m: ModeLabel) -> float:
    return abs(state[m]) ** 2
