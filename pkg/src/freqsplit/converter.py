"""
Partial wavelength converter: a pump-tunable beamsplitter between the
visible and telecom bands of each time bin, plus pump-induced noise rates.

Noise rates are counts/s falling inside one 200 ps post-selection window
of the gated detector (see ``REFERENCE_WINDOW``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .modes import Band, ModeLabel, OpticalState, TimeBin, mix_pair

REFERENCE_WINDOW = 200e-12


@dataclass(frozen=True)
class ConverterParams:
    A: float = 0.94               # saturation of the conversion efficiency
    eta: float = 0.0044           # pump coupling, 1/mW
    phi_pump: float = 0.0         # pump phase, rad
    kappa_tel: float = 0.062      # telecom Raman noise, counts/s/mW
    kappa_vis2: float = 7.54e-6   # visible noise, counts/s/mW^2
    kappa_vis1: float = 0.0       # visible noise, counts/s/mW
    leak0: float = 0.6            # residual cw background, counts/s
    leak1: float = 145.0          # residual cw background, counts/s per unit |alpha|^2
    leak_tel_fraction: float = 0.14  # share of the converted cw background reaching telecom

    def __post_init__(self):
        if not 0.0 < self.A <= 1.0:
            raise DomainError(f"saturation A must lie in (0, 1], got {self.A}")
        if not self.eta > 0.0:
            raise DomainError(f"pump coupling eta must be positive, got {self.eta}")
        for name in ("kappa_tel", "kappa_vis2", "kappa_vis1", "leak0", "leak1",
                     "leak_tel_fraction"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be non-negative")

    @property
    def peak_power(self) -> float:
        """Pump power (mW) of maximum conversion, where sqrt(eta P) = pi/2."""
        return (math.pi / 2) ** 2 / self.eta


def _check_power(P):
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise DomainError("pump power must be finite and non-negative")
    return P


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def mixing_angle(params: ConverterParams, P):
    return np.sqrt(params.eta * _check_power(P))


def efficiency(params: ConverterParams, P):
    """Return ``(T, R)`` at pump power ``P`` (mW) with R = A sin^2(sqrt(eta P))."""
    theta = mixing_angle(params, P)
    R = params.A * np.sin(theta) ** 2
    T = 1.0 - R
    return _maybe_scalar(T), _maybe_scalar(R)


def conversion_coefficients(params: ConverterParams, P: float):
    """
    Signed (unconverted, converted) amplitude coefficients at power P.

    The converted coefficient is sqrt(A) sin(theta); the unconverted one has
    magnitude sqrt(1 - A sin^2 theta) and carries the sign of cos(theta), so
    A = 1 gives exactly (cos theta, sin theta).
    """
    theta = float(mixing_angle(params, P))
    s = math.sqrt(params.A) * math.sin(theta)
    c = math.copysign(math.sqrt(max(0.0, 1.0 - s * s)), math.cos(theta))
    return c, s


def conversion_matrix(params: ConverterParams, P: float) -> np.ndarray:
    """2x2 amplitude matrix acting on (visible, telecom) of one time bin."""
    c, s = conversion_coefficients(params, P)
    phase = np.exp(1j * params.phi_pump)
    return np.array([[c, -phase * s], [np.conj(phase) * s, c]])


def apply_conversion(state: OpticalState, params: ConverterParams, P: float) -> OpticalState:
    c, s = conversion_coefficients(params, P)
    for tb in TimeBin:
        state = mix_pair(state, ModeLabel(Band.VISIBLE, tb), ModeLabel(Band.TELECOM, tb),
                         c, s, params.phi_pump)
    return state


def noise_rate_telecom(params: ConverterParams, P):
    return _maybe_scalar(params.kappa_tel * _check_power(P))


def noise_rate_visible(params: ConverterParams, P):
    P = _check_power(P)
    return _maybe_scalar(params.kappa_vis2 * P ** 2 + params.kappa_vis1 * P)


def noise_rate_signal_leak(params: ConverterParams, alpha2):
    alpha2 = np.asarray(alpha2, dtype=float)
    if np.any(alpha2 < 0):
        raise DomainError("mean photon number must be non-negative")
    return _maybe_scalar(params.leak0 + params.leak1 * alpha2)


def background_rate(params: ConverterParams, band: Band, P, alpha2):
    """
    Total pump- and signal-induced background for one detector band.

    The residual cw background sits in the visible band; the fraction
    ``leak_tel_fraction`` of its converted share R(P) reaches the telecom
    detector.
    """
    leak = noise_rate_signal_leak(params, alpha2)
    if band is Band.VISIBLE:
        return _maybe_scalar(noise_rate_visible(params, P) + leak)
    _, R = efficiency(params, P)
    return _maybe_scalar(noise_rate_telecom(params, P) + params.leak_tel_fraction * R * leak)
