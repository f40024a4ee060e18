"""
Parameter estimation and model prediction.

The conversion curve T(P) = 1 - A sin^2(sqrt(eta P)) is fitted with a
damped Gauss-Newton (Levenberg-Marquardt) iteration using its analytic
Jacobian. Damping follows Marquardt's scaled scheme: the normal matrix
J^T J gets ``lam * diag(J^T J)`` added, ``lam`` starts at 1e-3, is divided
by 3 after an accepted step and multiplied by 10 after a rejected one.
Iteration stops once the relative step falls below 1e-10 or after 100
iterations.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .detection import VisibilityEstimate
from .errors import DomainError, FitError

log = logging.getLogger(__name__)

XTOL = 1e-10
MAX_ITER = 100
A_MAX = 1.05
T_OBS_SLACK = 0.1


@dataclass
class FitResult:
    names: Tuple[str, ...]
    values: np.ndarray
    errors: np.ndarray
    rss: float
    converged: bool
    iterations: int
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    covariance: Optional[np.ndarray] = None
    history: List[float] = field(default_factory=list)
    message: str = ""

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.errors[self.names.index(name)])

    @property
    def reliable(self) -> bool:
        return self.converged

    def as_dict(self) -> dict:
        out = {}
        for n, v, e in zip(self.names, self.values, self.errors):
            out[n] = float(v)
            out[f"{n}_err"] = float(e)
        out.update(rss=float(self.rss), converged=bool(self.converged),
                   iterations=int(self.iterations))
        return out


# --- conversion curve -------------------------------------------------------

def conversion_model(P, A, eta):
    return 1.0 - A * np.sin(np.sqrt(eta * np.asarray(P, dtype=float))) ** 2


def conversion_jacobian(P, A, eta) -> np.ndarray:
    """Columns d/dA and d/d(eta) of the T(P) model."""
    P = np.asarray(P, dtype=float)
    x = np.sqrt(eta * P)
    dA = -np.sin(x) ** 2
    # A sin(2x) P / (2x), written with sinc to stay finite at P = 0
    deta = -A * P * np.sinc(2.0 * x / np.pi)
    return np.column_stack([dA, deta])


def levenberg_marquardt(residual: Callable[[np.ndarray], np.ndarray],
                        jacobian: Callable[[np.ndarray], np.ndarray],
                        x0: Sequence[float],
                        project: Callable[[np.ndarray], np.ndarray] = lambda x: x,
                        xtol: float = XTOL, max_iter: int = MAX_ITER):
    """
    Minimise ``sum(residual(x)**2)``.

    Returns ``(x, converged, iterations, history)``; ``history`` holds the
    objective after every accepted step and is non-increasing.
    """
    x = project(np.asarray(x0, dtype=float))
    r = residual(x)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        J = jacobian(x)
        g = J.T @ r
        H = J.T @ J
        if cost == 0.0 or np.max(np.abs(g)) <= 1e-300:
            converged = True
            break
        scale = np.maximum(np.diag(H), 1e-300)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(H + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = project(x + step)
            r_new = residual(x_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no downhill step left at any damping: we sit at the minimum
            converged = True
            break
        step = x_new - x
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            converged = True
            break
    return x, converged, it, history


def _initial_guess(P: np.ndarray, T: np.ndarray) -> Tuple[float, float]:
    A0 = float(np.clip(1.0 - T.min(), 0.05, A_MAX))
    order = np.argsort(P)
    below = [p for p, t in zip(P[order], T[order]) if p > 0 and t < 1.0 - A0 / 2.0]
    P_half = below[0] if below else P.max()
    # half of the saturated depth is reached at sqrt(eta P) = pi/4
    return A0, (math.pi / 4) ** 2 / P_half


def fit_conversion_curve(points: Iterable[Tuple[float, float]], weights=None,
                         c0: Optional[float] = None, x0=None,
                         max_iter: int = MAX_ITER) -> FitResult:
    """
    Fit (A, eta) of T(P) = 1 - A sin^2(sqrt(eta P)).

    ``weights`` are per-point inverse variances. If omitted and ``c0`` (the
    P = 0 reference count) is given, Poisson weights ``c0 / T`` are used and
    the reported errors are absolute; otherwise points are weighted equally
    and errors are scaled by the reduced chi-square.
    """
    pts = list(points)
    if len(pts) < 3:
        raise FitError("need at least three (P, T) points")
    P = np.array([p for p, _ in pts], dtype=float)
    T = np.array([t for _, t in pts], dtype=float)
    if np.any(P < 0):
        raise DomainError("pump powers must be non-negative")
    if np.all(P == 0):
        raise FitError("degenerate data: all pump powers are zero")
    if np.any(T < 0) or np.any(T > 1 + T_OBS_SLACK):
        raise DomainError("observed T outside [0, 1 + slack]")

    absolute = weights is not None or c0 is not None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != P.shape or np.any(w < 0):
            raise DomainError("weights must be non-negative, one per point")
    elif c0 is not None:
        w = c0 / np.maximum(T, 1.0 / c0)
    else:
        w = np.ones_like(P)
    sw = np.sqrt(w)

    def residual(x):
        return sw * (T - conversion_model(P, *x))

    def jacobian(x):
        return -sw[:, None] * conversion_jacobian(P, *x)

    def project(x):
        return np.array([min(max(x[0], 1e-9), A_MAX), max(x[1], 1e-15)])

    start = _initial_guess(P, T) if x0 is None else tuple(x0)
    x, converged, it, history = levenberg_marquardt(residual, jacobian, start, project,
                                                      max_iter=max_iter)
    r = residual(x)
    rss = float(r @ r)
    J = jacobian(x)
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
        converged = False
    if not absolute:
        dof = len(P) - 2
        cov = cov * (rss / dof if dof > 0 else 0.0)
    errors = np.sqrt(np.abs(np.diag(cov)))
    msg = "converged" if converged else f"no convergence after {it} iterations"
    return FitResult(("A", "eta"), x, errors, rss, converged, it,
                     residuals=T - conversion_model(P, *x), covariance=cov,
                     history=history, message=msg)


def peak_power(fit: FitResult) -> float:
    """Pump power (same units as the fit) of maximum conversion."""
    return (math.pi / 2) ** 2 / fit["eta"]


# --- noise polynomials ------------------------------------------------------

def fit_noise_polynomial(points: Iterable[Tuple[float, float]], degree: int = 2,
                         weights=None) -> FitResult:
    """
    Least-squares polynomial d(x) = c0 + c1 x + ... of the given degree,
    constrained to be non-negative at the sampled x.
    """
    pts = list(points)
    if degree < 0:
        raise DomainError("degree must be non-negative")
    if len(pts) < degree + 1:
        raise FitError(f"underdetermined: {len(pts)} points for degree {degree}")
    x = np.array([p for p, _ in pts], dtype=float)
    y = np.array([d for _, d in pts], dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    scale = float(np.max(np.abs(x))) or 1.0
    V = np.vander(x / scale, degree + 1, increasing=True)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(V * sw[:, None], y * sw, rcond=None)
    converged = True
    message = "linear least squares"
    if np.any(V @ coef < 0):
        res = minimize(lambda c: float(np.sum(w * (V @ c - y) ** 2)), coef,
                       jac=lambda c: 2.0 * V.T @ (w * (V @ c - y)),
                       constraints=[{"type": "ineq", "fun": lambda c: V @ c,
                                     "jac": lambda c: V}],
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        coef = res.x
        converged = bool(res.success)
        message = "constrained: " + str(res.message)
    resid = y - V @ coef
    rss = float(np.sum(w * resid ** 2))
    dof = len(x) - (degree + 1)
    VtWV = (V * w[:, None]).T @ V
    cov = np.linalg.pinv(VtWV) * (rss / dof if dof > 0 else 0.0)
    unscale = scale ** -np.arange(degree + 1, dtype=float)
    coef = coef * unscale
    cov = cov * np.outer(unscale, unscale)
    names = tuple(f"c{k}" for k in range(degree + 1))
    return FitResult(names, coef, np.sqrt(np.abs(np.diag(cov))), rss, converged, 1,
                     residuals=resid, covariance=cov, message=message)


def evaluate_polynomial(fit: FitResult, x):
    """Value and standard deviation of a fitted polynomial at ``x``."""
    x = np.asarray(x, dtype=float)
    V = np.vander(np.atleast_1d(x), len(fit.values), increasing=True)
    value = V @ fit.values
    var = np.einsum("ij,jk,ik->i", V, fit.covariance, V)
    value, sd = value, np.sqrt(np.maximum(var, 0.0))
    if x.ndim == 0:
        return float(value[0]), float(sd[0])
    return value, sd


# --- visibility -------------------------------------------------------------

def predict_visibility(alpha2, T_all, f_clock, d):
    """V = S / (S + 2 d) with signal rate S = alpha2 T_all f_clock."""
    args = [np.asarray(a, dtype=float) for a in (alpha2, T_all, f_clock, d)]
    if any(np.any(a < 0) for a in args):
        raise DomainError("visibility model arguments must be non-negative")
    alpha2, T_all, f_clock, d = args
    S = alpha2 * T_all * f_clock
    denom = S + 2.0 * d
    if np.any(denom <= 0):
        raise DomainError("visibility undefined: no signal and no noise")
    V = S / denom
    return float(V) if V.ndim == 0 else V


def net_visibility(N_max: float, N_min: float, b: float, b_var: float = 0.0) -> VisibilityEstimate:
    """
    Visibility after subtracting background ``b`` (counts per window) from
    both extremes. ``b`` above ``N_min`` is clipped to ``N_min``.
    """
    if b < 0:
        raise DomainError("background must be non-negative")
    if b > N_min:
        warnings.warn(f"background {b:g} exceeds N_min {N_min:g}; clipped", RuntimeWarning,
                      stacklevel=2)
        b = N_min
    D = N_max + N_min - 2.0 * b
    if D <= 0:
        raise DomainError("net visibility undefined: no counts above background")
    num = N_max - N_min
    V = num / D
    d_max = 2.0 * (N_min - b) / D ** 2
    d_min = -2.0 * (N_max - b) / D ** 2
    d_b = 2.0 * num / D ** 2
    var = d_max ** 2 * N_max + d_min ** 2 * N_min + d_b ** 2 * b_var
    return VisibilityEstimate(float(V), float(math.sqrt(var)), float(N_max - b), float(N_min - b))


# --- transmittance ratio ----------------------------------------------------

def transmittance_ratio(points: Iterable[Tuple[float, float, float]], C0: float,
                        min_efficiency: float = 1e-6) -> List[Tuple[float, float]]:
    """
    T_T / T_V at each pump power from unconverted and converted counts.

    With R = 1 - visible/C0 the ratio is telecom / (C0 R). Points at P <= 0
    or with R below ``min_efficiency`` are skipped.
    """
    if not C0 > 0:
        raise DomainError("reference count C0 must be positive")
    out = []
    for P, vis, tel in points:
        if P <= 0:
            log.info("transmittance ratio: skipping P=%g (no conversion)", P)
            continue
        R = 1.0 - vis / C0
        if R < min_efficiency:
            log.info("transmittance ratio: skipping P=%g, conversion efficiency %.3g", P, R)
            continue
        out.append((float(P), float(tel / (C0 * R))))
    return out
