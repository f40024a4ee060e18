"""
One scenario per reproduced measurement. Each returns a results table, a
summary of derived numbers and a plotting callback.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from . import analysis, circuit, converter, detection, tables
from .config import ResolvedConfig
from .errors import ConfigError, DomainError, FitError
from .modes import Band

BANDS = (("visible", Band.VISIBLE), ("telecom", Band.TELECOM))

# stream-key prefixes, one per scenario
_KEY = {"conversion-curve": 1, "fringe": 2, "visibility-vs-power": 3,
        "noise-and-net-visibility": 4, "visibility-vs-alpha": 5, "fit": 6}


@dataclass
class Outcome:
    table: tables.Table
    summary: Dict[str, object]
    plot: Optional[Callable] = None
    fit: Optional[analysis.FitResult] = None
    notes: List[str] = field(default_factory=list)


def pump_grid(cfg: ResolvedConfig, default_points: int) -> np.ndarray:
    n = cfg.run.points or default_points
    if n == 1:
        return np.array([cfg.run.pump_min])
    return np.linspace(cfg.run.pump_min, cfg.run.pump_max, n)


def alpha_grid(cfg: ResolvedConfig, default_points: int) -> np.ndarray:
    n = cfg.run.points or default_points
    if n == 1:
        return np.array([cfg.run.alpha2_min])
    return np.geomspace(cfg.run.alpha2_min, cfg.run.alpha2_max, n)


def _nan_if_undefined(fn, *args):
    try:
        return fn(*args)
    except DomainError:
        return None


# --- conversion curve -------------------------------------------------------

def sample_conversion_counts(cfg: ResolvedConfig, powers, duration: float, seed, key=()):
    """Expected total rates and Poisson counts of both detectors at each pump power."""
    rows = circuit.conversion_curve(cfg.circuit, cfg.converter, powers)
    out = []
    for i, (P, vis, tel) in enumerate(rows):
        rng = detection.make_rng(seed, tuple(key) + (i,))
        out.append((P, vis, tel, int(rng.poisson(vis * duration)), int(rng.poisson(tel * duration))))
    return out


def _reference_count(cfg, samples, duration):
    zero = [s for s in samples if s[0] == 0.0]
    if zero:
        return float(zero[0][3])
    return circuit.conversion_curve(cfg.circuit, cfg.converter, [0.0])[0][1] * duration


def conversion_curve(cfg: ResolvedConfig, seed: int) -> Outcome:
    powers = pump_grid(cfg, 71)
    duration = cfg.run.duration
    samples = sample_conversion_counts(cfg, powers, duration, seed, (_KEY["conversion-curve"],))
    C0 = _reference_count(cfg, samples, duration)
    ratios = dict(analysis.transmittance_ratio([(P, v, t) for P, _, _, v, t in samples], C0))
    rows = []
    for P, vis, tel, nv, nt in samples:
        T, R = converter.efficiency(cfg.converter, P)
        rows.append((P, T, R, vis, tel, nv, nt, nv / C0, ratios.get(P, math.nan)))
    table = tables.make_table(
        ("pump_power", "T_model", "R_model", "visible_rate", "telecom_rate",
         "visible_counts", "telecom_counts", "T_obs", "ratio_tt_tv"), rows)
    tel_rate = table.column("telecom_rate")
    tel_counts = table.column("telecom_counts")
    finite = [r for r in ratios.values() if math.isfinite(r)]
    summary = {
        "peak_power_mw": float(powers[int(np.argmax(tel_rate))]),
        "peak_power_counts_mw": float(powers[int(np.argmax(tel_counts))]),
        "peak_power_model_mw": cfg.converter.peak_power,
        "reference_counts": C0,
        "ratio_tt_tv_mean": float(np.mean(finite)) if finite else None,
    }

    def plot(ax):
        ax.plot(powers, table.column("visible_counts"), "o", ms=3, color="tab:red",
                label="unconverted (780 nm)")
        ax.plot(powers, table.column("telecom_counts"), "^", ms=3, color="tab:green",
                label="converted (1522 nm)")
        ax.plot(powers, table.column("visible_rate") * duration, "-", color="tab:red", lw=1)
        ax.plot(powers, tel_rate * duration, "-", color="tab:green", lw=1)
        ax.set_xlabel("pump power (mW)")
        ax.set_ylabel(f"counts per {duration:g} s")
        ax.legend()

    return Outcome(table, summary, plot)


# --- conversion-curve fit ---------------------------------------------------

def fit(cfg: ResolvedConfig, seed: int) -> Outcome:
    notes = []
    if cfg.run.input_csv:
        data = tables.ingest(cfg.run.input_csv)
        P = data.column("pump_power").astype(float)
        vis = data.column("visible_counts")
        tel = data.column("telecom_counts") if "telecom_counts" in data.columns else None
        notes.append(f"fitted {cfg.run.input_csv}")
    else:
        powers = pump_grid(cfg, 10)
        samples = sample_conversion_counts(cfg, powers, cfg.run.duration, seed, (_KEY["fit"],))
        P = np.array([s[0] for s in samples])
        vis = np.array([s[3] for s in samples])
        tel = np.array([s[4] for s in samples])
        notes.append("fitted synthetic conversion-curve counts")
    zero = np.flatnonzero(P == 0)
    if len(zero) == 0:
        raise FitError("fit needs a P = 0 reference point")
    C0 = float(vis[zero[0]])
    if C0 <= 0:
        raise FitError("reference count at P = 0 is zero")
    T_obs = vis / C0
    result = analysis.fit_conversion_curve(list(zip(P, T_obs)), c0=C0)
    T_fit = analysis.conversion_model(P, result["A"], result["eta"])
    table = tables.make_table(("pump_power", "T_obs", "T_fit", "residual"),
                              zip(P, T_obs, T_fit, T_obs - T_fit))
    summary = result.as_dict()
    summary["peak_power_mw"] = analysis.peak_power(result)
    summary["reference_counts"] = C0
    if tel is not None:
        ratios = analysis.transmittance_ratio(list(zip(P, vis, tel)), C0)
        if ratios:
            summary["ratio_tt_tv_mean"] = float(np.mean([r for _, r in ratios]))
    Pf = np.linspace(0, max(P.max(), 1.0), 400)

    def plot(ax):
        ax.plot(P, T_obs, "o", color="tab:red", label="T observed")
        ax.plot(Pf, analysis.conversion_model(Pf, result["A"], result["eta"]), "-",
                color="tab:red", label=f"fit A={result['A']:.3f}, eta={result['eta']:.3g}/mW")
        ax.plot(P, 1 - T_obs, "^", color="tab:green", label="R = 1 - T")
        ax.set_xlabel("pump power (mW)")
        ax.set_ylabel("probability")
        ax.legend()

    return Outcome(table, summary, plot, fit=result, notes=notes)


# --- fringes ----------------------------------------------------------------

def _measure(cfg: ResolvedConfig, seed, key, **overrides) -> detection.FringeData:
    c = replace(cfg.circuit, **overrides)
    deltas = circuit.phase_grid(cfg.run.scan_points)
    return detection.measure_fringe(c, cfg.converter, deltas, cfg.run.duration, seed,
                                    key=key, bin_width=cfg.run.bin_width)


def fringe(cfg: ResolvedConfig, seed: int) -> Outcome:
    n = cfg.run.points or cfg.run.scan_points
    deltas = circuit.phase_grid(n)
    data = detection.measure_fringe(cfg.circuit, cfg.converter, deltas, cfg.run.duration,
                                    seed, key=(_KEY["fringe"],), bin_width=cfg.run.bin_width)
    rows = zip(deltas, data.middle[Band.VISIBLE], data.middle[Band.TELECOM],
               data.expected[Band.VISIBLE], data.expected[Band.TELECOM],
               data.background[Band.VISIBLE], data.background[Band.TELECOM])
    table = tables.make_table(
        ("phase", "visible_counts", "telecom_counts", "visible_expected", "telecom_expected",
         "visible_background", "telecom_background"), rows)
    summary = {}
    clipped_notes: List[str] = []
    for name, band in BANDS:
        grid = data.visibility(band)
        fitted = detection.fit_visibility(data.scan(band))
        net_V, _ = _net(data, band, clipped_notes, name)
        S = circuit.expected_middle_signal(cfg.circuit, cfg.converter, band)
        d = circuit.window_background(cfg.circuit, cfg.converter, band)
        summary.update({
            f"{name}_V": grid.V, f"{name}_sigma": grid.sigma,
            f"{name}_N_max": grid.N_max, f"{name}_N_min": grid.N_min,
            f"{name}_V_fit": fitted.V, f"{name}_V_fit_sigma": fitted.sigma,
            f"{name}_V_net": net_V,
            f"{name}_V_model": analysis.predict_visibility(1.0, S, 1.0, d),
        })

    def plot(ax):
        for name, band in BANDS:
            color = "tab:red" if band is Band.VISIBLE else "tab:green"
            ax.plot(deltas, data.middle[band], "o", color=color,
                    label=f"{name}, V={summary[name + '_V']:.3f}")
            ax.plot(deltas, data.expected[band], "-", color=color, lw=1)
        ax.set_xlabel("scan phase (rad)")
        ax.set_ylabel(f"middle-peak counts per {cfg.run.duration:g} s")
        ax.legend()

    return Outcome(table, summary, plot, notes=clipped_notes)


def _vis_or_nan(fn):
    try:
        est = fn()
        return est.V, est.sigma
    except DomainError:
        return math.nan, math.nan


def _net(data: detection.FringeData, band: Band, clipped: List[str], label: str):
    """Net visibility; background clipping is collected instead of warned."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        est = _vis_or_nan(lambda: data.net_visibility(band))
    if caught:
        clipped.append(f"{label}: background above N_min, clipped")
    return est


def visibility_vs_power(cfg: ResolvedConfig, seed: int) -> Outcome:
    powers = pump_grid(cfg, 15)
    rows = []
    for i, P in enumerate(powers):
        data = _measure(cfg, seed, (_KEY["visibility-vs-power"], i), pump_P=float(P))
        c = replace(cfg.circuit, pump_P=float(P))
        row = [P]
        for name, band in BANDS:
            V, s = _vis_or_nan(lambda: data.visibility(band))
            S = circuit.expected_middle_signal(c, cfg.converter, band)
            d = circuit.window_background(c, cfg.converter, band)
            model = _nan_if_undefined(analysis.predict_visibility, 1.0, S, 1.0, d)
            row += [V, s, math.nan if model is None else model]
        rows.append(row)
    table = tables.make_table(
        ("pump_power", "visible_V", "visible_sigma", "visible_V_model",
         "telecom_V", "telecom_sigma", "telecom_V_model"), rows)
    summary = {}
    for name, _ in BANDS:
        v = table.column(f"{name}_V")
        summary[f"{name}_V_min"] = float(np.nanmin(v)) if np.any(np.isfinite(v)) else None

    def plot(ax):
        for name, band in BANDS:
            color = "tab:red" if band is Band.VISIBLE else "tab:green"
            ax.errorbar(powers, table.column(f"{name}_V"), table.column(f"{name}_sigma"),
                        fmt="o", color=color, label=name)
            ax.plot(powers, table.column(f"{name}_V_model"), "-", color=color, lw=1)
        ax.set_xlabel("pump power (mW)")
        ax.set_ylabel("visibility")
        ax.legend()

    return Outcome(table, summary, plot)


def noise_and_net_visibility(cfg: ResolvedConfig, seed: int) -> Outcome:
    powers = pump_grid(cfg, 15)
    duration = cfg.run.duration
    rows = []
    notes: List[str] = []
    for i, P in enumerate(powers):
        data = _measure(cfg, seed, (_KEY["noise-and-net-visibility"], i), pump_P=float(P))
        row = [P]
        for name, band in BANDS:
            b, var = data.mean_background(band)
            V, s = _vis_or_nan(lambda: data.visibility(band))
            Vn, sn = _net(data, band, notes, f"{name} at {P:g} mW")
            row += [b, math.sqrt(var), V, s, Vn, sn]
        rows.append(row)
    cols = ["pump_power"]
    for name, _ in BANDS:
        cols += [f"{name}_background", f"{name}_background_sigma", f"{name}_V",
                 f"{name}_sigma", f"{name}_V_net", f"{name}_V_net_sigma"]
    table = tables.make_table(cols, rows)
    summary = {}
    fits = {}
    degrees = {"visible": cfg.run.degree if cfg.run.degree is not None else 2, "telecom": 1}
    for name, _ in BANDS:
        rate = table.column(f"{name}_background") / duration
        fits[name] = analysis.fit_noise_polynomial(list(zip(powers, rate)), degrees[name])
        for k, v in zip(fits[name].names, fits[name].values):
            summary[f"{name}_noise_{k}"] = float(v)
        for col in ("V", "V_net"):
            v = table.column(f"{name}_{col}")
            summary[f"{name}_{col}_min"] = float(np.nanmin(v)) if np.any(np.isfinite(v)) else None

    def plot(ax):
        Pf = np.linspace(powers.min(), powers.max(), 200)
        for name, band in BANDS:
            color = "tab:red" if band is Band.VISIBLE else "tab:green"
            ax.errorbar(powers, table.column(f"{name}_background") / duration,
                        table.column(f"{name}_background_sigma") / duration, fmt="o",
                        color=color, label=f"{name} background")
            ax.plot(Pf, analysis.evaluate_polynomial(fits[name], Pf)[0], "-", color=color, lw=1)
        ax.set_xlabel("pump power (mW)")
        ax.set_ylabel("background (counts/s per window)")
        ax.legend()

    return Outcome(table, summary, plot, notes=notes)


def visibility_vs_alpha(cfg: ResolvedConfig, seed: int) -> Outcome:
    alphas = alpha_grid(cfg, 13)
    duration = cfg.run.duration
    degree = cfg.run.degree if cfg.run.degree is not None else 2
    measured = []
    for i, a2 in enumerate(alphas):
        data = _measure(cfg, seed, (_KEY["visibility-vs-alpha"], i), alpha2=float(a2))
        measured.append(data)
    rows = [[a2] for a2 in alphas]
    summary = {}
    for name, band in BANDS:
        bg = np.array([m.mean_background(band)[0] for m in measured])
        bg_sd = np.sqrt([m.mean_background(band)[1] for m in measured])
        noise_fit = analysis.fit_noise_polynomial(list(zip(alphas, bg / duration)), degree)
        for k, v in zip(noise_fit.names, noise_fit.values):
            summary[f"{name}_noise_{k}"] = float(v)
        c = cfg.circuit
        T, R = converter.efficiency(cfg.converter, c.pump_P)
        T_all = c.T_in * (T if band is Band.VISIBLE else R) * c.transmittance(band)
        for i, (a2, m) in enumerate(zip(alphas, measured)):
            V, s = _vis_or_nan(lambda: m.visibility(band))
            d, d_sd = analysis.evaluate_polynomial(noise_fit, a2)
            d = max(d, 0.0)
            S = a2 * T_all * c.f_clock
            model = _nan_if_undefined(analysis.predict_visibility, a2, T_all, c.f_clock, d)
            model = math.nan if model is None else model
            model_sd = 2.0 * S / (S + 2.0 * d) ** 2 * d_sd if S + 2 * d > 0 else math.nan
            rows[i] += [V, s, bg[i], bg_sd[i], model, model_sd]
        v = np.array([r[-6] for r in rows])
        above = v[alphas > 0.01]
        summary[f"{name}_V_min_above_0.01"] = float(np.nanmin(above)) if len(above) else None
    cols = ["alpha2"]
    for name, _ in BANDS:
        cols += [f"{name}_V", f"{name}_sigma", f"{name}_background",
                 f"{name}_background_sigma", f"{name}_V_model", f"{name}_V_model_sigma"]
    table = tables.make_table(cols, rows)

    def plot(ax):
        for name, band in BANDS:
            color = "tab:red" if band is Band.VISIBLE else "tab:green"
            ax.errorbar(alphas, table.column(f"{name}_V"), table.column(f"{name}_sigma"),
                        fmt="o", color=color, label=name)
            ax.plot(alphas, table.column(f"{name}_V_model"), "-", color=color, lw=1)
        ax.set_xscale("log")
        ax.set_xlabel("|alpha|^2")
        ax.set_ylabel("visibility")
        ax.legend()

    return Outcome(table, summary, plot)


SCENARIOS = {
    "conversion-curve": conversion_curve,
    "fringe": fringe,
    "visibility-vs-power": visibility_vs_power,
    "noise-and-net-visibility": noise_and_net_visibility,
    "visibility-vs-alpha": visibility_vs_alpha,
    "fit": fit,
}


def run_scenario(name: str, cfg: ResolvedConfig, seed: int) -> Outcome:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}") from None
    return fn(cfg, seed)
