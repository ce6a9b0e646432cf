"""Inverse problems: spectral fits, coupling calibration, cooling-sweep analysis.

Fits go through the damped Gauss-Newton engine in `leastsq`; kappa and
delta_tilde stay fixed by default because they are measured independently
with a probe tone at each drive power, but any subset of
{g, kappa, delta_tilde, gamma_m, n_m_T, n_c, n_add_eff} may be freed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .device import DeviceParams, bose_occupancy, zero_point_motion
from .dynamics import (
    DriveConfig,
    CoolingPoint,
    ThermalState,
    coupling_rate,
    drive_power_for_photons,
    final_occupancy,
    sideband_rates,
    total_linewidth,
    transmitted_power,
)
from .errors import DegenerateFitError, ParameterError, PeakDetectionError, UnitError
from .leastsq import LeastSquaresResult, fit_weighted
from .limits import imprecision_from_chain
from .spectra import (
    ModelParams,
    SpectrumTrace,
    SpectrumUnit,
    _trapezoid,
    output_noise_values,
    peak_area,
)

TWO_PI = 2.0 * math.pi

FULL_MODEL_PARAMS = (
    "g",
    "kappa",
    "kappa_ex",
    "gamma_m",
    "delta_tilde",
    "n_m_T",
    "n_c",
    "n_add_eff",
    "beta",
    "omega_m",
)
FREEABLE_PARAMS = frozenset(
    {"g", "kappa", "delta_tilde", "gamma_m", "n_m_T", "n_c", "n_add_eff"}
)
DEFAULT_FREE = ("n_m_T", "n_c", "g", "n_add_eff")
_LINEAR_PARAMS = frozenset({"delta_tilde"})  # everything else is positive -> log scale


@dataclass(frozen=True)
class FitResult:
    """Estimates, 1-sigma errors and diagnostics of one spectral fit.

    sigmas and covariance are present only for converged fits; covariance is
    ordered like param_names.
    """

    params: dict[str, float]
    sigmas: dict[str, float] | None
    residual_rms: float
    converged: bool
    n_iter: int
    param_names: tuple[str, ...]
    covariance: np.ndarray | None = None
    at_bound: tuple[str, ...] = ()
    step_costs: tuple[tuple[float, float], ...] = ()
    message: str = ""

    def to_json(self, indent: int | None = 2) -> str:
        payload = {
            "params": self.params,
            "sigmas": self.sigmas,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "at_bound": list(self.at_bound),
            "message": self.message,
        }
        return json.dumps(payload, indent=indent)


def _wrap_result(res: LeastSquaresResult, names: Sequence[str]) -> FitResult:
    params = {name: float(v) for name, v in zip(names, res.params)}
    sigmas = None
    if res.converged and res.sigmas is not None:
        sigmas = {name: float(s) for name, s in zip(names, res.sigmas)}
    at_bound = tuple(n for n, flag in zip(names, res.at_bound) if flag) if res.at_bound is not None else ()
    return FitResult(
        params=params,
        sigmas=sigmas,
        residual_rms=res.residual_rms,
        converged=res.converged,
        n_iter=res.n_iter,
        param_names=tuple(names),
        covariance=res.covariance if res.converged else None,
        at_bound=at_bound,
        step_costs=tuple(res.step_costs),
        message=res.message,
    )


# --- Lorentzian peak fit -------------------------------------------------------

def lorentzian_model(freq_hz: np.ndarray, center: float, fwhm: float, area: float, floor: float) -> np.ndarray:
    """floor + Lorentzian with unit-normalized area (peak height 2 area/(pi fwhm))."""
    x = 2.0 * (freq_hz - center) / fwhm
    return floor + (2.0 * area / (math.pi * fwhm)) / (1.0 + x * x)


def fit_lorentzian(trace: SpectrumTrace, n_avg: float | None = None) -> FitResult:
    """Weighted least-squares fit of floor + Lorentzian to a single peak.

    Initialization: center at the (leftmost) maximal bin, floor at the trace
    median, width from the half-max crossings, area from the trapezoid.
    Raises PeakDetectionError when no peak clears 3 noise sigmas.
    """
    summary = peak_area(trace)  # also enforces the SNR >= 3 precondition
    freq = trace.freq_hz
    vals = trace.values
    floor0 = float(np.median(vals))
    center0 = float(freq[int(np.argmax(vals))])
    fwhm0 = summary.fwhm_hz
    area0 = max(float(_trapezoid(vals - floor0, freq)), 1e-300)
    if n_avg is None:
        n_avg = float(trace.meta.get("n_avg", 1))

    names = ("center_hz", "fwhm_hz", "area", "floor")
    p0 = np.array([center0, fwhm0, area0, floor0])
    log_scale = (False, True, True, False)
    height0 = float(np.max(vals)) - floor0
    scales = (fwhm0, 1.0, 1.0, max(abs(floor0), 0.01 * height0, 1e-300))

    def model(p: np.ndarray) -> np.ndarray:
        return lorentzian_model(freq, *p)

    res = fit_weighted(model, vals, p0, log_scale, names, n_avg=n_avg, scales=scales)
    return _wrap_result(res, names)


# --- full output-spectrum fit ----------------------------------------------

def _initial_full_model_guesses(
    trace: SpectrumTrace, fixed: Mapping[str, float], free: Sequence[str]
) -> list[dict[str, float]]:
    """Heuristic starting points for the free parameters of the full model.

    Returns two readings of the spectrum: the excess attributed to the
    mechanical sideband (weak/moderate drive) and to cavity thermal noise
    (high drive, where the kappa-wide hump dominates).
    """
    vals = trace.values
    freq = trace.freq_hz
    kappa = fixed.get("kappa")
    gamma_m = fixed.get("gamma_m")
    beta = fixed.get("beta")
    kappa_ex = fixed.get("kappa_ex")

    if kappa is None:
        # a freed kappa still has to exceed the (fixed) external coupling
        kappa = 1.5 * kappa_ex if kappa_ex is not None else TWO_PI * 1e5
    floor0 = float(np.median(vals))
    base: dict[str, float] = {
        "n_add_eff": max(floor0 - 0.5, 1e-3),
        "n_c": 1e-2,
        "delta_tilde": 0.0,
        "kappa": kappa,
        "gamma_m": gamma_m if gamma_m is not None else TWO_PI * 10.0,
    }
    kappa_eff = base["kappa"]
    gamma_m_eff = base["gamma_m"]
    beta_eff = beta if beta is not None else 0.5
    kex_eff = kappa_ex if kappa_ex is not None else 0.5 * kappa_eff

    g0 = 0.5 * math.sqrt(kappa_eff * gamma_m_eff)
    n_m_T0 = 1.0
    height = 0.0
    try:
        summary = peak_area(trace)
        split = _two_peak_separation_hz(freq, vals - summary.floor, summary.sigma_floor)
        if split is not None:
            g0 = math.pi * split  # normal modes separated by ~2g
        else:
            gamma_opt0 = max(TWO_PI * summary.fwhm_hz - gamma_m_eff, 1e-3 * gamma_m_eff)
            g0 = 0.5 * math.sqrt(kappa_eff * gamma_opt0)
        gamma_opt0 = 4.0 * g0 * g0 / kappa_eff
        denom = beta_eff * (kex_eff / kappa_eff) * gamma_opt0 * gamma_m_eff
        if denom > 0.0:
            n_m_T0 = max(summary.area * TWO_PI * (gamma_m_eff + gamma_opt0) / denom, 1e-3)
        height = max(float(np.max(vals)) - summary.floor, 0.0)
    except PeakDetectionError:
        pass

    mech_reading = dict(base, g=g0, n_m_T=n_m_T0)
    # cavity reading: hump height ~ 4 beta (kappa_ex/kappa) n_c near g -> 0
    n_c0 = max(height * kappa_eff / (4.0 * beta_eff * kex_eff), 1e-2)
    cavity_reading = dict(base, g=g0, n_m_T=1.0, n_c=n_c0)
    return [mech_reading, cavity_reading]


def _two_peak_separation_hz(
    freq: np.ndarray, excess: np.ndarray, sigma_floor: float
) -> float | None:
    """Separation of two resolved normal-mode maxima, or None for one peak.

    Works on a boxcar-smoothed trace so periodogram noise cannot mimic a
    splitting; both maxima must clear half the global maximum and 6 smoothed
    noise sigmas, with a genuine valley between them.
    """
    n = excess.size
    win = max(3, n // 200)
    smooth = np.convolve(excess, np.ones(win) / win, mode="same")
    peak = float(np.max(smooth))
    if peak <= 0.0:
        return None
    threshold = max(0.5 * peak, 6.0 * sigma_floor / math.sqrt(win))
    idx = [
        i
        for i in range(1, n - 1)
        if smooth[i] >= smooth[i - 1] and smooth[i] > smooth[i + 1] and smooth[i] > threshold
    ]
    if len(idx) < 2:
        return None
    # two strongest candidates, in frequency order
    lo, hi = sorted(sorted(idx, key=lambda i: -smooth[i])[:2])
    if hi - lo < 2 * win:
        return None
    valley = float(np.min(smooth[lo : hi + 1]))
    if valley > 0.6 * min(smooth[lo], smooth[hi]):
        return None
    return float(freq[hi] - freq[lo])


def fit_full_model(
    trace: SpectrumTrace,
    fixed: Mapping[str, float],
    free: Sequence[str] = DEFAULT_FREE,
    init: Mapping[str, float] | None = None,
    n_avg: float | None = None,
) -> FitResult:
    """Fit the exact output-spectrum model to a quanta-unit trace.

    `fixed` holds the pinned parameter values; `free` (default
    {n_m_T, n_c, g, n_add_eff}) are estimated.  Together they must cover the
    full parameter set of the model.  Results flagged `at_bound` had a
    positive parameter collapse against zero.
    """
    if trace.unit is not SpectrumUnit.QUANTA:
        raise UnitError(f"full-model fit needs a quanta trace, got {trace.unit.value}")
    free = tuple(free)
    bad = set(free) - FREEABLE_PARAMS
    if bad:
        raise ParameterError(f"cannot free parameters: {sorted(bad)}")
    if len(set(free)) != len(free):
        raise ParameterError("duplicate names in free")
    overlap = set(free) & set(fixed)
    if overlap:
        raise ParameterError(f"parameters both fixed and free: {sorted(overlap)}")
    covered = set(free) | set(fixed)
    missing = set(FULL_MODEL_PARAMS) - covered
    if missing:
        raise ParameterError(f"model parameters neither fixed nor free: {sorted(missing)}")

    delta = TWO_PI * trace.freq_hz - fixed["omega_m"]
    guesses = _initial_full_model_guesses(trace, fixed, free)
    log_scale = [name not in _LINEAR_PARAMS for name in free]
    kappa_scale = float(fixed.get("kappa", guesses[0]["kappa"]))
    scales = [kappa_scale if name == "delta_tilde" else 1.0 for name in free]
    fixed_values = {k: float(v) for k, v in fixed.items()}

    def model(p: np.ndarray) -> np.ndarray:
        kwargs = dict(fixed_values)
        kwargs.update(zip(free, p))
        return output_noise_values(delta, ModelParams(**kwargs))

    if n_avg is None:
        n_avg = float(trace.meta.get("n_avg", 1))

    # The cost surface has spurious basins (e.g. the mechanical line
    # collapsing below the bin width with g -> 0), so the fit is restarted
    # from several deterministic guesses; the lowest cost under common
    # data-derived weights wins, with informed starts listed first.
    candidates: list[dict[str, float]] = []
    if init:
        for base in guesses:
            candidates.append({**base, **init})
    candidates.extend(dict(base) for base in guesses)
    for factor in (4.0, 0.25):
        scaled = dict(guesses[0])
        scaled["g"] = guesses[0]["g"] * factor
        candidates.append(scaled)

    # cross-candidate comparison under common, data-derived weights
    sigma_ref = np.maximum(np.abs(trace.values), 1e-300) / math.sqrt(n_avg)

    best: LeastSquaresResult | None = None
    best_score: tuple[bool, float] | None = None
    first_error: Exception | None = None
    seen: set[tuple[float, ...]] = set()
    for cand in candidates:
        p0 = np.array([cand[name] for name in free], dtype=float)
        key = tuple(p0)
        if key in seen:
            continue
        seen.add(key)
        try:
            res = fit_weighted(
                model, trace.values, p0, log_scale, free, n_avg=n_avg, scales=scales
            )
        except DegenerateFitError as exc:
            if first_error is None:
                first_error = exc
            continue
        ref_resid = (trace.values - res.model) / sigma_ref
        score = (res.converged, -0.5 * float(ref_resid @ ref_resid))
        if best_score is None or score > best_score:
            best, best_score = res, score
    if best is None:
        raise first_error if first_error is not None else ParameterError("no viable start")
    return _wrap_result(best, free)


# --- temperature-sweep calibration of G ------------------------------------

@dataclass(frozen=True)
class CalibrationPoint:
    temperature: float
    occupancy: float
    area: float
    area_sigma: float
    excluded: bool = False


@dataclass(frozen=True)
class CalibrationResult:
    """Coupling strength from the thermal-noise area vs occupancy regression."""

    G: float
    G_sigma: float
    linearity_r2: float
    intercept_quanta: float
    slope: float
    slope_sigma: float
    points: tuple[CalibrationPoint, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.G_sigma > 0.0:
            raise ParameterError("G_sigma must be > 0")
        if not -1e-12 <= self.linearity_r2 <= 1.0 + 1e-12:
            raise ParameterError(f"r^2 out of [0, 1]: {self.linearity_r2!r}")

    def to_json(self, indent: int | None = 2) -> str:
        payload = asdict(self)
        payload["points"] = [asdict(p) for p in self.points]
        payload["warnings"] = list(self.warnings)
        return json.dumps(payload, indent=indent)


def _weighted_line(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted straight-line fit; returns slope, intercept, their sigmas, r^2."""
    sw = float(np.sum(w))
    xm = float(np.sum(w * x)) / sw
    ym = float(np.sum(w * y)) / sw
    sxx = float(np.sum(w * (x - xm) ** 2))
    if sxx <= 0.0:
        raise ParameterError("calibration abscissa is degenerate")
    slope = float(np.sum(w * (x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    dof = max(x.size - 2, 1)
    chi2 = float(np.sum(w * resid * resid))
    # scale parameter errors by sqrt(chi2/dof) so under/over-stated point
    # sigmas do not distort the quoted uncertainty
    scale2 = chi2 / dof
    slope_sigma = math.sqrt(scale2 / sxx)
    intercept_sigma = math.sqrt(scale2 * (1.0 / sw + xm * xm / sxx))
    ss_tot = float(np.sum(w * (y - ym) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0.0 else 1.0
    return slope, intercept, slope_sigma, intercept_sigma, r2, resid


def calibrate_coupling(
    sweep: Sequence[tuple[float, SpectrumTrace]],
    device: DeviceParams,
    drive: DriveConfig,
) -> CalibrationResult:
    """Extract G from thermal-noise areas measured across bath temperatures.

    Per-trace sideband areas (raw power units) regress linearly on the Bose
    occupancy at each cryostat temperature; the slope equals the
    detected-power equivalent of the equipartition area x_zp^2(2n+1), which
    pins G given the drive power reaching the output.  Points more than 5
    sigma off the line are excluded and the regression repeated.
    """
    if len(sweep) < 4:
        raise ParameterError(f"need at least 4 temperatures, got {len(sweep)}")
    warnings_: list[str] = []

    n_d = drive.photons(device)
    g = coupling_rate(device.coupling, device.mech, n_d)
    _, _, gamma_opt = sideband_rates(
        g, device.cavity.kappa, drive.detuning, device.mech.omega_m
    )
    if gamma_opt > 0.1 * device.mech.gamma_m:
        warnings_.append(
            "calibration drive is not weak: radiation-pressure damping alters the areas"
        )

    temps = []
    occup = []
    areas = []
    area_sigmas = []
    for temperature, trace in sweep:
        summary = peak_area(trace)
        temps.append(temperature)
        occup.append(bose_occupancy(temperature, device.mech.omega_m))
        areas.append(summary.area)
        area_sigmas.append(summary.area_sigma)

    x = np.asarray(occup)
    y = np.asarray(areas)
    s = np.asarray(area_sigmas)
    weights = 1.0 / (s * s) if np.all(s > 0.0) else np.ones_like(y)

    include = np.ones(x.size, dtype=bool)
    while True:
        slope, intercept, slope_sigma, intercept_sigma, r2, resid = _weighted_line(
            x[include], y[include], weights[include]
        )
        # robust (median-based) residual scale so one wild point cannot
        # widen its own exclusion fence
        resid_scale = 1.4826 * float(np.median(np.abs(resid - np.median(resid))))
        if resid_scale <= 0.0 or np.sum(include) <= 4:
            break
        full_resid = y - (slope * x + intercept)
        outliers = include & (np.abs(full_resid) > 5.0 * resid_scale)
        if not np.any(outliers):
            break
        worst = int(np.argmax(np.where(outliers, np.abs(full_resid), -np.inf)))
        include[worst] = False
        warnings_.append(f"excluded >5 sigma outlier at T={temps[worst]:.4g} K")

    if slope <= 0.0:
        raise ParameterError("no thermal response: regression slope is not positive")
    if r2 < 0.99:
        warnings_.append(f"r^2={r2:.4f} < 0.99: mechanical mode may not thermalize")
    if intercept < -2.0 * intercept_sigma:
        warnings_.append("fitted intercept negative beyond 2 sigma")

    power_in = drive.power_in if drive.power_in is not None else drive_power_for_photons(
        n_d, drive, device.cavity
    )
    power_out = transmitted_power(power_in, device.cavity, drive.detuning)
    x_zp = zero_point_motion(device.mech)
    kappa = device.cavity.kappa
    # slope = (G kappa_ex / (kappa omega_m))^2 * P_o * x_zp^2, reduced by the
    # residual radiation-pressure cooling factor gamma_m/gamma_m'; undo that
    # factor with a short fixed-point pass (G enters it only through g0)
    G = (kappa * device.mech.omega_m / device.cavity.kappa_ex) * math.sqrt(
        slope / (power_out * x_zp * x_zp)
    )
    for _ in range(3):
        g_cal = G * x_zp * math.sqrt(n_d)
        _, _, gamma_opt_cal = sideband_rates(
            g_cal, kappa, drive.detuning, device.mech.omega_m
        )
        cooling_factor = device.mech.gamma_m / (device.mech.gamma_m + gamma_opt_cal)
        G = (kappa * device.mech.omega_m / device.cavity.kappa_ex) * math.sqrt(
            slope / (cooling_factor * power_out * x_zp * x_zp)
        )
    G_sigma = G * slope_sigma / (2.0 * slope)

    points = tuple(
        CalibrationPoint(
            temperature=t, occupancy=o, area=a, area_sigma=asig, excluded=not inc
        )
        for t, o, a, asig, inc in zip(temps, occup, areas, area_sigmas, include)
    )
    return CalibrationResult(
        G=G,
        G_sigma=G_sigma,
        linearity_r2=r2,
        intercept_quanta=intercept / slope,
        slope=slope,
        slope_sigma=slope_sigma,
        points=points,
        warnings=tuple(warnings_),
    )


# --- cooling-sweep analysis --------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    """One converged sweep point: physics summary plus fit provenance."""

    point: CoolingPoint
    n_m_sigma: float
    n_c_sigma: float
    n_imp: float
    g_rel_deviation: float
    fit: FitResult


@dataclass(frozen=True)
class CoolingCurve:
    """Occupancy vs drive strength assembled from per-power spectral fits.

    `product_bound` is the running minimum of 4 sqrt(n_imp (n_m + 1/2)) in
    units of hbar; it is an upper bound on the imprecision-backaction
    product, not a backaction measurement.
    """

    points: tuple[SweepPoint, ...]
    excluded: tuple[tuple[float, str], ...] = ()

    def __post_init__(self) -> None:
        n_ds = [sp.point.n_d for sp in self.points]
        if any(b <= a for a, b in zip(n_ds, n_ds[1:])):
            raise ParameterError("sweep points must have strictly increasing n_d")
        if any(not sp.fit.converged for sp in self.points):
            raise ParameterError("cooling curves carry converged fits only")

    @property
    def product_bound(self) -> float:
        products = [
            4.0 * math.sqrt(sp.n_imp * (sp.point.n_m + 0.5)) for sp in self.points
        ]
        return min(products) if products else math.nan

    def csv(self) -> str:
        lines = ["n_d,g_hz,gamma_total_hz,n_m,n_m_sigma,n_c,n_c_sigma,n_imp"]
        for sp in self.points:
            pt = sp.point
            row = (
                pt.n_d,
                pt.g / TWO_PI,
                pt.gamma_total / TWO_PI,
                pt.n_m,
                sp.n_m_sigma,
                pt.n_c,
                sp.n_c_sigma,
                sp.n_imp,
            )
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self, indent: int | None = 2) -> str:
        payload = {
            "points": [
                {
                    "n_d": sp.point.n_d,
                    "g": sp.point.g,
                    "gamma_opt": sp.point.gamma_opt,
                    "gamma_total": sp.point.gamma_total,
                    "n_m": sp.point.n_m,
                    "n_m_sigma": sp.n_m_sigma,
                    "n_c": sp.point.n_c,
                    "n_c_sigma": sp.n_c_sigma,
                    "n_imp": sp.n_imp,
                    "g_rel_deviation": sp.g_rel_deviation,
                    "fit_converged": sp.fit.converged,
                    "fit_residual_rms": sp.fit.residual_rms,
                }
                for sp in self.points
            ],
            "excluded": [{"n_d": nd, "reason": reason} for nd, reason in self.excluded],
            "product_bound": self.product_bound,
        }
        return json.dumps(payload, indent=indent)


def _propagated_sigma(
    fit: FitResult, func, base: Mapping[str, float]
) -> float:
    """Delta-method sigma of func(params) over the fitted free parameters."""
    if fit.covariance is None:
        return math.nan
    names = fit.param_names
    grad = np.zeros(len(names))
    for i, name in enumerate(names):
        p = fit.params[name]
        h = max(1e-6 * abs(p), 1e-12)
        hi = dict(base)
        lo = dict(base)
        hi[name] = p + h
        lo[name] = p - h
        grad[i] = (func(hi) - func(lo)) / (2.0 * h)
    var = float(grad @ fit.covariance @ grad)
    return math.sqrt(var) if var > 0.0 else 0.0


def analyze_cooling_sweep(
    sweep: Sequence[tuple[float, SpectrumTrace]],
    device: DeviceParams,
    thermal: ThermalState,
    free: Sequence[str] = DEFAULT_FREE,
) -> CoolingCurve:
    """Fit every drive power of a cooling sweep and assemble the curve.

    Per point: full-model fit (kappa, delta_tilde etc. pinned from the
    device), cooled occupancy from the fitted bath parameters, imprecision
    quanta from the fitted chain noise, and the relative deviation of the
    fitted g from the sqrt(n_d) prediction.  Two per-point identifiability
    guards adapt the free set: n_c is pinned to the thermal state when the
    trace window cannot resolve the cavity mode, and g is pinned to the
    calibrated sqrt(n_d) value when the predicted radiation-pressure
    broadening is below 10% of gamma_m (only the product g^2 n_m_T is
    measurable there).  Non-converged points are excluded with a diagnostic;
    the rest of the curve is still returned.
    """
    cavity, mech = device.cavity, device.mech
    fixed_base = {
        "kappa": cavity.kappa,
        "kappa_ex": cavity.kappa_ex,
        "gamma_m": mech.gamma_m,
        "delta_tilde": 0.0,
        "beta": cavity.beta,
        "omega_m": mech.omega_m,
    }
    fixed = {k: v for k, v in fixed_base.items() if k not in set(free)}
    if "n_m_T" not in set(free):
        fixed.setdefault("n_m_T", thermal.n_m_T)
    if "n_c" not in set(free):
        fixed.setdefault("n_c", thermal.n_c)

    entries = sorted(sweep, key=lambda item: item[0])
    points: list[SweepPoint] = []
    excluded: list[tuple[float, str]] = []
    for n_d, trace in entries:
        g_pred = coupling_rate(device.coupling, mech, n_d)
        init = None
        if n_d > 0:
            init = {"g": g_pred}
            if "n_m_T" in set(free):
                init["n_m_T"] = thermal.n_m_T
        point_free = tuple(free)
        point_fixed = dict(fixed)
        # n_c rides on the kappa-wide cavity mode; a window that does not
        # resolve it leaves n_c degenerate with n_add_eff, so pin it there
        halfspan_rad = math.pi * (trace.freq_hz[-1] - trace.freq_hz[0])
        if "n_c" in point_free and halfspan_rad < 0.5 * cavity.kappa:
            point_free = tuple(name for name in point_free if name != "n_c")
            point_fixed["n_c"] = thermal.n_c
        # below ~10% linewidth broadening the spectrum only constrains the
        # product g^2 n_m_T; pin g to the calibrated sqrt(n_d) prediction
        _, _, gamma_opt_pred = sideband_rates(g_pred, cavity.kappa, -mech.omega_m, mech.omega_m)
        g_was_fitted = "g" in point_free
        if g_was_fitted and gamma_opt_pred < 0.1 * mech.gamma_m:
            point_free = tuple(name for name in point_free if name != "g")
            point_fixed["g"] = g_pred
            g_was_fitted = False
        try:
            fit = fit_full_model(trace, point_fixed, free=point_free, init=init)
        except Exception as exc:  # per-point failures must not kill the sweep
            excluded.append((n_d, f"{type(exc).__name__}: {exc}"))
            continue
        if not fit.converged:
            excluded.append((n_d, f"fit did not converge: {fit.message}"))
            continue

        full = dict(point_fixed)
        full.update(fit.params)
        g_fit = full["g"]
        _, _, gamma_opt = sideband_rates(g_fit, full["kappa"], -mech.omega_m, mech.omega_m)
        gamma_total = total_linewidth(full["gamma_m"], gamma_opt)

        def cooled(values: Mapping[str, float], _full=full) -> float:
            merged = dict(_full)
            merged.update(values)
            state = ThermalState(n_m_T=max(merged["n_m_T"], 0.0), n_c=max(merged["n_c"], 0.0))
            return final_occupancy(state, merged["g"], merged["kappa"], merged["gamma_m"])

        n_m = cooled(fit.params)
        n_m_sigma = _propagated_sigma(fit, cooled, fit.params)
        n_c_sigma = (
            fit.sigmas.get("n_c", math.nan) if fit.sigmas is not None else math.nan
        )
        n_imp = imprecision_from_chain(
            g_fit, full["kappa"], full["kappa_ex"], full["gamma_m"], full["beta"], full["n_add_eff"]
        )
        g_dev = (g_fit - g_pred) / g_pred if (g_was_fitted and g_pred > 0.0) else math.nan

        points.append(
            SweepPoint(
                point=CoolingPoint(
                    n_d=n_d,
                    g=g_fit,
                    gamma_opt=gamma_opt,
                    gamma_total=gamma_total,
                    n_m=n_m,
                    n_c=max(full["n_c"], 0.0),
                ),
                n_m_sigma=n_m_sigma,
                n_c_sigma=n_c_sigma,
                n_imp=n_imp,
                g_rel_deviation=g_dev,
                fit=fit,
            )
        )
    return CoolingCurve(points=tuple(points), excluded=tuple(excluded))
