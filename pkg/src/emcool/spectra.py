"""Frequency-domain forward models for the driven electromechanical system.

The offset coordinate throughout is delta = omega - omega_m (rad/s), i.e.
Fourier frequency relative to the mechanical resonance in the demodulated
frame; SpectrumTrace axes are absolute frequencies in Hz.  All spectral
densities follow the single-sided convention <A^2> = integral_0^inf S_A
d(omega)/2pi, so areas on a Hz axis are plain integrals over f.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .constants import HBAR
from .device import DeviceParams, MechanicalMode, zero_point_motion
from .dynamics import DriveConfig
from .errors import ParameterError, ParametricInstabilityError, PeakDetectionError, UnitError

TWO_PI = 2.0 * math.pi

# numpy renamed trapz -> trapezoid in 2.0
_trapezoid = getattr(np, "trapezoid", None) or np.trapz

# Keep default grids inside the narrow band where the quanta unit (constant
# hbar*omega prefactor) is good to <1e-4; see unit notes in convert_trace.
MAX_HALFSPAN_HZ = 2.0e6


class SpectrumUnit(enum.Enum):
    QUANTA = "quanta"            # S / (hbar omega_ref), dimensionless
    WATTS_PER_HZ = "watts_per_hz"
    M2_PER_HZ = "m2_per_hz"


@dataclass(frozen=True)
class SpectrumTrace:
    """A PSD sampled on a strictly increasing absolute frequency grid."""

    freq_hz: np.ndarray
    values: np.ndarray
    unit: SpectrumUnit
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        freq = np.asarray(self.freq_hz, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "freq_hz", freq)
        object.__setattr__(self, "values", vals)
        if freq.ndim != 1 or vals.ndim != 1 or freq.size != vals.size:
            raise ParameterError("freq_hz and values must be 1-d arrays of equal length")
        if freq.size < 8:
            raise ParameterError(f"need at least 8 samples, got {freq.size}")
        if not np.all(np.diff(freq) > 0.0):
            raise ParameterError("freq_hz must be strictly increasing")
        if self.unit in (SpectrumUnit.QUANTA, SpectrumUnit.WATTS_PER_HZ) and np.any(vals < 0.0):
            raise ParameterError(f"negative PSD values not allowed for unit {self.unit.value}")
        freq.setflags(write=False)
        vals.setflags(write=False)

    def with_meta(self, **extra) -> "SpectrumTrace":
        meta = dict(self.meta)
        meta.update(extra)
        return replace(self, meta=meta)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the output noise spectrum model.

    All rates in rad/s; occupancies and n_add_eff in quanta.  omega_m anchors
    the offset coordinate on absolute-frequency grids and enters the exact
    (non-rotating-wave) self-energy.
    """

    g: float
    kappa: float
    kappa_ex: float
    gamma_m: float
    delta_tilde: float
    n_m_T: float
    n_c: float
    n_add_eff: float
    beta: float
    omega_m: float

    def __post_init__(self) -> None:
        for name in ("kappa", "kappa_ex", "gamma_m", "omega_m"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.g < 0.0:
            raise ParameterError(f"g must be >= 0, got {self.g!r}")
        if self.kappa_ex > self.kappa * (1.0 + 1e-12):
            raise ParameterError("kappa_ex cannot exceed the total kappa")
        if self.n_m_T < 0.0 or self.n_c < 0.0 or self.n_add_eff < 0.0:
            raise ParameterError("occupancies and n_add_eff must be >= 0")
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"beta must lie in (0, 1], got {self.beta!r}")

    @property
    def sub_ideal_added_noise(self) -> bool:
        """True when n_add_eff is below the phase-preserving minimum of 1/2."""
        return self.n_add_eff < 0.5

    @classmethod
    def for_device(
        cls,
        device: DeviceParams,
        *,
        g: float,
        n_m_T: float,
        n_c: float = 0.0,
        n_add_eff: float = 0.5,
        delta_tilde: float = 0.0,
    ) -> "ModelParams":
        return cls(
            g=g,
            kappa=device.cavity.kappa,
            kappa_ex=device.cavity.kappa_ex,
            gamma_m=device.mech.gamma_m,
            delta_tilde=delta_tilde,
            n_m_T=n_m_T,
            n_c=n_c,
            n_add_eff=n_add_eff,
            beta=device.cavity.beta,
            omega_m=device.mech.omega_m,
        )


def noise_floor(params: ModelParams) -> float:
    """White measurement floor 1/2 + n_add_eff in quanta."""
    return 0.5 + params.n_add_eff


# --- susceptibilities and self-energy ----------------------------------------

def cavity_susceptibility(delta, kappa: float, delta_tilde: float):
    """Cavity response 1/(kappa/2 + j(delta + delta_tilde)); |chi| peaks at delta=-delta_tilde."""
    if not kappa > 0.0:
        raise ParameterError(f"kappa must be > 0, got {kappa!r}")
    return 1.0 / (0.5 * kappa + 1j * (np.asarray(delta, dtype=float) + delta_tilde))


def mech_susceptibility(delta, gamma_m: float):
    """Mechanical response 1/(gamma_m/2 + j delta)."""
    if not gamma_m > 0.0:
        raise ParameterError(f"gamma_m must be > 0, got {gamma_m!r}")
    return 1.0 / (0.5 * gamma_m + 1j * np.asarray(delta, dtype=float))


def self_energy(delta, g: float, kappa: float, delta_tilde: float, omega_m: float, approx: bool = False):
    """Optomechanical self-energy Sigma(delta).

    Exact form -j g^2 [chi_c(delta) - chi_c*(delta + 2 omega_m)]; with
    approx=True the counter-rotating chi_c* term is dropped (valid for
    |delta_tilde| << omega_m and omega_m >> kappa).
    """
    if not (kappa > 0.0 and omega_m > 0.0):
        raise ParameterError("kappa and omega_m must be > 0")
    chi = cavity_susceptibility(delta, kappa, delta_tilde)
    if approx:
        return -1j * g * g * chi
    chi_cr = cavity_susceptibility(np.asarray(delta, dtype=float) + 2.0 * omega_m, kappa, delta_tilde)
    return -1j * g * g * (chi - np.conj(chi_cr))


def _pole_margin(g: float, kappa: float, gamma_m: float, delta_tilde: float) -> float:
    """Smallest imaginary part of the dressed-mode poles (rad/s).

    Poles solve 4 delta^2 - 2j(A+gamma_m) delta - (4g^2 + A gamma_m) = 0 with
    A = kappa + 2j delta_tilde; stable modes sit in the upper half plane.
    """
    a_cpx = kappa + 2j * delta_tilde
    b = a_cpx + gamma_m
    disc = cmath.sqrt(4.0 * (4.0 * g * g + a_cpx * gamma_m) - b * b)
    roots = ((1j * b + disc) / 4.0, (1j * b - disc) / 4.0)
    return min(r.imag for r in roots)


def _check_stable(g: float, kappa: float, gamma_m: float, delta_tilde: float) -> None:
    if _pole_margin(g, kappa, gamma_m, delta_tilde) <= 0.0:
        raise ParametricInstabilityError(
            "dressed mechanical mode has a pole on or below the real axis "
            "(parametric instability); spectrum is undefined"
        )


def dressed_mech_susceptibility(delta, params: ModelParams, approx: bool = False):
    """Mechanical response dressed by the drive, chi_m / (1 + j chi_m Sigma).

    With approx=True this equals the closed form
    chi_c^-1 / (g^2 + chi_m^-1 chi_c^-1) identically.
    """
    _check_stable(params.g, params.kappa, params.gamma_m, params.delta_tilde)
    delta = np.asarray(delta, dtype=float)
    sigma = self_energy(delta, params.g, params.kappa, params.delta_tilde, params.omega_m, approx=approx)
    # chi_m/(1 + j chi_m Sigma) written as 1/(chi_m^-1 + j Sigma)
    return 1.0 / (0.5 * params.gamma_m + 1j * delta + 1j * sigma)


# --- output noise spectrum ----------------------------------------------------

def output_noise_values(delta, params: ModelParams) -> np.ndarray:
    """Output noise in quanta as a function of the offset delta (rad/s).

    S/(hbar omega) = 1/2 + n_add' +
        4 beta kappa_ex [kappa n_c (gamma_m^2 + 4 delta^2) + 4 gamma_m n_m^T g^2]
        / |4 g^2 + (kappa + 2j(delta+delta_tilde))(gamma_m + 2j delta)|^2
    """
    _check_stable(params.g, params.kappa, params.gamma_m, params.delta_tilde)
    delta = np.asarray(delta, dtype=float)
    g2 = params.g * params.g
    denom = 4.0 * g2 + (params.kappa + 2j * (delta + params.delta_tilde)) * (
        params.gamma_m + 2j * delta
    )
    numer = 4.0 * params.beta * params.kappa_ex * (
        params.kappa * params.n_c * (params.gamma_m**2 + 4.0 * delta * delta)
        + 4.0 * params.gamma_m * params.n_m_T * g2
    )
    return noise_floor(params) + numer / np.abs(denom) ** 2


def output_noise_spectrum(freq_hz, params: ModelParams, meta: dict | None = None) -> SpectrumTrace:
    """Evaluate the exact output spectrum on an absolute frequency grid (Hz)."""
    freq_hz = np.asarray(freq_hz, dtype=float)
    delta = TWO_PI * freq_hz - params.omega_m
    values = output_noise_values(delta, params)
    out_meta = {"model": "output_noise_spectrum", "center_hz": params.omega_m / TWO_PI}
    if meta:
        out_meta.update(meta)
    return SpectrumTrace(freq_hz=freq_hz, values=values, unit=SpectrumUnit.QUANTA, meta=out_meta)


def weak_coupling_values(delta, params: ModelParams) -> tuple[np.ndarray, list[str]]:
    """Lorentzian weak-coupling limit of the output spectrum, plus validity warnings.

    S/(hbar omega) = 1/2 + n_add' + 4 beta (kappa_ex/kappa) Gamma gamma_m n_m^T
                     / ((gamma_m + Gamma)^2 + 4 delta^2),   Gamma = 4 g^2 / kappa.
    """
    delta = np.asarray(delta, dtype=float)
    warnings_: list[str] = []
    if params.delta_tilde != 0.0:
        warnings_.append("weak-coupling form assumes delta_tilde=0; nonzero value ignored")
    if 4.0 * params.g**2 >= params.kappa * params.gamma_m * 1e3:
        warnings_.append("coupling outside weak regime (4g^2 >= 1e3 kappa gamma_m)")
    if params.n_m_T > 0.0 and params.n_c > 0.01 * params.n_m_T:
        warnings_.append("cavity occupancy not negligible against n_m_T")
    if delta.size and np.max(np.abs(delta)) >= params.kappa / 10.0:
        warnings_.append("grid extends beyond |delta| < kappa/10 validity band")
    gamma_opt = 4.0 * params.g**2 / params.kappa
    lorentz = (
        4.0 * params.beta * (params.kappa_ex / params.kappa) * gamma_opt
        * params.gamma_m * params.n_m_T
        / ((params.gamma_m + gamma_opt) ** 2 + 4.0 * delta * delta)
    )
    return noise_floor(params) + lorentz, warnings_


def weak_coupling_spectrum(freq_hz, params: ModelParams, meta: dict | None = None) -> SpectrumTrace:
    """Weak-coupling Lorentzian spectrum on an absolute grid; warnings land in meta."""
    freq_hz = np.asarray(freq_hz, dtype=float)
    delta = TWO_PI * freq_hz - params.omega_m
    values, warnings_ = weak_coupling_values(delta, params)
    out_meta = {"model": "weak_coupling_spectrum", "center_hz": params.omega_m / TWO_PI}
    if warnings_:
        out_meta["warnings"] = "; ".join(warnings_)
    if meta:
        out_meta.update(meta)
    return SpectrumTrace(freq_hz=freq_hz, values=values, unit=SpectrumUnit.QUANTA, meta=out_meta)


def displacement_conversion_factor(device: DeviceParams, power_out: float) -> float:
    """Scale from detected PSD (W/Hz) to displacement PSD (m^2/Hz).

    S_x = 2 (kappa omega_m / (G kappa_ex))^2 S / P_o; valid in the narrowband
    single-sideband regime (omega_m >> kappa >> gamma_m, optimal red detuning).
    """
    if not power_out > 0.0:
        raise ParameterError(f"power_out must be > 0, got {power_out!r}")
    cavity, mech = device.cavity, device.mech
    ratio = cavity.kappa * mech.omega_m / (device.coupling.G * cavity.kappa_ex)
    return 2.0 * ratio * ratio / power_out


def displacement_from_output(
    trace: SpectrumTrace, device: DeviceParams, drive: DriveConfig, power_out: float
) -> SpectrumTrace:
    """Convert a detected W/Hz trace to displacement units m^2/Hz."""
    if trace.unit is not SpectrumUnit.WATTS_PER_HZ:
        raise UnitError(f"expected watts_per_hz trace, got {trace.unit.value}")
    scale = displacement_conversion_factor(device, power_out)
    meta = dict(trace.meta)
    meta["displacement_scale_m2hz_per_whz"] = scale
    if abs(drive.detuning + device.mech.omega_m) > 0.01 * device.mech.omega_m:
        meta["warnings"] = (
            meta.get("warnings", "") + "; " if meta.get("warnings") else ""
        ) + "conversion assumes optimal red detuning (delta = -omega_m)"
    return SpectrumTrace(
        freq_hz=trace.freq_hz, values=trace.values * scale, unit=SpectrumUnit.M2_PER_HZ, meta=meta
    )


def thermal_displacement_psd(
    freq_hz, mech: MechanicalMode, n_m: float, gamma_total: float, meta: dict | None = None
) -> SpectrumTrace:
    """Thermal displacement PSD: Lorentzian at omega_m with FWHM gamma_total.

    Normalized so integral S_x d(omega)/2pi = x_zp^2 (2 n_m + 1); the peak
    value is 4 x_zp^2 (2 n_m + 1) / gamma_total.
    """
    if not gamma_total > 0.0:
        raise ParameterError(f"gamma_total must be > 0, got {gamma_total!r}")
    if n_m < 0.0:
        raise ParameterError(f"n_m must be >= 0, got {n_m!r}")
    freq_hz = np.asarray(freq_hz, dtype=float)
    delta = TWO_PI * freq_hz - mech.omega_m
    x_zp2 = zero_point_motion(mech) ** 2
    peak = 4.0 * x_zp2 * (2.0 * n_m + 1.0) / gamma_total
    half = 0.5 * gamma_total
    values = peak * half * half / (half * half + delta * delta)
    out_meta = {"model": "thermal_displacement_psd", "center_hz": mech.omega_m / TWO_PI}
    if meta:
        out_meta.update(meta)
    return SpectrumTrace(freq_hz=freq_hz, values=values, unit=SpectrumUnit.M2_PER_HZ, meta=out_meta)


# --- peak integration ---------------------------------------------------------

@dataclass(frozen=True)
class PeakSummary:
    """Background-subtracted area of the mechanical peak plus diagnostics."""

    area: float          # tail-corrected, in value-unit * Hz
    floor: float
    center_hz: float
    fwhm_hz: float
    snr: float
    sigma_floor: float
    area_sigma: float
    covered_fraction: float


def peak_area(trace: SpectrumTrace, floor_estimate: float | None = None) -> PeakSummary:
    """Integrate the resonance above the background.

    The floor starts from the median of the outer 20% of bins (unless given
    explicitly) and is then refined by subtracting the predicted Lorentzian
    tail level at those bins, so slowly decaying wings do not get absorbed
    into the background.  The trapezoidal integral over the grid is divided
    by the analytic Lorentzian coverage fraction (from the half-max width)
    to correct for truncation at the grid edges.  Raises PeakDetectionError
    when the peak rises less than 3 noise standard deviations above the
    floor.
    """
    freq = trace.freq_hz
    vals = trace.values
    n = freq.size
    n_edge = max(4, n // 10)
    edge_idx = np.concatenate([np.arange(n_edge), np.arange(n - n_edge, n)])
    edge_vals = vals[edge_idx]
    floor = float(np.median(edge_vals)) if floor_estimate is None else float(floor_estimate)
    # robust noise scale of the background
    sigma_floor = 1.4826 * float(np.median(np.abs(edge_vals - np.median(edge_vals))))

    # geometry comes from a lightly smoothed trace so single noisy bins
    # cannot pose as peaks or fake half-max crossings
    win = max(1, n // 256)
    sigma_smooth = sigma_floor / math.sqrt(win)

    def geometry(floor_now: float):
        excess = vals - floor_now
        smooth = (
            np.convolve(excess, np.ones(win) / win, mode="same") if win > 1 else excess
        )
        i_peak = int(np.argmax(smooth))  # argmax takes the leftmost maximal bin
        center, fwhm, frac = _peak_geometry(freq, smooth, i_peak)
        raw_area = float(_trapezoid(excess, freq))
        return float(smooth[i_peak]), center, fwhm, raw_area, frac

    height, center, fwhm, raw_area, frac = geometry(floor)

    # detection: the peak bin must clear the smoothed noise AND the excess
    # integrated over +-3 widths must be significant against the local area noise
    df = np.gradient(freq)
    area_noise = sigma_floor * float(np.sqrt(np.sum(df * df)))
    if sigma_floor > 0.0:
        region = np.abs(freq - center) <= 3.0 * fwhm
        region_area = float(_trapezoid((vals - floor)[region], freq[region])) if np.sum(region) > 1 else 0.0
        region_noise = sigma_floor * float(np.sqrt(np.sum(df[region] ** 2)))
        snr = min(height / sigma_smooth, abs(region_area) / region_noise if region_noise > 0 else 0.0)
    else:
        snr = math.inf if height > 0.0 else 0.0
    if snr < 3.0:
        raise PeakDetectionError(
            f"no resolved peak: height {height:.3g} above floor {floor:.3g} "
            f"is {snr:.2f} noise sigmas (need >= 3)"
        )

    if floor_estimate is None:
        # Refinement passes: subtract the modeled tail level at the edge bins
        # from the floor estimate, then redo the geometry.  The fixed point
        # contracts slowly (~4x per pass) on deeply truncated grids.
        for _ in range(8):
            area_total = raw_area / frac
            tail = (2.0 * area_total / (math.pi * fwhm)) / (
                1.0 + (2.0 * (freq[edge_idx] - center) / fwhm) ** 2
            )
            floor_new = float(np.median(edge_vals - tail))
            moved = abs(floor_new - floor)
            floor = floor_new
            height, center, fwhm, raw_area, frac = geometry(floor)
            if moved <= 1e-6 * max(height, abs(floor)):
                break

    area = raw_area / frac
    area_sigma = area_noise / frac
    return PeakSummary(
        area=area,
        floor=floor,
        center_hz=center,
        fwhm_hz=fwhm,
        snr=snr,
        sigma_floor=sigma_floor,
        area_sigma=area_sigma,
        covered_fraction=frac,
    )


def _peak_geometry(freq: np.ndarray, excess: np.ndarray, i_peak: int) -> tuple[float, float, float]:
    """Center, half-max width, and Lorentzian coverage fraction of the grid."""
    n = freq.size
    center = float(freq[i_peak])
    half = 0.5 * float(excess[i_peak])
    fwhm = _flank_halfwidth(freq, excess, i_peak, half, step=-1) + _flank_halfwidth(
        freq, excess, i_peak, half, step=+1
    )
    if not fwhm > 0.0:
        fwhm = float(freq[min(i_peak + 1, n - 1)] - freq[max(i_peak - 1, 0)])
    frac = (
        math.atan(2.0 * (freq[-1] - center) / fwhm) + math.atan(2.0 * (center - freq[0]) / fwhm)
    ) / math.pi
    frac = min(max(frac, 1e-6), 1.0)
    return center, fwhm, frac


def _flank_halfwidth(freq, excess, i_peak: int, half: float, step: int) -> float:
    """Distance from the peak bin to the interpolated half-max crossing."""
    i = i_peak
    while 0 <= i + step < freq.size and excess[i + step] > half:
        i += step
    j = i + step
    if not 0 <= j < freq.size:
        return abs(freq[i] - freq[i_peak])
    # linear interpolation between bins i (above half) and j (below half)
    y0, y1 = excess[i], excess[j]
    if y0 == y1:
        x = freq[j]
    else:
        x = freq[i] + (half - y0) * (freq[j] - freq[i]) / (y1 - y0)
    return abs(x - freq[i_peak])


def integrate_mech_peak(
    trace: SpectrumTrace,
    mech: MechanicalMode,
    floor_estimate: float | None = None,
    convention: str = "thermal",
) -> float:
    """Occupancy of the mechanical mode from the area under its resonance.

    The displacement-trace area is converted with the thermal normalization
    area = x_zp^2 (2 n + 1), i.e. n = area/(2 x_zp^2) - 1/2 ("thermal"
    convention; the -1/2 removes the zero-point contribution).  Detected
    output-spectrum sidebands under a red-detuned drive carry area
    2 x_zp^2 n with no zero-point term; pass convention="sideband" for those.
    """
    if trace.unit is not SpectrumUnit.M2_PER_HZ:
        raise UnitError(f"occupancy extraction needs an m2_per_hz trace, got {trace.unit.value}")
    if convention not in ("thermal", "sideband"):
        raise ParameterError(f"unknown convention {convention!r}")
    summary = peak_area(trace, floor_estimate)
    x_zp2 = zero_point_motion(mech) ** 2
    n_plus_half = summary.area / (2.0 * x_zp2)
    return n_plus_half - 0.5 if convention == "thermal" else n_plus_half


# --- grids and unit conversion --------------------------------------------

def sideband_grid(
    omega_m: float,
    gamma_total: float,
    kappa: float,
    points: int = 4096,
    halfspan_hz: float | None = None,
) -> np.ndarray:
    """Uniform absolute-frequency grid (Hz) around the mechanical resonance.

    Default half-span is 20 * max(gamma_total, kappa), capped at 2 MHz to
    stay inside the quanta-unit validity band.
    """
    if points < 32:
        raise ParameterError(f"need at least 32 points, got {points}")
    if halfspan_hz is None:
        halfspan_hz = min(20.0 * max(gamma_total, kappa) / TWO_PI, MAX_HALFSPAN_HZ)
    if not halfspan_hz > 0.0:
        raise ParameterError(f"halfspan_hz must be > 0, got {halfspan_hz!r}")
    center = omega_m / TWO_PI
    return np.linspace(center - halfspan_hz, center + halfspan_hz, points)


def grid_for(params: ModelParams, points: int = 4096, halfspan_hz: float | None = None) -> np.ndarray:
    """Grid sized from the model's own linewidths (weak-coupling Gamma estimate)."""
    gamma_opt = 4.0 * params.g**2 / params.kappa
    return sideband_grid(params.omega_m, params.gamma_m + gamma_opt, params.kappa, points, halfspan_hz)


def convert_trace(trace: SpectrumTrace, unit: SpectrumUnit, carrier_hz: float) -> SpectrumTrace:
    """Convert between quanta and W/Hz using hbar*omega at the carrier.

    The hbar*omega prefactor is frozen at the sideband carrier frequency
    (its variation across a <=2 MHz span at GHz carriers is <1e-4 relative),
    so quanta -> W/Hz -> quanta is an exact round trip.
    """
    if not carrier_hz > 0.0:
        raise ParameterError(f"carrier_hz must be > 0, got {carrier_hz!r}")
    if trace.unit is unit:
        return trace
    scale = HBAR * TWO_PI * carrier_hz
    pair = (trace.unit, unit)
    if pair == (SpectrumUnit.QUANTA, SpectrumUnit.WATTS_PER_HZ):
        values = trace.values * scale
    elif pair == (SpectrumUnit.WATTS_PER_HZ, SpectrumUnit.QUANTA):
        values = trace.values / scale
    else:
        raise UnitError(f"no direct conversion from {trace.unit.value} to {unit.value}")
    meta = dict(trace.meta)
    meta["carrier_hz"] = carrier_hz
    return SpectrumTrace(freq_hz=trace.freq_hz, values=values, unit=unit, meta=meta)


# --- CSV round trip -----------------------------------------------------------

def trace_to_csv(trace: SpectrumTrace) -> str:
    """Serialize to the trace CSV format (decimal text, 17 significant digits)."""
    lines = [f"# unit={trace.unit.value}"]
    for key, value in trace.meta.items():
        if isinstance(value, float):
            lines.append(f"# {key}={value:.17g}")
        else:
            lines.append(f"# {key}={value}")
    lines.append("freq_hz,value")
    for f, v in zip(trace.freq_hz, trace.values):
        lines.append(f"{f:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str, source: str = "<string>") -> SpectrumTrace:
    unit: SpectrumUnit | None = None
    meta: dict = {}
    freqs: list[float] = []
    vals: list[float] = []
    saw_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                continue  # free-form comment
            key, value = key.strip(), value.strip()
            if key == "unit":
                try:
                    unit = SpectrumUnit(value)
                except ValueError as exc:
                    raise UnitError(f"{source}:{lineno}: unknown unit {value!r}") from exc
            else:
                meta[key] = _parse_meta_value(value)
            continue
        if not saw_header:
            if line.replace(" ", "") != "freq_hz,value":
                raise ParameterError(f"{source}:{lineno}: expected header 'freq_hz,value'")
            saw_header = True
            continue
        f_str, sep, v_str = line.partition(",")
        if not sep:
            raise ParameterError(f"{source}:{lineno}: expected 'freq,value' row")
        freqs.append(float(f_str))
        vals.append(float(v_str))
    if unit is None:
        raise UnitError(f"{source}: missing '# unit=...' line")
    if not saw_header:
        raise ParameterError(f"{source}: missing 'freq_hz,value' header")
    return SpectrumTrace(freq_hz=np.array(freqs), values=np.array(vals), unit=unit, meta=meta)


def _parse_meta_value(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def write_trace(trace: SpectrumTrace, path: str | Path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8")


def read_trace(path: str | Path) -> SpectrumTrace:
    path = Path(path)
    return trace_from_csv(path.read_text(encoding="utf-8"), source=str(path))
