"""Drive bookkeeping and steady-state cooling dynamics.

Covers the parametric coupling rate, sideband scattering rates, total
mechanical linewidth, the final occupancy to first and second order in
1/omega_m, photon-number/power conversions, thermal storage time and the
coupling-regime classifier.  Everything is a pure function of immutable
inputs; only the red-detuned steady state is modeled (no transients).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .constants import HBAR
from .device import Cavity, Coupling, DeviceParams, MechanicalMode, bose_occupancy, zero_point_motion
from .errors import ParameterError, ParametricInstabilityError


@dataclass(frozen=True)
class DriveConfig:
    """A coherent microwave drive: frequency, detuning and strength.

    Strength is given as exactly one of `n_d` (intracavity photons) or
    `power_in` (input power in W at the device feed line).
    """

    omega_d: float
    detuning: float  # Delta = omega_d - omega_c (rad/s)
    n_d: float | None = None
    power_in: float | None = None

    def __post_init__(self) -> None:
        if (self.n_d is None) == (self.power_in is None):
            raise ParameterError("specify exactly one of n_d or power_in")
        strength = self.n_d if self.n_d is not None else self.power_in
        if strength < 0.0:
            raise ParameterError(f"drive strength must be >= 0, got {strength!r}")

    @classmethod
    def from_detuning(
        cls,
        device: DeviceParams,
        detuning: float,
        *,
        n_d: float | None = None,
        power_in: float | None = None,
    ) -> "DriveConfig":
        return cls(
            omega_d=device.cavity.omega_c + detuning,
            detuning=detuning,
            n_d=n_d,
            power_in=power_in,
        )

    @classmethod
    def red_detuned(
        cls,
        device: DeviceParams,
        *,
        n_d: float | None = None,
        power_in: float | None = None,
    ) -> "DriveConfig":
        """Optimally red-detuned drive, Delta = -omega_m (delta_tilde = 0)."""
        return cls.from_detuning(device, -device.mech.omega_m, n_d=n_d, power_in=power_in)

    def delta_tilde(self, mech: MechanicalMode) -> float:
        """Sideband-frame detuning Delta + omega_m (rad/s)."""
        return self.detuning + mech.omega_m

    def check_against(self, device: DeviceParams, rtol: float = 1e-9) -> None:
        """Verify the stored detuning is consistent with omega_d and omega_c."""
        expected = self.omega_d - device.cavity.omega_c
        if abs(expected - self.detuning) > rtol * device.cavity.omega_c:
            raise ParameterError(
                "detuning inconsistent with omega_d and the device cavity frequency"
            )

    def photons(self, device: DeviceParams) -> float:
        """Intracavity photon number, converting from input power if needed."""
        if self.n_d is not None:
            return self.n_d
        return intracavity_photons(self.power_in, self, device.cavity)


@dataclass(frozen=True)
class ThermalState:
    """Bath temperature and the thermal occupancies it implies.

    `temperature` is None when the state was specified directly in quanta.
    """

    n_m_T: float
    n_c: float = 0.0
    temperature: float | None = None

    def __post_init__(self) -> None:
        if self.n_m_T < 0.0 or self.n_c < 0.0:
            raise ParameterError("occupancies must be >= 0")

    @classmethod
    def from_temperature(cls, temperature: float, mech: MechanicalMode, n_c: float = 0.0) -> "ThermalState":
        return cls(
            n_m_T=bose_occupancy(temperature, mech.omega_m),
            n_c=n_c,
            temperature=temperature,
        )


@dataclass(frozen=True)
class CoolingPoint:
    """One operating point of a drive-power sweep."""

    n_d: float
    g: float
    gamma_opt: float
    gamma_total: float
    n_m: float
    n_c: float

    def __post_init__(self) -> None:
        if self.n_m < 0.0 or self.n_c < 0.0:
            raise ParameterError("occupancies must be >= 0")
        if not self.gamma_total > 0.0:
            raise ParametricInstabilityError("gamma_total must be > 0 in a cooling point")


class CouplingRegime(enum.Enum):
    WEAK = "weak"
    COOLING = "cooling"
    STRONG = "strong"


def coupling_rate(coupling: Coupling, mech: MechanicalMode, n_d: float) -> float:
    """Drive-enhanced coupling g = G * x_zp * sqrt(n_d) in rad/s."""
    if n_d < 0.0:
        raise ParameterError(f"n_d must be >= 0, got {n_d!r}")
    return coupling.G * zero_point_motion(mech) * math.sqrt(n_d)


def sideband_rates(g: float, kappa: float, detuning: float, omega_m: float) -> tuple[float, float, float]:
    """Photon scattering rates into the upper/lower sidebands and their difference.

    Gamma_pm = 4 g^2 kappa / (kappa^2 + 4 (Delta +- omega_m)^2); the net
    radiation-pressure damping is Gamma = Gamma_plus - Gamma_minus, positive
    for red detuning.
    """
    if not kappa > 0.0:
        raise ParameterError(f"kappa must be > 0, got {kappa!r}")
    four_g2_kappa = 4.0 * g * g * kappa
    gamma_plus = four_g2_kappa / (kappa * kappa + 4.0 * (detuning + omega_m) ** 2)
    gamma_minus = four_g2_kappa / (kappa * kappa + 4.0 * (detuning - omega_m) ** 2)
    return gamma_plus, gamma_minus, gamma_plus - gamma_minus


def total_linewidth(gamma_m: float, gamma_opt: float) -> float:
    """Total mechanical dissipation Gamma_m' = Gamma_m + Gamma.

    Raises ParametricInstabilityError when anti-damping cancels or exceeds
    the intrinsic rate (Gamma_m' <= 0).
    """
    if not gamma_m > 0.0:
        raise ParameterError(f"gamma_m must be > 0, got {gamma_m!r}")
    total = gamma_m + gamma_opt
    if total <= 0.0:
        raise ParametricInstabilityError(
            f"total linewidth {total!r} <= 0: drive anti-damping exceeds intrinsic damping"
        )
    return total


def final_occupancy(state: ThermalState, g: float, kappa: float, gamma_m: float) -> float:
    """Steady-state occupancy of the cooled mode at optimal detuning.

    n_m = n_m^T (Gamma_m/kappa)(4g^2+kappa^2)/(4g^2+kappa Gamma_m)
        + n_c 4g^2/(4g^2+kappa Gamma_m)

    Valid deep in the resolved-sideband regime; returns n_m^T at g=0 and
    approaches n_m^T Gamma_m/kappa + n_c as g -> infinity.
    """
    if not (kappa > 0.0 and gamma_m > 0.0):
        raise ParameterError("kappa and gamma_m must be > 0")
    if g < 0.0:
        raise ParameterError(f"g must be >= 0, got {g!r}")
    four_g2 = 4.0 * g * g
    denom = four_g2 + kappa * gamma_m
    mech_term = state.n_m_T * (gamma_m / kappa) * (four_g2 + kappa * kappa) / denom
    cavity_term = state.n_c * four_g2 / denom
    return mech_term + cavity_term


def final_occupancy_2nd_order(
    state: ThermalState, g: float, kappa: float, gamma_m: float, omega_m: float
) -> float:
    """Final occupancy including the second-order sideband-resolution terms.

    Adds the O(g^2/omega_m^2, kappa^2/omega_m^2) corrections to
    `final_occupancy`; the residual-heating term (8g^2+kappa^2)/(16 omega_m^2)
    is always included.  Reduces to the first-order result as omega_m -> inf.
    """
    if not omega_m > 0.0:
        raise ParameterError(f"omega_m must be > 0, got {omega_m!r}")
    first = final_occupancy(state, g, kappa, gamma_m)
    four_g2 = 4.0 * g * g
    om2 = omega_m * omega_m
    # Bracket corrections, expanded so the n_c term stays finite at g=0.
    mech_corr = state.n_m_T * (gamma_m / kappa) * (g * g / om2)
    cavity_corr = state.n_c * (8.0 * g * g + kappa * kappa) / (8.0 * om2)
    floor_term = (8.0 * g * g + kappa * kappa) / (16.0 * om2)
    return first + mech_corr + cavity_corr + floor_term


def intracavity_photons(power_in: float, drive: DriveConfig, cavity: Cavity) -> float:
    """Photons stored in the cavity by a coherent drive of power `power_in` (W).

    n_d = (2 P_i / hbar omega_d) * kappa_ex / (kappa^2 + 4 Delta^2)
    """
    if power_in < 0.0:
        raise ParameterError(f"power_in must be >= 0, got {power_in!r}")
    kappa = cavity.kappa
    return (2.0 * power_in / (HBAR * drive.omega_d)) * cavity.kappa_ex / (
        kappa * kappa + 4.0 * drive.detuning**2
    )


def drive_power_for_photons(n_d: float, drive: DriveConfig, cavity: Cavity) -> float:
    """Input power (W) required to hold `n_d` photons; inverse of intracavity_photons."""
    if n_d < 0.0:
        raise ParameterError(f"n_d must be >= 0, got {n_d!r}")
    kappa = cavity.kappa
    return n_d * HBAR * drive.omega_d * (kappa * kappa + 4.0 * drive.detuning**2) / (2.0 * cavity.kappa_ex)


def transmitted_power(power_in: float, cavity: Cavity, detuning: float) -> float:
    """Power past the cavity, P_o = P_i (kappa_0^2+4 Delta^2)/(kappa^2+4 Delta^2)."""
    if power_in < 0.0:
        raise ParameterError(f"power_in must be >= 0, got {power_in!r}")
    kappa = cavity.kappa
    four_d2 = 4.0 * detuning * detuning
    return power_in * (cavity.kappa_0**2 + four_d2) / (kappa * kappa + four_d2)


def storage_time(state: ThermalState, gamma_m: float) -> float:
    """Thermal decoherence time 1/(n_m^T Gamma_m) in seconds.

    Returns +inf when the bath occupancy is zero (nothing to absorb).
    """
    if not gamma_m > 0.0:
        raise ParameterError(f"gamma_m must be > 0, got {gamma_m!r}")
    if state.n_m_T == 0.0:
        return math.inf
    return 1.0 / (state.n_m_T * gamma_m)


def coupling_regime(g: float, kappa: float, gamma_m: float, n_m_T: float) -> CouplingRegime:
    """Classify an operating point.

    weak    : 4 g^2 < kappa Gamma_m  (backaction below intrinsic damping)
    strong  : 2 g > kappa / sqrt(2)  (normal-mode splitting resolved)
    cooling : everything in between; the boundary 4g^2 = kappa*Gamma_m is
              assigned to cooling.

    The splitting-onset criterion 2g > kappa/sqrt(2) is used for the strong
    boundary; the looser 2g > kappa/2 sometimes quoted for "strong coupling"
    is deliberately not used, so the classification is unambiguous.
    """
    if not (g >= 0.0 and kappa > 0.0 and gamma_m > 0.0 and n_m_T >= 0.0):
        raise ParameterError("rates must be positive and occupancy non-negative")
    if 2.0 * g > kappa / math.sqrt(2.0):
        return CouplingRegime.STRONG
    if 4.0 * g * g < kappa * gamma_m:
        return CouplingRegime.WEAK
    return CouplingRegime.COOLING


def predict_cooling_point(device: DeviceParams, thermal: ThermalState, n_d: float) -> CoolingPoint:
    """Forward-model one red-detuned operating point from first principles."""
    mech, cavity = device.mech, device.cavity
    g = coupling_rate(device.coupling, mech, n_d)
    _, _, gamma_opt = sideband_rates(g, cavity.kappa, -mech.omega_m, mech.omega_m)
    gamma_total = total_linewidth(mech.gamma_m, gamma_opt)
    n_m = final_occupancy(thermal, g, cavity.kappa, mech.gamma_m)
    return CoolingPoint(
        n_d=n_d, g=g, gamma_opt=gamma_opt, gamma_total=gamma_total, n_m=n_m, n_c=thermal.n_c
    )
