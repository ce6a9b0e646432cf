"""Static device parameters and elementary derived quantities.

All rates are stored in angular units (rad/s).  File formats and the CLI
speak ordinary frequencies (Hz); the 2*pi conversion happens exactly once,
at the boundary (`load_device` / `save_device`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .constants import HBAR, K_B
from .errors import DeviceFileError, ParameterError

TWO_PI = 2.0 * math.pi

# Effective added noise of the reference measurement chain, in quanta.
# This is the measured end-to-end value; the beam-splitter loss model with
# n_add=0.8 and 2.5 dB of line loss predicts 1.81 (see limits module).
REFERENCE_N_ADD_EFF = 2.1


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0.0:
            raise ParameterError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class MechanicalMode:
    """One flexural mechanical resonance.

    omega_m : resonance frequency (rad/s)
    gamma_m : intrinsic energy decay rate (rad/s)
    mass    : effective mass (kg)
    """

    omega_m: float
    gamma_m: float
    mass: float

    def __post_init__(self) -> None:
        _require_positive(omega_m=self.omega_m, gamma_m=self.gamma_m, mass=self.mass)
        if self.omega_m / self.gamma_m < 1.0:
            raise ParameterError("quality factor omega_m/gamma_m must be >= 1")


@dataclass(frozen=True)
class Cavity:
    """Microwave cavity: resonance, port coupling, internal loss, geometry.

    beta is the fraction of the outgoing field routed to the measurement
    port: 1/2 for a symmetric two-port circuit (power leaves equally toward
    output and input), 1 for a single-port reflection geometry.  Any value
    in (0, 1] is accepted.
    """

    omega_c: float
    kappa_ex: float
    kappa_0: float
    beta: float = 0.5

    def __post_init__(self) -> None:
        _require_positive(omega_c=self.omega_c, kappa_ex=self.kappa_ex, kappa_0=self.kappa_0)
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"beta must lie in (0, 1], got {self.beta!r}")

    @property
    def kappa(self) -> float:
        """Total energy decay rate kappa_0 + kappa_ex (rad/s)."""
        return self.kappa_0 + self.kappa_ex


@dataclass(frozen=True)
class Coupling:
    """Electromechanical cavity pull G = d(omega_c)/dx in rad/s per meter.

    The vacuum coupling rate g0 = G*x_zp is always recomputed from G and the
    mechanical mode, never stored, so the two cannot drift apart.
    """

    G: float

    def __post_init__(self) -> None:
        _require_positive(G=self.G)

    def g0(self, mech: MechanicalMode) -> float:
        """Vacuum coupling rate G*x_zp (rad/s)."""
        return self.G * zero_point_motion(mech)


@dataclass(frozen=True)
class DeviceParams:
    """Complete static description of one electromechanical device."""

    mech: MechanicalMode
    cavity: Cavity
    coupling: Coupling

    @property
    def sideband_resolution(self) -> float:
        """omega_m / kappa; the device is resolved-sideband when >> 1."""
        return self.mech.omega_m / self.cavity.kappa


def zero_point_motion(mech: MechanicalMode) -> float:
    """RMS ground-state displacement sqrt(hbar / (2 m omega_m)) in meters."""
    _require_positive(mass=mech.mass, omega_m=mech.omega_m)
    return math.sqrt(HBAR / (2.0 * mech.mass * mech.omega_m))


def quality_factor(mech: MechanicalMode) -> float:
    """Mechanical quality factor omega_m / gamma_m."""
    _require_positive(gamma_m=mech.gamma_m)
    return mech.omega_m / mech.gamma_m


def bose_occupancy(temperature: float, omega: float) -> float:
    """Equilibrium occupancy 1/(exp(hbar*omega/k_B*T) - 1) of a mode at `omega`.

    Returns exactly 0 at T=0.  For k_B*T >> hbar*omega this approaches
    k_B*T/(hbar*omega).
    """
    if not omega > 0.0:
        raise ParameterError(f"omega must be > 0, got {omega!r}")
    if temperature < 0.0:
        raise ParameterError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (K_B * temperature)
    if x > 700.0:  # expm1 would overflow; occupancy is ~exp(-x) anyway
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def temperature_for_occupancy(n: float, omega: float) -> float:
    """Temperature at which a mode at `omega` holds `n` thermal quanta.

    Exact inverse of `bose_occupancy`: T = hbar*omega / (k_B ln(1 + 1/n)).
    """
    if not omega > 0.0:
        raise ParameterError(f"omega must be > 0, got {omega!r}")
    if not n > 0.0:
        raise ParameterError(f"occupancy must be > 0, got {n!r}")
    return HBAR * omega / (K_B * math.log1p(1.0 / n))


# --- device parameter files -------------------------------------------------
#
# Flat UTF-8 key=value text.  Keys suffixed _hz hold ordinary frequencies and
# are multiplied by 2*pi on load; G_hz_per_m likewise.

DEVICE_FILE_KEYS = (
    "omega_m_hz",
    "gamma_m_hz",
    "mass_kg",
    "omega_c_hz",
    "kappa_ex_hz",
    "kappa_0_hz",
    "beta",
    "G_hz_per_m",
)

_ANGULAR_KEYS = frozenset(k for k in DEVICE_FILE_KEYS if k.endswith("_hz") or k == "G_hz_per_m")


def parse_device_text(text: str, source: str = "<string>") -> DeviceParams:
    """Parse a device parameter file body into DeviceParams."""
    seen: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise DeviceFileError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        if key not in DEVICE_FILE_KEYS:
            raise DeviceFileError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise DeviceFileError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            seen[key] = float(value.strip())
        except ValueError as exc:
            raise DeviceFileError(f"{source}:{lineno}: bad value for {key!r}: {value.strip()!r}") from exc

    missing = [k for k in DEVICE_FILE_KEYS if k not in seen]
    if missing:
        raise DeviceFileError(f"{source}: missing keys: {', '.join(missing)}")

    def ang(key: str) -> float:
        return TWO_PI * seen[key]

    return DeviceParams(
        mech=MechanicalMode(omega_m=ang("omega_m_hz"), gamma_m=ang("gamma_m_hz"), mass=seen["mass_kg"]),
        cavity=Cavity(
            omega_c=ang("omega_c_hz"),
            kappa_ex=ang("kappa_ex_hz"),
            kappa_0=ang("kappa_0_hz"),
            beta=seen["beta"],
        ),
        coupling=Coupling(G=ang("G_hz_per_m")),
    )


def load_device(path: str | Path) -> DeviceParams:
    """Load a device parameter file (see DEVICE_FILE_KEYS for the schema)."""
    path = Path(path)
    return parse_device_text(path.read_text(encoding="utf-8"), source=str(path))


def device_file_text(device: DeviceParams, comments: dict[str, str] | None = None) -> str:
    """Serialize DeviceParams back to the key=value file format."""
    values = {
        "omega_m_hz": device.mech.omega_m / TWO_PI,
        "gamma_m_hz": device.mech.gamma_m / TWO_PI,
        "mass_kg": device.mech.mass,
        "omega_c_hz": device.cavity.omega_c / TWO_PI,
        "kappa_ex_hz": device.cavity.kappa_ex / TWO_PI,
        "kappa_0_hz": device.cavity.kappa_0 / TWO_PI,
        "beta": device.cavity.beta,
        "G_hz_per_m": device.coupling.G / TWO_PI,
    }
    lines = []
    for key in DEVICE_FILE_KEYS:
        if comments and key in comments:
            lines.append(f"# {comments[key]}")
        lines.append(f"{key}={values[key]:.17g}")
    return "\n".join(lines) + "\n"


def save_device(device: DeviceParams, path: str | Path) -> None:
    Path(path).write_text(device_file_text(device), encoding="utf-8")


def reference_device() -> DeviceParams:
    """The bundled reference device: a 10.56 MHz aluminum membrane mode
    coupled to a 7.54 GHz superconducting LC cavity (two-port, beta=1/2)."""
    return DeviceParams(
        mech=MechanicalMode(omega_m=TWO_PI * 10.56e6, gamma_m=TWO_PI * 32.0, mass=48e-15),
        cavity=Cavity(
            omega_c=TWO_PI * 7.54e9,
            kappa_ex=TWO_PI * 133e3,
            kappa_0=TWO_PI * 67e3,
            beta=0.5,
        ),
        coupling=Coupling(G=TWO_PI * 49e6 / 1e-9),
    )
