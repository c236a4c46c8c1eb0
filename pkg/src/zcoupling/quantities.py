"""Physical constants and frequency/energy conversions.

Everything inside the package is strict SI: joules, coulombs, ohms and
angular frequencies in rad/s. Cyclic units (GHz, MHz) only appear at the
reporting edge.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Literal

import scipy.constants as _sc

# SI 2019 exact values
ELEMENTARY_CHARGE = 1.602176634e-19
PLANCK = 6.62607015e-34
HBAR = PLANCK / (2.0 * math.pi)
VACUUM_PERMITTIVITY = _sc.epsilon_0
VACUUM_PERMEABILITY = _sc.mu_0
SPEED_OF_LIGHT = _sc.c

TWO_PI = 2.0 * math.pi
GHZ = 1e9
MHZ = 1e6
KHZ = 1e3


@dataclass(frozen=True)
class PhysicalConstants:
    elementary_charge: float = ELEMENTARY_CHARGE
    reduced_planck: float = HBAR
    planck: float = PLANCK
    vacuum_permittivity: float = VACUUM_PERMITTIVITY
    vacuum_permeability: float = VACUUM_PERMEABILITY


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class Frequency:
    """A frequency tagged with its convention."""

    value: float
    convention: Literal["angular", "cyclic"] = "angular"

    @property
    def angular(self) -> float:
        return self.value if self.convention == "angular" else to_angular(self.value)

    @property
    def cyclic(self) -> float:
        return self.value if self.convention == "cyclic" else to_cyclic(self.value)


def to_angular(f):
    """Cyclic frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f


def to_cyclic(omega):
    """Angular frequency (rad/s) to cyclic frequency (Hz)."""
    return omega / TWO_PI


def energy_to_cyclic(energy):
    """Energy in joules to the equivalent cyclic frequency E/h in Hz."""
    return energy / PLANCK


def energy_to_angular(energy):
    return energy / HBAR


def angular_to_energy(omega):
    return HBAR * omega


def cyclic_to_energy(f):
    return PLANCK * f


def ghz(omega):
    """rad/s -> GHz (cyclic)."""
    return to_cyclic(omega) / GHZ


def mhz(omega):
    """rad/s -> MHz (cyclic)."""
    return to_cyclic(omega) / MHZ


def from_ghz(f_ghz):
    """GHz (cyclic) -> rad/s."""
    return to_angular(f_ghz * GHZ)


def from_mhz(f_mhz):
    """MHz (cyclic) -> rad/s."""
    return to_angular(f_mhz * MHZ)


def energy_mhz(energy):
    """Energy in joules reported as E/h in MHz."""
    return energy_to_cyclic(energy) / MHZ


# --------------------------------------------------------------------------
# unit-suffixed text

_PREFIX = {"a": 1e-18, "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
           "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}
_BASE = {"Hz": "frequency", "F": "capacitance", "H": "inductance", "ohm": "resistance",
         "Ohm": "resistance", "Ω": "resistance", "s": "time"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµΩ]+)\s*$")


def parse_quantity(text, dimension: str) -> float:
    """Parse ``"57.24 fF"``, ``"4.75 GHz"``, ``"50 ohm"`` into SI.

    ``dimension`` is one of frequency, capacitance, inductance, resistance or
    time. Frequencies come back in Hz (cyclic). A bare number is rejected:
    every physical input must name its unit.
    """
    m = _QUANTITY.match(str(text))
    if not m:
        raise ValueError(f"cannot read {text!r} as a number with a unit")
    value, unit = float(m.group(1)), m.group(2)
    for base, dim in _BASE.items():
        if unit.endswith(base) and unit[: -len(base)] in _PREFIX:
            if dim != dimension:
                raise ValueError(f"{text!r} is a {dim}, expected a {dimension}")
            return value * _PREFIX[unit[: -len(base)]]
    raise ValueError(f"unknown unit {unit!r} in {text!r}")
