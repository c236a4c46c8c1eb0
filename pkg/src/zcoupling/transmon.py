"""Transmon spectra in the Cooper-pair charge basis.

The Hamiltonian

    H = sum_n 4 E_C (n - n_g)^2 |n><n| - (E_J / 2) sum_n (|n><n+1| + |n+1><n|)

is tridiagonal, so every spectrum here is a handful of eigenvalues of a
(2N+1)-point tridiagonal matrix. Energies are joules on input; level
energies come back as angular frequencies referenced to the ground state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import CalibrationError, ConvergenceError, CutoffError, TransmonRegimeWarning
from .quantities import ELEMENTARY_CHARGE, HBAR

DEFAULT_CUTOFF = 30
MAX_CUTOFF = 200
CONVERGENCE_RTOL = 1e-9


@dataclass(frozen=True)
class TransmonSpec:
    """Charging and Josephson energies (joules), offset charge and cutoff.

    The charge basis spans ``n = -charge_cutoff .. charge_cutoff``.
    """

    charging_energy: float
    josephson_energy: float
    offset_charge: float = 0.0
    charge_cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not self.charging_energy > 0:
            raise ValueError("charging energy must be positive")
        if not self.josephson_energy >= 0:
            raise ValueError("Josephson energy must be non-negative")
        if self.charge_cutoff < 5:
            raise CutoffError(f"charge cutoff {self.charge_cutoff} < 5")
        if self.ej_over_ec < 20:
            warnings.warn(
                f"E_J/E_C = {self.ej_over_ec:.3g} is outside the transmon regime (< 20)",
                TransmonRegimeWarning,
                stacklevel=3,
            )

    @property
    def ej_over_ec(self) -> float:
        return self.josephson_energy / self.charging_energy

    def with_cutoff(self, cutoff: int) -> "TransmonSpec":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TransmonRegimeWarning)
            return TransmonSpec(self.charging_energy, self.josephson_energy, self.offset_charge, cutoff)


@dataclass(frozen=True)
class TransmonSpectrum:
    """Solved transmon: level energies (rad/s, q_0 = 0) and charge matrix elements."""

    spec: TransmonSpec
    level_energies: np.ndarray
    charge_matrix: np.ndarray
    converged: bool
    cutoff: int
    eigenvectors: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def levels(self) -> int:
        return len(self.level_energies)

    @cached_property
    def transitions(self) -> np.ndarray:
        """Nearest-neighbour transition frequencies q_{i,i+1} (rad/s)."""
        return np.diff(self.level_energies)

    @property
    def q01(self) -> float:
        return float(self.transitions[0])

    @property
    def anharmonicity(self) -> float:
        """q_12 - q_01 in rad/s; negative for a transmon (about -E_C/hbar)."""
        return float(self.transitions[1] - self.transitions[0])

    def n(self, i: int, j: int) -> float:
        return float(self.charge_matrix[i, j])


def charge_diagonal(spec: TransmonSpec) -> np.ndarray:
    n = np.arange(-spec.charge_cutoff, spec.charge_cutoff + 1, dtype=float)
    return 4.0 * spec.charging_energy * (n - spec.offset_charge) ** 2


def build_charge_hamiltonian(spec: TransmonSpec) -> np.ndarray:
    """Dense (2N+1) x (2N+1) charge-basis Hamiltonian in joules."""
    diag = charge_diagonal(spec)
    off = np.full(len(diag) - 1, -0.5 * spec.josephson_energy)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _diagonalize(spec: TransmonSpec, levels_kept: int):
    diag = charge_diagonal(spec)
    off = np.full(len(diag) - 1, -0.5 * spec.josephson_energy)
    energies, vectors = eigh_tridiagonal(
        diag, off, select="i", select_range=(0, levels_kept - 1)
    )
    return energies, vectors


def _spectrum_at(spec: TransmonSpec, levels_kept: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    energies, vectors = _diagonalize(spec, levels_kept)
    n = np.arange(-spec.charge_cutoff, spec.charge_cutoff + 1, dtype=float)
    # fix phases so that n_{i,i+1} >= 0, walking up the ladder
    for i in range(levels_kept - 1):
        if vectors[:, i] @ (n * vectors[:, i + 1]) < 0:
            vectors[:, i + 1] *= -1.0
    charge = vectors.T @ (n[:, None] * vectors)
    charge = 0.5 * (charge + charge.T)
    levels = (energies - energies[0]) / HBAR
    return levels, charge, vectors


def solve_spectrum(spec: TransmonSpec, levels_kept: int = 6, auto_cutoff: bool = True) -> TransmonSpectrum:
    """Diagonalize the transmon and return levels and charge matrix elements.

    Convergence is tested by doubling the charge cutoff: the spectrum is
    ``converged`` when q_01 moves by less than 1e-9 relative. With
    ``auto_cutoff`` the cutoff keeps doubling until that holds, and
    :class:`ConvergenceError` is raised once it would exceed 200.
    """
    if levels_kept < 2:
        raise ValueError("need at least two levels")
    cutoff = spec.charge_cutoff
    while True:
        if levels_kept > 2 * cutoff - 3:
            raise CutoffError(f"levels_kept={levels_kept} exceeds 2N-3 for N={cutoff}")
        trial = spec.with_cutoff(cutoff)
        levels, charge, vectors = _spectrum_at(trial, levels_kept)
        doubled, _, _ = _spectrum_at(spec.with_cutoff(2 * cutoff), levels_kept)
        converged = abs(doubled[1] - levels[1]) < CONVERGENCE_RTOL * abs(levels[1])
        if converged or not auto_cutoff:
            return TransmonSpectrum(spec, levels, charge, converged, cutoff, vectors)
        cutoff *= 2
        if cutoff > MAX_CUTOFF:
            raise ConvergenceError(f"transmon spectrum not converged at cutoff {cutoff // 2}")


def _q01(ec: float, ej: float, ng: float, cutoff: int) -> float:
    diag = 4.0 * ec * (np.arange(-cutoff, cutoff + 1) - ng) ** 2
    off = np.full(2 * cutoff, -0.5 * ej)
    e = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 1))
    return (e[1] - e[0]) / HBAR


def calibrate_ej(target_q01: float, charging_energy: float, offset_charge: float = 0.0,
                 cutoff: int = DEFAULT_CUTOFF) -> float:
    """Josephson energy that puts the 0-1 transition at ``target_q01`` (rad/s).

    Bracketed root find on E_J in [E_C, ...]; q_01 grows monotonically with
    E_J there. Raises :class:`CalibrationError` when the target would need
    E_J/E_C < 1.
    """
    if not target_q01 > 0:
        raise ValueError("target frequency must be positive")
    ec = charging_energy
    f = lambda ej: _q01(ec, ej, offset_charge, cutoff) - target_q01  # noqa: E731
    lo = ec
    if f(lo) > 0:
        raise CalibrationError(
            f"q01/2pi = {target_q01 / (2 * np.pi) / 1e9:.4g} GHz needs E_J/E_C < 1 "
            f"(E_C/h = {ec / (2 * np.pi * HBAR) / 1e6:.4g} MHz)"
        )
    hi = max(2.0 * ec, (HBAR * target_q01 + ec) ** 2 / (8.0 * ec))
    while f(hi) < 0:
        hi *= 2.0
    ej = brentq(f, lo, hi, xtol=1e-15 * hi, rtol=1e-14, maxiter=200)
    return float(ej)


def charging_energy_from_capacitance(c_total: float) -> float:
    """E_C = e^2 / (2 C)."""
    if not c_total > 0:
        raise ValueError("capacitance must be positive")
    return ELEMENTARY_CHARGE**2 / (2.0 * c_total)


def spec_from_capacitance(c_total: float, target_q01: float, offset_charge: float = 0.0,
                          cutoff: int = DEFAULT_CUTOFF) -> TransmonSpec:
    ec = charging_energy_from_capacitance(c_total)
    ej = calibrate_ej(target_q01, ec, offset_charge, cutoff)
    return TransmonSpec(ec, ej, offset_charge, cutoff)


def spectrum_at(charging_energy: float, target_q01: float, levels_kept: int = 6,
                offset_charge: float = 0.0) -> TransmonSpectrum:
    """Spectrum with E_J calibrated so that q_01 equals ``target_q01`` (rad/s)."""
    ej = calibrate_ej(target_q01, charging_energy, offset_charge)
    return solve_spectrum(TransmonSpec(charging_energy, ej, offset_charge), levels_kept)
