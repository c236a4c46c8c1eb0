"""Qubit-qubit exchange coupling from port impedances.

The exchange rate J between two transmons is evaluated from the transfer
impedance Z_12 of the surrounding circuit, and cross-checked against an
explicit mode sum, exact diagonalisation, and the lumped-capacitance formula.
"""
from .errors import ZCouplingError
from .exchange import ExchangeResult, fit_cc, j_capacitive, j_impedance, j_mode_sum, pv_integral_check, sweep_j
from .netlist import ModeSet, Netlist, evaluate_z, find_poles, parse_netlist
from .network_io import ImpedanceTable, read_impedance_csv, read_touchstone
from .transmon import TransmonSpec, TransmonSpectrum, calibrate_ej, solve_spectrum, spectrum_at

__version__ = "0.1.0"

__all__ = [
    "ExchangeResult", "ImpedanceTable", "ModeSet", "Netlist", "TransmonSpec", "TransmonSpectrum",
    "ZCouplingError", "calibrate_ej", "evaluate_z", "find_poles", "fit_cc", "j_capacitive",
    "j_impedance", "j_mode_sum", "parse_netlist", "pv_integral_check", "read_impedance_csv",
    "read_touchstone", "solve_spectrum", "spectrum_at", "sweep_j",
]
