"""Reference circuits and end-to-end cross-checks.

The fixtures are small netlists with closed-form impedances. The checks tie
the independent routes together and back the ``oracle`` CLI command.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import dispersive as dsp
from .exchange import j_capacitive, j_impedance, j_mode_sum, pv_integral_check
from .netlist import ModeSet, Netlist, add_series_loss, evaluate_z, find_poles, parse_netlist, port_impedance
from .network_io import ImpedanceTable, format_touchstone, network_file_from_table, parse_touchstone
from .quantities import ELEMENTARY_CHARGE, GHZ, TWO_PI
from .transmon import TransmonSpec, charging_energy_from_capacitance, solve_spectrum

FF = 1e-15


def pi_capacitive(cq1: float = 80 * FF, cq2: float = 80 * FF, cc: float = 0.2 * FF) -> Netlist:
    """Two grounded qubit capacitors bridged by C_c."""
    text = f"C 1 0 {cq1!r}\nC 2 0 {cq2!r}\n"
    if cc > 0:
        text += f"C 1 2 {cc!r}\n"
    return parse_netlist(text + "PORT 1 1 0\nPORT 2 2 0\n")


def pi_closed_form_z12(omega, cq1: float = 80 * FF, cq2: float = 80 * FF, cc: float = 0.2 * FF):
    """Im Z12 of :func:`pi_capacitive`: -C_c / (omega Delta)."""
    delta = (cq1 + cc) * (cq2 + cc) - cc**2
    return -cc / (np.asarray(omega) * delta)


def series_lc(c1: float = 80 * FF, c2: float = 80 * FF, cs: float = 2 * FF, f0: float = 7.55 * GHZ) -> Netlist:
    """Qubit capacitors joined by a series L-C_s branch; Z12 has one pole at ``f0``."""
    ceq = 1.0 / (1.0 / cs + 1.0 / c1 + 1.0 / c2)
    ind = 1.0 / ((TWO_PI * f0) ** 2 * ceq)
    return parse_netlist(f"C 1 0 {c1!r}\nC 2 0 {c2!r}\nC 1 m {cs!r}\nL m 2 {ind!r}\nPORT 1 1 0\nPORT 2 2 0\n")


def coupled_line(c_qubit: float = 80 * FF, c_couple: float = 5 * FF, z0: float = 50.0,
                 f_half_wave: float = 6.33 * GHZ) -> Netlist:
    """Two qubits capacitively coupled to the ends of an open transmission line."""
    tau = 1.0 / (2.0 * f_half_wave)
    return parse_netlist(
        f"C 1 0 {c_qubit!r}\nC 2 0 {c_qubit!r}\nC 1 a {c_couple!r}\nC b 2 {c_couple!r}\n"
        f"T a b {z0!r} {tau!r}\nPORT 1 1 0\nPORT 2 2 0\n"
    )


def lc_filter(c: float = 100 * FF, f0: float = 6 * GHZ) -> Netlist:
    """Shunt C, series L, shunt C; Z12 falls off as 1/omega^3 above ``f0``."""
    ind = 1.0 / ((TWO_PI * f0) ** 2 * c / 2.0)
    return parse_netlist(f"C 1 0 {c!r}\nC 2 0 {c!r}\nL 1 2 {ind!r}\nPORT 1 1 0\nPORT 2 2 0\n")


def resonance_grid(w0: float, q: float, quality: float, dense: int = 4000, sparse: int = 4000,
                   span: float = 20.0) -> np.ndarray:
    """Grid on [q/span, span q] clustered (sinh map) around a resonance of width w0/Q.

    Includes ``q`` itself.
    """
    width = w0 / quality
    smax = math.asinh(0.9 * w0 / width)
    peak = w0 + width * np.sinh(np.linspace(-smax, smax, dense))
    w = np.unique(np.concatenate([peak, np.geomspace(q / span, span * q, sparse), [q]]))
    return w[(w >= q / span) & (w <= span * q)]


def touchstone_round_trip(table: ImpedanceTable) -> ImpedanceTable:
    text = format_touchstone(network_file_from_table(table))
    return parse_touchstone(text, n_ports=table.port_count).to_impedance_table()


# --------------------------------------------------------------------------
# checks


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"{status} {self.name}: {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def check_capacitive_equivalence(ratios=(50.0, 100.0)) -> CheckResult:
    """Impedance-route J on the pi-network versus the lumped formula and closed form."""
    cq, cc = 80 * FF, 0.2 * FF
    table = touchstone_round_trip(evaluate_z(pi_capacitive(cq, cq, cc), TWO_PI * np.linspace(1e9, 20e9, 381)))
    delta = (cq + cc) ** 2 - cc**2
    ec = charging_energy_from_capacitance(cq + cc)
    worst_cap = worst_exact = 0.0
    for r in ratios:
        sp = solve_spectrum(TransmonSpec(ec, r * ec))
        res = j_impedance(sp, sp, table)
        exact = -4 * ELEMENTARY_CHARGE**2 * sp.n(0, 1) ** 2 * cc / delta
        cap = j_capacitive(cq + cc, cq + cc, cc, sp.q01, sp.q01).J
        worst_cap = max(worst_cap, abs(abs(res.J) - cap) / cap)
        worst_exact = max(worst_exact, abs(res.J - exact) / abs(exact))
    ok = worst_cap < 0.05 and worst_exact < 1e-4
    return CheckResult("capacitive-equivalence", ok, {"rel_vs_capacitive": worst_cap, "rel_vs_closed_form": worst_exact})


def pv_gaps(qualities=(1e4, 1e5)) -> list[float]:
    net = lc_filter()
    w0 = TWO_PI * 6 * GHZ
    q = 0.8 * w0
    gaps = []
    for quality in qualities:
        table = evaluate_z(add_series_loss(net, quality), resonance_grid(w0, q, quality))
        gaps.append(pv_integral_check(table, q).relative_gap)
    return gaps


def check_pv_identity() -> CheckResult:
    g1, g2 = pv_gaps()
    ratio = g1 / g2
    ok = g1 < 1e-2 and 7.0 <= ratio <= 13.0
    return CheckResult("pv-identity", ok, {"gap_Q1e4": g1, "gap_Q1e5": g2, "improvement": ratio})


def splitting_system(ratio: float, two_modes: bool, q01: float = TWO_PI * 5 * GHZ,
                     detuning: float = -TWO_PI * 1 * GHZ, anharmonicity: float = -TWO_PI * 0.25 * GHZ):
    """Degenerate Duffing-ladder qubits with one or two modes at |g/Delta| = ``ratio``."""
    d = abs(detuning)
    if two_modes:
        w = [q01 - detuning, q01 + 1.5 * d]
        g = ratio * d * np.array([[1.0, 0.7], [1.0, 1.2]])
    else:
        w = [q01 - detuning]
        g = ratio * d * np.ones((2, 1))
    ql = dsp.QubitLevels.duffing(q01, anharmonicity, 3)
    return dsp.FullSystem((ql, ql), ModeSet(w, g))


def check_splitting_vs_modesum(ratios=(0.01, 0.02, 0.04)) -> CheckResult:
    worst = -math.inf
    shrink = math.inf
    for two in (False, True):
        errs = []
        for r in ratios:
            sys = splitting_system(r, two)
            q = sys.qubits[0].transitions[0]
            ms = j_mode_sum(None, None, q, q, sys.modes).J
            js = dsp.extract_j_from_splitting(sys)
            worst = max(worst, abs(js - ms) / abs(ms) - (4 * r**2 + 1e-6))
            errs.append(dsp.heff_eigenvalue_error(sys))
        # errors listed for increasing g: each halving must shrink the error 6x
        shrink = min(shrink, min(errs[k + 1] / errs[k] for k in range(len(errs) - 1)))
    ok = worst <= 0 and shrink >= 6.0
    return CheckResult("splitting-vs-modesum", ok, {"worst_margin": worst, "min_heff_shrink": shrink})


def foster_violations(net: Netlist, band=(TWO_PI * 0.5 * GHZ, TWO_PI * 30 * GHZ), samples: int = 20001) -> int:
    """Count sampled decreases of Im Z11 not explained by a pole."""
    w = np.geomspace(*band, samples)
    z, ok = port_impedance(net, w)
    im = z[ok, 0, 0].imag
    wk = w[ok]
    poles = np.array(find_poles(net, band, 0, 0))
    bad = 0
    for k in np.flatnonzero(np.diff(im) <= 0):
        if not np.any((poles >= wk[k]) & (poles <= wk[k + 1])):
            bad += 1
    return bad


def check_foster() -> CheckResult:
    nets = {"series_lc": series_lc(), "coupled_line": coupled_line()}
    counts = {k: foster_violations(v) for k, v in nets.items()}
    return CheckResult("foster-monotonicity", all(c == 0 for c in counts.values()),
                       {f"violations_{k}": v for k, v in counts.items()})


CHECKS = {
    "capacitive": check_capacitive_equivalence,
    "pv": check_pv_identity,
    "splitting": check_splitting_vs_modesum,
    "foster": check_foster,
}


def run_checks(selector: str = "all") -> list[CheckResult]:
    if selector == "all":
        names = list(CHECKS)
    elif selector in CHECKS:
        names = [selector]
    else:
        raise KeyError(f"unknown check selector {selector!r}; choose from all, {', '.join(CHECKS)}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        res = CHECKS[name]()
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
