"""Qubit-qubit exchange coupling rate J by three routes.

* ``j_impedance``: from the transfer impedance Im Z_12 sampled at the two
  qubit transitions, the centrepiece of the package;
* ``j_mode_sum``: second-order sum over an explicit list of modes;
* ``j_capacitive``: the lumped direct-capacitance estimate, and its inverse
  ``fit_cc``.

``pv_integral_check`` numerically walks the principal-value chain that links
the mode continuum to Im Z, on a lossy table.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from .errors import BandCoverageError, DispersiveWarning, ResonanceError
from .netlist import ModeSet, find_poles
from .network_io import ImpedanceTable, sample_z
from .quantities import ELEMENTARY_CHARGE, HBAR, PLANCK
from .transmon import spectrum_at

POLE_GRID_INTERVALS = 3
DISPERSIVE_LIMIT = 0.1


@dataclass(frozen=True)
class ExchangeResult:
    """J in joules, with its two frequency terms and any warnings.

    ``term1`` is evaluated at qubit 1's transition and ``term2`` at qubit
    2's. ``reliable`` is False when a pole of Z_12 sits within three grid
    intervals of an evaluation point.
    """

    J: float
    route: str
    term1: float | None = None
    term2: float | None = None
    warnings: tuple = ()
    reliable: bool = True
    discarded_loss: float = 0.0

    @property
    def J_over_h(self) -> float:
        """J/h in MHz."""
        return self.J / (PLANCK * 1e6)

    @property
    def terms_over_h(self) -> tuple:
        return tuple(None if t is None else t / (PLANCK * 1e6) for t in (self.term1, self.term2))


def _real_if_close(x: complex, rtol: float = 1e-12):
    x = complex(x)
    if abs(x.imag) <= rtol * max(abs(x.real), 1e-300) or x.imag == 0:
        return float(x.real)
    return x


def _near_pole(table: ImpedanceTable, omega: float, poles: list[float]) -> bool:
    f = table.frequencies
    k = np.searchsorted(f, omega)
    return any(abs(int(np.searchsorted(f, p)) - int(k)) <= POLE_GRID_INTERVALS for p in poles)


def j_impedance(spec1, spec2, table: ImpedanceTable, i: int = 0, j: int = 0,
                ports: tuple[int, int] = (0, 1)) -> ExchangeResult:
    """Exchange rate from the transfer impedance.

    J_ij = 2 e^2 [ n1_{i+1,i} n2_{j,j+1} q1 Im Z12(q1) + n2_{j+1,j} n1_{i,i+1} q2 Im Z21(q2) ]

    with q1 = q^(1)_{i,i+1}, q2 = q^(2)_{j,j+1} taken from the two
    :class:`~zcoupling.transmon.TransmonSpectrum` objects. Re Z is dropped
    (lossless limit); the largest |Re Z|/|Z| seen is kept as
    ``discarded_loss``.
    """
    p1, p2 = ports
    q1 = float(spec1.transitions[i])
    q2 = float(spec2.transitions[j])
    n1, n2 = spec1.charge_matrix, spec2.charge_matrix
    s12 = sample_z(table, p1, p2, q1)
    s21 = sample_z(table, p2, p1, q2)
    e2 = ELEMENTARY_CHARGE**2
    term1 = 2.0 * e2 * n1[i + 1, i] * n2[j, j + 1] * q1 * s12.value.imag
    term2 = 2.0 * e2 * n2[j + 1, j] * n1[i, i + 1] * q2 * s21.value.imag

    notes = []
    for s, q in ((s12, q1), (s21, q2)):
        if s.pole_warning:
            notes.append(f"pole proximity at {q / (2 * math.pi) / 1e9:.6g} GHz: {s.reason}")
    lo, hi = table.band
    poles = sorted(set(find_poles(table, (lo, hi), p1, p2)) | set(find_poles(table, (lo, hi), p2, p1)))
    reliable = True
    for q in (q1, q2):
        if poles and _near_pole(table, q, poles):
            reliable = False
            notes.append(f"Z12 pole within {POLE_GRID_INTERVALS} grid intervals of "
                         f"{q / (2 * math.pi) / 1e9:.6g} GHz; result unreliable")
    loss = 0.0
    for s in (s12, s21):
        if abs(s.value) > 0:
            loss = max(loss, abs(s.value.real) / abs(s.value))
    if loss > 1e-6:
        notes.append(f"discarded loss |Re Z|/|Z| = {loss:.3g}")
    return ExchangeResult(float(term1 + term2), "impedance", float(term1), float(term2),
                          tuple(notes), reliable, loss)


def _level_couplings(g0: np.ndarray, n, level: int) -> np.ndarray:
    if level == 0:
        return g0
    if n is None:
        raise ValueError("charge matrix needed to scale couplings above the 0-1 transition")
    n = np.asarray(n)
    return g0 * (n[level, level + 1] / n[0, 1])


def j_mode_sum(n1, n2, q1: float, q2: float, modes: ModeSet, i: int = 0, j: int = 0) -> ExchangeResult:
    """J_ij = sum_k (hbar/2) [ g1* g2 / (q1 - w_k) + g1 g2* / (q2 - w_k) ].

    ``q1``, ``q2`` are the transitions q^(1)_{i,i+1}, q^(2)_{j,j+1} in rad/s.
    ``modes.couplings`` are the 0-1 rates; level-i rates are scaled by
    n_{i,i+1}/n_{0,1} from the charge matrices ``n1``/``n2`` (unused when
    i = j = 0).
    """
    w = modes.frequencies
    if w.size == 0:
        return ExchangeResult(0.0, "mode_sum", 0.0, 0.0)
    g1 = _level_couplings(modes.couplings[0], n1, i)
    g2 = _level_couplings(modes.couplings[1], n2, j)
    d1 = q1 - w
    d2 = q2 - w
    if np.any(d1 == 0) or np.any(d2 == 0):
        raise ResonanceError("qubit transition coincides with a mode frequency")
    notes = []
    ratio = max(np.max(np.abs(g1 / d1)), np.max(np.abs(g2 / d2)))
    if ratio > DISPERSIVE_LIMIT * (1 + 1e-9):  # the limit itself is allowed
        msg = f"max |g/Delta| = {ratio:.3g} > {DISPERSIVE_LIMIT}: outside the dispersive regime"
        warnings.warn(msg, DispersiveWarning, stacklevel=2)
        notes.append(msg)
    term1 = 0.5 * HBAR * np.sum(np.conj(g1) * g2 / d1)
    term2 = 0.5 * HBAR * np.sum(g1 * np.conj(g2) / d2)
    return ExchangeResult(_real_if_close(term1 + term2), "mode_sum",
                          _real_if_close(term1), _real_if_close(term2), tuple(notes))


def j_capacitive(c1: float, c2: float, cc: float, q1: float, q2: float) -> ExchangeResult:
    """J = hbar (1/2) C_c / sqrt(C1 C2) sqrt(q1 q2) for direct capacitive coupling."""
    if not (c1 > 0 and c2 > 0) or cc < 0:
        raise ValueError("capacitances must be positive")
    if not (q1 > 0 and q2 > 0):
        raise ValueError("qubit frequencies must be positive")
    J = HBAR * 0.5 * cc / math.sqrt(c1 * c2) * math.sqrt(q1 * q2)
    return ExchangeResult(J, "capacitive")


def fit_cc(j_target: float, c1: float, c2: float, q1: float, q2: float) -> float:
    """Coupling capacitance that makes :func:`j_capacitive` return ``j_target`` (joules).

    Pass |J| for impedance-route results, whose sign follows Im Z.
    """
    if j_target < 0:
        raise ValueError("j_target must be non-negative")
    return 2.0 * (j_target / HBAR) * math.sqrt(c1 * c2) / math.sqrt(q1 * q2)


def _sweep_point(table: ImpedanceTable, ec1: float, ec2: float, q1: float, q2: float,
                 ports: tuple[int, int]) -> ExchangeResult:
    s1 = spectrum_at(ec1, q1)
    s2 = s1 if (ec2 == ec1 and q2 == q1) else spectrum_at(ec2, q2)
    return j_impedance(s1, s2, table, ports=ports)


def sweep_j(table: ImpedanceTable, ec1: float, ec2: float, q1_values, q2_values,
            ports: tuple[int, int] = (0, 1), executor=None) -> list[ExchangeResult]:
    """Impedance-route J along a path of qubit frequencies (rad/s).

    Each qubit keeps its charging energy (joules) and has E_J recalibrated
    to hit the requested 0-1 transition, as when a junction is tuned.
    ``executor`` (anything with an ordered ``map``) parallelises the points.
    """
    q1 = np.asarray(q1_values, dtype=float)
    q2 = np.asarray(q2_values, dtype=float)
    if q1.shape != q2.shape:
        raise ValueError("frequency paths must have equal length")
    n = q1.size
    args = ([table] * n, [ec1] * n, [ec2] * n, q1.tolist(), q2.tolist(), [ports] * n)
    if executor is None:
        return [_sweep_point(*a) for a in zip(*args)]
    return list(executor.map(_sweep_point, *args))


# --------------------------------------------------------------------------
# principal-value check


class PVCheck(NamedTuple):
    pv_value: float
    plemelj_value: complex
    reference: float
    relative_gap: float
    applicable: bool
    note: str


def _adaptive_simpson(func, a: np.ndarray, b: np.ndarray, rtol: float = 1e-12,
                      atol: float = 0.0, max_depth: int = 40) -> float:
    """Adaptive Simpson over many intervals at once; returns the total."""
    total = 0.0
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = 0.5 * (a + b)
    fa, fm, fb = func(a), func(m), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    span = float(np.sum(b - a)) or 1.0
    for _ in range(max_depth):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = func(lm), func(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        tol = np.maximum(rtol * np.abs(left + right), atol * (b - a) / span)
        done = np.abs(err) <= 15.0 * tol
        total += float(np.sum((left + right + err / 15.0)[done]))
        keep = ~done
        if not keep.any():
            return total
        # split the unfinished intervals
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        fa_n = np.concatenate([fa[keep], fm[keep]])
        fb_n = np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        fa, fb = fa_n, fb_n
        m = 0.5 * (a + b)
    return total + float(np.sum(whole))


def _excluded_integral(func, knots: np.ndarray, q: float, delta: float, atol: float) -> float:
    pts = np.concatenate([knots[(knots < q - delta)], [q - delta], [q + delta], knots[knots > q + delta]])
    a, b = pts[:-1], pts[1:]
    keep = ~((a == q - delta) & (b == q + delta))
    return _adaptive_simpson(func, a[keep], b[keep], atol=atol)


def pv_integral_check(z_lossy: ImpedanceTable, q: float, ports: tuple[int, int] = (0, 1)) -> PVCheck:
    """Check (1/pi) P.V. int w Re Z12(w) / (q - w) dw  ->  q Im Z12(q) on a lossy table.

    The derivation uses the exp(-i w t) convention, in which Im Z has the
    opposite sign from the solver convention stored in tables; the reference
    is therefore ``-q * Im Z_table(q)``. The transform runs over the whole
    real line with Re Z even in frequency, so the positive-frequency table
    suffices. The principal value excludes a window of half-width delta
    around q and is Richardson-extrapolated from delta and delta/2; each
    remaining knot interval of the PCHIP interpolant is integrated by
    adaptive Simpson.

    ``plemelj_value`` adds the delta-function term, -i q Re Z12(q), and the
    relative gap compares that full bracket with the reference, so it
    vanishes as the loss goes to zero.
    """
    p1, p2 = ports
    f = z_lossy.frequencies
    lo, hi = z_lossy.band
    sample = sample_z(z_lossy, p1, p2, q)
    reference = -q * sample.value.imag
    re_z = z_lossy.z[:, p1, p2].real
    if np.max(np.abs(re_z)) <= 1e-15 * np.max(np.abs(z_lossy.z[:, p1, p2])):
        return PVCheck(0.0, 0j, reference, 1.0, False, "lossless input: check not applicable")

    re_i, _ = z_lossy.interpolator(p1, p2)
    mass = np.abs(f * re_z)
    in_band = float(trapezoid(mass, f))
    tails = mass[0] * f[0] / 2.0 + mass[-1] * f[-1]
    if tails > 0.01 * in_band:
        raise BandCoverageError(
            f"estimated Re Z weight outside the table band is {tails / in_band:.2%} of the total"
        )

    def integrand(w):
        r = w * re_i(w)
        return r / (q - w) - r / (q + w)

    k = int(np.searchsorted(f, q))
    gaps = np.diff(f)
    near = gaps[max(k - 1, 0):k + 1]
    delta = min(1e-3 * q, 0.05 * float(np.min(near)), 0.5 * (q - lo), 0.5 * (hi - q))
    atol = 1e-13 * max(in_band, abs(reference))
    i_full = _excluded_integral(integrand, f, q, delta, atol)
    i_half = _excluded_integral(integrand, f, q, 0.5 * delta, atol)
    pv = (2.0 * i_half - i_full) / math.pi
    bracket = pv - 1j * q * sample.value.real
    gap = abs(bracket - reference) / abs(reference)
    return PVCheck(float(pv), complex(bracket), float(reference), float(gap), True, "")
