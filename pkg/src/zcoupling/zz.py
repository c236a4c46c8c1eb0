"""ZZ crosstalk of two qubits and a tunable coupler in the Duffing model.

    H/hbar = sum_i [q_i n_i - (alpha_i/2) n_i (n_i - 1)]
             + sum_{i<j} (J_ij/hbar) (b_i^dag b_j + b_i b_j^dag)

over modes ordered (qubit 1, qubit 2, coupler), each truncated to d levels.
The coupling conserves the total excitation number, so dressed states are
found block by block (N = 0, 1, 2) in a frame rotating at the mean qubit
frequency, so block energies carry rounding errors set by detunings rather
than by absolute frequencies.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh
from scipy.optimize import brentq, linear_sum_assignment

from .errors import ConvergenceError, CSVFormatError, DimensionError, LabelingError
from .quantities import GHZ, HBAR, KHZ, MHZ, PLANCK, TWO_PI

MAX_DIMENSION = 4096
DEFAULT_TRUNCATION = 5
CONVERGENCE_TOL = TWO_PI * 1e3  # rad/s
ROOT_TOL_GHZ = 1e-4
LABELS = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0))
MIN_OVERLAP = 0.5


@dataclass(frozen=True)
class DuffingSystem:
    """Three Duffing modes (qubit 1, qubit 2, coupler).

    ``frequencies`` and ``anharmonicities`` are rad/s, anharmonicities
    positive (the Hamiltonian carries -alpha/2). Couplings are joules.
    """

    frequencies: tuple
    anharmonicities: tuple
    j12: float = 0.0
    j1c: float = 0.0
    j2c: float = 0.0
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        f = tuple(float(x) for x in self.frequencies)
        a = tuple(float(x) for x in self.anharmonicities)
        if len(f) != 3 or len(a) != 3:
            raise ValueError("three modes required: qubit 1, qubit 2, coupler")
        if any(x < 0 for x in a):
            raise ValueError("anharmonicities are positive in this convention")
        if self.truncation < 3:
            raise ValueError("truncation must be at least 3")
        if self.truncation**3 > MAX_DIMENSION:
            raise DimensionError(f"dimension {self.truncation**3} exceeds {MAX_DIMENSION}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "anharmonicities", a)

    @property
    def coupling_matrix(self) -> np.ndarray:
        """Symmetric J_ij/hbar in rad/s."""
        j = np.zeros((3, 3))
        j[0, 1] = j[1, 0] = self.j12 / HBAR
        j[0, 2] = j[2, 0] = self.j1c / HBAR
        j[1, 2] = j[2, 1] = self.j2c / HBAR
        return j

    def swapped(self) -> "DuffingSystem":
        """Qubit labels 1 and 2 exchanged."""
        f, a = self.frequencies, self.anharmonicities
        return replace(self, frequencies=(f[1], f[0], f[2]), anharmonicities=(a[1], a[0], a[2]),
                       j1c=self.j2c, j2c=self.j1c)

    def with_truncation(self, d: int) -> "DuffingSystem":
        return replace(self, truncation=d)


def _labels(d: int) -> np.ndarray:
    return np.array(list(itertools.product(range(d), repeat=3)), dtype=int)


def build_duffing_hamiltonian(sys: DuffingSystem, frame: float = 0.0) -> np.ndarray:
    """Dense d^3 Hamiltonian in rad/s, optionally in a frame rotating at ``frame``."""
    d = sys.truncation
    b = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)

    def on(mode, op):
        mats = [eye, eye, eye]
        mats[mode] = op
        return np.kron(np.kron(mats[0], mats[1]), mats[2])

    lab = _labels(d)
    diag = np.zeros(d**3)
    for i, (q, a) in enumerate(zip(sys.frequencies, sys.anharmonicities)):
        n = lab[:, i]
        diag += (q - frame) * n - 0.5 * a * n * (n - 1)
    h = np.diag(diag)
    jm = sys.coupling_matrix
    for i, j in ((0, 1), (0, 2), (1, 2)):
        if jm[i, j] != 0:
            hop = on(i, b.T) @ on(j, b)
            h = h + jm[i, j] * (hop + hop.T)
    return h


class Labeling(NamedTuple):
    """Dressed-state energy and squared overlap for each label in LABELS."""

    energies: np.ndarray
    overlaps: np.ndarray

    @property
    def quality(self) -> float:
        return float(np.min(self.overlaps))


def label_states(values: np.ndarray, vectors: np.ndarray, bare: np.ndarray,
                 labels: Sequence = LABELS) -> tuple[np.ndarray, np.ndarray]:
    """Map bare labels to dressed indices by maximum squared overlap.

    ``bare`` lists the bare label of each basis row of ``vectors``. Returns
    (indices, overlaps). When the greedy choice is not injective the
    assignment is solved globally. Raises :class:`LabelingError` if any
    overlap falls below 0.5.
    """
    rows = []
    for lab in labels:
        hit = np.flatnonzero((bare == np.asarray(lab)).all(axis=1))
        if hit.size == 0:
            raise LabelingError(f"label {lab} is not in the basis")
        rows.append(int(hit[0]))
    ov = np.abs(vectors[rows, :]) ** 2
    idx = np.argmax(ov, axis=1)
    if len(set(idx.tolist())) < len(idx):
        r, c = linear_sum_assignment(-ov)
        idx = c[np.argsort(r)]
    best = ov[np.arange(len(labels)), idx]
    if np.any(best < MIN_OVERLAP):
        bad = [labels[k] for k in np.flatnonzero(best < MIN_OVERLAP)]
        raise LabelingError(f"states {bad} too hybridised to label (overlap {best.min():.3f})")
    return idx, best


def dressed_levels(sys: DuffingSystem, h: np.ndarray | None = None, frame: float | None = None) -> Labeling:
    """Labelled dressed energies (rad/s, rotating frame) of |000>, |100>, |010>, |110>.

    ``h`` overrides the Hamiltonian (it must be the one built for ``sys``
    in the same frame).
    """
    frame = 0.5 * (sys.frequencies[0] + sys.frequencies[1]) if frame is None else frame
    if h is None:
        h = build_duffing_hamiltonian(sys, frame)
    lab = _labels(sys.truncation)
    exc = lab.sum(axis=1)
    energies = np.empty(len(LABELS))
    overlaps = np.empty(len(LABELS))
    for n in (0, 1, 2):
        sel = np.flatnonzero(exc == n)
        vals, vecs = eigh(h[np.ix_(sel, sel)])
        want = [k for k, l in enumerate(LABELS) if sum(l) == n]
        idx, best = label_states(vals, vecs, lab[sel], [LABELS[k] for k in want])
        energies[want] = _rayleigh(h[np.ix_(sel, sel)], vecs[:, idx])
        overlaps[want] = best
    return Labeling(energies, overlaps)


def _rayleigh(h: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Rayleigh quotients in extended precision.

    The eigenvector error is first order, so the quotient is accurate to
    second order; extended precision keeps the summation from undoing that.
    """
    hl = h.astype(np.longdouble)
    v = vecs.astype(np.longdouble)
    return np.array((np.sum(v * (hl @ v), axis=0) / np.sum(v * v, axis=0)), dtype=float)


def zz_from_levels(levels: Labeling) -> float:
    e00, e10, e01, e11 = levels.energies
    return float((e11 - e10) - (e01 - e00))


def zz_rate(sys: DuffingSystem, check_convergence: bool = True) -> float:
    """zeta = E11 - E10 - E01 + E00 in rad/s.

    With ``check_convergence`` the value is recomputed at d + 2 levels and a
    change of 2 pi x 1 kHz or more raises :class:`ConvergenceError`.
    """
    zeta = zz_from_levels(dressed_levels(sys))
    if check_convergence:
        d2 = sys.truncation + 2
        if d2**3 <= MAX_DIMENSION:
            z2 = zz_from_levels(dressed_levels(sys.with_truncation(d2)))
            if abs(z2 - zeta) >= CONVERGENCE_TOL:
                raise ConvergenceError(f"zeta changes by {abs(z2 - zeta) / TWO_PI:.3g} Hz from d={sys.truncation} to d={d2}")
    return zeta


# --------------------------------------------------------------------------
# coupler sweep


@dataclass(frozen=True)
class ZZCurve:
    """zeta(q_c) over a coupler grid (rad/s throughout).

    ``quality`` is the smallest labelling overlap at each point (NaN where
    labelling failed; those points have NaN zeta and bound no crossing).
    """

    coupler_frequencies: np.ndarray
    zeta: np.ndarray
    quality: np.ndarray
    crossings: tuple = ()

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.zeta)

    def sign_changes(self) -> int:
        z = self.zeta[self.valid]
        s = np.sign(z[z != 0])
        return int(np.sum(s[1:] != s[:-1]))


def _curve(qc: np.ndarray, values, name: str) -> Callable[[float], float]:
    if callable(values):
        return values
    v = np.asarray(values, dtype=float)
    if v.shape != qc.shape:
        raise ValueError(f"{name} must be defined on the coupler grid")
    spline = CubicSpline(qc, v) if qc.size >= 4 else (lambda x: np.interp(x, qc, v))
    return lambda x: float(spline(x))


def _zeta_at(template: DuffingSystem, qc: float, j1c: float, j2c: float, check: bool) -> tuple[float, float]:
    f = template.frequencies
    sys = replace(template, frequencies=(f[0], f[1], qc), j1c=j1c, j2c=j2c)
    try:
        lv = dressed_levels(sys)
        zeta = zz_from_levels(lv)
        if check:
            zeta = zz_rate(sys)
        return zeta, lv.quality
    except LabelingError:
        return math.nan, math.nan


def sweep_coupler(template: DuffingSystem, qc_grid, j1c, j2c, refine: bool = True,
                  check_convergence: bool = False, executor=None) -> ZZCurve:
    """zeta over coupler frequencies ``qc_grid`` (rad/s, increasing).

    ``j1c`` and ``j2c`` are couplings in joules, given on the grid or as
    callables of q_c. Crossings are bracketed by sign changes between valid
    neighbours, then refined by root finding on the exact zeta with the
    coupling curves interpolated (cubic spline) between grid points, to well
    below 1e-4 GHz.
    """
    qc = np.asarray(qc_grid, dtype=float)
    if qc.ndim != 1 or qc.size < 2 or np.any(np.diff(qc) <= 0):
        raise ValueError("coupler grid must be increasing with at least two points")
    f1 = _curve(qc, j1c, "J1c")
    f2 = _curve(qc, j2c, "J2c")
    args = [(template, float(x), f1(x), f2(x), check_convergence) for x in qc]
    if executor is None:
        out = [_zeta_at(*a) for a in args]
    else:
        out = list(executor.map(_zeta_at, *zip(*args)))
    zeta = np.array([o[0] for o in out])
    quality = np.array([o[1] for o in out])

    roots = []
    if refine:
        def g(x):
            z, _ = _zeta_at(template, x, f1(x), f2(x), False)
            if not math.isfinite(z):
                raise LabelingError(f"labelling failed at q_c = {x / GHZ:.6f} GHz")
            return z

        for k in range(qc.size - 1):
            a, b = zeta[k], zeta[k + 1]
            if not (math.isfinite(a) and math.isfinite(b)):
                continue
            if a == 0:
                roots.append(qc[k])
            elif a * b < 0:
                try:
                    roots.append(brentq(g, qc[k], qc[k + 1], xtol=TWO_PI * 1e3, rtol=1e-15))
                except LabelingError:
                    continue
        if zeta.size and zeta[-1] == 0:
            roots.append(qc[-1])
    return ZZCurve(qc, zeta, quality, tuple(float(r) for r in roots))


# --------------------------------------------------------------------------
# file formats


def parse_jcurve_csv(text) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read ``q_c_GHz, J1c_MHz, J2c_MHz``; returns (q_c rad/s, J1c J, J2c J)."""
    text = text.read() if hasattr(text, "read") else text
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cells = [c.strip() for c in s.split(",")]
        if not header_seen:
            if [c.lower() for c in cells] != ["q_c_ghz", "j1c_mhz", "j2c_mhz"]:
                raise CSVFormatError(f"line {lineno}: expected header 'q_c_GHz, J1c_MHz, J2c_MHz'")
            header_seen = True
            continue
        if len(cells) != 3:
            raise CSVFormatError(f"line {lineno}: expected 3 columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise CSVFormatError(f"line {lineno}: non-numeric value") from None
    if not rows:
        raise CSVFormatError("no data rows")
    a = np.array(rows)
    if np.any(np.diff(a[:, 0]) <= 0):
        raise CSVFormatError("q_c_GHz must be strictly increasing")
    return a[:, 0] * GHZ * TWO_PI, a[:, 1] * MHZ * PLANCK, a[:, 2] * MHZ * PLANCK


def read_jcurve_csv(path):
    with open(path) as fh:
        return parse_jcurve_csv(fh.read())


def format_jcurve_csv(qc, j1c, j2c) -> str:
    lines = ["q_c_GHz,J1c_MHz,J2c_MHz"]
    for x, a, b in zip(qc, j1c, j2c):
        lines.append(f"{x / TWO_PI / GHZ:.9f},{a / PLANCK / MHZ:.9e},{b / PLANCK / MHZ:.9e}")
    return "\n".join(lines) + "\n"


def format_zz_csv(curve: ZZCurve) -> str:
    lines = ["q_c_GHz,zz_kHz,label_quality"]
    for x, z, q in zip(curve.coupler_frequencies, curve.zeta, curve.quality):
        lines.append(f"{x / TWO_PI / GHZ:.9f},{z / TWO_PI / KHZ:.9e},{q:.6f}")
    return "\n".join(lines) + "\n"


def format_crossings_csv(curve: ZZCurve) -> str:
    lines = ["q_c_GHz"] + [f"{r / TWO_PI / GHZ:.9f}" for r in curve.crossings]
    return "\n".join(lines) + "\n"
