"""Multi-port network data: Touchstone v1 and CSV ingestion, S/Z/Y
conversion, interpolation of Z(omega) and capacitance extraction.

Tables store angular frequencies (rad/s) and impedances in ohms using the
engineering time convention exp(+j omega t) that EM solvers export, so a
capacitor reads Im Z = -1/(omega C).
"""
from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    CSVFormatError,
    NotCapacitiveError,
    OutOfGridError,
    PoleProximityWarning,
    ReciprocityWarning,
    SingularNetworkError,
    TouchstoneError,
)
from .quantities import TWO_PI

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_UNIT_NAMES = {"hz": "Hz", "khz": "kHz", "mhz": "MHz", "ghz": "GHz"}
FORMATS = ("RI", "MA", "DB")
KINDS = ("S", "Z", "Y")

SINGULAR_RCOND = 1e-12
RECIPROCITY_RTOL = 1e-6
POLE_RELATIVE_STEP = 0.5
POLE_MAGNITUDE = 1e4  # ohms


@dataclass(frozen=True, eq=False)
class ImpedanceTable:
    """Frequency-gridded P-port impedance matrix.

    Parameters
    ----------
    frequencies:
        strictly increasing angular frequencies, rad/s
    z:
        complex array of shape (F, P, P), ohms
    reference_impedance:
        port reference impedance the data came with (metadata only)
    source:
        ``"touchstone"``, ``"csv"`` or ``"netlist"``
    skipped:
        angular frequencies dropped from the grid (exact poles of a netlist)
    """

    frequencies: np.ndarray
    z: np.ndarray
    reference_impedance: float = 50.0
    source: Literal["touchstone", "csv", "netlist"] = "netlist"
    skipped: tuple = ()
    reciprocal: bool = True
    _interp: dict = field(default_factory=dict, repr=False)
    _poles: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        z = np.asarray(self.z, dtype=complex)
        if z.ndim != 3 or z.shape[1] != z.shape[2] or z.shape[0] != freqs.shape[0]:
            raise ValueError(f"z must have shape (F, P, P) matching {freqs.shape[0]} frequencies")
        if freqs.size == 0:
            raise ValueError("empty impedance table")
        if np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        freqs.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "z", z)
        if self.reciprocal and self.port_count > 1:
            scale = np.max(np.abs(z))
            if scale > 0 and self.reciprocity_error > RECIPROCITY_RTOL * scale:
                warnings.warn(
                    f"table violates reciprocity: max|Zij - Zji| = {self.reciprocity_error:.3g} ohm",
                    ReciprocityWarning,
                    stacklevel=3,
                )

    @property
    def port_count(self) -> int:
        return self.z.shape[1]

    @property
    def reciprocity_error(self) -> float:
        return float(np.max(np.abs(self.z - np.swapaxes(self.z, 1, 2))))

    @property
    def discarded_loss(self) -> float:
        """max |Re Z| / |Z| over all entries; what J evaluation throws away."""
        mag = np.abs(self.z)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(mag > 0, np.abs(self.z.real) / mag, 0.0)
        return float(np.max(ratio))

    @property
    def band(self) -> tuple[float, float]:
        return float(self.frequencies[0]), float(self.frequencies[-1])

    def interpolator(self, i: int, j: int):
        key = (i, j)
        if key not in self._interp:
            f = self.frequencies
            if f.size < 2:
                raise OutOfGridError("need at least two grid points to interpolate")
            self._interp[key] = (
                PchipInterpolator(f, self.z[:, i, j].real, extrapolate=False),
                PchipInterpolator(f, self.z[:, i, j].imag, extrapolate=False),
            )
        return self._interp[key]

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.z[:, i, j]


# --------------------------------------------------------------------------
# parameter conversions


def _as_stack(m):
    m = np.asarray(m, dtype=complex)
    return (m[None], True) if m.ndim == 2 else (m, False)


def s_to_z(s, z0: float = 50.0) -> np.ndarray:
    """Z = Z0 (I + S)(I - S)^-1 for a uniform real reference impedance.

    Accepts a single (P, P) matrix or a stack (F, P, P).
    """
    s, single = _as_stack(s)
    eye = np.eye(s.shape[-1])
    a = eye - s
    # S is dimensionless, so the identity sets the scale for "singular"
    smin = np.linalg.svd(a, compute_uv=False)[:, -1]
    for k in np.flatnonzero(smin < SINGULAR_RCOND * np.maximum(1.0, np.linalg.norm(s, 2, axis=(1, 2)))):
            raise SingularNetworkError(f"(I - S) is singular at index {k}: port at a reflection pole")
    # (I+S) and (I-S)^-1 commute
    z = z0 * np.linalg.solve(a, eye + s)
    return z[0] if single else z


def z_to_s(z, z0: float = 50.0) -> np.ndarray:
    """S = (Z - Z0 I)(Z + Z0 I)^-1."""
    z, single = _as_stack(z)
    eye = np.eye(z.shape[-1])
    s = np.linalg.solve(z + z0 * eye, z - z0 * eye)
    return s[0] if single else s


def y_to_z(y) -> np.ndarray:
    y, single = _as_stack(y)
    for k, mat in enumerate(y):
        if 1.0 / np.linalg.cond(mat) < SINGULAR_RCOND:
            raise SingularNetworkError(f"Y matrix singular at index {k}")
    z = np.linalg.inv(y)
    return z[0] if single else z


# --------------------------------------------------------------------------
# Touchstone v1


@dataclass
class NetworkFile:
    """Contents of a Touchstone v1 file.

    ``data`` holds the complex parameters exactly as written (format decoded,
    no normalization applied); ``frequencies`` are in ``frequency_unit``.
    """

    parameter_kind: str
    format: str
    frequency_unit: str
    reference_impedance: float
    frequencies: np.ndarray
    data: np.ndarray
    comments: list = field(default_factory=list)

    @property
    def port_count(self) -> int:
        return self.data.shape[1]

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.frequencies * FREQ_UNITS[self.frequency_unit.lower()]

    def to_impedance_table(self, normalized: bool = False) -> ImpedanceTable:
        """Convert to ohms.

        ``normalized`` says whether Z/Y entries are normalized to the
        reference resistance (strict Touchstone 1.1) rather than written in
        ohms/siemens, which is what most solver exports do.
        """
        r = self.reference_impedance
        kind = self.parameter_kind.upper()
        if kind == "S":
            z = s_to_z(self.data, r)
        elif kind == "Z":
            z = self.data * r if normalized else self.data.copy()
        else:
            y = self.data / r if normalized else self.data
            z = y_to_z(y)
        return ImpedanceTable(TWO_PI * self.frequencies_hz, z, r, "touchstone")


def _decode(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        return a * np.exp(1j * np.deg2rad(b))
    return 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))


def _encode(c: np.ndarray, fmt: str) -> tuple[np.ndarray, np.ndarray]:
    if fmt == "RI":
        return c.real, c.imag
    ang = np.rad2deg(np.angle(c))
    if fmt == "MA":
        return np.abs(c), ang
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(np.abs(c)), ang


def _parse_option_line(line: str, lineno: int) -> dict:
    opts = {"unit": "ghz", "kind": "S", "format": "MA", "r": 50.0}
    toks = line[1:].split()
    k = 0
    while k < len(toks):
        t = toks[k].lower()
        if t in FREQ_UNITS:
            opts["unit"] = t
        elif t.upper() in KINDS:
            opts["kind"] = t.upper()
        elif t.upper() in FORMATS:
            opts["format"] = t.upper()
        elif t == "r":
            if k + 1 >= len(toks):
                raise TouchstoneError(f"line {lineno}: 'R' without a value")
            opts["r"] = float(toks[k + 1])
            k += 1
        elif t.upper() in ("G", "H"):
            raise TouchstoneError(f"line {lineno}: {t.upper()}-parameters are not supported")
        else:
            raise TouchstoneError(f"line {lineno}: unknown option token {toks[k]!r}")
        k += 1
    return opts


def parse_touchstone(text, n_ports: int | None = None) -> NetworkFile:
    """Parse Touchstone v1.x text (``bytes`` or ``str``).

    The port count is taken from ``n_ports`` when given, otherwise inferred
    from the record layout: a record starts on a line holding an odd number
    of values (frequency + pairs); continuation lines hold pairs only.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    opts = None
    comments = []
    records: list[list[float]] = []
    record_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line, _, comment = raw.partition("!")
        if _:
            comments.append(comment.strip())
        line = line.strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError(
                f"line {lineno}: Touchstone v2 keyword {line.split()[0]} found; only v1 files are supported"
            )
        if line.startswith("#"):
            if opts is not None:
                raise TouchstoneError(f"line {lineno}: second option line")
            opts = _parse_option_line(line, lineno)
            continue
        if opts is None:
            raise TouchstoneError(f"line {lineno}: data before the option line")
        try:
            values = [float(t) for t in line.split()]
        except ValueError as exc:
            raise TouchstoneError(f"line {lineno}: {exc}") from None
        if len(values) % 2 == 1:
            records.append(values)
            record_lines.append(lineno)
        else:
            if not records:
                raise TouchstoneError(f"line {lineno}: continuation line without a frequency")
            records[-1].extend(values)
    if opts is None:
        raise TouchstoneError("missing option line ('# <unit> <S|Y|Z> <RI|MA|DB> R <Z0>')")
    if not records:
        raise TouchstoneError("no network data")

    if n_ports is None:
        n_vals = len(records[0]) - 1
        n_ports = int(round(math.sqrt(n_vals / 2)))
        if 2 * n_ports * n_ports != n_vals:
            raise TouchstoneError(f"line {record_lines[0]}: {n_vals} values is not 2*P^2 for any P")
    width = 1 + 2 * n_ports * n_ports
    for rec, lineno in zip(records, record_lines):
        if len(rec) != width:
            raise TouchstoneError(
                f"line {lineno}: record has {len(rec)} values, expected {width} for {n_ports} ports"
            )
    arr = np.array(records)
    freqs = arr[:, 0]
    if np.any(np.diff(freqs) <= 0):
        bad = int(np.argmax(np.diff(freqs) <= 0)) + 1
        raise TouchstoneError(f"line {record_lines[bad]}: frequencies not strictly increasing")
    flat = _decode(arr[:, 1::2], arr[:, 2::2], opts["format"])
    p = n_ports
    if p == 2:
        # v1 two-port quirk: S11 S21 S12 S22
        data = flat.reshape(-1, 2, 2).transpose(0, 2, 1)
    else:
        data = flat.reshape(-1, p, p)
    return NetworkFile(opts["kind"], opts["format"], _UNIT_NAMES[opts["unit"]], opts["r"],
                       freqs, np.ascontiguousarray(data), comments)


def read_touchstone(path) -> NetworkFile:
    path = Path(path)
    m = re.fullmatch(r"\.s(\d+)p", path.suffix.lower())
    n_ports = int(m.group(1)) if m else None
    return parse_touchstone(path.read_bytes(), n_ports)


def _fmt(x: float) -> str:
    return repr(float(x))


def format_touchstone(nf: NetworkFile) -> str:
    """Serialize to Touchstone v1 text, full double precision."""
    lines = [f"! {c}" if c else "!" for c in nf.comments]
    lines.append(f"# {nf.frequency_unit} {nf.parameter_kind} {nf.format} R {_fmt(nf.reference_impedance)}")
    p = nf.port_count
    for f, mat in zip(nf.frequencies, nf.data):
        entries = mat.T.ravel() if p == 2 else mat.ravel()
        a, b = _encode(entries, nf.format)
        pairs = [f"{_fmt(x)} {_fmt(y)}" for x, y in zip(a, b)]
        if p <= 2:
            lines.append(" ".join([_fmt(f)] + pairs))
            continue
        # each matrix row starts a new line, at most four pairs per line
        first = True
        for r in range(p):
            row = pairs[r * p:(r + 1) * p]
            for k in range(0, p, 4):
                chunk = " ".join(row[k:k + 4])
                lines.append(f"{_fmt(f)} {chunk}" if first else chunk)
                first = False
    return "\n".join(lines) + "\n"


def network_file_from_table(table: ImpedanceTable, kind: str = "Z", fmt: str = "RI",
                            unit: str = "GHz", comments=None) -> NetworkFile:
    kind = kind.upper()
    r = table.reference_impedance
    if kind == "Z":
        data = np.array(table.z)
    elif kind == "S":
        data = z_to_s(table.z, r)
    elif kind == "Y":
        data = np.linalg.inv(table.z)
    else:
        raise ValueError(f"unknown parameter kind {kind}")
    freqs = table.frequencies / TWO_PI / FREQ_UNITS[unit.lower()]
    return NetworkFile(kind, fmt.upper(), _UNIT_NAMES[unit.lower()], r, freqs, data, list(comments or []))


def write_touchstone(path, table: ImpedanceTable, kind: str = "Z", fmt: str = "RI",
                     unit: str = "GHz", comments=None) -> None:
    nf = network_file_from_table(table, kind, fmt, unit, comments)
    Path(path).write_text(format_touchstone(nf), encoding="utf-8")


# --------------------------------------------------------------------------
# CSV


def _csv_header(p: int) -> list[str]:
    pairs = [(i, j) for i in range(1, p + 1) for j in range(1, p + 1)]
    return (["freq_hz"] + [f"re(Z_{i}_{j})" for i, j in pairs]
            + [f"im(Z_{i}_{j})" for i, j in pairs])


_COL = re.compile(r"(re|im)\(Z_?(\d+)_(\d+)\)$|(re|im)\(Z(\d)(\d)\)$")


def parse_impedance_csv(text) -> ImpedanceTable:
    """Read the ``freq_hz, re(Z_i_j)..., im(Z_i_j)...`` schema."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CSVFormatError("line 1: empty file") from None
    if not header or header[0] != "freq_hz":
        raise CSVFormatError("line 1: first column must be 'freq_hz'")
    cols = []
    for name in header[1:]:
        m = _COL.match(name)
        if not m:
            raise CSVFormatError(f"line 1: bad column name {name!r}")
        part, i, j = (m.group(1), m.group(2), m.group(3)) if m.group(1) else (m.group(4), m.group(5), m.group(6))
        cols.append((part, int(i) - 1, int(j) - 1))
    n = len(cols) // 2
    p = int(round(math.sqrt(n)))
    if p * p * 2 != len(cols):
        raise CSVFormatError(f"line 1: {len(cols)} data columns do not describe a square port matrix")
    if sorted(cols) != sorted((part, i, j) for part in ("re", "im") for i in range(p) for j in range(p)):
        raise CSVFormatError("line 1: header does not name every port pair once for re and im")
    freqs, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CSVFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise CSVFormatError(f"line {lineno}: {exc}") from None
        freqs.append(vals[0])
        z = np.zeros((p, p), dtype=complex)
        for (part, i, j), v in zip(cols, vals[1:]):
            if part == "re":
                z[i, j] += v
            else:
                z[i, j] += 1j * v
        rows.append(z)
    if not rows:
        raise CSVFormatError("no data rows")
    freqs = np.array(freqs)
    if np.any(np.diff(freqs) <= 0) or freqs[0] <= 0:
        raise CSVFormatError("frequencies must be positive and strictly increasing")
    return ImpedanceTable(TWO_PI * freqs, np.array(rows), source="csv")


def read_impedance_csv(path) -> ImpedanceTable:
    return parse_impedance_csv(Path(path).read_text(encoding="utf-8"))


def format_impedance_csv(table: ImpedanceTable) -> str:
    p = table.port_count
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(_csv_header(p))
    for f, z in zip(table.frequencies / TWO_PI, table.z):
        flat = z.ravel()
        w.writerow([_fmt(f)] + [_fmt(x) for x in flat.real] + [_fmt(x) for x in flat.imag])
    return out.getvalue()


def write_impedance_csv(path, table: ImpedanceTable) -> None:
    Path(path).write_text(format_impedance_csv(table), encoding="utf-8")


# --------------------------------------------------------------------------
# interpolation


class ZSample(NamedTuple):
    value: complex
    pole_warning: bool
    reason: str


def _locate(table: ImpedanceTable, omega: float) -> tuple[float, int]:
    f = table.frequencies
    lo, hi = f[0], f[-1]
    tol = 1e-12 * hi
    if omega < lo - tol or omega > hi + tol or not np.isfinite(omega):
        raise OutOfGridError(
            f"omega/2pi = {omega / TWO_PI:.6g} Hz outside table band "
            f"[{lo / TWO_PI:.6g}, {hi / TWO_PI:.6g}] Hz"
        )
    omega = min(max(omega, lo), hi)
    k = int(np.searchsorted(f, omega, side="right")) - 1
    return omega, min(max(k, 0), max(f.size - 2, 0))


def sample_z(table: ImpedanceTable, i: int, j: int, omega: float) -> ZSample:
    """Z_ij(omega) with a pole-proximity verdict for the bracketing interval."""
    omega, k = _locate(table, float(omega))
    f = table.frequencies
    hit = np.flatnonzero(f == omega)
    if hit.size:
        value = complex(table.z[hit[0], i, j])
    else:
        re_i, im_i = table.interpolator(i, j)
        value = complex(float(re_i(omega)), float(im_i(omega)))
    if f.size < 2:
        return ZSample(value, False, "")
    a, b = table.z[k, i, j].imag, table.z[k + 1, i, j].imag
    scale = max(abs(a), abs(b))
    reasons = []
    if scale > 0 and abs(b - a) / scale > POLE_RELATIVE_STEP:
        reasons.append(f"Im Z{i + 1}{j + 1} changes by {abs(b - a) / scale:.2f} between samples")
    if abs(value.imag) > POLE_MAGNITUDE:
        reasons.append(f"|Im Z{i + 1}{j + 1}| = {abs(value.imag):.3g} ohm")
    return ZSample(value, bool(reasons), "; ".join(reasons))


def interpolate_z(table: ImpedanceTable, i: int, j: int, omega: float) -> complex:
    """Monotone cubic (PCHIP) interpolation of Z_ij, real and imaginary parts
    separately. Warns with :class:`PoleProximityWarning` near steep features;
    raises :class:`OutOfGridError` outside the grid."""
    s = sample_z(table, i, j, omega)
    if s.pole_warning:
        warnings.warn(f"pole proximity at {omega / TWO_PI:.6g} Hz: {s.reason}",
                      PoleProximityWarning, stacklevel=2)
    return s.value


# --------------------------------------------------------------------------
# capacitance


class CapacitanceFit(NamedTuple):
    capacitance: float
    residual: float
    points: int


def extract_capacitance(table: ImpedanceTable, port: int, band: tuple[float, float]) -> CapacitanceFit:
    """Qubit capacitance from Im Z_ii = -1/(omega C) over ``band`` (rad/s).

    C is the mean of -1/(omega Im Z_ii) over the table samples inside the
    band (65 interpolated points if the band holds fewer than three);
    ``residual`` is the rms relative misfit of that single C.
    """
    lo, hi = band
    if not lo < hi:
        raise ValueError("band must be (low, high)")
    _locate(table, lo)
    _locate(table, hi)
    f = table.frequencies
    mask = (f >= lo) & (f <= hi)
    if mask.sum() >= 3:
        w = f[mask]
        im = table.z[mask, port, port].imag
    else:
        w = np.linspace(lo, hi, 65)
        im = np.array([sample_z(table, port, port, x).value.imag for x in w])
    if np.any(im >= 0):
        pos = np.any(im > 0) and np.any(im < 0)
        what = "sign change of Im Z (resonance inside band)" if pos else "Im Z >= 0"
        raise NotCapacitiveError(f"port {port + 1} is not capacitive over the band: {what}")
    c = -1.0 / (w * im)
    cap = float(np.mean(c))
    resid = float(np.sqrt(np.mean(((im + 1.0 / (w * cap)) / im) ** 2)))
    return CapacitanceFit(cap, resid, int(w.size))
