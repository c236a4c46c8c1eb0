"""Exact port impedances of small lumped / transmission-line circuits.

Used as analytic ground truth for the impedance-based exchange pipeline.
Text format, one item per line::

    ! comment
    C  nodeA nodeB  farads
    L  nodeA nodeB  henries
    R  nodeA nodeB  ohms
    T  nodeA nodeB  Z0_ohms  delay_s  [Q]     ideal line, ground-referenced
    PORT n  node+ node-

Nodes ``0`` and ``gnd`` are ground. ``T`` with a trailing ``Q`` is a line
with uniform quality factor Q for all of its modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import NetlistError
from .network_io import ImpedanceTable
from .quantities import TWO_PI

GROUND = ("0", "gnd", "GND")
KINDS = ("C", "L", "R", "T")
SINGULAR_RCOND = 1e-13


@dataclass(frozen=True)
class Element:
    kind: str
    a: str
    b: str
    value: float
    value2: float | None = None
    q: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetlistError(f"unknown element kind {self.kind!r}")
        vals = [self.value] + ([self.value2] if self.kind == "T" else [])
        if self.kind == "T" and self.value2 is None:
            raise NetlistError("transmission line needs Z0 and delay")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise NetlistError(f"element values must be positive: {self}")
        if self.q is not None and not self.q > 0:
            raise NetlistError("line quality factor must be positive")


@dataclass(frozen=True)
class Netlist:
    elements: tuple
    ports: tuple  # ((plus, minus), ...) in port order

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "ports", tuple(tuple(p) for p in self.ports))
        if not self.ports:
            raise NetlistError("netlist has no ports")
        nodes = set(self.nodes) | set(GROUND)
        for k, (p, m) in enumerate(self.ports, start=1):
            if p not in nodes or m not in nodes:
                raise NetlistError(f"port {k} references a node with no elements")
            if _is_ground(p) and _is_ground(m) or p == m:
                raise NetlistError(f"port {k} is shorted")
        # connectivity with ground merged; lines also tie both ends to ground
        parent = {n: n for n in self.nodes}
        parent["0"] = "0"

        def find(x):
            x = "0" if _is_ground(x) else x
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.elements:
            ra, rb = find(e.a), find(e.b)
            parent[ra] = rb
            if e.kind == "T":
                parent[find(e.a)] = find("0")
        roots = {find(n) for n in self.nodes}
        if len(roots) > 1:
            raise NetlistError(f"netlist is not connected: {len(roots)} islands")

    @property
    def nodes(self) -> list[str]:
        """Non-ground node names in first-appearance order."""
        seen: dict[str, None] = {}
        for e in self.elements:
            for n in (e.a, e.b):
                if not _is_ground(n):
                    seen.setdefault(n, None)
        return list(seen)

    @property
    def port_count(self) -> int:
        return len(self.ports)

    @property
    def is_lossless(self) -> bool:
        return not any(e.kind == "R" or e.q is not None for e in self.elements)


def _is_ground(node: str) -> bool:
    return node in GROUND


@dataclass(frozen=True)
class ModeSet:
    """Explicit electromagnetic modes: frequencies (rad/s, increasing) and the
    0-1 coupling rate g of each qubit to each mode (rad/s, complex allowed).

    ``couplings`` has shape (n_qubits, n_modes).
    """

    frequencies: np.ndarray
    couplings: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        g = np.zeros((2, w.size), dtype=complex) if self.couplings is None else np.asarray(self.couplings, dtype=complex)
        if g.ndim == 1:
            g = g[:, None] if w.size == 1 else g[None, :]
        if g.shape[-1] != w.size:
            raise ValueError(f"couplings shape {g.shape} does not match {w.size} modes")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("mode frequencies must be positive and strictly increasing")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "couplings", g)

    @classmethod
    def empty(cls, n_qubits: int = 2) -> "ModeSet":
        return cls(np.zeros(0), np.zeros((n_qubits, 0)))

    @property
    def size(self) -> int:
        return self.frequencies.size

    @property
    def n_qubits(self) -> int:
        return self.couplings.shape[0]


# --------------------------------------------------------------------------
# text format


def parse_netlist(text) -> Netlist:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    elements, ports = [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0].upper()
        try:
            if head == "PORT":
                if len(toks) != 4:
                    raise NetlistError("PORT needs: PORT n node+ node-")
                n = int(toks[1])
                if n in ports:
                    raise NetlistError(f"port {n} defined twice")
                ports[n] = (toks[2], toks[3])
            elif head in KINDS:
                vals = [float(t) for t in toks[3:]]
                if head == "T":
                    if len(vals) not in (2, 3):
                        raise NetlistError("T needs: T a b Z0 delay [Q]")
                    elements.append(Element("T", toks[1], toks[2], vals[0], vals[1],
                                            vals[2] if len(vals) == 3 else None))
                else:
                    if len(vals) != 1:
                        raise NetlistError(f"{head} needs exactly one value")
                    elements.append(Element(head, toks[1], toks[2], vals[0]))
            else:
                raise NetlistError(f"unknown line type {toks[0]!r}")
        except (NetlistError, ValueError) as exc:
            raise NetlistError(f"line {lineno}: {exc}") from None
    if sorted(ports) != list(range(1, len(ports) + 1)):
        raise NetlistError(f"ports must be numbered 1..P, got {sorted(ports)}")
    return Netlist(tuple(elements), tuple(ports[k] for k in sorted(ports)))


def format_netlist(net: Netlist) -> str:
    out = []
    for e in net.elements:
        vals = [e.value] + ([e.value2] if e.kind == "T" else []) + ([e.q] if e.q is not None else [])
        out.append(" ".join([e.kind, e.a, e.b] + [repr(float(v)) for v in vals]))
    for k, (p, m) in enumerate(net.ports, start=1):
        out.append(f"PORT {k} {p} {m}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# nodal analysis


def _admittance_stack(net: Netlist, omegas: np.ndarray) -> np.ndarray:
    nodes = net.nodes
    idx = {n: k for k, n in enumerate(nodes)}
    w = np.asarray(omegas, dtype=float)
    y = np.zeros((w.size, len(nodes), len(nodes)), dtype=complex)

    def stamp(a, b, adm):
        ia, ib = idx.get(a), idx.get(b)
        if ia is not None:
            y[:, ia, ia] += adm
        if ib is not None:
            y[:, ib, ib] += adm
        if ia is not None and ib is not None:
            y[:, ia, ib] -= adm
            y[:, ib, ia] -= adm

    with np.errstate(divide="ignore", invalid="ignore"):
        for e in net.elements:
            if e.kind == "C":
                stamp(e.a, e.b, 1j * w * e.value)
            elif e.kind == "L":
                stamp(e.a, e.b, 1.0 / (1j * w * e.value))
            elif e.kind == "R":
                stamp(e.a, e.b, np.full(w.size, 1.0 / e.value, dtype=complex))
            else:
                theta = w * e.value2
                if e.q is not None:
                    theta = theta * (1.0 - 0.5j / e.q)
                y_self = -1j / np.tan(theta) / e.value
                y_mut = 1j / np.sin(theta) / e.value
                ia, ib = idx.get(e.a), idx.get(e.b)
                for n1, n2 in ((ia, ib), (ib, ia)):
                    if n1 is not None:
                        y[:, n1, n1] += y_self
                        if n2 is not None:
                            y[:, n1, n2] += y_mut
    return y


def _incidence(net: Netlist) -> np.ndarray:
    idx = {n: k for k, n in enumerate(net.nodes)}
    b = np.zeros((len(idx), net.port_count))
    for p, (plus, minus) in enumerate(net.ports):
        if plus in idx:
            b[idx[plus], p] += 1.0
        if minus in idx:
            b[idx[minus], p] -= 1.0
    return b


def port_impedance(net: Netlist, omegas) -> tuple[np.ndarray, np.ndarray]:
    """Z matrices at ``omegas``; returns (z, ok) with ``ok`` False where the
    nodal matrix is singular (an exact pole) and z is NaN there."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    y = _admittance_stack(net, w)
    b = _incidence(net)
    finite = np.all(np.isfinite(y), axis=(1, 2))
    ok = finite.copy()
    if finite.any():
        ok[finite] = 1.0 / np.linalg.cond(y[finite]) > SINGULAR_RCOND
    z = np.full((w.size, net.port_count, net.port_count), np.nan + 0j)
    if ok.any():
        x = np.linalg.solve(y[ok], np.broadcast_to(b, (int(ok.sum()),) + b.shape))
        z[ok] = np.einsum("np,fnq->fpq", b, x)
    return z, ok


def evaluate_z(net: Netlist, omegas) -> ImpedanceTable:
    """Multi-port Z(omega) of ``net`` on a grid of angular frequencies.

    Points where the nodal admittance matrix is singular are dropped from the
    table and listed in ``table.skipped``.
    """
    w = np.asarray(omegas, dtype=float)
    z, ok = port_impedance(net, w)
    if not ok.any():
        raise NetlistError("admittance matrix singular at every grid point")
    return ImpedanceTable(w[ok], z[ok], source="netlist", skipped=tuple(float(x) for x in w[~ok]))


# --------------------------------------------------------------------------
# resonances


def _negative_inertia(net: Netlist, w: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        b = _admittance_stack(net, w).imag
    good = np.all(np.isfinite(b), axis=(1, 2))
    count = np.full(w.size, -1)
    if good.any():
        count[good] = np.sum(np.linalg.eigvalsh(b[good]) < 0, axis=1)
    return count


def natural_frequencies(net: Netlist, band=(TWO_PI * 1e6, TWO_PI * 1e12), samples: int = 6000,
                        rtol: float = 1e-12) -> list[float]:
    """Resonances of the lossless network with all ports open, inside ``band``.

    The nodal susceptance B(omega) of a lossless network has eigenvalues that
    only increase with frequency, so each resonance shows up as a drop in the
    number of negative eigenvalues. Brackets are refined by bisection; a
    bracket holding several resonances is split until each is isolated.
    """
    lossless = replace(net, elements=tuple(
        replace(e, q=None) for e in net.elements if e.kind != "R"))

    def count(x):
        return int(_negative_inertia(lossless, np.array([x]))[0])

    def refine(lo, hi, n_lo, n_hi, out):
        # invariant: n_lo > n_hi, i.e. n_lo - n_hi resonances in (lo, hi]
        while True:
            if hi - lo <= rtol * hi:
                out.extend([0.5 * (lo + hi)] * (n_lo - n_hi))
                return
            mid = 0.5 * (lo + hi)
            n_mid = count(mid)
            if n_mid < 0:  # exactly singular: the midpoint is a resonance
                n_mid = n_hi
            if n_mid == n_lo:
                lo = mid
            elif n_mid == n_hi:
                hi = mid
            else:
                refine(lo, mid, n_lo, n_mid, out)
                lo, n_lo = mid, n_mid

    w = np.geomspace(band[0], band[1], samples)
    nu = _negative_inertia(lossless, w)
    found: list[float] = []
    for k in np.flatnonzero((nu[1:] < nu[:-1]) & (nu[1:] >= 0) & (nu[:-1] >= 0)):
        refine(w[k], w[k + 1], int(nu[k]), int(nu[k + 1]), found)
    return sorted(found)


def add_series_loss(net: Netlist, quality_factor: float) -> Netlist:
    """Insert loss so the first resonance has quality factor ~ ``quality_factor``.

    Inductors get a series resistor R = omega_0 L / Q (omega_0 the lowest
    resonance); transmission lines get a uniform per-mode Q.
    """
    if math.isinf(quality_factor):
        return net
    if not quality_factor > 0:
        raise ValueError("quality factor must be positive")
    reactive = [e for e in net.elements if e.kind in ("L", "T")]
    res = natural_frequencies(net) if reactive else []
    if not reactive or not res:
        raise NetlistError("no resonant branch found (need an inductor or transmission line)")
    w0 = res[0]
    out = []
    k = 0
    for e in net.elements:
        if e.kind == "L":
            mid = f"_loss{k}"
            k += 1
            out.append(Element("L", e.a, mid, e.value))
            out.append(Element("R", mid, e.b, w0 * e.value / quality_factor))
        elif e.kind == "T":
            out.append(replace(e, q=quality_factor))
        else:
            out.append(e)
    return Netlist(tuple(out), net.ports)


def _sign_changes(im: np.ndarray) -> np.ndarray:
    s = np.sign(im)
    return np.flatnonzero((s[:-1] * s[1:]) < 0)


def find_poles(source, band, i: int = 0, j: int = 1, samples: int = 4001, rtol: float = 1e-9) -> list[float]:
    """Poles of Z_ij inside ``band`` (rad/s), in increasing order.

    For a :class:`Netlist` the candidates are the open-port resonances
    (located to well below ``rtol``); a candidate is kept when |Z_ij|
    diverges there, i.e. grows about tenfold as the offset from it shrinks
    tenfold. For an :class:`ImpedanceTable` a pole is a sign change of
    Im Z_ij whose magnitude grows towards it from both flanks; the location
    is the zero of the linearly interpolated 1/Im Z.
    """
    lo, hi = band
    if isinstance(source, ImpedanceTable):
        return _table_poles(source, lo, hi, i, j)
    net = source
    cands = natural_frequencies(net, (lo, hi), samples, rtol=min(rtol, 1e-12))
    poles = []
    for w0 in cands:
        probe = w0 * (1.0 + np.array([-1e-6, -1e-7, 1e-7, 1e-6]))
        z, ok = port_impedance(net, probe)
        if not ok.all():
            poles.append(float(w0))
            continue
        m = np.abs(z[:, i, j])
        if m[1] > 5.0 * m[0] and m[2] > 5.0 * m[3]:
            poles.append(float(w0))
    return poles


def _table_poles(table: ImpedanceTable, lo: float, hi: float, i: int, j: int) -> list[float]:
    key = (i, j)
    if key not in table._poles:
        f = table.frequencies
        im = table.z[:, i, j].imag
        mag = np.abs(im)
        found = list(table.skipped)
        for k in _sign_changes(im):
            left_up = k == 0 or mag[k] > mag[k - 1]
            right_up = k + 2 >= f.size or mag[k + 1] > mag[k + 2]
            if left_up and right_up:
                if any(f[k] < s < f[k + 1] for s in table.skipped):
                    continue  # the exact pole was dropped from this interval
                # zero of 1/Im Z, linear between samples
                ra, rb = 1.0 / im[k], 1.0 / im[k + 1]
                found.append(float(f[k] + (f[k + 1] - f[k]) * ra / (ra - rb)))
        table._poles[key] = sorted(found)
    return [p for p in table._poles[key] if lo <= p <= hi]
