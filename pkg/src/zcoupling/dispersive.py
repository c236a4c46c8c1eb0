"""Multilevel qubits coupled to explicit modes, and their dispersive limit.

Everything is in angular-frequency units (H/hbar, rad/s). The ordered basis
is (qubit-1 level, qubit-2 level, n_1, ..., n_K) with the first factor most
significant. The interaction is rotating-wave and nearest-neighbour:

    V = sum_{l,j,k} g^(l)_{j,k} |j><j+1|_l a_k^dag + h.c.

with g^(l)_{j,k} = g^(l)_{0,k} n_{j,j+1}/n_{0,1}.

Second-order blocks are whole photon configurations (n_1, ..., n_K): the
interaction always changes the configuration, so it is entirely off-block.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh, expm, sqrtm

from .errors import DimensionError, LabelingError, ResonanceError
from .netlist import ModeSet
from .quantities import HBAR

MAX_DIMENSION = 20000
DEFAULT_PHOTONS = 3


@dataclass(frozen=True)
class QubitLevels:
    """Nearest-neighbour transitions q_{j,j+1} (rad/s) and charge ratios.

    ``ratios[j]`` is n_{j,j+1}/n_{0,1}, so ``ratios[0] == 1``.
    """

    transitions: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.ratios, dtype=float)
        if t.ndim != 1 or t.shape != r.shape:
            raise ValueError("transitions and ratios must be 1-D of equal length")
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "ratios", r)

    @property
    def levels(self) -> int:
        return self.transitions.size + 1

    @property
    def energies(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.transitions)])

    @classmethod
    def from_spectrum(cls, spectrum, levels: int = 3) -> "QubitLevels":
        """Take the lowest ``levels`` states of a :class:`TransmonSpectrum`."""
        n = np.abs(spectrum.charge_matrix)
        t = np.diff(spectrum.level_energies[:levels])
        r = np.array([n[j, j + 1] for j in range(levels - 1)]) / n[0, 1]
        return cls(t, r)

    @classmethod
    def duffing(cls, q01: float, anharmonicity: float = 0.0, levels: int = 3) -> "QubitLevels":
        """Weakly anharmonic ladder with harmonic-oscillator ratios sqrt(j+1)."""
        j = np.arange(levels - 1)
        return cls(q01 + anharmonicity * j, np.sqrt(j + 1.0))


@dataclass(frozen=True)
class FullSystem:
    qubits: tuple
    modes: ModeSet
    photon_cutoff: int = DEFAULT_PHOTONS

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if not 1 <= len(self.qubits) <= 2:
            raise ValueError("one or two qubits supported")
        if any(q.levels < 3 for q in self.qubits):
            raise ValueError("at least three levels per qubit are required")
        if self.modes.n_qubits != len(self.qubits):
            raise ValueError("ModeSet couplings do not match the number of qubits")
        if self.photon_cutoff < 1:
            raise ValueError("photon cutoff must be at least 1")
        if self.dimension > MAX_DIMENSION:
            raise DimensionError(f"Hilbert dimension {self.dimension} exceeds {MAX_DIMENSION}")

    @property
    def dims(self) -> tuple:
        return tuple(q.levels for q in self.qubits) + (self.photon_cutoff + 1,) * self.modes.size

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def couplings(self, qubit: int) -> np.ndarray:
        """g^(l)_{j,k} as a (levels-1, K) array."""
        q = self.qubits[qubit]
        return q.ratios[:, None] * self.modes.couplings[qubit][None, :]

    @cached_property
    def labels(self) -> np.ndarray:
        """Basis labels, one row per basis state, in basis order."""
        return np.array(list(itertools.product(*(range(d) for d in self.dims))), dtype=int)

    @property
    def excitations(self) -> np.ndarray:
        return self.labels.sum(axis=1)

    @property
    def max_coupling(self) -> float:
        return float(np.max(np.abs(self.modes.couplings), initial=0.0))


def _embed(ops: dict, dims: tuple) -> np.ndarray:
    out = np.ones((1, 1))
    for k, d in enumerate(dims):
        out = np.kron(out, ops.get(k, np.eye(d)))
    return out


def _lowering(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1)


def _projector(d: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((d, d))
    m[i, j] = 1.0
    return m


def bare_energies(sys: FullSystem) -> np.ndarray:
    """Diagonal of H_0 in rad/s."""
    nq = len(sys.qubits)
    lab = sys.labels
    e = np.zeros(len(lab))
    for l, q in enumerate(sys.qubits):
        e += q.energies[lab[:, l]]
    if sys.modes.size:
        e += lab[:, nq:] @ sys.modes.frequencies
    return e


def build_interaction(sys: FullSystem) -> np.ndarray:
    """Rotating-wave qubit-mode interaction V/hbar."""
    dims = sys.dims
    nq = len(sys.qubits)
    v = np.zeros((sys.dimension,) * 2, dtype=complex)
    for l, q in enumerate(sys.qubits):
        g = sys.couplings(l)
        for k in range(sys.modes.size):
            a = _lowering(dims[nq + k])
            for j in range(q.levels - 1):
                if g[j, k] == 0:
                    continue
                v += g[j, k] * _embed({l: _projector(q.levels, j, j + 1), nq + k: a.T}, dims)
    return v + v.conj().T


def build_full_hamiltonian(sys: FullSystem) -> np.ndarray:
    """H/hbar in rad/s (dense, Hermitian)."""
    return np.diag(bare_energies(sys)).astype(complex) + build_interaction(sys)


def _blocks(sys: FullSystem) -> np.ndarray:
    """Block index of each basis state: its photon configuration."""
    nq = len(sys.qubits)
    photons = sys.labels[:, nq:]
    _, idx = np.unique(photons, axis=0, return_inverse=True)
    return idx.ravel()


def build_sw_generator(sys: FullSystem) -> np.ndarray:
    """First-order generator iS_1 (anti-Hermitian).

    <a|iS_1|b> = <a|V|b> / (E_a - E_b) between different blocks, 0 within.
    """
    v = build_interaction(sys)
    e = bare_energies(sys)
    blk = _blocks(sys)
    off = (blk[:, None] != blk[None, :]) & (v != 0)
    de = e[:, None] - e[None, :]
    if np.any(de[off] == 0):
        raise ResonanceError("exact resonance between coupled bare states")
    x = np.zeros_like(v)
    x[off] = v[off] / de[off]
    return x


def sw_block_residual(sys: FullSystem, absolute: bool = False) -> float:
    """Largest off-block norm of exp(iS_1) H exp(-iS_1), divided by max |g|.

    With ``absolute=True`` the norm is returned in rad/s without scaling.
    """
    g = sys.max_coupling
    if g == 0:
        return 0.0
    x = build_sw_generator(sys)
    u = expm(x)
    h = u @ build_full_hamiltonian(sys) @ u.conj().T
    blk = _blocks(sys)
    worst = 0.0
    for a in np.unique(blk):
        rows = blk == a
        for b in np.unique(blk):
            if a == b:
                continue
            sub = h[np.ix_(rows, blk == b)]
            worst = max(worst, float(np.linalg.norm(sub, 2)))
    return worst if absolute else worst / g


@dataclass(frozen=True)
class EffectiveModel:
    """Dispersive-limit tables.

    ``chi[l]`` is the (levels-1, K) table chi_{i,k} = |g_{i,k}|^2/(q_{i,i+1}-w_k)
    in rad/s. ``J`` is the (L1-1, L2-1) table of exchange rates in joules,
    empty for a single qubit. ``residual`` is the scaled off-block residual of
    the exact first-order transform.
    """

    chi: tuple
    J: np.ndarray
    residual: float
    hamiltonian: np.ndarray = field(repr=False, compare=False, default=None)


def _chi_table(sys: FullSystem, l: int) -> np.ndarray:
    q = sys.qubits[l]
    det = q.transitions[:, None] - sys.modes.frequencies[None, :]
    if np.any(det == 0):
        raise ResonanceError("qubit transition coincides with a mode frequency")
    return np.abs(sys.couplings(l)) ** 2 / det


def _exchange_table(sys: FullSystem) -> np.ndarray:
    """J_ij (joules) from the mode-sum formula, evaluated here independently."""
    q1, q2 = sys.qubits
    g1, g2 = sys.couplings(0), sys.couplings(1)
    w = sys.modes.frequencies
    out = np.zeros((q1.levels - 1, q2.levels - 1), dtype=complex)
    for i in range(q1.levels - 1):
        for j in range(q2.levels - 1):
            # same summation order as the mode-sum route, so the tables agree bitwise
            s1 = s2 = 0j
            for k in range(w.size):
                s1 += np.conj(g1[i, k]) * g2[j, k] / (q1.transitions[i] - w[k])
                s2 += g1[i, k] * np.conj(g2[j, k]) / (q2.transitions[j] - w[k])
            out[i, j] = 0.5 * HBAR * s1 + 0.5 * HBAR * s2
    return out.real if np.all(out.imag == 0) else out


def build_heff(sys: FullSystem, with_residual: bool = True) -> tuple[EffectiveModel, np.ndarray]:
    """Second-order effective Hamiltonian (rad/s), block diagonal in photon configuration.

    Level j of qubit l with n_k photons in mode k is shifted by
    chi_{j-1,k}(n_k + 1) - chi_{j,k} n_k (the first term absent for j = 0).
    The exchange term couples |i+1, j> and |i, j+1> of the two qubits with
    amplitude (1/2) g1*_{i,k} g2_{j,k} [1/(q1_{i,i+1} - w_k) + 1/(q2_{j,j+1} - w_k)]
    summed over k, which is the Hermitian form of the exchange rate J_ij/hbar.
    """
    dims = sys.dims
    nq = len(sys.qubits)
    lab = sys.labels
    diag = bare_energies(sys)
    chis = tuple(_chi_table(sys, l) for l in range(nq))
    for l in range(nq):
        chi = np.vstack([chis[l], np.zeros((1, sys.modes.size))])  # top level: no upward transition
        lev = lab[:, l]
        for k in range(sys.modes.size):
            n = lab[:, nq + k]
            up = np.where(lev > 0, chi[np.maximum(lev - 1, 0), k], 0.0)
            diag = diag + up * (n + 1) - chi[lev, k] * n
    h = np.diag(diag).astype(complex)

    J = np.zeros((0, 0))
    if nq == 2:
        J = _exchange_table(sys)
        q1, q2 = sys.qubits
        g1, g2 = sys.couplings(0), sys.couplings(1)
        w = sys.modes.frequencies
        for i in range(q1.levels - 1):
            for j in range(q2.levels - 1):
                amp = 0.5 * np.sum(np.conj(g1[i]) * g2[j] * (1.0 / (q1.transitions[i] - w)
                                                             + 1.0 / (q2.transitions[j] - w)))
                if amp == 0:
                    continue
                op = _embed({0: _projector(q1.levels, i + 1, i), 1: _projector(q2.levels, j, j + 1)}, dims)
                h += amp * op + np.conj(amp) * op.T
    residual = sw_block_residual(sys) if with_residual else float("nan")
    return EffectiveModel(chis, J, residual, h), h


def _eigh_checked(h: np.ndarray):
    vals, vecs = eigh(h)
    scale = max(np.linalg.norm(h, 2), 1e-300)
    res = np.linalg.norm(h @ vecs - vecs * vals, axis=0).max()
    if res > 1e-10 * scale:
        raise np.linalg.LinAlgError(f"eigen-residual {res:.3g} exceeds tolerance")
    return vals, vecs


def block_eigenvalues(sys: FullSystem, h: np.ndarray, max_excitations: int = 2) -> dict:
    """Sorted eigenvalues of ``h`` restricted to each total-excitation block."""
    exc = sys.excitations
    out = {}
    for n in range(max_excitations + 1):
        idx = np.flatnonzero(exc == n)
        out[n] = _eigh_checked(h[np.ix_(idx, idx)])[0]
    return out


def heff_eigenvalue_error(sys: FullSystem, max_excitations: int = 2) -> float:
    """Max |E_eff - E_exact| (rad/s) over the low excitation blocks."""
    _, heff = build_heff(sys, with_residual=False)
    a = block_eigenvalues(sys, build_full_hamiltonian(sys), max_excitations)
    b = block_eigenvalues(sys, heff, max_excitations)
    return max(float(np.max(np.abs(a[n] - b[n]))) for n in a)


def extract_j_from_splitting(sys: FullSystem, rtol: float = 1e-12) -> float:
    """Exchange rate (joules) from exact diagonalisation of degenerate qubits.

    The single-excitation block is diagonalised, the two eigenstates with the
    largest weight on {|10,0>, |01,0>} are kept, and the block is folded onto
    that span with the symmetric (des Cloizeaux) effective Hamiltonian. Its
    off-diagonal element is J; for symmetric couplings it equals half the
    doublet splitting, with the sign of the mode-sum rate.
    """
    if len(sys.qubits) != 2:
        raise ValueError("two qubits required")
    q1, q2 = (q.transitions[0] for q in sys.qubits)
    if abs(q1 - q2) > rtol * max(abs(q1), abs(q2)):
        raise ValueError("qubit 0-1 transitions must be degenerate")
    idx = np.flatnonzero(sys.excitations == 1)
    lab = sys.labels[idx]
    h = build_full_hamiltonian(sys)[np.ix_(idx, idx)]
    vals, vecs = _eigh_checked(h)
    p = [int(np.flatnonzero((lab == t).all(axis=1))[0])
         for t in (np.r_[1, 0, np.zeros(sys.modes.size, int)], np.r_[0, 1, np.zeros(sys.modes.size, int)])]
    weight = np.sum(np.abs(vecs[p, :]) ** 2, axis=0)
    pick = np.sort(np.argsort(weight)[-2:])
    if np.any(weight[pick] < 0.5):
        raise LabelingError(f"qubit doublet not identifiable (weights {weight[pick]})")
    a = vecs[np.ix_(p, pick)]
    s = np.linalg.inv(sqrtm(a @ a.conj().T))
    heff = s @ a @ np.diag(vals[pick]) @ a.conj().T @ s
    j = heff[0, 1]
    return float(HBAR * j.real) if abs(j.imag) <= 1e-9 * abs(j) else HBAR * complex(j)
