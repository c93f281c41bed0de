"""Qudit operator algebra for two capacitively coupled transmons.

Frequencies are ordinary frequencies in GHz everywhere in this module;
Hamiltonians are returned in GHz (hbar = 1, no factor 2*pi). Drive
amplitudes are given in MHz and converted on the way in.

Each transmon is a truncated Duffing ladder

    H_q = omega * n + (beta / 2) * n (n - 1),

so ``beta`` is the measured anharmonicity f_ef - f_ge. The composite basis
is ordered as |j1> (x) |j2>, i.e. index = j1 * d2 + j2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

#: Relative Hermiticity tolerance for every Hamiltonian built here.
HERMITIAN_RTOL = 1e-12


class InvalidDimensionError(ValueError):
    """Raised for truncation dimensions below two."""


@dataclass(frozen=True)
class TransmonParams:
    """One transmon: frequency and anharmonicity in GHz, truncation ``levels``."""

    omega: float
    beta: float
    levels: int = 4

    def __post_init__(self) -> None:
        if int(self.levels) != self.levels or self.levels < 2:
            raise InvalidDimensionError(f"levels >= 2 required, got {self.levels}")
        if not self.omega > 0:
            raise ValueError(f"omega > 0 required, got {self.omega}")
        if not self.beta < 0:
            raise ValueError(f"beta < 0 required, got {self.beta}")

    def level_energies(self) -> np.ndarray:
        j = np.arange(self.levels, dtype=float)
        return self.omega * j + 0.5 * self.beta * j * (j - 1.0)

    def jump_frequencies(self) -> np.ndarray:
        return np.diff(self.level_energies())


@dataclass(frozen=True)
class DeviceConfig:
    """Two transmons (or one, with ``q2=None``) inside the waveguide.

    ``g`` is in GHz; ``gamma_glob`` and ``gamma_loc1`` are rate constants in
    MHz (the linewidth each bath alone would give qubit 1 at zero
    temperature); ``k_ratio`` is gamma_loc2 / gamma_loc1.
    """

    q1: TransmonParams
    q2: Optional[TransmonParams]
    g: float
    gamma_glob: float
    gamma_loc1: float = 0.0
    k_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.g < 0:
            raise ValueError(f"g >= 0 required, got {self.g}")
        if not self.gamma_glob > 0:
            raise ValueError(f"gamma_glob > 0 required, got {self.gamma_glob}")
        if self.gamma_loc1 < 0:
            raise ValueError(f"gamma_loc1 >= 0 required, got {self.gamma_loc1}")
        if not self.k_ratio > 0:
            raise ValueError(f"k_ratio > 0 required, got {self.k_ratio}")

    @property
    def qubits(self) -> tuple[TransmonParams, ...]:
        return (self.q1,) if self.q2 is None else (self.q1, self.q2)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(q.levels for q in self.qubits)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def local_weights(self) -> tuple[float, ...]:
        """Local-bath weights (lambda_1, lambda_2) = (1, sqrt(k))."""
        return (1.0, float(np.sqrt(self.k_ratio)))[: len(self.qubits)]

    def single(self, which: int) -> "DeviceConfig":
        """The same device with only qubit ``which`` (1 or 2) present.

        The other transmon is treated as detuned out of the band, so it drops
        out of the model. The local rate of the kept qubit is preserved.
        """
        if which == 1:
            return DeviceConfig(self.q1, None, 0.0, self.gamma_glob, self.gamma_loc1, 1.0)
        if which == 2 and self.q2 is not None:
            return DeviceConfig(
                self.q2, None, 0.0, self.gamma_glob, self.gamma_loc1 * self.k_ratio, 1.0
            )
        raise ValueError(f"no qubit {which} in this device")

    def replace(self, **changes) -> "DeviceConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class DriveSpec:
    """Coherent probe at ``omega_drive`` (GHz) with amplitudes E_alpha in MHz.

    ``a_in`` is the common input field for a waveguide probe, in sqrt(MHz),
    so that E_alpha = sqrt(gamma_glob / 2) * a_in.
    """

    omega_drive: float
    amplitudes: tuple[complex, ...]
    origin: str = "explicit"
    a_in: Optional[complex] = None

    def __post_init__(self) -> None:
        if not self.omega_drive > 0:
            raise ValueError(f"omega_drive > 0 required, got {self.omega_drive}")
        if not all(np.isfinite(e) for e in self.amplitudes):
            raise ValueError("drive amplitudes must be finite")
        if self.origin not in ("waveguide-probe", "side-pin", "explicit"):
            raise ValueError(f"unknown drive origin {self.origin!r}")
        if self.origin == "waveguide-probe" and self.a_in is None:
            raise ValueError("waveguide-probe drive needs a_in")

    @classmethod
    def waveguide_probe(cls, dev: DeviceConfig, omega_drive: float, a_in: complex) -> "DriveSpec":
        e = np.sqrt(dev.gamma_glob / 2.0) * a_in
        return cls(omega_drive, tuple(complex(e) for _ in dev.qubits), "waveguide-probe", complex(a_in))

    @classmethod
    def side_pin(cls, dev: DeviceConfig, omega_drive: float, e1: complex) -> "DriveSpec":
        amps = tuple(complex(e1) * w for w in dev.local_weights)
        return cls(omega_drive, amps, "side-pin")


def ladder(d: int) -> np.ndarray:
    """Truncated annihilation operator, ``a[j, j+1] = sqrt(j+1)``."""
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"ladder dimension must be >= 2, got {d}")
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def embed(op: np.ndarray, which: int, dims: Sequence[int]) -> np.ndarray:
    """Place a single-qudit operator on subsystem ``which`` (0-based)."""
    if op.shape != (dims[which], dims[which]):
        raise ValueError(f"operator shape {op.shape} does not match dims[{which}]={dims[which]}")
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == which else np.eye(d))
    return out


def is_hermitian(h: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.linalg.norm(h), 1.0)
    return bool(np.linalg.norm(h - h.conj().T) <= rtol * scale)


def transmon_hamiltonian(p: TransmonParams) -> np.ndarray:
    return np.diag(p.level_energies()).astype(complex)


def system_hamiltonian(dev: DeviceConfig, drive: Optional[DriveSpec] = None) -> np.ndarray:
    """Composite Hamiltonian in GHz.

    With a drive, the result is in the frame rotating at the drive frequency
    and includes the probe term; without one it is the undriven lab-frame
    Hamiltonian.
    """
    dims = dev.dims
    omega_d = 0.0 if drive is None else drive.omega_drive
    if drive is not None and len(drive.amplitudes) != len(dims):
        raise ValueError("drive amplitudes do not match the number of qubits")

    h = np.zeros((dev.dim, dev.dim), dtype=complex)
    lowering = [embed(ladder(d), k, dims) for k, d in enumerate(dims)]
    for k, q in enumerate(dev.qubits):
        shifted = q.level_energies() - omega_d * np.arange(q.levels)
        h += embed(np.diag(shifted).astype(complex), k, dims)
    if len(dims) == 2:
        a1, a2 = lowering
        h += dev.g * (a1.conj().T @ a2 + a1 @ a2.conj().T)
    if drive is not None:
        for a, e in zip(lowering, drive.amplitudes):
            term = (e * 1e-3) * a.conj().T
            h += term + term.conj().T
    if not is_hermitian(h):
        raise AssertionError("internal error: system Hamiltonian is not Hermitian")
    return h


@dataclass(frozen=True)
class Jump:
    """Lowering operator sigma_{j,j+1} of one qubit with its jump frequency (GHz)."""

    qubit: int
    level: int
    op: np.ndarray = field(repr=False)
    frequency: float


@dataclass(frozen=True)
class JumpTable:
    records: tuple[Jump, ...]
    dims: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([r.frequency for r in self.records])

    @property
    def qubit_indices(self) -> np.ndarray:
        return np.array([r.qubit for r in self.records])

    @property
    def operators(self) -> np.ndarray:
        return np.stack([r.op for r in self.records])


def jump_table(dev: DeviceConfig) -> JumpTable:
    records = []
    dims = dev.dims
    for k, q in enumerate(dev.qubits):
        freqs = q.jump_frequencies()
        for j in range(q.levels - 1):
            sigma = np.zeros((q.levels, q.levels), dtype=complex)
            sigma[j, j + 1] = np.sqrt(j + 1.0)
            records.append(Jump(k, j, embed(sigma, k, dims), float(freqs[j])))
    return JumpTable(tuple(records), dims)


def excitation_number(dims: Sequence[int]) -> np.ndarray:
    """Total excitation number of each composite basis state."""
    grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    return sum(grids).ravel()


@dataclass(frozen=True)
class Transition:
    lower: int
    upper: int
    manifold: int  # excitation number of the lower state
    frequency: float
    dipole: float
    allowed: bool


@dataclass(frozen=True)
class LevelSet:
    """Eigenstructure of the undriven coupled Hamiltonian.

    ``energies`` are ascending; ``manifolds[i]`` is the excitation number of
    eigenvector ``vectors[:, i]``.
    """

    energies: np.ndarray
    vectors: np.ndarray
    manifolds: np.ndarray
    dims: tuple[int, ...]
    transitions: tuple[Transition, ...]

    def states_in(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.manifolds == n)

    def allowed_count(self) -> int:
        return sum(t.allowed for t in self.transitions)

    def transition(self, lower: int, upper: int) -> Transition:
        for t in self.transitions:
            if t.lower == lower and t.upper == upper:
                return t
        raise KeyError((lower, upper))

    def named_states(self) -> dict[str, int]:
        """Indices of |00>, |B>, |D>, |D'> (two qubits) or |g>, |e>, |f> (one).

        B is the single-excitation state most strongly coupled to the ground
        state, D the other one, and D' the two-excitation state most strongly
        coupled to D.
        """
        ground = int(self.states_in(0)[0])
        if len(self.dims) == 1:
            return {"g": ground, "e": int(self.states_in(1)[0]), "f": int(self.states_in(2)[0])}
        one = self.states_in(1)
        dip = [self.transition(ground, int(i)).dipole for i in one]
        bright = int(one[int(np.argmax(dip))])
        dark = int(one[int(np.argmin(dip))])
        two = self.states_in(2)
        dip2 = [self.transition(dark, int(i)).dipole for i in two]
        dark2 = int(two[int(np.argmax(dip2))])
        return {"00": ground, "B": bright, "D": dark, "D'": dark2}

    def named_frequency(self, name: str) -> float:
        """Frequency (GHz) of transition ``ge``, ``ef``, ``00B`` or ``DD'``."""
        s = self.named_states()
        pairs = {"ge": ("g", "e"), "ef": ("e", "f"), "00B": ("00", "B"), "DD'": ("D", "D'")}
        if name not in pairs:
            raise KeyError(f"unknown transition {name!r}")
        lo, hi = pairs[name]
        if lo not in s or hi not in s:
            raise KeyError(f"transition {name!r} does not exist for a {len(self.dims)}-qubit device")
        return float(self.energies[s[hi]] - self.energies[s[lo]])


def eigen_spectrum(
    dev: DeviceConfig, max_excitation: int = 3, prohibited_rtol: float = 1e-6
) -> LevelSet:
    """Diagonalize the undriven Hamiltonian manifold by manifold.

    The undriven Hamiltonian conserves total excitation number, so each
    eigenvector lives in exactly one manifold. Transitions between adjacent
    manifolds up to ``max_excitation`` are weighed by the symmetric waveguide
    coupling operator sum_alpha (a_alpha + a_alpha^dagger); a transition is
    prohibited when its dipole is below ``prohibited_rtol`` times the largest
    dipole of the same manifold pair.
    """
    dims = dev.dims
    if max_excitation > sum(d - 1 for d in dims):
        raise ValueError("max_excitation exceeds the truncated Hilbert space")
    h = system_hamiltonian(dev)
    number = excitation_number(dims)

    energies, vectors, manifolds = [], [], []
    for n in range(int(number.max()) + 1):
        idx = np.flatnonzero(number == n)
        w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
        full = np.zeros((h.shape[0], len(idx)), dtype=complex)
        full[idx, :] = v
        energies.extend(w)
        vectors.append(full)
        manifolds.extend([n] * len(idx))
    energies = np.asarray(energies)
    vectors = np.hstack(vectors)
    manifolds = np.asarray(manifolds)
    order = np.argsort(energies, kind="stable")
    energies, vectors, manifolds = energies[order], vectors[:, order], manifolds[order]

    coupling = sum(embed(ladder(d), k, dims) for k, d in enumerate(dims))
    coupling = coupling + coupling.conj().T
    elements = np.abs(vectors.conj().T @ coupling @ vectors)

    transitions = []
    for n in range(max_excitation):
        lows = np.flatnonzero(manifolds == n)
        highs = np.flatnonzero(manifolds == n + 1)
        block = elements[np.ix_(highs, lows)]
        threshold = prohibited_rtol * block.max()
        for lo in lows:
            for hi in highs:
                dip = float(elements[hi, lo])
                transitions.append(
                    Transition(int(lo), int(hi), n, float(energies[hi] - energies[lo]), dip, bool(dip >= threshold))
                )
    return LevelSet(energies, vectors, manifolds, dims, tuple(transitions))
