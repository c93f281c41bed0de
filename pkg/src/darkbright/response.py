"""Waveguide transmission from driven steady states.

The probe enters the master equation non-perturbatively: for every probe
frequency the Hamiltonian is rebuilt in the frame rotating at that
frequency and the steady state is solved. Input-output theory then gives

    t = 1 - i * sum_alpha sqrt(gamma_alpha / 2) <a_alpha> / a_in,

which yields complete extinction for a single resonant emitter at zero
temperature.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .liouvillian import SolverError, Superoperator, dissipator_superop, hamiltonian_superop, steady_state
from .operators import DeviceConfig, DriveSpec, embed, jump_table, ladder, system_hamiltonian
from .rates import BathSpec, SecularPolicy, rate_matrix

__all__ = [
    "DriveSpec",
    "PowerCalibration",
    "SteadyStateModel",
    "TransmissionTrace",
    "drive_from_power",
    "probe_sweep",
    "rabi_frequency",
    "thread_count",
    "transmission_amplitude",
    "weak_probe_amplitude",
]


def thread_count(default: int = 1) -> int:
    """Worker cap from ``DARKBRIGHT_THREADS`` (at least one)."""
    try:
        return max(1, int(os.environ.get("DARKBRIGHT_THREADS", default)))
    except ValueError:
        return default


def weak_probe_amplitude(dev: DeviceConfig) -> float:
    """Default input field for thermometry runs, gamma_glob / 50 (sqrt(MHz))."""
    return dev.gamma_glob / 50.0


@dataclass(frozen=True)
class PowerCalibration:
    """Maps source power in dBm to the drive strength D."""

    calibration: float

    def __post_init__(self) -> None:
        if self.calibration < 0:
            raise ValueError("calibration must be >= 0")

    def strength(self, power_dbm: float) -> float:
        if power_dbm == -np.inf:
            return 0.0
        return self.calibration * np.sqrt(10.0 ** (power_dbm / 10.0))


def rabi_frequency(strength: float, gamma: float) -> float:
    """Resonant Rabi frequency implied by a fitted drive strength D."""
    return 2.0 * np.sqrt(gamma) * strength


def drive_from_power(
    power_dbm: float,
    cal: PowerCalibration,
    gamma: float,
    omega_drive: float,
    omega_qubit: float,
) -> DriveSpec:
    """Single-qubit drive with |E| = sqrt(gamma omega_d / (2 omega_q)) D.

    The amplitude carries the -i phase of the input-output expression.
    """
    if not gamma > 0:
        raise ValueError("gamma > 0 required")
    e = -1j * np.sqrt(gamma * omega_drive / (2.0 * omega_qubit)) * cal.strength(power_dbm)
    return DriveSpec(omega_drive, (complex(e),), "explicit")


def transmission_amplitude(rho: np.ndarray, dev: DeviceConfig, drive: DriveSpec) -> complex:
    if drive.a_in is None or drive.a_in == 0:
        raise ValueError("transmission is undefined without an input field (a_in = 0)")
    dims = dev.dims
    total = 0.0j
    for k, d in enumerate(dims):
        a = embed(ladder(d), k, dims)
        total += np.sqrt(dev.gamma_glob / 2.0) * np.trace(a @ rho)
    return complex(1.0 - 1j * total / drive.a_in)


class SteadyStateModel:
    """A device coupled to fixed baths; the dissipator is built once.

    Only the rotating-frame Hamiltonian changes between probe frequencies,
    so repeated solves reuse the cached dissipator.
    """

    def __init__(
        self,
        dev: DeviceConfig,
        baths: Sequence[BathSpec],
        policy: Optional[SecularPolicy] = None,
        negativity_tol: float = 1e-3,
        rank_check: bool = True,
    ):
        self.dev = dev
        self.baths = tuple(baths)
        self.policy = policy or SecularPolicy()
        self.negativity_tol = negativity_tol
        self.rank_check = rank_check
        self.jumps = jump_table(dev)
        self.rates = rate_matrix(self.jumps, self.baths, self.policy)
        self.dissipator = dissipator_superop(self.rates, self.jumps)

    def liouvillian(self, drive: Optional[DriveSpec] = None) -> Superoperator:
        return hamiltonian_superop(system_hamiltonian(self.dev, drive)) + self.dissipator

    def solve(self, drive: Optional[DriveSpec] = None):
        return steady_state(
            self.liouvillian(drive), negativity_tol=self.negativity_tol, rank_check=self.rank_check
        )

    def transmission(self, omega_probe: float, a_in: float) -> complex:
        drive = DriveSpec.waveguide_probe(self.dev, omega_probe, a_in)
        try:
            report = self.solve(drive)
        except SolverError as exc:
            raise SolverError(f"at probe {omega_probe:.9f} GHz: {exc}", exc.residual) from exc
        return transmission_amplitude(report.rho, self.dev, drive)


@dataclass(frozen=True)
class TransmissionTrace:
    probe: np.ndarray
    t: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def abs_t(self) -> np.ndarray:
        return np.abs(self.t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["probe_ghz", "re_t", "im_t", "abs_t"])
        for f, t in zip(self.probe, self.t):
            w.writerow([_fmt(f), _fmt(t.real), _fmt(t.imag), _fmt(abs(t))])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def probe_sweep(
    dev: DeviceConfig,
    baths: Sequence[BathSpec],
    probe_grid: Sequence[float],
    a_in: Optional[float] = None,
    policy: Optional[SecularPolicy] = None,
    threads: Optional[int] = None,
) -> TransmissionTrace:
    grid = np.asarray(probe_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("probe grid is empty")
    a_in = weak_probe_amplitude(dev) if a_in is None else a_in
    model = SteadyStateModel(dev, baths, policy)
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            ts = list(pool.map(lambda f: model.transmission(f, a_in), grid))
    else:
        ts = [model.transmission(f, a_in) for f in grid]
    meta = {
        "a_in": a_in,
        "baths": [{"kind": b.kind, "temperature": b.temperature, "gamma0": b.gamma0} for b in baths],
    }
    return TransmissionTrace(grid, np.array(ts), meta)
