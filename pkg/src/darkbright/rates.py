"""Thermal rates for the global (waveguide) and local (side-pin) baths.

Both baths have a flat spectral density. A bath with rate constant
``gamma0`` (MHz) and temperature T gives the single-index rates

    down(omega, T) = (pi * gamma0 / 2) * (coth(h omega / 2 k_B T) + 1)
    up(omega, T)   = (pi * gamma0 / 2) * (coth(h omega / 2 k_B T) - 1)

and a pair of jump records (alpha, j), (alpha', k) picks up
``w_alpha * w_alpha' * [rate(omega_j) + rate(omega_k)]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.constants as const

from .operators import DeviceConfig, JumpTable

#: h / k_B in kelvin per GHz (CODATA).
H_OVER_KB = const.h / const.k * 1e9

#: Beyond this value of h*omega/(k_B T) the upward rate is exactly zero.
_EXP_CUTOFF = 700.0


def bose_occupation(omega, T):
    """Bose-Einstein occupation for ``omega`` in GHz and ``T`` in kelvin."""
    omega = np.asarray(omega, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("bose_occupation needs omega > 0")
    if np.any(T < 0):
        raise ValueError("temperature must be >= 0")
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(T > 0, H_OVER_KB * omega / np.where(T > 0, T, 1.0), np.inf)
        n = np.where(x > _EXP_CUTOFF, 0.0, 1.0 / np.expm1(np.minimum(x, _EXP_CUTOFF)))
    return n if n.ndim else float(n)


def gamma_updown(omega, T, gamma0):
    """Downward and upward rates (MHz) of a flat bath.

    Written through the Bose factor, coth(x/2) + 1 = 2 (n + 1) and
    coth(x/2) - 1 = 2 n, which is exact and keeps T = 0 finite.
    """
    if gamma0 < 0:
        raise ValueError("gamma0 must be >= 0")
    n = bose_occupation(omega, T)
    down = np.pi * gamma0 * (n + 1.0)
    up = np.pi * gamma0 * n
    return down, up


def spectral_density_waveguide(omega, cutoff):
    """Normalized density of states of a single-mode rectangular waveguide.

    Diagnostic only; the dynamics always use a flat spectral density.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= cutoff):
        raise ValueError("waveguide density of states is defined only above the cutoff")
    out = 1.0 / np.sqrt(1.0 - (cutoff / omega) ** 2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BathSpec:
    kind: str
    temperature: float
    gamma0: float
    weights: tuple[float, ...]
    spectral_model: str = "flat"
    cutoff: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in ("global", "local"):
            raise ValueError(f"bath kind must be 'global' or 'local', got {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be >= 0")
        if self.spectral_model not in ("flat", "waveguide"):
            raise ValueError(f"unknown spectral model {self.spectral_model!r}")
        if self.spectral_model == "waveguide" and self.cutoff is None:
            raise ValueError("waveguide spectral model needs a cutoff")

    @classmethod
    def global_bath(cls, dev: DeviceConfig, temperature: float) -> "BathSpec":
        return cls("global", temperature, dev.gamma_glob, tuple(1.0 for _ in dev.qubits))

    @classmethod
    def local_bath(cls, dev: DeviceConfig, temperature: float) -> "BathSpec":
        return cls("local", temperature, dev.gamma_loc1, dev.local_weights)


def device_baths(dev: DeviceConfig, t_glob: float, t_loc: float) -> list[BathSpec]:
    """Global and local bath for ``dev`` at the given temperatures (K)."""
    baths = [BathSpec.global_bath(dev, t_glob)]
    if dev.gamma_loc1 > 0:
        baths.append(BathSpec.local_bath(dev, t_loc))
    return baths


@dataclass(frozen=True)
class SecularPolicy:
    """Which cross terms between jump records survive.

    ``mode`` is ``"partial"`` (drop pairs whose jump frequencies differ by
    more than ``cutoff`` GHz; default cutoff is 100 x the largest rate
    constant), ``"full"`` (keep only exactly equal frequencies) or
    ``"none"`` (keep every pair).
    """

    mode: str = "partial"
    cutoff: Optional[float] = None

    def __post_init__(self) -> None:
        if self.mode not in ("partial", "full", "none"):
            raise ValueError(f"unknown secular mode {self.mode!r}")
        if self.cutoff is not None and self.cutoff < 0:
            raise ValueError("secular cutoff must be >= 0")

    def resolve_cutoff(self, baths: Sequence[BathSpec]) -> float:
        if self.mode == "none":
            return np.inf
        if self.mode == "full":
            return 1e-12
        if self.cutoff is not None:
            return self.cutoff
        gmax = max((b.gamma0 for b in baths), default=0.0)
        return 100.0 * gmax * 1e-3


@dataclass(frozen=True)
class RateMatrix:
    """Pairwise rates (MHz) indexed like the jump table, plus the secular mask."""

    down: np.ndarray
    up: np.ndarray
    mask: np.ndarray


def rate_matrix(
    jumps: JumpTable, baths: Sequence[BathSpec], policy: Optional[SecularPolicy] = None
) -> RateMatrix:
    policy = policy or SecularPolicy()
    freqs = jumps.frequencies
    qubits = jumps.qubit_indices
    m = len(freqs)
    down = np.zeros((m, m))
    up = np.zeros((m, m))
    for bath in baths:
        if bath.spectral_model != "flat":
            raise ValueError("only flat spectral densities enter the dynamics")
        if len(bath.weights) <= qubits.max():
            raise ValueError("bath weights do not cover every qubit of the jump table")
        d, u = gamma_updown(freqs, bath.temperature, bath.gamma0)
        w = np.asarray(bath.weights)[qubits]
        ww = np.outer(w, w)
        down += ww * (d[:, None] + d[None, :])
        up += ww * (u[:, None] + u[None, :])
    cutoff = policy.resolve_cutoff(baths)
    mask = np.abs(freqs[:, None] - freqs[None, :]) <= cutoff
    return RateMatrix(np.where(mask, down, 0.0), np.where(mask, up, 0.0), mask)
