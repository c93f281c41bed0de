"""Vectorized master-equation generator and steady-state solver.

Density matrices are vectorized by stacking columns, so that
vec(A rho B) = (B^T kron A) vec(rho). Superoperators act in units of
inverse nanoseconds: Hamiltonians come in GHz and are multiplied by
2*pi, rates come in MHz (inverse microseconds) and are scaled by 1e-3.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .operators import JumpTable, is_hermitian
from .rates import RateMatrix

TWO_PI = 2.0 * np.pi


class SolverError(RuntimeError):
    """Steady-state solve failed; carries the residual for diagnostics."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Superoperator:
    dim: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.dim**2, self.dim**2):
            raise ValueError("superoperator shape does not match its Hilbert dimension")

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if self.dim != other.dim:
            raise ValueError("cannot add superoperators of different dimension")
        return Superoperator(self.dim, self.matrix + other.matrix)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def trace_functional(n: int) -> np.ndarray:
    """Row vector t with t @ vec(rho) = Tr(rho)."""
    return vec(np.eye(n)).astype(complex)


def hamiltonian_superop(h: np.ndarray) -> Superoperator:
    """-i [H, .] with ``h`` in GHz."""
    if not is_hermitian(h):
        raise ValueError("Hamiltonian is not Hermitian")
    n = h.shape[0]
    eye = np.eye(n)
    m = -1j * TWO_PI * (np.kron(eye, h) - np.kron(h.T, eye))
    return Superoperator(n, m)


def _pair_dissipator(coeff: np.ndarray, ops_a: np.ndarray, ops_b: np.ndarray) -> np.ndarray:
    """sum_jk coeff[j,k] D(A_j, B_k) with D(a,b)rho = a rho b^+ - {b^+ a, rho}/2."""
    m, n, _ = ops_a.shape
    # sum_jk c_jk conj(B_k) kron A_j via one matrix product, then reorder indices
    outer = ops_b.conj().reshape(m, n * n).T @ coeff.T @ ops_a.reshape(m, n * n)
    sandwich = outer.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)
    k = np.einsum("jk,kba,jbc->ac", coeff, ops_b.conj(), ops_a)
    eye = np.eye(n)
    return sandwich - 0.5 * (np.kron(eye, k) + np.kron(k.T, eye))


def dissipator_superop(rates: RateMatrix, jumps: JumpTable) -> Superoperator:
    m = len(jumps)
    if rates.down.shape != (m, m) or rates.up.shape != (m, m):
        raise ValueError("rate matrix does not match the jump table")
    lower = jumps.operators
    raise_ops = np.transpose(lower.conj(), (0, 2, 1))
    n = lower.shape[1]
    mat = _pair_dissipator(rates.down * 1e-3, lower, lower)
    mat += _pair_dissipator(rates.up * 1e-3, raise_ops, raise_ops)
    return Superoperator(n, mat)


def build_liouvillian(h: np.ndarray, rates: RateMatrix, jumps: JumpTable) -> Superoperator:
    """Full generator: -i[H, rho] plus the cross-correlated dissipator."""
    if h.shape[0] != jumps.operators.shape[1]:
        raise ValueError("Hamiltonian and jump operators act on different spaces")
    return hamiltonian_superop(h) + dissipator_superop(rates, jumps)


def apply(L: Superoperator, rho: np.ndarray) -> np.ndarray:
    """d rho / dt in inverse nanoseconds."""
    rho = np.asarray(rho)
    if rho.shape != (L.dim, L.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match dim {L.dim}")
    return unvec(L.matrix @ vec(rho), L.dim)


@dataclass(frozen=True)
class SteadyStateReport:
    rho: np.ndarray
    residual: float
    null_dim: int
    degenerate: bool
    branch: str
    min_eigenvalue: float


def steady_state(
    L: Superoperator,
    initial: Optional[np.ndarray] = None,
    rank_rtol: float = 1e-11,
    residual_tol: float = 1e-10,
    negativity_tol: float = 1e-3,
    rank_check: bool = True,
) -> SteadyStateReport:
    """Solve L vec(rho) = 0 with Tr(rho) = 1.

    The null-space dimension is read off the singular values of L (those
    below ``rank_rtol * sigma_max``). A one-dimensional null space is solved
    directly by replacing the first row of the system with the trace
    functional. A degenerate null space is resolved by applying the
    spectral projector onto it to ``initial`` (default: the all-ground
    state), i.e. the long-time limit of exp(L t) acting on that state.

    With ``rank_check=False`` the singular values are skipped whenever the
    trace-replaced system is well conditioned and its solution passes the
    residual test; anything else falls back to the full treatment.
    """
    n = L.dim
    m = L.matrix
    if not np.all(np.isfinite(m)):
        raise SolverError("Liouvillian has non-finite entries")
    trace_row = trace_functional(n)
    if np.linalg.norm(trace_row @ m) > 1e-10 * max(1.0, np.linalg.norm(m)):
        raise SolverError("Liouvillian is not trace preserving")

    a = m.copy()
    a[0, :] = trace_row
    b = np.zeros(n * n, dtype=complex)
    b[0] = 1.0

    if not rank_check:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", la.LinAlgWarning)
                x = la.solve(a, b)
            return _finish(m, x, n, 1, "", residual_tol, negativity_tol)
        except (la.LinAlgError, la.LinAlgWarning, SolverError):
            pass

    s = la.svdvals(m)
    null_dim = int(np.sum(s <= rank_rtol * s[0]))

    if null_dim <= 1:
        try:
            x = la.solve(a, b)
        except la.LinAlgError as exc:
            raise SolverError(f"singular steady-state system: {exc}") from exc
        branch = ""
    else:
        if initial is None:
            initial = np.zeros((n, n), dtype=complex)
            initial[0, 0] = 1.0
        u, _, vh = la.svd(m)
        right = vh[-null_dim:].conj().T
        left = u[:, -null_dim:]
        overlap = left.conj().T @ right
        x = right @ np.linalg.solve(overlap, left.conj().T @ vec(initial))
        branch = f"spectral projection of the initial state onto a {null_dim}-dimensional null space"
    return _finish(m, x, n, null_dim, branch, residual_tol, negativity_tol)


def _finish(m, x, n, null_dim, branch, residual_tol, negativity_tol) -> SteadyStateReport:
    rho = unvec(x, n)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if not abs(tr) > 0:
        raise SolverError("steady state has zero trace")
    rho = rho / tr
    residual = float(np.linalg.norm(m @ vec(rho)))
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if residual > residual_tol:
        raise SolverError(f"steady-state residual {residual:.3e} exceeds {residual_tol:.1e}", residual)
    if min_eig < -negativity_tol:
        raise SolverError(f"steady state has eigenvalue {min_eig:.3e} below -{negativity_tol}", residual)
    return SteadyStateReport(rho, residual, max(null_dim, 1), null_dim > 1, branch, min_eig)
