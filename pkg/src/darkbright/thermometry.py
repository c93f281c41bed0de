"""Temperature curves, bright-dark diagrams, calibration fits and inversion.

All transmission magnitudes are taken with the weak waveguide probe parked
on a named transition: ``ge`` / ``ef`` for a single qubit, ``00B`` / ``DD'``
for the coupled pair. When one bath is swept the other sits at a residual
temperature (``T_RES`` by default).

Fits use scipy's bounded trust-region least squares with finite-difference
Jacobians. Temperatures and rates are fitted in log space.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .operators import DeviceConfig, eigen_spectrum
from .presets import T_RES
from .rates import SecularPolicy, device_baths
from .response import SteadyStateModel, thread_count, weak_probe_amplitude

__all__ = [
    "AmbiguityError",
    "BrightDarkDiagram",
    "CalibrationModel",
    "ConfigurationError",
    "FitReport",
    "FitWarning",
    "Inference",
    "OutOfRangeError",
    "T_RES",
    "TemperatureCurve",
    "Thermometer",
    "bright_dark_diagram",
    "calibration_curve",
    "csv_text",
    "fit_calibration",
    "fit_local",
    "infer_temperatures",
    "local_curve",
    "temperature_curve",
    "transition_frequency",
]

DIFF_STEP = 1e-6


class ConfigurationError(ValueError):
    """The requested quantity does not exist for this device."""


class OutOfRangeError(ValueError):
    """Target transmission pair is not reachable; ``nearest`` is the closest reachable pair."""

    def __init__(self, message: str, nearest: tuple[float, float], at: tuple[float, float]):
        super().__init__(message)
        self.nearest = nearest
        self.at = at


class AmbiguityError(ValueError):
    """Several temperature pairs reproduce the target; see ``candidates``."""

    def __init__(self, message: str, candidates: list[tuple[float, float]]):
        super().__init__(message)
        self.candidates = candidates


class FitWarning(UserWarning):
    pass


def _pmap(fn: Callable, items: Sequence, threads: Optional[int]) -> list:
    threads = thread_count() if threads is None else threads
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def transition_frequency(dev: DeviceConfig, transition: str) -> float:
    """Frequency (GHz) of a named transition at the current configuration."""
    two = dev.q2 is not None
    if transition in ("ge", "ef") and two:
        raise ConfigurationError(f"transition {transition!r} needs a single-qubit device")
    if transition in ("00B", "DD'") and not two:
        raise ConfigurationError(f"transition {transition!r} needs a two-qubit device")
    try:
        return eigen_spectrum(dev, max_excitation=2).named_frequency(transition)
    except KeyError as exc:
        raise ConfigurationError(str(exc)) from exc


def _abs_t(
    dev: DeviceConfig,
    t_glob: float,
    t_loc: float,
    freqs: Sequence[float],
    a_in: float,
    policy: Optional[SecularPolicy] = None,
) -> np.ndarray:
    model = SteadyStateModel(dev, device_baths(dev, t_glob, t_loc), policy, rank_check=False)
    return np.array([abs(model.transmission(f, a_in)) for f in freqs])


def _bath_pairs(bath_kind: str, grid: np.ndarray, other: float) -> list[tuple[float, float]]:
    if bath_kind == "global":
        return [(float(t), other) for t in grid]
    if bath_kind == "local":
        return [(other, float(t)) for t in grid]
    raise ConfigurationError(f"bath kind must be 'global' or 'local', got {bath_kind!r}")


def _check_grid(grid: Sequence[float], name: str = "temperature grid") -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D sequence")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ValueError(f"{name} must be finite and >= 0")
    return grid


@dataclass(frozen=True)
class TemperatureCurve:
    temperature: np.ndarray
    abs_t: np.ndarray
    transition: str
    bath_kind: str
    frequency: float
    a_in: float

    def to_csv(self) -> str:
        return csv_text(["temperature_k", "abs_t"], zip(self.temperature, self.abs_t))


def temperature_curve(
    dev: DeviceConfig,
    bath_kind: str,
    transition: str,
    T_grid: Sequence[float],
    a_in: Optional[float] = None,
    t_other: float = T_RES,
    threads: Optional[int] = None,
    policy: Optional[SecularPolicy] = None,
) -> TemperatureCurve:
    """|t| at a fixed transition while one bath temperature is swept."""
    grid = _check_grid(T_grid)
    freq = transition_frequency(dev, transition)
    a_in = weak_probe_amplitude(dev) if a_in is None else a_in
    pairs = _bath_pairs(bath_kind, grid, t_other)
    vals = _pmap(lambda p: _abs_t(dev, p[0], p[1], [freq], a_in, policy)[0], pairs, threads)
    return TemperatureCurve(grid, np.array(vals), transition, bath_kind, freq, a_in)


@dataclass(frozen=True)
class BrightDarkDiagram:
    sweep_value: np.ndarray
    t_00B: np.ndarray
    t_DDp: np.ndarray
    label: str
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sweep_value)

    def crossing(self, level: float = 0.5) -> Optional[int]:
        """Index of the first point with |t_00B| above ``level``."""
        above = np.flatnonzero(self.t_00B > level)
        return int(above[0]) if above.size else None

    def to_csv(self) -> str:
        return csv_text(["sweep_value", "t_00B_abs", "t_DDp_abs"], zip(self.sweep_value, self.t_00B, self.t_DDp))


def bright_dark_diagram(
    dev: DeviceConfig,
    sweep: str,
    grid: Sequence[float],
    fixed: float = T_RES,
    a_in: Optional[float] = None,
    threads: Optional[int] = None,
    policy: Optional[SecularPolicy] = None,
) -> BrightDarkDiagram:
    """Paired (|t_00B|, |t_DD'|) while sweeping the ``global`` or ``local`` bath."""
    if dev.q2 is None:
        raise ConfigurationError("a bright-dark diagram needs a two-qubit device")
    grid = _check_grid(grid)
    a_in = weak_probe_amplitude(dev) if a_in is None else a_in
    freqs = [transition_frequency(dev, "00B"), transition_frequency(dev, "DD'")]
    pairs = _bath_pairs(sweep, grid, fixed)
    vals = np.array(_pmap(lambda p: _abs_t(dev, p[0], p[1], freqs, a_in, policy), pairs, threads))
    meta = {"a_in": a_in, "fixed_temperature": fixed, "f_00B": freqs[0], "f_DDp": freqs[1]}
    return BrightDarkDiagram(grid, vals[:, 0], vals[:, 1], f"{sweep}-sweep", meta)


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class CalibrationModel:
    """Bath temperature T = T_res + alpha * P for applied noise power P."""

    T_res: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.T_res > 0:
            raise ValueError("T_res > 0 required")
        if self.alpha < 0:
            raise ValueError("alpha >= 0 required")

    def temperature(self, power):
        return self.T_res + self.alpha * np.asarray(power, dtype=float)


@dataclass(frozen=True)
class FitReport:
    params: dict
    residual: float
    converged: bool
    iterations: int
    bounds: dict
    message: str = ""

    def to_json(self) -> str:
        body = {
            "params": self.params,
            "residual": self.residual,
            "converged": self.converged,
            "iterations": self.iterations,
            "bounds": self.bounds,
        }
        return json.dumps(body, indent=2, sort_keys=True)

    def calibration(self) -> CalibrationModel:
        return CalibrationModel(self.params["T_res"], self.params["alpha"])


def calibration_curve(
    dev: DeviceConfig,
    bath_kind: str,
    powers: Sequence[float],
    model: CalibrationModel,
    transition: str = "ge",
    t_other: float = T_RES,
    a_in: Optional[float] = None,
) -> np.ndarray:
    """Forward model of a calibration sweep: |t(T_res + alpha P)|."""
    curve = temperature_curve(dev, bath_kind, transition, model.temperature(powers), a_in, t_other, threads=1)
    return curve.abs_t


def _invert_monotone(dev, bath_kind, transition, values, t_other, a_in, lo=0.005, hi=5.0) -> np.ndarray:
    """Per-point temperatures from a tabulated monotone |t|(T) curve."""
    table_t = np.geomspace(lo, hi, 48)
    table = temperature_curve(dev, bath_kind, transition, table_t, a_in, t_other, threads=1).abs_t
    order = np.argsort(table)
    return np.exp(np.interp(values, table[order], np.log(table_t[order])))


def _run_lsq(fun, x0, lower, upper):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return least_squares(
            fun, x0, bounds=(lower, upper), method="trf", diff_step=DIFF_STEP,
            x_scale="jac", ftol=1e-14, xtol=1e-14, gtol=1e-14, max_nfev=200,
        )


def _condition_warning(res, what: str) -> None:
    s = np.linalg.svd(res.jac, compute_uv=False)
    if s.size and (s[-1] <= 1e-10 * s[0] or s[0] == 0):
        warnings.warn(f"{what}: Jacobian is ill-conditioned; data carry little information", FitWarning)


def fit_calibration(
    power: Sequence[float],
    abs_t: Sequence[float],
    dev: DeviceConfig,
    bath_kind: str = "global",
    transition: str = "ge",
    t_other: float = T_RES,
    a_in: Optional[float] = None,
    bounds: tuple[float, float] = (0.005, 1.0),
) -> FitReport:
    """Fit (T_res, alpha) of T = T_res + alpha * P to a saturation curve.

    The starting point comes from inverting each data point through the
    forward curve and regressing the resulting temperatures on power.
    """
    power = np.asarray(power, dtype=float)
    data = np.asarray(abs_t, dtype=float)
    if power.shape != data.shape or power.size < 4:
        raise ValueError("need at least four (power, |t|) pairs of equal length")
    if np.ptp(data) < 1e-6:
        warnings.warn("calibration data are flat; the fit is ill-conditioned", FitWarning)
    a_in = weak_probe_amplitude(dev) if a_in is None else a_in

    temps = _invert_monotone(dev, bath_kind, transition, data, t_other, a_in)
    slope, icept = np.polyfit(power, temps, 1) if np.ptp(power) > 0 else (0.0, temps.mean())
    t0 = float(np.clip(icept, bounds[0] * 1.01, bounds[1] * 0.99))
    a0 = max(float(slope), 0.0)

    def resid(x):
        model = CalibrationModel(np.exp(x[0]), x[1])
        return calibration_curve(dev, bath_kind, power, model, transition, t_other, a_in) - data

    lower, upper = [np.log(bounds[0]), 0.0], [np.log(bounds[1]), np.inf]
    res = _run_lsq(resid, [np.log(t0), a0], lower, upper)
    _condition_warning(res, "fit_calibration")
    return FitReport(
        params={"T_res": float(np.exp(res.x[0])), "alpha": float(res.x[1])},
        residual=float(np.linalg.norm(res.fun)),
        converged=bool(res.status > 0),
        iterations=int(res.nfev),
        bounds={"T_res": list(bounds), "alpha": [0.0, None]},
        message=res.message,
    )


def local_curve(
    dev: DeviceConfig,
    qubit: int,
    powers: Sequence[float],
    T_res: float,
    alpha_loc: float,
    gamma_loc1: float,
    transition: str = "ge",
    a_in: Optional[float] = None,
) -> np.ndarray:
    """|t| of one qubit under side-pin heating T_loc = T_res + alpha_loc P.

    The global bath stays at ``T_res``; ``dev.k_ratio`` sets qubit 2's rate.
    """
    single = dev.replace(gamma_loc1=gamma_loc1).single(qubit)
    temps = CalibrationModel(T_res, alpha_loc).temperature(powers)
    return temperature_curve(single, "local", transition, temps, a_in, T_res, threads=1).abs_t


def fit_local(
    data_q1: tuple[Sequence[float], Sequence[float]],
    data_q2: tuple[Sequence[float], Sequence[float]],
    dev: DeviceConfig,
    calibration: CalibrationModel,
    gamma_loc1_guess: Optional[float] = None,
    alpha_band: float = 10.0,
    decades: float = 3.0,
    a_in: Optional[float] = None,
) -> FitReport:
    """Joint fit of (alpha_loc, gamma_loc1) to both qubits' ge side-pin curves.

    ``dev.k_ratio`` is held fixed. alpha_loc is confined to
    [alpha_glob / alpha_band, alpha_glob * alpha_band] and gamma_loc1 to
    ``decades`` orders of magnitude either side of its starting guess.
    """
    if dev.q2 is None:
        raise ConfigurationError("fit_local needs a two-qubit device")
    if not calibration.alpha > 0:
        raise ValueError("alpha_glob must be > 0 to anchor the alpha_loc band")
    g0 = dev.gamma_loc1 if gamma_loc1_guess is None else gamma_loc1_guess
    if not g0 > 0:
        raise ValueError("a positive gamma_loc1 guess is required")
    sets = []
    for q, (p, t) in ((1, data_q1), (2, data_q2)):
        p, t = np.asarray(p, dtype=float), np.asarray(t, dtype=float)
        if p.shape != t.shape or p.size < 2:
            raise ValueError(f"qubit {q} data must be equal-length (power, |t|) arrays")
        sets.append((q, p, t))
    if sum(len(p) for _, p, _ in sets) < 4:
        raise ValueError("need at least four data points in total")

    def resid(x):
        out = [
            local_curve(dev, q, p, calibration.T_res, np.exp(x[0]), np.exp(x[1]), "ge", a_in) - t
            for q, p, t in sets
        ]
        return np.concatenate(out)

    la0 = np.log(calibration.alpha)
    lg0 = np.log(g0)
    half_a, half_g = np.log(alpha_band), decades * np.log(10.0)
    lower, upper = [la0 - half_a, lg0 - half_g], [la0 + half_a, lg0 + half_g]
    best = None
    # deterministic starts spread over the rate range
    for shift in (0.0, -half_g / 2, half_g / 2):
        res = _run_lsq(resid, [la0, lg0 + shift], lower, upper)
        if best is None or res.cost < best.cost:
            best = res
        if best.cost < 1e-20:
            break
    _condition_warning(best, "fit_local")
    return FitReport(
        params={"alpha_loc": float(np.exp(best.x[0])), "gamma_loc1": float(np.exp(best.x[1]))},
        residual=float(np.linalg.norm(best.fun)),
        converged=bool(best.status > 0),
        iterations=int(best.nfev),
        bounds={
            "alpha_loc": [float(np.exp(lower[0])), float(np.exp(upper[0]))],
            "gamma_loc1": [float(np.exp(lower[1])), float(np.exp(upper[1]))],
        },
        message=best.message,
    )


# ---------------------------------------------------------------- inversion


@dataclass(frozen=True)
class Inference:
    T_glob: float
    T_loc: float
    residual: float
    basins: int
    iterations: int
    rel_uncertainty: tuple[float, float]
    wide: bool
    target: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "T_glob": self.T_glob,
                "T_loc": self.T_loc,
                "residual": self.residual,
                "basins": self.basins,
                "iterations": self.iterations,
                "rel_uncertainty": list(self.rel_uncertainty),
                "wide_uncertainty": self.wide,
                "target": list(self.target),
            },
            indent=2,
            sort_keys=True,
        )


class Thermometer:
    """Two-bath inversion of (|t_00B|, |t_DD'|) for a calibrated device.

    The forward map is tabulated once on a coarse log grid of
    (T_glob, T_loc); each inversion runs damped Newton in log temperature
    from the ``starts`` grid nodes closest to the target.
    """

    def __init__(
        self,
        dev: DeviceConfig,
        a_in: Optional[float] = None,
        glob_range: tuple[float, float] = (0.02, 1.0),
        loc_range: tuple[float, float] = (0.02, 5.0),
        grid_shape: tuple[int, int] = (12, 12),
        starts: int = 8,
        tol: float = 1e-9,
        basin_tol: float = 1e-2,
        precision: float = 1e-3,
        threads: Optional[int] = None,
        policy: Optional[SecularPolicy] = None,
    ):
        if dev.q2 is None:
            raise ConfigurationError("inversion needs a two-qubit device")
        if dev.gamma_loc1 <= 0:
            raise ConfigurationError("inversion needs a nonzero local coupling")
        self.dev = dev
        self.a_in = weak_probe_amplitude(dev) if a_in is None else a_in
        self.freqs = (transition_frequency(dev, "00B"), transition_frequency(dev, "DD'"))
        self.lower = np.log([glob_range[0], loc_range[0]])
        self.upper = np.log([glob_range[1], loc_range[1]])
        self.grid_shape = grid_shape
        self.starts = starts
        self.tol = tol
        self.basin_tol = basin_tol
        self.precision = precision
        self.threads = threads
        self.policy = policy
        self._table = None

    def forward(self, t_glob: float, t_loc: float) -> np.ndarray:
        return _abs_t(self.dev, t_glob, t_loc, self.freqs, self.a_in, self.policy)

    def _f(self, u: np.ndarray) -> np.ndarray:
        return self.forward(*np.exp(u))

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid nodes (log T pairs) and forward values, computed on first use."""
        if self._table is None:
            ug = np.linspace(self.lower[0], self.upper[0], self.grid_shape[0])
            ul = np.linspace(self.lower[1], self.upper[1], self.grid_shape[1])
            nodes = np.array([(a, b) for a in ug for b in ul])
            vals = np.array(_pmap(self._f, list(nodes), self.threads))
            self._table = (nodes, vals)
        return self._table

    def _jacobian(self, u: np.ndarray, f0: np.ndarray) -> np.ndarray:
        jac = np.empty((2, 2))
        for k in range(2):
            h = DIFF_STEP * max(1.0, abs(u[k]))
            du = u.copy()
            du[k] += h
            jac[:, k] = (self._f(du) - f0) / h
        return jac

    def _newton(self, u: np.ndarray, target: np.ndarray, known: list, max_iter: int = 40):
        """Damped Newton; stops early when it lands in an already-found basin."""
        f = self._f(u)
        r = f - target
        it = 0
        for it in range(1, max_iter + 1):
            if np.linalg.norm(r) < self.tol:
                break
            for k in known:
                if np.max(np.abs(u - k)) < self.basin_tol:
                    return k, 0.0, it, True
            jac = self._jacobian(u, f)
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            step = np.clip(step, -1.0, 1.0)
            lam = 1.0
            while lam > 1e-4:
                trial = np.clip(u + lam * step, self.lower, self.upper)
                ft = self._f(trial)
                if np.linalg.norm(ft - target) < np.linalg.norm(r):
                    break
                lam *= 0.5
            else:
                break
            u, f, r = trial, ft, ft - target
        return u, float(np.linalg.norm(r)), it, False

    def infer(self, t_00B: float, t_DDp: float) -> Inference:
        target = np.array([t_00B, t_DDp], dtype=float)
        nodes, vals = self.table
        dist = np.linalg.norm(vals - target, axis=1)
        nearest = int(np.argmin(dist))
        if np.any(target < 0) or np.any(target > 1 + 1e-6):
            self._out_of_range(target, nodes[nearest], vals[nearest])

        solutions: list[np.ndarray] = []
        total_iter = 0
        best = (None, np.inf)
        for idx in np.argsort(dist, kind="stable")[: self.starts]:
            u, res, it, merged = self._newton(nodes[idx].copy(), target, solutions)
            total_iter += it
            if merged:
                continue
            if res < best[1]:
                best = (u, res)
            if res < self.tol and all(np.max(np.abs(u - k)) >= self.basin_tol for k in solutions):
                solutions.append(u)
        if not solutions:
            u = best[0] if best[0] is not None else nodes[nearest]
            self._out_of_range(target, u, self._f(u))
        if len(solutions) > 1:
            cands = [tuple(float(x) for x in np.exp(s)) for s in solutions]
            raise AmbiguityError(f"{len(cands)} temperature pairs reproduce the target", cands)

        u = solutions[0]
        f = self._f(u)
        jac = self._jacobian(u, f)
        # log-temperature spread implied by the nominal |t| precision
        try:
            spread = np.abs(np.linalg.inv(jac)).sum(axis=1) * self.precision
        except np.linalg.LinAlgError:
            spread = np.array([np.inf, np.inf])
        wide = bool(np.any(spread > 0.1))
        return Inference(
            float(np.exp(u[0])), float(np.exp(u[1])), float(np.linalg.norm(f - target)),
            len(solutions), total_iter, (float(spread[0]), float(spread[1])), wide,
            (float(t_00B), float(t_DDp)),
        )

    def _out_of_range(self, target, u, f):
        pair = (float(f[0]), float(f[1]))
        at = (float(np.exp(u[0])), float(np.exp(u[1])))
        raise OutOfRangeError(
            f"target ({target[0]:.6g}, {target[1]:.6g}) is outside the reachable range; "
            f"nearest attainable pair ({pair[0]:.6g}, {pair[1]:.6g}) at T_glob={at[0]:.4g} K, T_loc={at[1]:.4g} K",
            pair,
            at,
        )


def infer_temperatures(t_00B: float, t_DDp: float, dev: DeviceConfig, a_in: Optional[float] = None, **kw) -> Inference:
    """One-shot inversion; build a :class:`Thermometer` to reuse its table."""
    return Thermometer(dev, a_in, **kw).infer(t_00B, t_DDp)


def csv_text(header: list[str], rows) -> str:
    """CSV with a header row and 17-significant-digit floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(x), ".17g") for x in row])
    return buf.getvalue()
