"""Command-line entry point: one subcommand per scenario.

    darkbright levels --preset paper --out out/levels
    darkbright diagram --config configs/lowfreq.ini --set scenario.fixed=0.001,0.03

Every run writes its CSV/JSON artifacts and a ``run.json`` manifest into
the output directory. Exit codes: 0 success, 2 invalid configuration,
3 solver or inversion failure, 4 fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import tempfile
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from . import __version__
from .config import KINDS, ConfigError, ScenarioConfig, parse_config
from .liouvillian import SolverError
from .operators import DriveSpec, eigen_spectrum, embed, ladder
from .rates import device_baths
from .response import SteadyStateModel, probe_sweep, transmission_amplitude, weak_probe_amplitude
from .thermometry import (
    AmbiguityError,
    CalibrationModel,
    ConfigurationError,
    OutOfRangeError,
    Thermometer,
    bright_dark_diagram,
    csv_text,
    fit_calibration,
    fit_local,
    local_curve,
    temperature_curve,
)

log = logging.getLogger("darkbright")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FIT = 0, 2, 3, 4


class RunFailure(Exception):
    def __init__(self, code: int, message: str, diagnostics: dict):
        super().__init__(message)
        self.code = code
        self.diagnostics = diagnostics


# ---------------------------------------------------------------- scenarios
# Each handler returns ({filename: text}, diagnostics dict).


def _baths(cfg: ScenarioConfig):
    return device_baths(cfg.device, cfg.t_glob, cfg.t_loc)


def _a_in(cfg: ScenarioConfig) -> float:
    return weak_probe_amplitude(cfg.device) if cfg.a_in is None else cfg.a_in


def _steady(cfg: ScenarioConfig, threads):
    model = SteadyStateModel(cfg.device, _baths(cfg), cfg.secular, cfg.negativity_tol)
    probe = cfg.params["probe"]
    drive = None if probe is None else DriveSpec.waveguide_probe(cfg.device, probe, _a_in(cfg))
    report = model.solve(drive)
    dims = cfg.device.dims
    labels = ["".join(map(str, idx)) for idx in np.ndindex(*dims)]
    pops = np.real(np.diag(report.rho))
    rows = [[lab, format(float(p), ".17g")] for lab, p in zip(labels, pops)]
    body = {
        "residual": report.residual,
        "null_dim": report.null_dim,
        "degenerate": report.degenerate,
        "branch": report.branch,
        "min_eigenvalue": report.min_eigenvalue,
        "mean_a": [
            [float(np.real(v)), float(np.imag(v))]
            for v in (np.trace(embed(ladder(d), k, dims) @ report.rho) for k, d in enumerate(dims))
        ],
    }
    if drive is not None:
        t = transmission_amplitude(report.rho, cfg.device, drive)
        body["transmission"] = [t.real, t.imag, abs(t)]
    text = _table(["state", "population"], rows)
    diag = {"residual": report.residual, "null_dim": report.null_dim, "degenerate": report.degenerate}
    return {"steady_populations.csv": text, "steady.json": _json(body)}, diag


def _probe_sweep(cfg: ScenarioConfig, threads):
    trace = probe_sweep(cfg.device, _baths(cfg), cfg.params["probe_grid"], _a_in(cfg), cfg.secular, threads)
    return {"transmission.csv": trace.to_csv()}, {"points": len(trace.probe), "max_abs_t": float(trace.abs_t.max())}


def _single_if_needed(cfg: ScenarioConfig, transition: str, qubit: int):
    dev = cfg.device
    if transition in ("ge", "ef") and dev.q2 is not None:
        return dev.single(qubit)
    return dev


def _temp_curve(cfg: ScenarioConfig, threads):
    p = cfg.params
    dev = _single_if_needed(cfg, p["transition"], p["qubit"])
    other = p["t_other"]
    if other is None:
        other = cfg.t_loc if p["bath"] == "global" else cfg.t_glob
    curve = temperature_curve(dev, p["bath"], p["transition"], p["grid"], _a_in(cfg), other, threads, cfg.secular)
    return {"temp_curve.csv": curve.to_csv()}, {"frequency_ghz": curve.frequency, "t_other": other}


def _diagram(cfg: ScenarioConfig, threads):
    p = cfg.params
    out, diag = {}, {}
    for fixed in p["fixed"]:
        d = bright_dark_diagram(cfg.device, p["sweep"], p["grid"], fixed, _a_in(cfg), threads, cfg.secular)
        name = f"diagram_{p['sweep']}_fixed_{format(fixed, 'g')}.csv"
        out[name] = d.to_csv()
        diag[name] = {"f_00B": d.metadata["f_00B"], "f_DDp": d.metadata["f_DDp"]}
    return out, diag


def _levels(cfg: ScenarioConfig, threads):
    ls = eigen_spectrum(cfg.device, cfg.params["max_excitation"])
    rows = [
        [t.lower, t.upper, t.manifold, format(t.frequency, ".17g"), format(t.dipole, ".17g"), int(t.allowed)]
        for t in ls.transitions
    ]
    text = _table(["lower", "upper", "manifold", "frequency_ghz", "dipole", "allowed"], rows)
    return {"levels.csv": text}, {"lines": len(rows), "allowed": ls.allowed_count()}


def _read_pairs(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["power", "abs_t"]:
        raise ConfigError(f"{path}: expected a header row 'power,abs_t'")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: non-numeric data row ({exc})") from exc
    if data.size == 0:
        raise ConfigError(f"{path}: no data rows")
    return data[:, 0], data[:, 1]


def _fit_outcome(name: str, report) -> tuple[dict, dict]:
    diag = {"residual": report.residual, "converged": report.converged, "iterations": report.iterations}
    if not report.converged:
        raise RunFailure(EXIT_FIT, f"fit did not converge: {report.message}", json.loads(report.to_json()))
    return {name: report.to_json() + "\n"}, diag


def _fit_calibration(cfg: ScenarioConfig, threads):
    p = cfg.params
    dev = _single_if_needed(cfg, p["transition"], p["qubit"])
    power, abs_t = _read_pairs(p["data"])
    other = cfg.t_loc if p["bath"] == "global" else cfg.t_glob
    report = fit_calibration(power, abs_t, dev, p["bath"], p["transition"], other, _a_in(cfg))
    return _fit_outcome("fit_calibration.json", report)


def _fit_local(cfg: ScenarioConfig, threads):
    p = cfg.params
    d1, d2 = _read_pairs(p["data_q1"]), _read_pairs(p["data_q2"])
    cal = CalibrationModel(p["t_res"], p["alpha_glob"])
    report = fit_local(d1, d2, cfg.device, cal, p["gamma_loc1_guess"], a_in=cfg.a_in)
    out, diag = _fit_outcome("fit_local.json", report)
    rows = []
    for q, (power, _) in ((1, d1), (2, d2)):
        ef = local_curve(
            cfg.device, q, power, cal.T_res, report.params["alpha_loc"], report.params["gamma_loc1"], "ef", cfg.a_in
        )
        rows.extend([q, pw, t] for pw, t in zip(power, ef))
    out["predicted_ef.csv"] = csv_text(["qubit", "power", "abs_t"], rows)
    return out, diag


def _infer(cfg: ScenarioConfig, threads):
    p = cfg.params
    th = Thermometer(cfg.device, _a_in(cfg), threads=threads, policy=cfg.secular)
    try:
        res = th.infer(p["t_00b"], p["t_ddp"])
    except OutOfRangeError as exc:
        raise RunFailure(
            EXIT_SOLVER, str(exc), {"error": "out-of-range", "nearest_pair": list(exc.nearest), "nearest_at": list(exc.at)}
        ) from exc
    except AmbiguityError as exc:
        raise RunFailure(
            EXIT_SOLVER, str(exc), {"error": "ambiguous", "candidates": [list(c) for c in exc.candidates]}
        ) from exc
    diag = {"residual": res.residual, "basins": res.basins, "wide_uncertainty": res.wide}
    return {"inference.json": res.to_json() + "\n"}, diag


SCENARIOS: dict[str, Callable] = {
    "steady": _steady,
    "probe-sweep": _probe_sweep,
    "temp-curve": _temp_curve,
    "diagram": _diagram,
    "levels": _levels,
    "fit-calibration": _fit_calibration,
    "fit-local": _fit_local,
    "infer": _infer,
}


# ---------------------------------------------------------------- output


def _table(header, rows) -> str:
    lines = [",".join(header)] + [",".join(str(c) for c in r) for r in rows]
    return "\n".join(lines) + "\n"


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _versions() -> dict:
    return {"darkbright": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def run(cfg: ScenarioConfig, threads: Optional[int] = None) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for key, value in sorted(cfg.defaults.items()):
        log.info("default %s = %s", key, value)

    manifest = {"config": cfg.echo(), "versions": _versions(), "threads": threads, "outputs": {}}
    written: list[Path] = []
    t0 = time.perf_counter()
    code, diagnostics = EXIT_OK, {}
    try:
        artifacts, diagnostics = SCENARIOS[cfg.kind](cfg, threads)
        for name, text in artifacts.items():
            path = out / name
            atomic_write(path, text)
            written.append(path)
            manifest["outputs"][name] = hashlib.sha256(text.encode()).hexdigest()
    except RunFailure as exc:
        code, diagnostics = exc.code, {"message": str(exc), **exc.diagnostics}
    except SolverError as exc:
        code, diagnostics = EXIT_SOLVER, {"message": str(exc), "residual": exc.residual}
    except (ConfigError, ConfigurationError, ValueError) as exc:
        code, diagnostics = EXIT_CONFIG, {"message": str(exc)}
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise

    if code != EXIT_OK:
        for path in written:
            path.unlink(missing_ok=True)
        manifest["outputs"] = {}
        atomic_write(out / "diagnostics.json", _json(diagnostics))
        log.error("%s failed (exit %d): %s", cfg.kind, code, diagnostics.get("message", ""))
    manifest["status"] = "ok" if code == EXIT_OK else "failed"
    manifest["exit_code"] = code
    manifest["diagnostics"] = diagnostics
    manifest["elapsed_s"] = time.perf_counter() - t0
    atomic_write(out / "run.json", _json(manifest))
    return code


# ---------------------------------------------------------------- argparse

# flag -> config key, per subcommand
_FLAGS = {
    "steady": [("--probe", "scenario.probe", "probe frequency in GHz (omit for no drive)")],
    "probe-sweep": [("--probe-grid", "scenario.probe_grid", "probe grid, e.g. lin:7.5:8.0:201")],
    "temp-curve": [
        ("--bath", "scenario.bath", "global or local"),
        ("--transition", "scenario.transition", "ge, ef, 00B or DD'"),
        ("--grid", "scenario.grid", "temperature grid in K"),
        ("--qubit", "scenario.qubit", "qubit kept for ge/ef curves"),
        ("--t-other", "scenario.t_other", "temperature of the bath not swept (K)"),
    ],
    "diagram": [
        ("--sweep", "scenario.sweep", "global or local"),
        ("--grid", "scenario.grid", "temperature grid in K"),
        ("--fixed", "scenario.fixed", "temperature(s) of the other bath, comma separated"),
    ],
    "levels": [("--max-excitation", "scenario.max_excitation", "highest excitation manifold")],
    "fit-calibration": [
        ("--data", "scenario.data", "CSV with columns power,abs_t"),
        ("--bath", "scenario.bath", "global or local"),
        ("--transition", "scenario.transition", "ge or ef"),
        ("--qubit", "scenario.qubit", "qubit measured"),
    ],
    "fit-local": [
        ("--data-q1", "scenario.data_q1", "qubit 1 CSV (power,abs_t)"),
        ("--data-q2", "scenario.data_q2", "qubit 2 CSV (power,abs_t)"),
        ("--t-res", "scenario.t_res", "residual temperature (K)"),
        ("--alpha-glob", "scenario.alpha_glob", "global conversion coefficient"),
        ("--gamma-loc1-guess", "scenario.gamma_loc1_guess", "starting side-pin rate (MHz)"),
    ],
    "infer": [
        ("--t-00b", "scenario.t_00b", "measured |t| at f_00B"),
        ("--t-ddp", "scenario.t_ddp", "measured |t| at f_DD'"),
    ],
}

_COMMON = [
    ("--preset", "device.preset", "built-in device: paper or lowfreq"),
    ("--t-glob", "baths.t_glob", "global bath temperature (K)"),
    ("--t-loc", "baths.t_loc", "local bath temperature (K)"),
    ("--a-in", "probe.a_in", "probe input field, sqrt(MHz)"),
    ("--secular", "solver.secular", "partial, full or none"),
]

_PATH_KEYS = {"scenario.data", "scenario.data_q1", "scenario.data_q2"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darkbright", description="Two-qubit waveguide thermometry simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} scenario")
        sp.add_argument("--config", help="INI or JSON scenario file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker threads (default: DARKBRIGHT_THREADS or 1)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag, key, text in _COMMON + _FLAGS[kind]:
            sp.add_argument(flag, dest=key, help=text)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.set)
    for flag, key, _ in _COMMON + _FLAGS[args.command]:
        value = getattr(args, key)
        if value is not None:
            if key in _PATH_KEYS:
                value = os.path.abspath(value)
            overrides.append(f"{key}={value}")
    try:
        cfg = parse_config(args.config, args.command, overrides, args.out)
    except ConfigError as exc:
        print(f"darkbright: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"darkbright: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.threads)


if __name__ == "__main__":
    sys.exit(main())
