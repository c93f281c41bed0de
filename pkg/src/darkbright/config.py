"""Scenario configuration: sectioned INI files or an equivalent JSON mirror.

A minimal file only needs the device frequency; everything else falls
back to the ``paper`` preset and module defaults, and the filled-in values
are reported in ``ScenarioConfig.defaults``.

    [device]
    preset = paper
    omega = 7.8
    k_ratio = 1.78

    [baths]
    t_glob = 0.095
    t_loc = 0.095

    [scenario]
    kind = diagram
    sweep = global
    grid = log:0.01:200:30

Grids are written ``lin:start:stop:num``, ``log:start:stop:num`` or as a
comma-separated list, and must be strictly increasing.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .operators import DeviceConfig, TransmonParams
from .presets import PAPER, T_RES
from .rates import SecularPolicy

KINDS = ("steady", "probe-sweep", "temp-curve", "diagram", "levels", "fit-calibration", "fit-local", "infer")


class ConfigError(ValueError):
    """Unreadable or invalid configuration; ``field`` names the culprit."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    device: DeviceConfig
    t_glob: float
    t_loc: float
    secular: SecularPolicy
    negativity_tol: float
    a_in: Optional[float]
    params: dict
    output_dir: Path
    defaults: dict = field(default_factory=dict)
    source: Optional[str] = None

    def echo(self) -> dict:
        """Every resolved value, in a JSON-serializable form."""
        d = self.device
        qubits = [{"omega": q.omega, "beta": q.beta, "levels": q.levels} for q in d.qubits]
        params = {k: (list(map(float, v)) if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {
            "kind": self.kind,
            "device": {
                "qubits": qubits,
                "g": d.g,
                "gamma_glob": d.gamma_glob,
                "gamma_loc1": d.gamma_loc1,
                "k_ratio": d.k_ratio,
            },
            "baths": {"t_glob": self.t_glob, "t_loc": self.t_loc},
            "solver": {
                "secular": self.secular.mode,
                "secular_cutoff": self.secular.cutoff,
                "negativity_tol": self.negativity_tol,
            },
            "probe": {"a_in": self.a_in if self.a_in is not None else self.device.gamma_glob / 50.0},
            "scenario": params,
            "output_dir": str(self.output_dir),
            "defaults_filled": self.defaults,
            "source": self.source,
        }


# ------------------------------------------------------------------ reading


def read_sections(path: str | Path) -> dict[str, dict[str, str]]:
    """Raw ``{section: {key: value}}`` from an INI or JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: JSON parse error: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError(f"{path}: top level must map section names to objects")
        return {s: {k: _json_scalar(v) for k, v in body.items()} for s, body in raw.items()}

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: expected a [section] header", line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"{path}:{lineno}: cannot parse line {exc.errors[0][1].strip()!r}", line=lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc}", line=exc.lineno) from exc
    return {s: dict(parser[s]) for s in parser.sections()}


def _json_scalar(v: Any) -> str:
    if isinstance(v, list):
        return ", ".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return "" if v is None else str(v)


# ------------------------------------------------------------------ values


def _float(sec: dict, key: str, where: str, default=None, check=None, rule: str = "") -> Optional[float]:
    raw = sec.get(key, "")
    if raw == "":
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{where}.{key}: expected a number, got {raw!r}", f"{where}.{key}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{where}.{key}: must be finite", f"{where}.{key}")
    if check is not None and not check(val):
        raise ConfigError(f"{where}.{key}: constraint {rule} violated (got {val:g})", f"{where}.{key}")
    return val


def parse_grid(text: str, name: str = "grid") -> np.ndarray:
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            grid = np.linspace(a, b, n) if kind == "lin" else np.geomspace(a, b, n)
        else:
            grid = np.array([float(x) for x in text.replace(";", ",").split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"{name}: cannot parse grid {text!r}", name) from None
    if grid.size == 0:
        raise ConfigError(f"{name}: grid is empty", name)
    if not np.all(np.isfinite(grid)):
        raise ConfigError(f"{name}: grid must be finite", name)
    if np.any(np.diff(grid) <= 0):
        raise ConfigError(f"{name}: grid must be strictly increasing", name)
    return grid


_SCENARIO_KEYS = {
    "steady": {"probe"},
    "probe-sweep": {"probe_grid"},
    "temp-curve": {"bath", "transition", "grid", "qubit", "t_other"},
    "diagram": {"sweep", "grid", "fixed"},
    "levels": {"max_excitation"},
    "fit-calibration": {"data", "bath", "transition", "qubit"},
    "fit-local": {"data_q1", "data_q2", "t_res", "alpha_glob", "gamma_loc1_guess"},
    "infer": {"t_00b", "t_ddp"},
}

_REQUIRED = {
    "probe-sweep": ("probe_grid",),
    "temp-curve": ("grid",),
    "diagram": ("grid",),
    "fit-calibration": ("data",),
    "fit-local": ("data_q1", "data_q2", "alpha_glob"),
    "infer": ("t_00b", "t_ddp"),
}


def _scenario_params(kind: str, sec: dict, base_dir: Path, defaults: dict) -> dict:
    unknown = set(sec) - _SCENARIO_KEYS[kind] - {"kind"}
    if unknown:
        raise ConfigError(f"scenario.{sorted(unknown)[0]}: unknown key for kind {kind!r}", f"scenario.{sorted(unknown)[0]}")
    for key in _REQUIRED.get(kind, ()):
        if sec.get(key, "") == "":
            raise ConfigError(f"scenario.{key}: required for kind {kind!r}", f"scenario.{key}")

    p: dict[str, Any] = {}

    def default(key, value):
        defaults[f"scenario.{key}"] = value
        return value

    def choice(key, options, fallback):
        val = sec.get(key, "") or default(key, fallback)
        if val not in options:
            raise ConfigError(f"scenario.{key}: must be one of {', '.join(options)} (got {val!r})", f"scenario.{key}")
        return val

    def path(key):
        fp = Path(sec[key])
        fp = fp if fp.is_absolute() else base_dir / fp
        if not fp.is_file():
            raise ConfigError(f"scenario.{key}: input file {fp} does not exist", f"scenario.{key}")
        return str(fp)

    if kind == "steady":
        p["probe"] = _float(sec, "probe", "scenario", None, lambda v: v > 0, "probe > 0")
    elif kind == "probe-sweep":
        p["probe_grid"] = parse_grid(sec["probe_grid"], "scenario.probe_grid")
        if p["probe_grid"][0] <= 0:
            raise ConfigError("scenario.probe_grid: constraint probe > 0 violated", "scenario.probe_grid")
    elif kind == "temp-curve":
        p["bath"] = choice("bath", ("global", "local"), "global")
        p["transition"] = choice("transition", ("ge", "ef", "00B", "DD'"), "ge")
        p["grid"] = parse_grid(sec["grid"], "scenario.grid")
        p["qubit"] = int(_float(sec, "qubit", "scenario", default("qubit", 1), lambda v: v in (1, 2), "qubit in {1, 2}"))
        p["t_other"] = _float(sec, "t_other", "scenario", None, lambda v: v >= 0, "t_other >= 0")
    elif kind == "diagram":
        p["sweep"] = choice("sweep", ("global", "local"), "global")
        p["grid"] = parse_grid(sec["grid"], "scenario.grid")
        fixed = sec.get("fixed", "")
        p["fixed"] = list(map(float, parse_grid(fixed, "scenario.fixed"))) if fixed else [default("fixed", T_RES)]
        if min(p["fixed"]) < 0:
            raise ConfigError("scenario.fixed: constraint fixed >= 0 violated", "scenario.fixed")
    elif kind == "levels":
        p["max_excitation"] = int(
            _float(sec, "max_excitation", "scenario", default("max_excitation", 3), lambda v: v >= 1 and v == int(v), "max_excitation >= 1, integer")
        )
    elif kind == "fit-calibration":
        p["data"] = path("data")
        p["bath"] = choice("bath", ("global", "local"), "global")
        p["transition"] = choice("transition", ("ge", "ef"), "ge")
        p["qubit"] = int(_float(sec, "qubit", "scenario", default("qubit", 1), lambda v: v in (1, 2), "qubit in {1, 2}"))
    elif kind == "fit-local":
        p["data_q1"] = path("data_q1")
        p["data_q2"] = path("data_q2")
        p["t_res"] = _float(sec, "t_res", "scenario", default("t_res", T_RES), lambda v: v > 0, "t_res > 0")
        p["alpha_glob"] = _float(sec, "alpha_glob", "scenario", None, lambda v: v > 0, "alpha_glob > 0")
        p["gamma_loc1_guess"] = _float(sec, "gamma_loc1_guess", "scenario", None, lambda v: v > 0, "gamma_loc1_guess > 0")
    elif kind == "infer":
        p["t_00b"] = _float(sec, "t_00b", "scenario", None, lambda v: v >= 0, "t_00b >= 0")
        p["t_ddp"] = _float(sec, "t_ddp", "scenario", None, lambda v: v >= 0, "t_ddp >= 0")
    return p


def build_config(
    sections: dict[str, dict[str, str]],
    kind: Optional[str] = None,
    output_dir: Optional[str] = None,
    base_dir: Path = Path("."),
    source: Optional[str] = None,
) -> ScenarioConfig:
    """Validate raw sections and fill defaults."""
    known = {"device", "baths", "solver", "probe", "scenario", "output"}
    for name in sections:
        if name not in known:
            raise ConfigError(f"unknown section [{name}]", name)
    dev_sec = {k.lower(): v for k, v in sections.get("device", {}).items()}
    defaults: dict[str, Any] = {}

    preset = dev_sec.get("preset", "")
    if not preset:
        preset = defaults["device.preset"] = "paper"
    if preset not in ("paper", "lowfreq"):
        raise ConfigError(f"device.preset: must be paper or lowfreq (got {preset!r})", "device.preset")
    base = dict(PAPER)
    if preset == "lowfreq":
        base.update(omega=2.0, gamma_loc1=1e-3)

    allowed = {"preset", "omega", "omega1", "omega2", "beta", "beta1", "beta2", "levels", "qubits", "g", "gamma_glob", "gamma_loc1", "k_ratio"}
    unknown = set(dev_sec) - allowed
    if unknown:
        raise ConfigError(f"device.{sorted(unknown)[0]}: unknown key", f"device.{sorted(unknown)[0]}")

    def dev_val(key, fallback, check, rule):
        val = _float(dev_sec, key, "device", None, check, rule)
        if val is None:
            defaults[f"device.{key}"] = fallback
            return fallback
        return val

    pos, neg = (lambda v: v > 0), (lambda v: v < 0)
    omega = _float(dev_sec, "omega", "device", None, pos, "omega > 0")
    omega1 = dev_val("omega1", omega if omega is not None else base["omega"], pos, "omega1 > 0")
    omega2 = dev_val("omega2", omega if omega is not None else base["omega"], pos, "omega2 > 0")
    beta = _float(dev_sec, "beta", "device", None, neg, "beta < 0")
    beta1 = dev_val("beta1", beta if beta is not None else base["beta1"], neg, "beta1 < 0")
    beta2 = dev_val("beta2", beta if beta is not None else base["beta2"], neg, "beta2 < 0")
    levels = dev_val("levels", 4, lambda v: v >= 2 and v == int(v), "levels >= 2, integer")
    nq = dev_val("qubits", 2, lambda v: v in (1, 2), "qubits in {1, 2}")
    g = dev_val("g", base["g"], lambda v: v >= 0, "g >= 0")
    gamma_glob = dev_val("gamma_glob", base["gamma_glob"], pos, "gamma_glob > 0")
    gamma_loc1 = dev_val("gamma_loc1", base["gamma_loc1"], lambda v: v >= 0, "gamma_loc1 >= 0")
    k_ratio = dev_val("k_ratio", base["k_ratio"], pos, "k_ratio > 0")
    q1 = TransmonParams(omega1, beta1, int(levels))
    q2 = TransmonParams(omega2, beta2, int(levels)) if nq == 2 else None
    device = DeviceConfig(q1, q2, g if q2 is not None else 0.0, gamma_glob, gamma_loc1, k_ratio)

    baths = sections.get("baths", {})
    t_glob = _float(baths, "t_glob", "baths", None, lambda v: v >= 0, "t_glob >= 0")
    t_loc = _float(baths, "t_loc", "baths", None, lambda v: v >= 0, "t_loc >= 0")
    if t_glob is None:
        t_glob = defaults["baths.t_glob"] = T_RES
    if t_loc is None:
        t_loc = defaults["baths.t_loc"] = T_RES

    solver = sections.get("solver", {})
    mode = solver.get("secular", "") or "partial"
    if mode not in ("partial", "full", "none"):
        raise ConfigError(f"solver.secular: must be partial, full or none (got {mode!r})", "solver.secular")
    if "secular" not in solver:
        defaults["solver.secular"] = mode
    cutoff = _float(solver, "secular_cutoff", "solver", None, lambda v: v >= 0, "secular_cutoff >= 0")
    neg_tol = _float(solver, "negativity_tol", "solver", None, lambda v: v >= 0, "negativity_tol >= 0")
    if neg_tol is None:
        neg_tol = defaults["solver.negativity_tol"] = 1e-3

    a_in = _float(sections.get("probe", {}), "a_in", "probe", None, pos, "a_in > 0")
    if a_in is None:
        defaults["probe.a_in"] = gamma_glob / 50.0

    scen = {k.lower(): v for k, v in sections.get("scenario", {}).items()}
    file_kind = scen.get("kind", "")
    kind = kind or file_kind
    if not kind:
        raise ConfigError("scenario.kind: no scenario kind given", "scenario.kind")
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind: must be one of {', '.join(KINDS)} (got {kind!r})", "scenario.kind")
    if file_kind and file_kind != kind:
        raise ConfigError(f"scenario.kind: config is for {file_kind!r} but {kind!r} was requested", "scenario.kind")
    params = _scenario_params(kind, scen, base_dir, defaults)

    out = output_dir or sections.get("output", {}).get("dir", "") or f"darkbright-{kind}"
    if not output_dir and not sections.get("output", {}).get("dir"):
        defaults["output.dir"] = out
    return ScenarioConfig(
        kind, device, t_glob, t_loc, SecularPolicy(mode, cutoff), neg_tol, a_in, params, Path(out), defaults, source
    )


def apply_overrides(sections: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings on top of the file contents."""
    out = {s: dict(v) for s, v in sections.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        out.setdefault(section, {})[name.lower()] = value.strip()
    return out


def parse_config(
    path: Optional[str | Path],
    kind: Optional[str] = None,
    overrides: Optional[list[str]] = None,
    output_dir: Optional[str] = None,
) -> ScenarioConfig:
    sections = read_sections(path) if path is not None else {}
    sections = apply_overrides(sections, overrides or [])
    base_dir = Path(path).parent if path is not None else Path(".")
    return build_config(sections, kind, output_dir, base_dir, None if path is None else str(path))
