"""Parameter sweeps over ``a_max`` and their CSV/JSON output.

Config files are YAML (JSON is accepted too), e.g.::

    experiment: fig3_single_type
    params: {sigma0_sq: 0.1, n: 25, n_receptors: 10}
    geometry: {r1: 1.0, r2: 1.0, r3: 1.0}
    sweep: {start: 0.1, stop: 50, points: 25, spacing: log}
    grids: {k_in: 101, k_out: 1501}
    ba: {tol_bits: 1.0e-6, max_iter: 20000}
    output_path: fig3.csv

Omitted sections take the experiment's defaults. ``params.a_max`` is
ignored: every sweep point sets it.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import sys
from contextlib import nullcontext
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import dmc, mary, relay
from .channel import ChannelParams, Geometry

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig3_single_type", "fig4_multi_type", "fig5_mary", "custom")
CAPACITY_MODES = relay.MODES
MARY_MODES = ("mary_direct", "mary_relay")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SweepPointError(RuntimeError):
    """A numeric or resource failure at one sweep point."""


@dataclass(frozen=True)
class Sweep:
    start: float = 0.1
    stop: float = 50.0
    points: int = 25
    spacing: str = "log"

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 2:
            raise ConfigError("sweep.points", f"need at least 2 points, got {self.points}")
        if self.spacing not in ("linear", "log"):
            raise ConfigError("sweep.spacing", f"must be 'linear' or 'log', got {self.spacing!r}")
        if self.start < 0:
            raise ConfigError("sweep.start", "must be >= 0")
        if self.spacing == "log" and self.start <= 0:
            raise ConfigError("sweep.start", "must be > 0 for log spacing")
        if not self.start < self.stop:
            raise ConfigError("sweep.stop", "must exceed sweep.start")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class Grids:
    k_in: int = dmc.DEFAULT_K_IN
    k_out: int = dmc.DEFAULT_K_OUT
    k_spread: int = dmc.DEFAULT_K_SPREAD
    joint_coords: str = "sum_diff"

    def __post_init__(self):
        for name, low in (("k_in", 2), ("k_out", 2), ("k_spread", 2)):
            value = getattr(self, name)
            if int(value) != value or value < low:
                raise ConfigError(f"grids.{name}", f"must be an integer >= {low}, got {value}")
        if self.joint_coords not in ("pair", "sum_diff"):
            raise ConfigError("grids.joint_coords", f"must be 'pair' or 'sum_diff', got {self.joint_coords!r}")


@dataclass(frozen=True)
class BASettings:
    tol_bits: float = 1e-6
    max_iter: int = 20_000

    def __post_init__(self):
        if not self.tol_bits > 0:
            raise ConfigError("ba.tol_bits", "must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("ba.max_iter", "must be a positive integer")


@dataclass(frozen=True)
class MarySettings:
    m: int = 8
    placement: str = "equi_p"
    prior_policy: str = "ba_optimized"
    trials: int = 1_000_000
    seed: int = 2013

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError("mary.m", f"must be an integer >= 2, got {self.m}")
        if self.placement not in ("equi_p", "equi_a"):
            raise ConfigError("mary.placement", f"unknown placement {self.placement!r}")
        if self.prior_policy not in ("uniform", "ba_optimized"):
            raise ConfigError("mary.prior_policy", f"unknown prior policy {self.prior_policy!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("mary.trials", "must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("mary.seed", "must be a non-negative integer")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: ChannelParams = field(default_factory=ChannelParams)
    geometry: Geometry = field(default_factory=Geometry)
    sweep: Sweep = field(default_factory=Sweep)
    grids: Grids = field(default_factory=Grids)
    ba: BASettings = field(default_factory=BASettings)
    mary: MarySettings | None = None
    modes: tuple = ()
    output_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        for k, mode in enumerate(modes):
            if mode not in CAPACITY_MODES + MARY_MODES:
                raise ConfigError(f"modes[{k}]", f"unknown mode {mode!r}")
        if self.experiment == "custom" and not modes:
            raise ConfigError("modes", "custom experiments must list at least one mode")
        needs_mary = self.experiment == "fig5_mary" or any(m in MARY_MODES for m in modes)
        if needs_mary and self.mary is None:
            raise ConfigError("mary", "required for M-ary experiments")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["modes"] = list(self.modes)
        return out


_DEFAULTS = {
    "fig3_single_type": {},
    "fig4_multi_type": {},
    "fig5_mary": {
        "params": {"n": 50, "n_receptors": 50, "sigma0_sq": 0.1},
        "sweep": {"start": 0.05, "stop": 2.0, "points": 12, "spacing": "log"},
        "mary": {},
    },
    "custom": {},
}

_SECTIONS = {
    "params": ChannelParams,
    "geometry": Geometry,
    "sweep": Sweep,
    "grids": Grids,
    "ba": BASettings,
    "mary": MarySettings,
}


def _build(section, cls, values):
    if not isinstance(values, dict):
        raise ConfigError(section, "must be a mapping")
    names = {f.name: f for f in fields(cls)}
    values = dict(values)
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"{section}.{key}", "unknown field")
        # YAML 1.1 reads exponent literals such as 1e-6 as strings
        if isinstance(value, str) and "float" in str(names[key].type):
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"{section}.{key}", f"not a number: {value!r}") from None
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        first = str(exc).split()[0] if str(exc) else ""
        raise ConfigError(f"{section}.{first}" if first in names else section, str(exc)) from None


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a nested mapping, filling gaps from the experiment defaults."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    if "config_echo" in data:
        data = data["config_echo"]
    known = {"experiment", "modes", "output_path", *_SECTIONS}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {experiment!r}")
    defaults = _DEFAULTS[experiment]
    kwargs = {"experiment": experiment}
    for section, cls in _SECTIONS.items():
        given = data.get(section)
        if given is None and section not in defaults:
            continue
        merged = {**defaults.get(section, {}), **(given or {})}
        if section == "params":
            merged.setdefault("a_max", 1.0)
        kwargs[section] = _build(section, cls, merged)
    if "modes" in data:
        if not isinstance(data["modes"], (list, tuple)):
            raise ConfigError("modes", "must be a list")
        kwargs["modes"] = tuple(data["modes"])
    if data.get("output_path") is not None:
        kwargs["output_path"] = str(data["output_path"])
    return ExperimentConfig(**kwargs)


def load_config(source: str) -> ExperimentConfig:
    """Experiment name with all defaults, or a path to a YAML/JSON config."""
    if source in EXPERIMENTS:
        return config_from_dict({"experiment": source})
    path = Path(source)
    if not path.is_file():
        raise ConfigError("<source>", f"{source!r} is neither an experiment name nor a readable file")
    try:
        text = path.read_text()
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError("<file>", f"cannot parse {source}: {exc}") from None
    return config_from_dict(data)


# ------------------------------------------------------------------- running


@dataclass(frozen=True)
class SweepTable:
    columns: tuple
    rows: tuple
    config: ExperimentConfig | None = None

    def column(self, name) -> np.ndarray:
        return np.array([row[self.columns.index(name)] for row in self.rows])


def _capacity(params, config, mode, init=None):
    rc = relay.RelayConfig(config.geometry, mode, joint_coords=config.grids.joint_coords,
                           k_spread=config.grids.k_spread)
    k_out = config.grids.k_out
    ch = relay.build_channel(params, rc, config.grids.k_in, k_out)
    res = dmc.blahut_arimoto(ch, config.ba.tol_bits, config.ba.max_iter, init=init)
    if not res.converged:
        log.warning("BA not converged for %s at a_max=%g (gap %.2e bits)", mode, params.a_max, res.gap_bound)
    return res


def _mary_point(params, config, use_relay):
    ms = config.mary
    symbols = mary.make_symbol_set(ms.m, params, ms.placement, ms.prior_policy, config.grids.k_out)
    return mary.error_probability_mc(symbols, params, config.geometry, use_relay, ms.trials, ms.seed)


def _columns(config):
    exp = config.experiment
    if exp == "fig3_single_type":
        return ("a_max", "C_direct", "C_single_type")
    if exp == "fig4_multi_type":
        return ("a_max", "C_direct", "C_joint", "C_sum")
    if exp == "fig5_mary":
        return ("a_max", "p_err_direct", "p_err_relay", "ci_low_direct", "ci_high_direct",
                "ci_low_relay", "ci_high_relay")
    cols = ["a_max"]
    for mode in config.modes:
        if mode in MARY_MODES:
            tag = mode.split("_")[1]
            cols += [f"p_err_{tag}", f"ci_low_{tag}", f"ci_high_{tag}"]
        else:
            cols.append(f"C_{mode}")
    return tuple(cols)


def _run_point(config, a_max):
    params = config.params.with_(a_max=float(a_max))
    exp = config.experiment
    if exp == "fig3_single_type":
        return (a_max, _capacity(params, config, "direct").capacity_bits,
                _capacity(params, config, "single_type").capacity_bits)
    if exp == "fig4_multi_type":
        direct = _capacity(params, config, "direct")
        summed = _capacity(params, config, "multi_type_sum")
        # warm start from the sum optimum keeps C_joint >= C_sum when the sum is a marginal
        joint = _capacity(params, config, "multi_type_joint", init=summed.input_distribution)
        return (a_max, direct.capacity_bits, joint.capacity_bits, summed.capacity_bits)
    if exp == "fig5_mary":
        d = _mary_point(params, config, False)
        r = _mary_point(params, config, True)
        return (a_max, d.p_error, r.p_error, d.ci95_low, d.ci95_high, r.ci95_low, r.ci95_high)
    row = [a_max]
    for mode in config.modes:
        if mode in MARY_MODES:
            res = _mary_point(params, config, mode == "mary_relay")
            row += [res.p_error, res.ci95_low, res.ci95_high]
        else:
            row.append(_capacity(params, config, mode).capacity_bits)
    return tuple(row)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> SweepTable:
    """Run every sweep point; rows come back in sweep order regardless of ``threads``."""
    points = [float(a) for a in config.sweep.values()]

    def work(k):
        try:
            row = tuple(float(v) for v in _run_point(config, points[k]))
        except (ArithmeticError, MemoryError, RuntimeError) as exc:
            raise SweepPointError(f"sweep point {k} (a_max={points[k]:g}): {exc}") from exc
        if not all(math.isfinite(v) for v in row):
            raise SweepPointError(f"sweep point {k} (a_max={points[k]:g}) produced non-finite values {row}")
        log.info("point %d/%d a_max=%g done", k + 1, len(points), points[k])
        return row

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(work, range(len(points))))
    else:
        rows = [work(k) for k in range(len(points))]
    return SweepTable(_columns(config), tuple(rows), config)


def _open(path):
    if path is None or path == "-":
        return nullcontext(sys.stdout)
    return open(path, "w", newline="")


def emit(table: SweepTable, fmt: str, path) -> None:
    """Write ``table`` as CSV (12 significant digits) or JSON with a config echo.

    ``path`` of ``None`` or ``"-"`` writes to stdout.
    """
    if not table.rows:
        raise ValueError("refusing to emit an empty table")
    if fmt == "csv":
        with _open(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([f"{v:.12g}" for v in row])
    elif fmt == "json":
        doc = {
            "columns": list(table.columns),
            "rows": [list(r) for r in table.rows],
            "config_echo": table.config.to_dict() if table.config is not None else None,
        }
        with _open(path) as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_json_table(path) -> SweepTable:
    with open(path) as fh:
        doc = json.load(fh)
    config = config_from_dict(doc["config_echo"]) if doc.get("config_echo") else None
    return SweepTable(tuple(doc["columns"]), tuple(tuple(r) for r in doc["rows"]), config)


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    if config.mary is None:
        return config
    return dataclasses.replace(config, mary=dataclasses.replace(config.mary, seed=seed))
