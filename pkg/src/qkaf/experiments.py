"""Configuration-driven Monte Carlo experiments.

A run streams the noisy training pairs of one scenario through every
configured filter and records the clean test-set MSE after each update.
Curves are averaged over runs (linear MSE, then dB, by default), and every
run draws its noise from its own stream derived from ``(master_seed,
run_index)``, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .core import GGDParams, gaussian_kernel_matrix
from .filters import KernelFilter, FilterConfig
from .signals import (
    SCENARIO_NAMES,
    Embedding,
    MGConfig,
    embed,
    load_series,
    mackey_glass,
    scenario_noise,
)

SWEEP_PARAMS = ("L", "gamma", "alpha", "beta")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class FileData:
    path: str
    column: Union[str, int] = 0
    n_train: int = 1000
    n_test: int = 100


@dataclass(frozen=True)
class Sweep:
    param: str
    values: tuple

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param: must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if not self.values:
            raise ConfigError("sweep.values: at least one value required")


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment protocol.

    ``scenario`` is 1..4, a list of those, or ``"file"`` (real data from
    ``data``, no added noise).  ``average`` is ``"linear"`` (mean MSE then
    dB) or ``"db"`` (mean of per-run dB curves).
    """

    scenario: Union[int, str, tuple] = 2
    data: Union[MGConfig, FileData] = field(default_factory=MGConfig)
    embedding: Embedding = field(default_factory=Embedding)
    filters: tuple = field(default_factory=lambda: (FilterConfig("KRLS"),))
    mc_runs: int = 50
    master_seed: int = 0
    steady_window: int = 100
    sweep: Optional[Sweep] = None
    average: str = "linear"
    noise_center: bool = False
    workers: int = 1

    def __post_init__(self):
        for s in self.scenarios:
            if s != "file" and s not in (1, 2, 3, 4):
                raise ConfigError(f"scenario: must be 1..4 or 'file', got {s!r}")
        if "file" in self.scenarios and not isinstance(self.data, FileData):
            raise ConfigError("data: scenario 'file' needs data.path")
        if int(self.mc_runs) != self.mc_runs or self.mc_runs < 1:
            raise ConfigError(f"mc_runs: must be a positive integer, got {self.mc_runs!r}")
        if self.steady_window < 1 or self.steady_window > self.data.n_train:
            raise ConfigError(
                f"steady_window: must be in [1, n_train={self.data.n_train}], got {self.steady_window!r}"
            )
        if not self.filters:
            raise ConfigError("filters: at least one filter required")
        labels = [f.label for f in self.filters]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"filters: labels must be unique, got {labels}; set `name`")
        if self.average not in ("linear", "db"):
            raise ConfigError(f"average: must be 'linear' or 'db', got {self.average!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    @property
    def scenarios(self) -> tuple:
        s = self.scenario
        return tuple(s) if isinstance(s, (list, tuple)) else (s,)

    @property
    def n_train(self) -> int:
        return self.data.n_train

    def to_dict(self) -> dict:
        d = {
            "scenario": list(self.scenarios) if len(self.scenarios) > 1 else self.scenarios[0],
            "data": asdict(self.data),
            "embedding": asdict(self.embedding),
            "filters": [f.to_dict() for f in self.filters],
            "mc_runs": self.mc_runs,
            "master_seed": self.master_seed,
            "steady_window": self.steady_window,
            "average": self.average,
            "noise_center": self.noise_center,
            "workers": self.workers,
        }
        if self.sweep is not None:
            d["sweep"] = {"param": self.sweep.param, "values": list(self.sweep.values)}
        return d


# -- loading -------------------------------------------------------------------


def _build(cls, section: str, d):
    if not isinstance(d, dict):
        raise ConfigError(f"{section}: expected a table, got {type(d).__name__}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    d = copy.deepcopy(d)
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kw = {}
    if "scenario" in d:
        s = d["scenario"]
        kw["scenario"] = tuple(s) if isinstance(s, list) else s
    data = d.get("data", {})
    if isinstance(data, dict) and "path" in data:
        kw["data"] = _build(FileData, "data", data)
    else:
        kw["data"] = _build(MGConfig, "data", data)
    kw["embedding"] = _build(Embedding, "embedding", d.get("embedding", {}))
    if "filters" in d:
        fl = d["filters"]
        if not isinstance(fl, list):
            raise ConfigError("filters: expected an array of tables")
        out = []
        for i, f in enumerate(fl):
            try:
                out.append(FilterConfig.from_dict(f))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"filters[{i}]: {exc}") from None
        kw["filters"] = tuple(out)
    if "sweep" in d:
        sw = d["sweep"]
        kw["sweep"] = _build(Sweep, "sweep", {**sw, "values": tuple(sw.get("values", ()))})
    for k in ("mc_runs", "master_seed", "steady_window", "average", "noise_center", "workers"):
        if k in d:
            kw[k] = d[k]
    try:
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            d = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = config_from_dict(d)
    if isinstance(cfg.data, FileData) and not Path(cfg.data.path).is_absolute():
        cfg = replace(cfg, data=replace(cfg.data, path=str(path.parent / cfg.data.path)))
    return cfg


# -- data -----------------------------------------------------------------


@lru_cache(maxsize=8)
def _mg_series(mg: MGConfig, n: int) -> np.ndarray:
    s = mackey_glass(mg, n)
    s.setflags(write=False)
    return s


def dataset(cfg: ExperimentConfig):
    """Clean ``(U_train, d_train, U_test, d_test)``."""
    n_train, n_test = cfg.data.n_train, cfg.data.n_test
    need = n_train + n_test + cfg.embedding.span - 1
    if isinstance(cfg.data, FileData):
        s = load_series(cfg.data.path, cfg.data.column)
        if s.size < need:
            raise ConfigError(f"data: {cfg.data.path} has {s.size} samples, need {need}")
        s = s[:need]
    else:
        s = _mg_series(cfg.data, need)
    U, d = embed(s, cfg.embedding)
    return U[:n_train], d[:n_train], U[n_train : n_train + n_test], d[n_train : n_train + n_test]


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run_index,)))


def training_noise(cfg: ExperimentConfig, scenario, run_index: int) -> np.ndarray:
    if scenario == "file":
        return np.zeros(cfg.n_train)
    model = scenario_noise(scenario, center=cfg.noise_center)
    return np.asarray(model.sample(run_rng(cfg.master_seed, run_index), cfg.n_train), dtype=float)


# -- one run --------------------------------------------------------------


@dataclass
class RunTrace:
    mse: np.ndarray  # test MSE after each update
    update_seconds: float
    theta_seconds: float
    H_mean: float


def run_filter(fcfg: FilterConfig, U, d, U_test, d_test, backend=None) -> RunTrace:
    """Stream one training sequence through a fresh filter."""
    n = len(d)
    f = KernelFilter(fcfg, U.shape[1], capacity=n, backend=backend)
    # kernel matrix of test inputs vs the (future) dictionary, filled column-wise
    K = gaussian_kernel_matrix(U_test, U, fcfg.kernel)
    mse = np.empty(n)
    t_upd = 0.0
    for i in range(n):
        t0 = time.perf_counter()
        f.update(U[i], d[i])
        t_upd += time.perf_counter() - t0
        r = K[:, : i + 1] @ f.A - d_test
        mse[i] = float(r @ r) / r.size
    return RunTrace(mse, t_upd, f.theta_seconds, f.H_mean)


def _run_one(args):
    cfg, scenario, run_index, backend = args
    U, d, Ut, dt = dataset(cfg)
    dn = d + training_noise(cfg, scenario, run_index)
    return [run_filter(fc, U, dn, Ut, dt, backend) for fc in cfg.filters]


# -- aggregation ----------------------------------------------------------------


def to_db(x):
    return 10.0 * np.log10(x)


@dataclass
class MetricSeries:
    """Monte Carlo summary of one filter in one scenario."""

    label: str
    scenario: Union[int, str]
    curve_db: np.ndarray
    run_mse: np.ndarray  # (runs, n_train) linear test MSE
    steady_window: int
    wall_per_iter: float
    theta_per_iter: float
    H_mean: float

    @property
    def steady_state_db(self) -> float:
        return float(np.mean(self.curve_db[-self.steady_window :]))

    @property
    def run_steady_db(self) -> np.ndarray:
        """Per-run steady state: mean of each run's dB curve over the window."""
        return np.mean(to_db(self.run_mse[:, -self.steady_window :]), axis=1)


def _aggregate(cfg, scenario, traces_by_run) -> list:
    out = []
    for j, fc in enumerate(cfg.filters):
        tr = [run[j] for run in traces_by_run]
        mse = np.vstack([t.mse for t in tr])
        if cfg.average == "linear":
            curve = to_db(np.mean(mse, axis=0))
        else:
            curve = np.mean(to_db(mse), axis=0)
        n = mse.shape[1] * len(tr)
        out.append(
            MetricSeries(
                label=fc.label,
                scenario=scenario,
                curve_db=curve,
                run_mse=mse,
                steady_window=cfg.steady_window,
                wall_per_iter=sum(t.update_seconds for t in tr) / n,
                theta_per_iter=sum(t.theta_seconds for t in tr) / n,
                H_mean=float(np.mean([t.H_mean for t in tr])),
            )
        )
    return out


def run_experiment(cfg: ExperimentConfig, backend=None) -> list:
    """Run every scenario of ``cfg``; returns one MetricSeries per
    (scenario, filter), scenarios outermost."""
    results = []
    for scenario in cfg.scenarios:
        jobs = [(cfg, scenario, k, backend) for k in range(cfg.mc_runs)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as ex:
                traces = list(ex.map(_run_one, jobs))  # ordered by run index
        else:
            traces = [_run_one(j) for j in jobs]
        results.extend(_aggregate(cfg, scenario, traces))
    return results


# -- sweeps ---------------------------------------------------------------------


def apply_param(fc: FilterConfig, param: str, value) -> FilterConfig:
    """Set a sweep parameter on one filter; filters it does not apply to
    are returned unchanged."""
    if fc.family is None:
        return fc
    crit = fc.criterion
    if param == "L":
        return replace(fc, criterion=replace(crit, window_len=int(value)))
    if param == "gamma":
        return replace(fc, gamma=float(value)) if fc.variant.startswith("Q") else fc
    if fc.family != "GMEE":
        return fc
    g = crit.ggd
    if param == "alpha":
        return replace(fc, criterion=replace(crit, ggd=GGDParams(float(value), g.beta)))
    if param == "beta":
        return replace(fc, criterion=replace(crit, ggd=GGDParams(g.alpha, float(value))))
    raise ConfigError(f"sweep.param: unknown parameter {param!r}")


@dataclass
class SweepRow:
    scenario: Union[int, str]
    filter: str
    param: str
    value: float
    steady_state_db: float
    wall_per_iter: float
    H_mean: float
    series: MetricSeries = field(repr=False, default=None)


def run_sweep(cfg: ExperimentConfig, backend=None) -> list:
    """One row per (scenario, value, swept filter)."""
    if cfg.sweep is None:
        raise ConfigError("sweep: missing [sweep] section")
    p = cfg.sweep.param
    swept = [fc for fc in cfg.filters if apply_param(fc, p, cfg.sweep.values[0]) is not fc]
    if not swept:
        raise ConfigError(f"sweep.param: {p!r} applies to none of the configured filters")
    rows = []
    for scenario in cfg.scenarios:
        for v in cfg.sweep.values:
            fcs = tuple(replace(apply_param(fc, p, v), name=fc.label) for fc in swept)
            sub = replace(cfg, scenario=scenario, filters=fcs, sweep=None)
            for ms in run_experiment(sub, backend):
                rows.append(
                    SweepRow(scenario, ms.label, p, float(v), ms.steady_state_db, ms.wall_per_iter, ms.H_mean, ms)
                )
    return rows


# -- output -----------------------------------------------------------------------


def _slug(s) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in str(s)).strip("_")


def _fmt(x: float) -> str:
    return repr(float(x))


def _scenario_name(s) -> str:
    return SCENARIO_NAMES.get(s, str(s))


def emit_results(results, out_dir, cfg: ExperimentConfig, sweep_rows=None) -> list:
    """Write curves, summary/sweep tables and a manifest under ``out_dir``.

    Everything written is a function of the configuration only, so reruns
    are byte-identical; wall-clock timings go to the ``bench`` verb instead.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def _write(name, header, rows):
        path = out / name
        try:
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    for ms in results:
        name = f"curve_{_slug(_scenario_name(ms.scenario))}_{_slug(ms.label)}.csv"
        _write(name, ["iteration", "mse_db"], [(i + 1, _fmt(v)) for i, v in enumerate(ms.curve_db)])
    if results:
        _write(
            "summary.csv",
            ["scenario", "filter", "steady_state_db", "H_mean"],
            [(_scenario_name(m.scenario), m.label, _fmt(m.steady_state_db), _fmt(m.H_mean)) for m in results],
        )
    if sweep_rows:
        _write(
            f"sweep_{_slug(sweep_rows[0].param)}.csv",
            ["scenario", "filter", sweep_rows[0].param, "steady_state_db", "H_mean"],
            [
                (_scenario_name(r.scenario), r.filter, _fmt(r.value), _fmt(r.steady_state_db), _fmt(r.H_mean))
                for r in sweep_rows
            ],
        )
    manifest = {
        "version": f"qkaf {__version__}",
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "files": [p.name for p in written],
    }
    mpath = out / "manifest.json"
    try:
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {mpath}: {exc}") from exc
    written.append(mpath)
    return written


def write_timing(rows, path):
    """Timing table (``scenario, filter, wall_per_iter, theta_per_iter, H_mean``)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "filter", "wall_per_iter", "theta_per_iter", "H_mean"])
        for m in rows:
            w.writerow([_scenario_name(m.scenario), m.label, _fmt(m.wall_per_iter), _fmt(m.theta_per_iter), _fmt(m.H_mean)])
    return path
