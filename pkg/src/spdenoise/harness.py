"""Monte Carlo sweeps, log-log slope fits and report files."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .estimator import estimate
from .information import info_In, lower_bound_rate
from .simulator import GridRule, splitmix64, stream_key, simulate_observations, under_resolved_fraction
from .spectral_model import ModelRecipe

CSV_HEADER = ["run_id", "seed", "axis", "axis_value", "theta_true", "theta_hat",
              "Z", "N", "degenerate", "I_n", "v_n_lower"]
DEGENERATE_LIMIT = 0.10


class ConfigError(ValueError):
    pass


class DegenerateExcess(RuntimeError):
    """More than the allowed share of replicates had a vanishing denominator."""

    def __init__(self, result, offending):
        self.result = result
        self.offending = offending
        super().__init__("degenerate share above limit at " + ", ".join(
            f"{axis_value!r}: {count}/{total}" for axis_value, count, total in offending))


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelRecipe
    axis: str
    values: tuple
    replicates: int
    theta_true: float | str = "uniform-in-range"
    grid_rule: GridRule = field(default_factory=GridRule)
    master_seed: int = 0
    csv_path: str | None = None
    plot_path: str | None = None

    def __post_init__(self):
        if self.axis not in ("T", "eps", "nu"):
            raise ConfigError(f"sweep axis must be T, eps or nu, got {self.axis!r}")
        if len(self.values) == 0:
            raise ConfigError("the sweep needs at least one value")
        if any(not v > 0 for v in self.values):
            raise ConfigError("sweep values must be positive")
        vals = list(self.values)
        if vals != sorted(vals) and vals != sorted(vals, reverse=True):
            raise ConfigError("sweep values must be sorted")
        if self.replicates < 2:
            raise ConfigError("replicates must be at least 2")
        if isinstance(self.theta_true, str) and self.theta_true != "uniform-in-range":
            raise ConfigError("theta_true must be a number or 'uniform-in-range'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            sweep = d["sweep"]
            outputs = d.get("outputs", {})
            theta = d.get("theta_true", "uniform-in-range")
            return cls(model=ModelRecipe.from_dict(d["model"]), axis=sweep["axis"],
                       values=tuple(float(v) for v in sweep["values"]),
                       replicates=int(d["replicates"]),
                       theta_true=theta if isinstance(theta, str) else float(theta),
                       grid_rule=GridRule.from_dict(d.get("grid_rule", {})),
                       master_seed=int(d.get("master_seed", 0)),
                       csv_path=outputs.get("csv"), plot_path=outputs.get("plot"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc!r}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "sweep": {"axis": self.axis, "values": list(self.values)},
                "replicates": self.replicates, "theta_true": self.theta_true,
                "grid_rule": self.grid_rule.to_dict(), "master_seed": self.master_seed,
                "outputs": {"csv": self.csv_path, "plot": self.plot_path}}


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    points: tuple

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr,
                "r2": self.r2, "points": [list(p) for p in self.points]}


def fit_slope(x, y) -> SlopeFit:
    """Least-squares line through ``(log x, log y)``; ``stderr = inf`` below three points."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    pts = tuple(zip(lx.tolist(), ly.tolist()))
    if len(lx) == 1:
        return SlopeFit(math.nan, float(ly[0]), math.inf, math.nan, pts)
    if len(lx) == 2:
        slope = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        return SlopeFit(slope, float(ly[0] - slope * lx[0]), math.inf, 1.0, pts)
    res = stats.linregress(lx, ly)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr), float(res.rvalue ** 2), pts)


@dataclass
class ExperimentResult:
    rows: list
    fit: SlopeFit
    rmse: list
    degenerate_counts: list
    under_resolved: list
    config: ExperimentConfig


def row_seed(master_seed: int, value_index: int, replicate: int) -> int:
    """63-bit seed of one work unit, derived with the same mixer as the streams."""
    h = splitmix64(splitmix64(splitmix64(master_seed) ^ value_index) ^ replicate)
    return h >> 1


def _theta_for(cfg, model, seed):
    if not isinstance(cfg.theta_true, str):
        return float(cfg.theta_true)
    gen = np.random.Generator(np.random.Philox(key=stream_key(seed, 0, (1 << 64) - 1)))
    return float(gen.uniform(model.theta_lo, model.theta_hi))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Simulate and estimate every (sweep value, replicate) unit and fit the RMSE slope.

    Results depend only on the config: each unit draws from streams keyed by
    its own seed and rows are merged in unit order, whatever ``workers`` is.
    """
    if workers is None:
        workers = int(os.environ.get("WORKERS", "1"))
    models = [cfg.model.with_axis(cfg.axis, v).build() for v in cfg.values]
    grids = [cfg.grid_rule.grids(m) for m in models]
    v_lower = [lower_bound_rate(m) for m in models]
    units = [(i, r) for i in range(len(cfg.values)) for r in range(cfg.replicates)]

    def work(unit):
        i, r = unit
        model = models[i]
        seed = row_seed(cfg.master_seed, i, r)
        theta = _theta_for(cfg, model, seed)
        rec = simulate_observations(model, theta, grids[i], seed)
        res = estimate(model, rec)
        return {"run_id": i * cfg.replicates + r, "seed": seed, "axis": cfg.axis,
                "axis_value": cfg.values[i], "theta_true": theta, "theta_hat": res.theta_hat,
                "Z": res.Z, "N": res.N, "degenerate": res.degenerate,
                "I_n": info_In(model, theta), "v_n_lower": v_lower[i]}

    if workers <= 1:
        rows = [work(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, units))

    rmse, degenerate, offending = [], [], []
    for i, v in enumerate(cfg.values):
        sel = [row for row in rows if row["run_id"] // cfg.replicates == i]
        good = [row for row in sel if not row["degenerate"]]
        n_deg = len(sel) - len(good)
        degenerate.append(n_deg)
        if n_deg > DEGENERATE_LIMIT * len(sel):
            offending.append((v, n_deg, len(sel)))
        err = np.array([row["theta_hat"] - row["theta_true"] for row in good])
        rmse.append(float(np.sqrt(np.mean(err ** 2))) if len(err) else math.nan)
    if all(np.isfinite(rmse)) and all(e > 0 for e in rmse):
        fit = fit_slope(cfg.values, rmse)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            pts = tuple(zip(np.log(cfg.values).tolist(), np.log(rmse).tolist()))
        fit = SlopeFit(math.nan, math.nan, math.inf, math.nan, pts)
    result = ExperimentResult(rows, fit, rmse, degenerate,
                              [under_resolved_fraction(m, g) for m, g in zip(models, grids)], cfg)
    if offending:
        raise DegenerateExcess(result, offending)
    return result


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_outputs(result: ExperimentResult, csv_path=None, plot_path=None, status: str = "ok") -> list:
    """Write the CSV, its ``.meta.json`` sidecar and (optionally) an SVG plot."""
    if not result.rows:
        raise ValueError("no rows to write")
    cfg = result.config
    csv_path = csv_path or cfg.csv_path
    plot_path = plot_path or cfg.plot_path
    if csv_path is None:
        raise ValueError("no CSV path configured")
    written = []
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in result.rows:
            w.writerow([_fmt(row[k]) for k in CSV_HEADER])
    written.append(csv_path)
    meta = {
        "status": status, "fit": result.fit.to_dict(),
        "per_value": [{"axis_value": v, "rmse": e, "degenerate": n, "under_resolved_fraction": u}
                      for v, e, n, u in zip(cfg.values, result.rmse, result.degenerate_counts,
                                            result.under_resolved)],
        "config": cfg.to_dict(),
    }
    meta_path = str(csv_path) + ".meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, default=str)
    written.append(meta_path)
    if plot_path:
        written.append(_plot(result, plot_path))
    return written


def _plot(result: ExperimentResult, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg, fit = result.config, result.fit
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(cfg.values, result.rmse, "o", label="RMSE")
    if math.isfinite(fit.slope):
        xs = np.array([min(cfg.values), max(cfg.values)])
        ax.loglog(xs, np.exp(fit.intercept) * xs ** fit.slope, "-", label=f"slope {fit.slope:.3f}")
    ax.set_xlabel(cfg.axis)
    ax.set_ylabel("RMSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
