from __future__ import annotations

# Monte Carlo harness: seeded replications of simulate -> estimate, summaries against the
# asymptotic standard deviations, histogram tables and their plot script.

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.asymptotics import MIN_REPLICATIONS, AsymptoticReport, empirical_vs_asymptotic, report_for
from src.estimator import estimate
from src.model_core import GENERIC_LABELS, ModelSpec, named_vector
from src.simulator import DEFAULT_SUBGRID, SimConfig, simulate

logger = logging.getLogger(__name__)

ESTIMATES_FILE = "estimates.csv"
REPORT_FILE = "mc_report.json"
PLOT_SCRIPT_FILE = "figure_histograms.gp"
HISTOGRAM_COLUMNS = ["bin_left", "bin_right", "count", "normal_density", "density"]
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class McExperimentConfig:
    model: ModelSpec
    n: int
    replications: int
    seed: int
    bins: int = 40
    workers: int = 1
    subgrid: int = DEFAULT_SUBGRID

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError(f"At least one replication is required, got {self.replications}.")
        if self.n < 2:
            raise ValueError(f"Each replication needs n >= 2 observations, got {self.n}.")
        if self.bins < 1:
            raise ValueError(f"bins must be at least 1, got {self.bins}.")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}.")
        if self.model.law is None:
            raise ValueError("Monte Carlo runs need a named model (gamma_ou or ig_ou).")


@dataclass(frozen=True)
class ReplicationOutcome:
    replication: int
    status: str
    reasons: Tuple[str, ...]
    theta: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class McReport:
    config: McExperimentConfig
    estimates: pd.DataFrame
    summary: pd.DataFrame
    histograms: Dict[str, pd.DataFrame]
    gate_failures: int
    asymptotics: AsymptoticReport
    comparison: Optional[pd.DataFrame] = None

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.asymptotics.labels

    def to_dict(self) -> dict:
        cfg = self.config
        out = {
            "model": cfg.model.kind,
            "n": cfg.n,
            "replications": cfg.replications,
            "seed": cfg.seed,
            "subgrid": cfg.subgrid,
            "bins": cfg.bins,
            "gate_failures": self.gate_failures,
            "usable_replications": cfg.replications - self.gate_failures,
            "labels": list(self.labels),
            "summary": _records(self.summary),
            "asymptotic_s": dict(zip(self.labels, (float(v) for v in self.asymptotics.s))),
        }
        if self.comparison is not None:
            out["comparison"] = _records(self.comparison)
        return out


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def _records(df: pd.DataFrame) -> List[dict]:
    return [{k: _json_value(v) for k, v in row.items()} for row in df.to_dict(orient="records")]


def run_replication(cfg: McExperimentConfig, index: int) -> ReplicationOutcome:
    series = simulate(
        SimConfig(model=cfg.model, n=cfg.n, seed=cfg.seed, subgrid=cfg.subgrid, replication=index)
    )
    result = estimate(series, cfg.model.kind)
    return ReplicationOutcome(
        replication=index,
        status=result.status,
        reasons=result.reasons,
        theta=tuple(float(t) for t in result.theta_vector()),
    )


def _run_all(cfg: McExperimentConfig) -> List[ReplicationOutcome]:
    task = partial(run_replication, cfg)
    indices = range(cfg.replications)
    if cfg.workers == 1:
        return [task(i) for i in indices]
    chunksize = max(1, cfg.replications // (4 * cfg.workers))
    # map() yields in submission order regardless of completion order
    with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
        return list(executor.map(task, indices, chunksize=chunksize))


def estimates_frame(outcomes: List[ReplicationOutcome], model: ModelSpec) -> pd.DataFrame:
    rows = []
    for outcome in outcomes:
        row = {"replication": outcome.replication, "status": outcome.status, "reasons": "; ".join(outcome.reasons)}
        row.update(zip(GENERIC_LABELS, outcome.theta))
        if model.kind != "generic":
            named = (
                named_vector(outcome.theta, model.kind)
                if outcome.status == "ok"
                else (math.nan,) * len(model.labels)
            )
            row.update(zip(model.labels[:2], named[:2]))
        rows.append(row)
    return pd.DataFrame(rows)


def summarize(estimates: pd.DataFrame, report: AsymptoticReport, n: int) -> pd.DataFrame:
    truth = named_vector(report.params.as_tuple(), report.parametrization)
    ok = estimates[estimates["status"] == "ok"]
    rows = []
    for label, true_value, s_i in zip(report.labels, truth, report.s):
        values = ok[label].to_numpy(dtype=float)
        count = values.size
        rows.append(
            {
                "parameter": label,
                "truth": float(true_value),
                "count": int(count),
                "mean": float(np.mean(values)) if count else math.nan,
                "sd": float(np.std(values, ddof=1)) if count > 1 else math.nan,
                "rmse": float(np.sqrt(np.mean((values - true_value) ** 2))) if count else math.nan,
                "asymptotic_sd": float(s_i) / math.sqrt(n),
            }
        )
    return pd.DataFrame(rows)


def histogram_table(values: np.ndarray, bins: int, centre: float, scale: float) -> pd.DataFrame:
    """Bin counts with the N(centre, scale^2) density evaluated at bin midpoints."""
    if values.size == 0:
        return pd.DataFrame(columns=HISTOGRAM_COLUMNS)
    counts, edges = np.histogram(values, bins=bins)
    left, right = edges[:-1], edges[1:]
    width = right - left
    return pd.DataFrame(
        {
            "bin_left": left,
            "bin_right": right,
            "count": counts,
            "normal_density": stats.norm.pdf(0.5 * (left + right), loc=centre, scale=scale),
            "density": counts / (values.size * width),
        }
    )


def run_mc(cfg: McExperimentConfig) -> McReport:
    logger.info(
        "Monte Carlo: model=%s n=%s replications=%s seed=%s workers=%s",
        cfg.model.kind,
        cfg.n,
        cfg.replications,
        cfg.seed,
        cfg.workers,
    )
    report = report_for(cfg.model)
    outcomes = _run_all(cfg)

    failures = [o for o in outcomes if o.status != "ok"]
    for outcome in failures:
        logger.warning("Replication %s degenerate: %s", outcome.replication, "; ".join(outcome.reasons))

    estimates = estimates_frame(outcomes, cfg.model)
    summary = summarize(estimates, report, cfg.n)

    ok = estimates[estimates["status"] == "ok"]
    truth = named_vector(report.params.as_tuple(), report.parametrization)
    histograms = {
        label: histogram_table(ok[label].to_numpy(dtype=float), cfg.bins, true_value, s_i / math.sqrt(cfg.n))
        for label, true_value, s_i in zip(report.labels, truth, report.s)
    }

    comparison = None
    if len(ok) >= MIN_REPLICATIONS:
        comparison = empirical_vs_asymptotic(ok, report, cfg.n)
    else:
        logger.info("Only %s usable replications; skipping the asymptotic comparison", len(ok))

    return McReport(
        config=cfg,
        estimates=estimates,
        summary=summary,
        histograms=histograms,
        gate_failures=len(failures),
        asymptotics=report,
        comparison=comparison,
    )


def plot_script(labels: Tuple[str, ...], image_name: str = "figure_histograms.png") -> str:
    columns = 3
    rows = math.ceil(len(labels) / columns)
    lines = [
        "# Histograms of the Monte Carlo estimates with the asymptotic normal densities.",
        "# Run from the output directory: gnuplot figure_histograms.gp",
        'set datafile separator ","',
        "set terminal pngcairo size 1500,900",
        f'set output "{image_name}"',
        "set style fill solid 0.4",
        "set key off",
        f"set multiplot layout {rows},{columns}",
    ]
    for label in labels:
        lines += [
            f'set title "{label}"',
            f'plot "hist_{label}.csv" skip 1 using (($1+$2)/2):5:($2-$1) with boxes, \\',
            '     "" skip 1 using (($1+$2)/2):4 with lines lw 2',
        ]
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def write_mc_artifacts(report: McReport, out_dir: Union[str, Path]) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / ESTIMATES_FILE
    report.estimates.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    written.append(path)

    for label, table in report.histograms.items():
        path = out_dir / f"hist_{label}.csv"
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        written.append(path)

    path = out_dir / PLOT_SCRIPT_FILE
    path.write_text(plot_script(report.labels), encoding="utf-8")
    written.append(path)

    path = out_dir / REPORT_FILE
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    written.append(path)

    logger.info("Wrote %s Monte Carlo artifacts to %s", len(written), out_dir)
    return written
