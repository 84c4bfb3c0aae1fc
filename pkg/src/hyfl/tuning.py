"""Random hyperparameter search and grey relational selection.

Points are drawn log-uniformly inside per-parameter bounds. Each evaluated
run yields seven metrics (three latency-scenario runtimes, tail loss, best
accuracy, volatility, iterations to 90% progress); grey relational analysis
scalarizes them into one grade per run and the highest grade wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .metrics import LATENCY_SCENARIOS, RunHistory, iterations_to_progress, moving_average, volatility

# Orientation of the seven grade metrics; only accuracy is larger-better.
METRIC_NAMES = (
    "runtime_latency_0",
    "runtime_latency_mid",
    "runtime_latency_high",
    "mean_last5_loss",
    "max_accuracy",
    "volatility",
    "iters_to_90pct",
)
METRIC_BENEFIT = (False, False, False, False, True, False, False)

GRA_ZETA = 0.5  # distinguishing coefficient


@dataclass(frozen=True)
class SearchSpace:
    """Per-hyperparameter [min, max] bounds, all strictly positive."""

    bounds: dict

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not 0 < lo <= hi:
                raise ConfigError(f"bad bounds for {name!r}: [{lo}, {hi}]")


def hyfdca_search_space(n_samples: int, min_total_clients: int) -> SearchSpace:
    return SearchSpace({"iic": (min_total_clients / n_samples, 1.0)})


def fedavg_search_space(n_samples: int, min_total_clients: int) -> SearchSpace:
    return SearchSpace(
        {
            "iic": (min_total_clients / n_samples, 5.0),
            "a": (1e-5, 25.0),
            "b": (1e-5, 25.0),
        }
    )


def sample_log_uniform(bounds, seed: int, count: int) -> np.ndarray:
    """10**u with u uniform between the log10 bounds; deterministic per seed."""
    lo, hi = bounds
    if not 0 < lo <= hi:
        raise ConfigError(f"bad bounds [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    u = rng.uniform(math.log10(lo), math.log10(hi), size=count)
    return np.clip(10.0**u, lo, hi)


def sample_space(space: SearchSpace, seed: int, count: int) -> list[dict]:
    """One dict per point; parameters drawn independently, keys in name order."""
    names = sorted(space.bounds)
    cols = {
        name: sample_log_uniform(space.bounds[name], np.random.SeedSequence([seed, j]), count)
        for j, name in enumerate(names)
    }
    return [{name: float(cols[name][i]) for name in names} for i in range(count)]


def inner_iterations(iic: float, n_samples: int, total_clients: int) -> int:
    """H = ceil(iic * N / total_clients), at least 1.

    A tiny epsilon guards the ceiling against float noise on exact divisions.
    """
    if iic <= 0 or n_samples < 1 or total_clients < 1:
        raise ConfigError("all inputs must be positive")
    x = iic * n_samples / total_clients
    return max(1, math.ceil(x - 1e-9))


@dataclass
class MetricVector:
    """The seven selection metrics of one evaluated run."""

    runtime_latency_0: float
    runtime_latency_mid: float
    runtime_latency_high: float
    mean_last5_loss: float
    max_accuracy: float
    volatility: float
    iters_to_90pct: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in METRIC_NAMES], dtype=np.float64)

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array())))


@dataclass
class HyperConfig:
    """One sampled hyperparameter point and its evaluation outcome."""

    values: dict
    metrics: MetricVector | None = None
    divergent: bool = False
    grade: float | None = None
    extra: dict = field(default_factory=dict)


def metric_vector(history: RunHistory, omega: int = 1) -> MetricVector:
    """Compute the seven grade metrics from a run history."""
    p = np.asarray(history.P)
    base = np.asarray(history.compute_s) + np.asarray(history.enc_s)
    rtc = history.meta.get("timing", {}).get("rtc_per_iteration", 0.0)
    runtimes = [float(np.mean(base + rtc * lat)) for lat in LATENCY_SCENARIOS]
    tail = p[-5:] if p.size >= 5 else p
    return MetricVector(
        runtime_latency_0=runtimes[0],
        runtime_latency_mid=runtimes[1],
        runtime_latency_high=runtimes[2],
        mean_last5_loss=float(np.mean(tail)),
        max_accuracy=float(np.max(history.acc)),
        volatility=volatility(p) if p.size >= 2 else 0.0,
        iters_to_90pct=float(iterations_to_progress(moving_average(p, omega))),
    )


def is_divergent(history: RunHistory, omega: int = 1) -> bool:
    """Non-finite loss anywhere, or final smoothed loss above 10x the start."""
    p = np.asarray(history.P)
    if not np.all(np.isfinite(p)):
        return True
    smoothed = moving_average(p, omega)
    return bool(smoothed[-1] > 10.0 * p[0])


def gra_grades(matrix: np.ndarray, benefit=METRIC_BENEFIT, zeta: float = GRA_ZETA) -> np.ndarray:
    """Grey relational grade of each row against the per-metric ideal.

    Metrics are min-max normalized to [0, 1] with the ideal at 1 (degenerate
    constant columns count as ideal), deviations are 1 - normalized, and the
    grey coefficient is (dmin + zeta dmax) / (d + zeta dmax) with global
    dmin/dmax. The grade is the unweighted mean across metrics.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ConfigError("need a runs x metrics matrix")
    norm = np.empty_like(m)
    for j in range(m.shape[1]):
        col = m[:, j]
        span = col.max() - col.min()
        if span == 0.0:
            norm[:, j] = 1.0
        elif benefit[j]:
            norm[:, j] = (col - col.min()) / span
        else:
            norm[:, j] = (col.max() - col) / span
    delta = 1.0 - norm
    dmin, dmax = delta.min(), delta.max()
    if dmax == 0.0:
        return np.ones(m.shape[0])
    xi = (dmin + zeta * dmax) / (delta + zeta * dmax)
    return xi.mean(axis=1)


def gra_select(runs: list[HyperConfig], zeta: float = GRA_ZETA) -> HyperConfig:
    """Best non-divergent point by grey relational grade; ties take the first."""
    live = [r for r in runs if not r.divergent and r.metrics is not None and r.metrics.finite()]
    if not live:
        raise ConfigError("no non-divergent runs to select from")
    matrix = np.stack([r.metrics.as_array() for r in live])
    grades = gra_grades(matrix, zeta=zeta)
    for r, g in zip(live, grades):
        r.grade = float(g)
    return live[int(np.argmax(grades))]


def search_results_csv(runs: list[HyperConfig]) -> str:
    """One row per evaluated point: parameters, metrics, grade, divergent flag."""
    if not runs:
        raise ConfigError("no search results")
    param_names = sorted(runs[0].values)
    header = param_names + list(METRIC_NAMES) + ["grade", "divergent"]
    lines = [",".join(header)]
    for r in runs:
        row = [repr(r.values[n]) for n in param_names]
        if r.metrics is not None:
            row += [repr(float(v)) for v in r.metrics.as_array()]
        else:
            row += ["nan"] * len(METRIC_NAMES)
        row.append("" if r.grade is None else repr(r.grade))
        row.append("1" if r.divergent else "0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
