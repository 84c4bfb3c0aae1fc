"""Hybrid-adapted FedAvg baseline.

Each active client runs plain SGD (batch size one, samples drawn with
replacement) on its own block of samples and features, then the server
concatenates the client weight vectors and averages wherever feature
holdings overlap. Features with no active holder keep their previous global
value. There is no encryption traffic; each round costs one round trip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .errors import ConfigError
from .metrics import RTC_FEDAVG, RunHistory, TimingModel, accuracy as _accuracy
from .objective import Regularization, hinge_subgradient, primal_objective
from .partition import Partition, client_matrices


@dataclass(frozen=True)
class FedAvgParams:
    """Local step count and the a / (b + sqrt(t)) learning-rate constants."""

    h: int = 1
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.h < 1:
            raise ConfigError("h must be >= 1")
        if self.a <= 0 or self.b < 0:
            raise ConfigError("need a > 0 and b >= 0")

    def gamma_t(self, t: int) -> float:
        return self.a / (self.b + np.sqrt(t))


def _build_blocks(dataset: SparseDataset, part: Partition):
    """Per-client lists of (local_feature_positions, values) rows."""
    mats = client_matrices(dataset, part)
    blocks = []
    for k in range(part.n_clients):
        feats = part.client_features[k]
        mat = mats[k].tocsr()
        rows = []
        for r in range(mat.shape[0]):
            sl = slice(mat.indptr[r], mat.indptr[r + 1])
            gidx = mat.indices[sl]
            rows.append((np.searchsorted(feats, gidx), mat.data[sl].astype(np.float64)))
        blocks.append(
            {
                "features": feats,
                "rows": rows,
                "labels": dataset.labels[part.client_samples[k]].astype(np.float64),
                "nnz": int(mat.nnz),
            }
        )
    return blocks


def local_sgd(w_local, block, lam: float, params: FedAvgParams, t: int, rng) -> np.ndarray:
    """H hinge-SGD steps on one client's block; w_local is over M_k only.

    Each step shrinks by (1 - gamma lam) and, when the local margin is
    active, adds gamma * y * x restricted to the held features. Draws are
    uniform with replacement.
    """
    gamma = params.gamma_t(t)
    shrink = 1.0 - gamma * lam
    w = w_local.copy()
    rows, labels = block["rows"], block["labels"]
    picks = rng.integers(0, len(rows), size=params.h)
    for i in picks:
        pos, vals = rows[i]
        y = labels[i]
        margin_in = float(vals @ w[pos]) if pos.size else 0.0
        u = hinge_subgradient(y, margin_in)
        w *= shrink
        if u != 0.0 and pos.size:
            w[pos] -= gamma * u * vals
    return w


def average_overlaps(local_ws: dict, part: Partition, prev_global: np.ndarray) -> np.ndarray:
    """Coordinate-wise mean of client weights wherever holdings overlap.

    ``local_ws`` maps client index to its compact weight vector (aligned with
    part.client_features[k]). Features no active client holds keep their
    previous global value.
    """
    sums = np.zeros_like(prev_global)
    counts = np.zeros(prev_global.size)
    for k, w_k in local_ws.items():
        feats = part.client_features[k]
        sums[feats] += w_k
        counts[feats] += 1.0
    held = counts > 0
    out = prev_global.copy()
    out[held] = sums[held] / counts[held]
    return out


def run_fedavg(
    dataset: SparseDataset,
    part: Partition,
    reg: Regularization,
    params: FedAvgParams,
    schedule,
    stop,
    master_seed: int = 0,
    timing: TimingModel | None = None,
    val_data: SparseDataset | None = None,
) -> RunHistory:
    """Run the baseline to the stop rule; mirrors the dual solver's history."""
    timing = timing or TimingModel(rtc_per_iteration=RTC_FEDAVG)
    blocks = _build_blocks(dataset, part)
    eval_data = val_data if val_data is not None else dataset
    w_global = np.zeros(dataset.n_features)
    history = RunHistory(
        meta={
            "algorithm": "fedavg",
            "seed": master_seed,
            "n_samples": dataset.n_samples,
            "n_features": dataset.n_features,
            "lambda": reg.lam,
            "partition": {"scheme": part.scheme, "k": part.sample_groups, "q": part.feature_groups},
            "params": {"h": params.h, "a": params.a, "b": params.b},
            "schedule": {"kind": schedule.kind, "fraction": schedule.fraction,
                         "cycles": schedule.cycles, "seed": schedule.seed},
            "timing": {"latency_per_rtc_s": timing.latency_per_rtc_s,
                       "rtc_per_iteration": timing.rtc_per_iteration},
        }
    )
    cum = 0.0
    t = 0
    while True:
        t += 1
        active = schedule.active_clients(t, part.n_clients)
        flops_max = 0.0
        if active.size:
            local_ws = {}
            for k in active:
                k = int(k)
                rng = np.random.default_rng([master_seed, t, k])
                w_k = w_global[blocks[k]["features"]]
                local_ws[k] = local_sgd(w_k, blocks[k], reg.lam, params, t, rng)
                mean_nnz = blocks[k]["nnz"] / max(len(blocks[k]["rows"]), 1)
                flops_max = max(
                    flops_max, params.h * (2.0 * mean_nnz + blocks[k]["features"].size)
                )
            w_global = average_overlaps(local_ws, part, w_global)
        p = primal_objective(w_global, dataset, reg)
        compute_s = timing.compute_seconds(flops_max)
        latency_s = timing.latency_seconds() if active.size else 0.0
        history.append(
            t=t, p=p, d=float("nan"), acc=_accuracy(w_global, eval_data),
            compute_s=compute_s, enc_s=0.0, latency_s=latency_s,
        )
        cum += compute_s + latency_s
        if stop.iters is not None and t >= stop.iters:
            break
        if stop.wall_time_s is not None and cum >= stop.wall_time_s:
            break
    history.w_final = w_global
    return history
