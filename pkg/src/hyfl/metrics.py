"""Measurement: run records, simulated wall-time model, and derived metrics.

Simulated time for one outer iteration has three parts: modeled client
compute (max over active clients, deterministic flop counts times a
per-flop constant), the mock-encryption penalty from ledger counts, and a
round-trip latency charge. Real wall-clock time is never recorded, which is
what keeps whole runs bit-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import SparseDataset
from .errors import ConfigError

# Published per-operation costs of an additive homomorphic cryptosystem.
ENC_SECONDS = 0.018882
DEC_SECONDS = 0.018865
ADD_SECONDS = 0.000054

# Round trips per outer iteration charged to each algorithm.
RTC_HYFDCA = 4.5
RTC_FEDAVG = 1.0

# Reference latency scenarios (ideal, long-distance link, satellite link).
LATENCY_SCENARIOS = (0.0, 0.2575, 0.8)

CSV_COLUMNS = ("t", "P", "D", "gap", "acc", "compute_s", "enc_s", "latency_s", "cum_s")


@dataclass(frozen=True)
class TimingModel:
    """Constants that turn ledger counts and flop counts into seconds."""

    latency_per_rtc_s: float = 0.0
    rtc_per_iteration: float = RTC_HYFDCA
    enc_s: float = ENC_SECONDS
    dec_s: float = DEC_SECONDS
    add_s: float = ADD_SECONDS
    seconds_per_flop: float = 1e-8

    def encryption_seconds(self, enc_count: int, dec_count: int, add_count: int) -> float:
        return enc_count * self.enc_s + dec_count * self.dec_s + add_count * self.add_s

    def latency_seconds(self) -> float:
        return self.rtc_per_iteration * self.latency_per_rtc_s

    def compute_seconds(self, flops: float) -> float:
        return flops * self.seconds_per_flop


@dataclass
class RunHistory:
    """Per-outer-iteration record of one federated (or centralized) run."""

    meta: dict = field(default_factory=dict)
    t: list = field(default_factory=list)
    P: list = field(default_factory=list)
    D: list = field(default_factory=list)  # nan when the algorithm has no dual
    acc: list = field(default_factory=list)
    compute_s: list = field(default_factory=list)
    enc_s: list = field(default_factory=list)
    latency_s: list = field(default_factory=list)
    enc_ops: list = field(default_factory=list)
    dec_ops: list = field(default_factory=list)
    add_ops: list = field(default_factory=list)

    def append(self, *, t, p, d, acc, compute_s, enc_s, latency_s,
               enc_ops=0, dec_ops=0, add_ops=0):
        self.t.append(int(t))
        self.P.append(float(p))
        self.D.append(float(d))
        self.acc.append(float(acc))
        self.compute_s.append(float(compute_s))
        self.enc_s.append(float(enc_s))
        self.latency_s.append(float(latency_s))
        self.enc_ops.append(int(enc_ops))
        self.dec_ops.append(int(dec_ops))
        self.add_ops.append(int(add_ops))

    def __len__(self):
        return len(self.t)

    def gap(self) -> np.ndarray:
        return np.asarray(self.P) - np.asarray(self.D)

    def iter_seconds(self) -> np.ndarray:
        return np.asarray(self.compute_s) + np.asarray(self.enc_s) + np.asarray(self.latency_s)

    def cum_seconds(self) -> np.ndarray:
        return np.cumsum(self.iter_seconds())

    def total_seconds(self) -> float:
        return float(self.cum_seconds()[-1]) if self.t else 0.0

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        gap = self.gap()
        cum = self.cum_seconds()
        for i in range(len(self.t)):
            row = (
                str(self.t[i]),
                repr(self.P[i]),
                repr(self.D[i]),
                repr(float(gap[i])),
                repr(self.acc[i]),
                repr(self.compute_s[i]),
                repr(self.enc_s[i]),
                repr(self.latency_s[i]),
                repr(float(cum[i])),
            )
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, meta=None) -> "RunHistory":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0].split(",") != list(CSV_COLUMNS):
            raise ConfigError("unrecognized run history header")
        hist = cls(meta=meta or {})
        for ln in lines[1:]:
            f = ln.split(",")
            hist.append(
                t=int(f[0]), p=float(f[1]), d=float(f[2]), acc=float(f[4]),
                compute_s=float(f[5]), enc_s=float(f[6]), latency_s=float(f[7]),
            )
        return hist

    def save(self, csv_path, meta_path=None):
        with open(csv_path, "w") as fh:
            fh.write(self.to_csv())
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump(self.meta, fh, indent=2, sort_keys=True, default=str)
                fh.write("\n")


def accuracy(w: np.ndarray, dataset: SparseDataset) -> float:
    """Fraction of correct sign predictions; sign(0) counts as +1."""
    margins = dataset.csr() @ w
    pred = np.where(margins >= 0.0, 1, -1)
    return float(np.mean(pred == dataset.labels))


def relative_loss(p: float, p_c_star: float) -> float:
    """(P - P_C*) / P_C* against the centrally trained optimum."""
    if p_c_star <= 0:
        raise ConfigError("reference loss must be positive")
    return (p - p_c_star) / p_c_star


def moving_average(series, window: int):
    """Trailing mean over min(window, t+1) points; window < 2 is identity."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if window < 2 or x.size == 0:
        return x.copy()
    c = np.cumsum(x)
    out = np.empty_like(x)
    head = min(window, x.size)
    out[:head] = c[:head] / np.arange(1, head + 1)
    if x.size > window:
        out[window:] = (c[window:] - c[:-window]) / window
    return out


def volatility(series) -> float:
    """Population standard deviation of consecutive differences."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        raise ConfigError("need at least two points")
    return float(np.std(np.diff(x)))


def iterations_to_progress(series, fraction: float = 0.9) -> int:
    """First index reaching the given fraction of total decrease.

    The threshold is series[0] - fraction * (series[0] - min(series)); the
    minimum itself qualifies, so a first crossing always exists. A constant
    series returns 0.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise ConfigError("empty series")
    threshold = x[0] - fraction * (x[0] - np.min(x))
    return int(np.argmax(x <= threshold + 1e-15))


def relative_measures(histories, omega: int = 1):
    """Normalized time (T_R) and iteration fraction (t_R) per run.

    T_R divides each run's cumulative time by the largest total among the
    supplied runs; t_R divides iteration numbers by (t_max - omega).
    """
    if not histories:
        raise ConfigError("need at least one history")
    totals = [h.total_seconds() for h in histories]
    t_max = max(len(h) for h in histories)
    denom_t = max(t_max - omega, 1)
    max_total = max(totals) if max(totals) > 0 else 1.0
    out = []
    for h in histories:
        out.append(
            {
                "T_R": h.cum_seconds() / max_total,
                "t_R": np.asarray(h.t, dtype=np.float64) / denom_t,
            }
        )
    return out


def check_theorem2_bound(
    histories,
    d_star: float,
    h: int,
    n: int,
    lam: float,
    lipschitz: float = 1.0,
    participation: float = 1.0,
    eps0: float | None = None,
) -> dict:
    """Compare mean dual suboptimality against 2G / (1 + rate/(2N) (t - t0)).

    G = 2 L^2 / lambda, rate = participation * h, and t0 is
    max(0, ceil(ln(eps0 / G))) with eps0 defaulting to d_star (runs start at
    the zero dual point, whose objective is 0). Passes when the worst ratio
    over recorded t >= t0 is at most 1.
    """
    if not histories:
        raise ConfigError("need at least one history")
    g = 2.0 * lipschitz**2 / lam
    if eps0 is None:
        eps0 = d_star
    t0 = max(0, math.ceil(math.log(max(eps0, 1e-300) / g)))
    t_arr = np.asarray(histories[0].t)
    eps = np.mean([d_star - np.asarray(hh.D) for hh in histories], axis=0)
    rate = participation * h
    with np.errstate(divide="ignore"):
        bound = 2.0 * g / (1.0 + rate / (2.0 * n) * (t_arr - t0))
    sel = t_arr >= max(t0, int(t_arr[0]))
    if not np.any(sel):
        raise ConfigError("no recorded iterations at or beyond t0")
    ratios = eps[sel] / bound[sel]
    worst = float(np.max(ratios))
    return {
        "g": g,
        "t0": t0,
        "ratio": worst,
        "passed": bool(worst <= 1.0),
        "eps_mean": eps,
        "bound": bound,
        "t": t_arr,
    }
