"""Single-machine dual coordinate ascent: the reference optimum producer.

Runs plain sequential stochastic dual coordinate ascent with the exact
per-coordinate maximizer, maintaining w incrementally. The dual objective is
non-decreasing at every step, so the result certifies the optimum it reports
through its final primal-dual gap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .errors import ConfigError
from .metrics import accuracy
from .objective import Regularization, dual_objective, primal_objective


@dataclass
class CentralRun:
    """Result of one centralized training run."""

    w_star: np.ndarray
    alpha_star: np.ndarray
    p_star: float
    d_star: float
    gap: float
    iterations: int
    lam: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "p_star": self.p_star,
                "d_star": self.d_star,
                "gap": self.gap,
                "iterations": self.iterations,
                "lambda": self.lam,
                "seed": self.seed,
                "w_star": self.w_star.tolist(),
                "alpha_star": self.alpha_star.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CentralRun":
        raw = json.loads(text)
        return cls(
            w_star=np.asarray(raw["w_star"], dtype=np.float64),
            alpha_star=np.asarray(raw["alpha_star"], dtype=np.float64),
            p_star=raw["p_star"],
            d_star=raw["d_star"],
            gap=raw["gap"],
            iterations=raw["iterations"],
            lam=raw["lambda"],
            seed=raw["seed"],
        )


def run_sdca_central(
    dataset: SparseDataset,
    reg: Regularization,
    iterations: int,
    seed: int = 0,
    gap_target: float = 1e-6,
    record_dual: bool = False,
):
    """Dual coordinate ascent with uniformly random coordinates.

    Stops at ``iterations`` single-coordinate steps or as soon as the duality
    gap (checked once per N steps) drops to ``gap_target``. When
    ``record_dual`` is set, also returns the dual objective after every step
    (used by monotonicity tests; quadratic cost, keep runs short).
    """
    if reg.n != dataset.n_samples:
        raise ConfigError("regularization n must equal the dataset size")
    n = dataset.n_samples
    lam_n = reg.lam_n
    y = dataset.labels.astype(np.float64)
    rows = [dataset.samples[i] for i in range(n)]
    norms_sq = np.array([float(np.dot(v, v)) for _, v in rows])
    rng = np.random.default_rng(seed)

    alpha = np.zeros(n)
    w = np.zeros(dataset.n_features)
    dual_trace = []
    steps = 0
    gap = np.inf
    while steps < iterations:
        block = min(n, iterations - steps)
        picks = rng.integers(0, n, size=block)
        for i in picks:
            idx, vals = rows[i]
            ip = float(vals @ w[idx]) if idx.size else 0.0
            ya = y[i] * alpha[i]
            if norms_sq[i] > 0.0:
                raw = ya + lam_n * (1.0 - y[i] * ip) / norms_sq[i]
            else:
                raw = 1.0  # zero sample: conjugate term alone drives alpha to y
            new_ya = min(1.0, max(0.0, raw))
            delta = y[i] * new_ya - alpha[i]
            if delta != 0.0:
                alpha[i] += delta
                if idx.size:
                    w[idx] += (delta / lam_n) * vals
            if record_dual:
                dual_trace.append(dual_objective(alpha, dataset, reg))
        steps += block
        gap = primal_objective(w, dataset, reg) - dual_objective(alpha, dataset, reg)
        if gap <= gap_target:
            break
    run = CentralRun(
        w_star=w,
        alpha_star=alpha,
        p_star=primal_objective(w, dataset, reg),
        d_star=dual_objective(alpha, dataset, reg),
        gap=float(gap),
        iterations=steps,
        lam=reg.lam,
        seed=seed,
    )
    if record_dual:
        return run, np.asarray(dual_trace)
    return run


def tune_lambda(
    dataset: SparseDataset,
    candidates,
    split_seed: int = 0,
    train_fraction: float = 0.8,
    iterations: int | None = None,
    gap_target: float = 1e-6,
) -> float:
    """Pick the candidate with the best held-out accuracy; ties take the smaller.

    Trains centrally per candidate on a seeded split of the dataset.
    """
    cands = sorted(float(c) for c in candidates)
    if not cands:
        raise ConfigError("need at least one lambda candidate")
    if len(cands) == 1:
        return cands[0]
    order = np.random.default_rng(split_seed).permutation(dataset.n_samples)
    n_train = max(1, int(round(train_fraction * dataset.n_samples)))
    n_train = min(n_train, dataset.n_samples - 1)
    train = dataset.subset(np.sort(order[:n_train]))
    val = dataset.subset(np.sort(order[n_train:]))
    iterations = iterations if iterations is not None else 60 * train.n_samples
    scores = []
    for lam in cands:
        run = run_sdca_central(
            train, Regularization(lam, train.n_samples), iterations,
            seed=split_seed, gap_target=gap_target,
        )
        scores.append(accuracy(run.w_star, val))
    return cands[int(np.argmax(scores))]
