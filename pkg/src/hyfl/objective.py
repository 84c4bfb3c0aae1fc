"""Hinge-loss kernel: objectives, conjugate, subgradient, and dual steps.

Primal problem over weights w:

    P(w) = (lambda/2) ||w||^2 + (1/N) sum_i max(0, 1 - y_i x_i^T w)

Dual problem over one multiplier per sample:

    D(alpha) = -(lambda/2) ||(1/(lambda N)) sum_i alpha_i x_i||^2
               - (1/N) sum_i l_i^*(-alpha_i)

For hinge, l^*(-a) = -y a when y a is in [0, 1] and +inf otherwise
(derivation: sup_z [v z - max(0, 1 - y z)] is finite only for v y in [-1, 0],
where the sup is attained at z = y). Feasible alphas therefore live in the
box y_i alpha_i in [0, 1], and weak duality D(alpha) <= P(w) always holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .errors import ConfigError

# Feasibility box checks tolerate this much rounding from merges.
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class Regularization:
    """L2 strength and sample count; lam_n = lambda * N shows up in steps."""

    lam: float
    n: int

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.n < 1:
            raise ConfigError("n must be >= 1")

    @property
    def lam_n(self) -> float:
        return self.lam * self.n


def hinge_loss(y, z):
    """max(0, 1 - y z); y in {-1,+1}. Accepts scalars or arrays."""
    return np.maximum(0.0, 1.0 - np.asarray(y) * z)


def hinge_conjugate_neg(y, a):
    """l^*(-a): equals -y*a on the feasible box y*a in [0,1], +inf outside."""
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    ya = y * a
    out = np.where((ya >= -FEAS_TOL) & (ya <= 1.0 + FEAS_TOL), -ya, np.inf)
    return out if out.ndim else float(out)


def hinge_subgradient(y, z):
    """An element of the hinge subdifferential at margin input z.

    Returns -y when y z < 1, 0 when y z > 1, and -y at the kink y z = 1
    (fixed tie-break for determinism).
    """
    y = np.asarray(y, dtype=np.float64)
    out = np.where(y * np.asarray(z) <= 1.0, -y, 0.0)
    return out if out.ndim else float(out)


def primal_objective(w: np.ndarray, dataset: SparseDataset, reg: Regularization) -> float:
    if w.shape[0] != dataset.n_features:
        raise ConfigError("weight length does not match n_features")
    margins = dataset.csr() @ w
    loss = float(np.mean(hinge_loss(dataset.labels, margins)))
    return 0.5 * reg.lam * float(np.dot(w, w)) + loss


def dual_objective(alpha: np.ndarray, dataset: SparseDataset, reg: Regularization) -> float:
    """D(alpha); returns -inf when any alpha lies outside the feasible box."""
    conj = hinge_conjugate_neg(dataset.labels, alpha)
    if np.any(np.isinf(conj)):
        return -np.inf
    w = dual_to_primal(alpha, dataset, reg)
    return -0.5 * reg.lam * float(np.dot(w, w)) - float(np.sum(conj)) / reg.n


def dual_to_primal(alpha: np.ndarray, dataset: SparseDataset, reg: Regularization) -> np.ndarray:
    """w = (1/(lambda N)) sum_i alpha_i x_i via sparse accumulation."""
    w = dataset.csr().T @ alpha
    return np.asarray(w).ravel() / reg.lam_n


def duality_gap(w, alpha, dataset, reg) -> float:
    return primal_objective(w, dataset, reg) - dual_objective(alpha, dataset, reg)


def closed_form_dual_step(
    y,
    alpha_old,
    ip,
    reg: Regularization,
    x_norm_sq=1.0,
    *,
    paper_literal_ip: bool = False,
    exact_norm: bool = False,
):
    """Exact maximizer of the per-coordinate dual model given margin ip = x^T w.

    The model treats the quadratic curvature with the bound ||x||^2 <= 1
    (default) or with the exact norm when ``exact_norm`` is set. The default
    target uses the derived form lam_n * (1 - y * ip); ``paper_literal_ip``
    switches to lam_n * (1 - ip), which coincides when labels are folded into
    the features. New alphas always satisfy y * alpha in [0, 1].

    Vectorized: y, alpha_old, ip, x_norm_sq may be arrays of one shape.
    """
    y = np.asarray(y, dtype=np.float64)
    alpha_old = np.asarray(alpha_old, dtype=np.float64)
    ip = np.asarray(ip, dtype=np.float64)
    ya = y * alpha_old
    if np.any((ya < -FEAS_TOL) | (ya > 1.0 + FEAS_TOL)):
        raise ConfigError("alpha_old violates the dual feasibility box")
    drive = (1.0 - ip) if paper_literal_ip else (1.0 - y * ip)
    if exact_norm:
        denom = np.maximum(np.asarray(x_norm_sq, dtype=np.float64), 1e-300)
        raw = ya + reg.lam_n * drive / denom
    else:
        raw = ya + reg.lam_n * drive
    new_ya = np.clip(raw, 0.0, 1.0)
    delta = y * new_ya - alpha_old
    return delta if delta.ndim else float(delta)


def _segment_objective(s, y, alpha, u, ip, c_k, gamma_t, reg: Regularization):
    # Model value of moving a fraction s along (u - alpha), gamma-damped.
    step = s * c_k * (u - alpha)
    conj = hinge_conjugate_neg(y, alpha + gamma_t * step)
    return -conj - gamma_t * ip * step - (gamma_t**2) * step * step / (2.0 * reg.lam_n)


def line_search_dual_step(
    y,
    alpha_local,
    u,
    ip,
    w_dot_term,
    c_k,
    gamma_t,
    reg: Regularization,
    tol: float = 1e-8,
):
    """Golden-section maximization of the local dual model over s in [0, 1].

    Returns (s, delta_alpha) with delta_alpha = s * c_k * (u - alpha_local).
    Both endpoints are checked, so the value at the returned s is never worse
    than staying put (s = 0). The segment from alpha toward u stays inside the
    feasibility box, so the objective is finite on all of [0, 1].
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    def f(s):
        return _segment_objective(s, y, alpha_local, u, w_dot_term, c_k, gamma_t, reg)

    a, b = 0.0, 1.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    s_best = 0.5 * (a + b)
    candidates = [(f(0.0), 0.0), (f(s_best), s_best), (f(1.0), 1.0)]
    _, s_star = max(candidates, key=lambda t: t[0])
    return s_star, s_star * c_k * (u - alpha_local)


def dual_target(y, ip):
    """Ascent target for the local dual step: y while the margin is active.

    This is the negated hinge subgradient at ip; moving alpha toward it keeps
    y * alpha inside [0, 1].
    """
    return -hinge_subgradient(y, ip)
