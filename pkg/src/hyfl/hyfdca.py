"""HyFDCA protocol engine: coordinated dual ascent over partitioned data.

One outer iteration does, in order: send the global dual vector to clients
returning after an absence, refresh their cached primal contributions,
assemble global inner products securely, run each active client's local dual
method, merge the encrypted dual updates on the server, redistribute the
dual vector, and re-aggregate the primal weights. Encryption is mocked: an
``Encrypted`` wrapper carries plaintext and every enc/dec/add is tallied on a
ledger so the time penalty can be charged exactly as a real additively
homomorphic cryptosystem would.

Server-side code only ever touches dual updates and inner-product components
through ``Encrypted`` values; the ledger records a violation if plaintext
crosses that boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .errors import ConfigError
from .metrics import RunHistory, TimingModel, accuracy as _accuracy
from .objective import (
    FEAS_TOL,
    Regularization,
    closed_form_dual_step,
    dual_objective,
    dual_to_primal,
    dual_target,
    line_search_dual_step,
    primal_objective,
)
from .partition import Partition, client_matrices

# Deterministic compute model: flop estimates per unit of client work.
FLOPS_PER_DUAL_STEP = 8.0
FLOPS_PER_LINE_SEARCH_STEP = 240.0


class Encrypted:
    """Mock additive-homomorphic ciphertext: identity payload plus type tag."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data, dtype=np.float64)


@dataclass
class EncryptionLedger:
    """Counts enc/dec/add operations; counters reset each outer iteration."""

    enc_count: int = 0
    dec_count: int = 0
    add_count: int = 0
    total_enc: int = 0
    total_dec: int = 0
    total_add: int = 0
    violations: int = 0

    def start_round(self):
        self.enc_count = self.dec_count = self.add_count = 0

    def encrypt(self, values, count: int | None = None) -> Encrypted:
        ct = Encrypted(np.array(values, dtype=np.float64, copy=True))
        n = ct.data.size if count is None else count
        self.enc_count += n
        self.total_enc += n
        return ct

    def decrypt(self, ct, count: int | None = None) -> np.ndarray:
        if not isinstance(ct, Encrypted):
            self.violations += 1
            raise ConfigError("plaintext crossed the client/server boundary")
        n = ct.data.size if count is None else count
        self.dec_count += n
        self.total_dec += n
        return ct.data.copy()

    def charge_adds(self, n: int):
        self.add_count += int(n)
        self.total_add += int(n)


@dataclass(frozen=True)
class Schedule:
    """Client availability per outer iteration.

    kind "full" activates everyone; "fraction" draws max(1, round(f * K))
    clients uniformly without replacement each round; "cyclic" splits clients
    into ``cycles`` seeded groups that take turns.
    """

    kind: str = "full"
    fraction: float = 1.0
    cycles: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "fraction", "cyclic"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "fraction" and not 0.0 < self.fraction <= 1.0:
            raise ConfigError("fraction must lie in (0, 1]")
        if self.kind == "cyclic" and self.cycles < 2:
            raise ConfigError("cyclic schedule needs at least 2 groups")

    def mean_active(self, n_clients: int) -> float:
        if self.kind == "full":
            return float(n_clients)
        if self.kind == "fraction":
            return float(max(1, round(self.fraction * n_clients)))
        return n_clients / self.cycles

    def active_clients(self, t: int, n_clients: int) -> np.ndarray:
        if self.kind == "full":
            return np.arange(n_clients, dtype=np.int64)
        if self.kind == "fraction":
            size = max(1, round(self.fraction * n_clients))
            rng = np.random.default_rng([self.seed, t])
            return np.sort(rng.choice(n_clients, size=size, replace=False)).astype(np.int64)
        if n_clients % self.cycles != 0:
            raise ConfigError("cyclic schedule needs n_clients divisible by cycles")
        order = np.random.default_rng(self.seed).permutation(n_clients)
        groups = np.array_split(order, self.cycles)
        return np.sort(groups[t % self.cycles]).astype(np.int64)


@dataclass(frozen=True)
class HyfdcaParams:
    """Knobs of the protocol's local work and merge damping."""

    h: int = 1  # inner iterations per client per round
    gamma: str = "constant"  # "constant" (1) or "inv_t" (1/t)
    c_rule: str = "samples_fraction"  # "samples_fraction" (N_k/N) or "one"
    step: str = "closed_form"  # or "line_search"
    second_inner_product: bool = False
    paper_literal_ip: bool = False
    exact_norm: bool = False

    def __post_init__(self):
        if self.h < 0:
            raise ConfigError("h must be >= 0")
        if self.gamma not in ("constant", "inv_t"):
            raise ConfigError("gamma must be 'constant' or 'inv_t'")
        if self.c_rule not in ("samples_fraction", "one"):
            raise ConfigError("c_rule must be 'samples_fraction' or 'one'")
        if self.step not in ("closed_form", "line_search"):
            raise ConfigError("step must be 'closed_form' or 'line_search'")

    def gamma_t(self, t: int) -> float:
        return 1.0 if self.gamma == "constant" else 1.0 / t


@dataclass(frozen=True)
class StopRule:
    """Stop after a number of outer iterations or a simulated-time budget."""

    iters: int | None = None
    wall_time_s: float | None = None

    def __post_init__(self):
        if self.iters is None and self.wall_time_s is None:
            raise ConfigError("stop rule needs iters or wall_time_s")


class FederatedState:
    """Server- and client-side state of one protocol run."""

    def __init__(self, dataset: SparseDataset, part: Partition, reg: Regularization):
        if reg.n != dataset.n_samples:
            raise ConfigError("regularization n must equal the dataset size")
        self.dataset = dataset
        self.part = part
        self.reg = reg
        self.mats = client_matrices(dataset, part)
        self.mat_nnz = [m.nnz for m in self.mats]
        self.n_holders = part.n_holders().astype(np.float64)
        self.ledger = EncryptionLedger()

        n, m, kc = dataset.n_samples, dataset.n_features, part.n_clients
        self.alpha0_ct = Encrypted(np.zeros(n))
        self.w0 = np.zeros(m)
        self.w_hat = np.zeros((kc, m))
        self.ip_cache = [Encrypted(np.zeros(part.client_samples[k].size)) for k in range(kc)]
        self.last_update = np.zeros(n, dtype=np.int64)
        self.last_seen = np.zeros(kc, dtype=np.int64)
        self.prev_active: set[int] = set()

        self.client_alpha = [np.zeros(part.client_samples[k].size) for k in range(kc)]
        self.client_w = [np.zeros(m) for k in range(kc)]
        self.client_ip = [np.zeros(part.client_samples[k].size) for k in range(kc)]

        self.round_flops = np.zeros(kc)

    def alpha0_view(self) -> np.ndarray:
        """Plaintext view of the server dual vector (measurement only)."""
        return self.alpha0_ct.data

    def feature_mask(self, k: int) -> np.ndarray:
        mask = np.zeros(self.dataset.n_features, dtype=bool)
        mask[self.part.client_features[k]] = True
        return mask


def secure_inner_product(state: FederatedState, active: np.ndarray) -> None:
    """Assemble x_i^T w for every sample an active client needs.

    Active clients encrypt fresh partial dot products; components of clients
    sitting out are served from their last encrypted submission. Charges one
    enc per fresh (client, sample) pair, holders-minus-one adds per assembled
    sample, and one dec per delivered (client, sample) pair.
    """
    if active.size == 0:
        return
    part, ledger = state.part, state.ledger
    for k in active:
        partial = state.mats[k] @ state.client_w[k]
        state.ip_cache[k] = ledger.encrypt(partial)
        state.round_flops[k] += state.mat_nnz[k]

    needed = np.zeros(state.dataset.n_samples, dtype=bool)
    for k in active:
        needed[part.client_samples[k]] = True
    acc = np.zeros(state.dataset.n_samples)
    for k in range(part.n_clients):
        rows = part.client_samples[k]
        take = needed[rows]
        np.add.at(acc, rows[take], state.ip_cache[k].data[take])
    ledger.charge_adds(int(np.sum(state.n_holders[needed] - 1.0)))

    for k in active:
        rows = part.client_samples[k]
        state.client_ip[k] = ledger.decrypt(Encrypted(acc[rows]))


def primal_aggregation(state: FederatedState, clients: np.ndarray) -> None:
    """Refresh cached per-client primal contributions and rebuild w0.

    Only the given clients recompute their contribution; every client's
    stored (possibly stale) contribution enters the global sum. The fresh w0
    is then sent back to the given clients, restricted to their features.
    """
    lam_n = state.reg.lam_n
    for k in clients:
        state.w_hat[k] = state.mats[k].T @ state.client_alpha[k]
        state.round_flops[k] += state.mat_nnz[k]
    state.w0 = state.w_hat.sum(axis=0) / lam_n
    for k in clients:
        f = state.part.client_features[k]
        state.client_w[k][f] = state.w0[f]


def _local_dual_method(state, params, k, t, master_seed):
    """One client's batch of dual coordinate updates (practical variant)."""
    part, reg = state.part, state.reg
    rows = part.client_samples[k]
    n_k = rows.size
    h = min(params.h, n_k)
    if h == 0:
        return rows[:0], np.zeros(0)
    rng = np.random.default_rng([master_seed, t, int(k)])
    sel = np.sort(rng.choice(n_k, size=h, replace=False))
    y = state.dataset.labels[rows[sel]].astype(np.float64)
    a = state.client_alpha[k][sel]
    ip = state.client_ip[k][sel]
    if params.step == "closed_form":
        delta = closed_form_dual_step(
            y, a, ip, reg,
            paper_literal_ip=params.paper_literal_ip,
            exact_norm=params.exact_norm,
        )
        state.round_flops[k] += FLOPS_PER_DUAL_STEP * h
    else:
        c_k = n_k / reg.n if params.c_rule == "samples_fraction" else 1.0
        gamma_t = params.gamma_t(t)
        delta = np.empty(h)
        for j in range(h):
            u = dual_target(y[j], ip[j])
            _, delta[j] = line_search_dual_step(
                y[j], a[j], u, ip[j], ip[j], c_k, gamma_t, reg
            )
        state.round_flops[k] += FLOPS_PER_LINE_SEARCH_STEP * h
    state.client_alpha[k][sel] = a + delta
    return rows[sel], np.asarray(delta, dtype=np.float64)


def hyfdca_round(state: FederatedState, params: HyfdcaParams, active: np.ndarray,
                 t: int, master_seed: int) -> dict:
    """Execute one outer iteration; returns per-round accounting."""
    ledger = state.ledger
    ledger.start_round()
    state.round_flops[:] = 0.0
    if active.size == 0:
        state.prev_active = set()
        return {"active": active, "skipped": True, "flops_max": 0.0,
                "enc": 0, "dec": 0, "add": 0}

    returning = np.array(sorted(set(int(k) for k in active) - state.prev_active), dtype=np.int64)

    # Returning clients receive the encrypted global duals; they only pay
    # decryption for entries updated since they last participated.
    for k in returning:
        rows = state.part.client_samples[k]
        stale = int(np.sum(state.last_update[rows] > state.last_seen[k]))
        state.client_alpha[k] = ledger.decrypt(
            Encrypted(state.alpha0_ct.data[rows]), count=stale
        )

    primal_aggregation(state, returning)
    secure_inner_product(state, active)

    gamma_t = params.gamma_t(t)
    round_delta = np.zeros(state.dataset.n_samples)
    n_adds = 0
    for k in active:
        idx, delta = _local_dual_method(state, params, int(k), t, master_seed)
        scaled_ct = ledger.encrypt(gamma_t / state.n_holders[idx] * delta)
        np.add.at(state.alpha0_ct.data, idx, scaled_ct.data)
        np.add.at(round_delta, idx, scaled_ct.data)
        n_adds += idx.size
    ledger.charge_adds(n_adds)
    changed = round_delta != 0.0
    state.last_update[changed] = t

    # Redistribute the merged duals; unchanged entries are already cached in
    # plaintext on the clients, so decryption is charged per changed entry.
    for k in active:
        rows = state.part.client_samples[k]
        state.client_alpha[k] = ledger.decrypt(
            Encrypted(state.alpha0_ct.data[rows]), count=int(np.sum(changed[rows]))
        )

    primal_aggregation(state, active)
    if params.second_inner_product:
        secure_inner_product(state, active)

    state.last_seen[active] = t
    state.prev_active = set(int(k) for k in active)
    return {
        "active": active,
        "skipped": False,
        "flops_max": float(np.max(state.round_flops[active])),
        "enc": ledger.enc_count,
        "dec": ledger.dec_count,
        "add": ledger.add_count,
    }


def _audit_round(state: FederatedState, active: np.ndarray) -> None:
    """Scoping and feasibility assertions (used by tests and audited runs)."""
    labels = state.dataset.labels
    ya = labels * state.alpha0_ct.data
    if np.any(ya < -FEAS_TOL) or np.any(ya > 1.0 + FEAS_TOL):
        raise AssertionError("server dual vector left the feasible box")
    if state.ledger.violations:
        raise AssertionError("plaintext crossed the encryption boundary")
    for k in range(state.part.n_clients):
        if state.client_alpha[k].size != state.part.client_samples[k].size:
            raise AssertionError("client holds duals outside its sample set")
        outside = ~state.feature_mask(k)
        if np.any(state.client_w[k][outside] != 0.0):
            raise AssertionError("client holds weights outside its feature set")
    if active.size == state.part.n_clients:
        direct = dual_to_primal(state.alpha0_ct.data, state.dataset, state.reg)
        if np.max(np.abs(direct - state.w0)) > 1e-9:
            raise AssertionError("aggregated weights drifted from the dual map")


def run_hyfdca(
    dataset: SparseDataset,
    part: Partition,
    reg: Regularization,
    params: HyfdcaParams,
    schedule: Schedule,
    stop: StopRule,
    master_seed: int = 0,
    timing: TimingModel | None = None,
    val_data: SparseDataset | None = None,
    audit: bool = False,
) -> RunHistory:
    """Run the protocol to the stop rule; one history row per outer iteration."""
    timing = timing or TimingModel()
    state = FederatedState(dataset, part, reg)
    per_group_active = schedule.mean_active(part.n_clients) / part.feature_groups
    if params.h > reg.n or per_group_active * params.h > reg.n:
        warnings.warn(
            "inner iteration count exceeds the convergence-theory regime",
            stacklevel=2,
        )
    eval_data = val_data if val_data is not None else dataset
    history = RunHistory(
        meta={
            "algorithm": "hyfdca",
            "seed": master_seed,
            "n_samples": dataset.n_samples,
            "n_features": dataset.n_features,
            "lambda": reg.lam,
            "partition": {"scheme": part.scheme, "k": part.sample_groups, "q": part.feature_groups},
            "params": {
                "h": params.h, "gamma": params.gamma, "c_rule": params.c_rule,
                "step": params.step, "second_inner_product": params.second_inner_product,
            },
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
        row = hyfdca_round(state, params, active, t, master_seed)
        if audit:
            _audit_round(state, active)
        p = primal_objective(state.w0, dataset, reg)
        d = dual_objective(state.alpha0_ct.data, dataset, reg)
        enc_s = timing.encryption_seconds(row["enc"], row["dec"], row["add"])
        latency_s = 0.0 if row["skipped"] else timing.latency_seconds()
        compute_s = timing.compute_seconds(row["flops_max"])
        history.append(
            t=t, p=p, d=d, acc=_accuracy(state.w0, eval_data),
            compute_s=compute_s, enc_s=enc_s, latency_s=latency_s,
            enc_ops=row["enc"], dec_ops=row["dec"], add_ops=row["add"],
        )
        cum += compute_s + enc_s + latency_s
        if stop.iters is not None and t >= stop.iters:
            break
        if stop.wall_time_s is not None and cum >= stop.wall_time_s:
            break
    history.meta["ledger_totals"] = {
        "enc": state.ledger.total_enc, "dec": state.ledger.total_dec,
        "add": state.ledger.total_add, "violations": state.ledger.violations,
    }
    history.state = state  # simulator handle for tests and tooling
    return history
