"""Client data holdings for hybrid, horizontal, and vertical splits.

A partition assigns every stored (sample, feature) entry of a dataset to
exactly one client. Clients are grouped: K sample groups times Q feature
groups (horizontal is Q=1, vertical is K=1). The set of clients holding a
sample is always the Q clients of its sample group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import SparseDataset
from .errors import ConfigError

IMAGE_SIDE = 28  # quadrant scheme expects 28x28 inputs


def split_evenly(n: int, parts: int) -> list[np.ndarray]:
    """Contiguous index blocks with sizes differing by at most one.

    Earlier blocks take the extras when n is not divisible by parts.
    """
    base, extra = divmod(n, parts)
    blocks, start = [], 0
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        blocks.append(np.arange(start, start + size, dtype=np.int64))
        start += size
    return blocks


@dataclass
class Partition:
    """Immutable client holdings over a dataset.

    ``pair_features[k]`` is None for rectangular clients (every sample on the
    client carries the same feature set) or a per-sample dict of dealt
    feature-index arrays for jagged clients.
    """

    scheme: str
    n_clients: int
    sample_groups: int  # K
    feature_groups: int  # Q
    n_samples: int
    n_features: int
    client_samples: list[np.ndarray]
    client_features: list[np.ndarray]
    holders: list[np.ndarray]  # clients holding each sample
    pair_features: list[dict[int, np.ndarray] | None]
    _feature_holders: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def samples_of_client(self, k: int) -> np.ndarray:
        return self.client_samples[k]

    def features_of_client(self, k: int) -> np.ndarray:
        return self.client_features[k]

    def clients_of_sample(self, i: int) -> np.ndarray:
        return self.holders[i]

    def clients_of_feature(self, m: int) -> np.ndarray:
        if m not in self._feature_holders:
            ks = [k for k in range(self.n_clients) if m in set(self.client_features[k].tolist())]
            self._feature_holders[m] = np.array(ks, dtype=np.int64)
        return self._feature_holders[m]

    def held_features(self, k: int, i: int) -> np.ndarray:
        """Feature indices of sample i held by client k (sorted)."""
        pf = self.pair_features[k]
        if pf is None:
            return self.client_features[k]
        return pf.get(i, np.zeros(0, dtype=np.int64))

    def n_holders(self) -> np.ndarray:
        return np.array([h.size for h in self.holders], dtype=np.int64)


def _make_holders(n_samples: int, client_samples: list[np.ndarray], n_clients: int):
    holders = [[] for _ in range(n_samples)]
    for k in range(n_clients):
        for i in client_samples[k]:
            holders[i].append(k)
    return [np.array(h, dtype=np.int64) for h in holders]


def partition_quadrant(
    dataset: SparseDataset, total_clients: int, bias_value: float = 10.0
) -> tuple[SparseDataset, Partition]:
    """Split 28x28 image features into four quadrants across clients.

    Appends a bias feature (index 784, value ``bias_value``) to every sample;
    only fourth-quadrant clients hold it. Clients are laid out as quadrant
    blocks: the first quarter of client ids holds quadrant 1 (rows < 14,
    cols < 14) and so on, each paired with one of K contiguous sample groups.
    """
    side = IMAGE_SIDE
    if dataset.n_features != side * side:
        raise ConfigError(f"quadrant scheme needs {side * side} features, got {dataset.n_features}")
    if total_clients % 4 != 0 or total_clients < 4:
        raise ConfigError("total_clients must be a positive multiple of 4")
    k_groups = total_clients // 4
    if k_groups > dataset.n_samples:
        raise ConfigError("more sample groups than samples")

    bias_idx = side * side
    augmented = SparseDataset(
        n_samples=dataset.n_samples,
        n_features=bias_idx + 1,
        samples=[
            (np.append(idx, bias_idx), np.append(vals, float(bias_value)))
            for idx, vals in dataset.samples
        ],
        labels=dataset.labels.copy(),
        name=dataset.name,
    )

    rows, cols = np.divmod(np.arange(side * side), side)
    half = side // 2
    quadrant_features = [
        np.flatnonzero((rows < half) & (cols < half)),
        np.flatnonzero((rows < half) & (cols >= half)),
        np.flatnonzero((rows >= half) & (cols < half)),
        np.append(np.flatnonzero((rows >= half) & (cols >= half)), bias_idx),
    ]
    sample_blocks = split_evenly(dataset.n_samples, k_groups)

    client_samples, client_features = [], []
    for q in range(4):
        for g in range(k_groups):
            client_samples.append(sample_blocks[g].copy())
            client_features.append(quadrant_features[q].astype(np.int64))
    part = Partition(
        scheme="quadrant",
        n_clients=total_clients,
        sample_groups=k_groups,
        feature_groups=4,
        n_samples=dataset.n_samples,
        n_features=augmented.n_features,
        client_samples=client_samples,
        client_features=client_features,
        holders=_make_holders(dataset.n_samples, client_samples, total_clients),
        pair_features=[None] * total_clients,
    )
    return augmented, part


def partition_nonzero_split(dataset: SparseDataset, k: int, q: int, seed: int) -> Partition:
    """Deal each sample's stored entries evenly among Q clients per group.

    Samples are cut into K contiguous groups; inside a group each sample's
    entries are shuffled (per-sample seeded) and dealt round-robin, so per
    -client counts for one sample differ by at most one.
    """
    if k < 1 or q < 1:
        raise ConfigError("k and q must be >= 1")
    if k > dataset.n_samples:
        raise ConfigError("more sample groups than samples")
    sample_blocks = split_evenly(dataset.n_samples, k)
    n_clients = k * q
    client_samples = []
    pair_features: list[dict[int, np.ndarray]] = [dict() for _ in range(n_clients)]
    for g in range(k):
        for j in range(q):
            client_samples.append(sample_blocks[g].copy())
    for g in range(k):
        for i in sample_blocks[g]:
            idx = dataset.samples[i][0]
            order = np.random.default_rng([seed, int(i)]).permutation(idx.size)
            shuffled = idx[order]
            for j in range(q):
                c = g * q + j
                pair_features[c][int(i)] = np.sort(shuffled[j::q])
    client_features = [
        np.unique(np.concatenate([a for a in pf.values()] or [np.zeros(0, np.int64)]))
        for pf in pair_features
    ]
    return Partition(
        scheme="nonzero_split",
        n_clients=n_clients,
        sample_groups=k,
        feature_groups=q,
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        client_samples=client_samples,
        client_features=[f.astype(np.int64) for f in client_features],
        holders=_make_holders(dataset.n_samples, client_samples, n_clients),
        pair_features=list(pair_features),
    )


def partition_horizontal(dataset: SparseDataset, k: int) -> Partition:
    """Each of K clients holds a contiguous block of samples, all features."""
    if not 1 <= k <= dataset.n_samples:
        raise ConfigError("need 1 <= k <= n_samples")
    blocks = split_evenly(dataset.n_samples, k)
    all_features = np.arange(dataset.n_features, dtype=np.int64)
    return Partition(
        scheme="horizontal",
        n_clients=k,
        sample_groups=k,
        feature_groups=1,
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        client_samples=blocks,
        client_features=[all_features.copy() for _ in range(k)],
        holders=_make_holders(dataset.n_samples, blocks, k),
        pair_features=[None] * k,
    )


def partition_vertical(dataset: SparseDataset, q: int, seed: int | None = None) -> Partition:
    """Each of Q clients holds all samples and a 1/Q share of features.

    Features are shuffled with the seed (or kept in natural order when seed
    is None), then cut into contiguous blocks.
    """
    if not 1 <= q <= dataset.n_features:
        raise ConfigError("need 1 <= q <= n_features")
    order = (
        np.arange(dataset.n_features, dtype=np.int64)
        if seed is None
        else np.random.default_rng(seed).permutation(dataset.n_features).astype(np.int64)
    )
    blocks = split_evenly(dataset.n_features, q)
    all_samples = np.arange(dataset.n_samples, dtype=np.int64)
    client_samples = [all_samples.copy() for _ in range(q)]
    client_features = [np.sort(order[b]) for b in blocks]
    return Partition(
        scheme="vertical",
        n_clients=q,
        sample_groups=1,
        feature_groups=q,
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        client_samples=client_samples,
        client_features=client_features,
        holders=_make_holders(dataset.n_samples, client_samples, q),
        pair_features=[None] * q,
    )


def client_matrices(dataset: SparseDataset, part: Partition) -> list[sp.csr_matrix]:
    """Per-client sparse blocks, shape (N_k, M) over global feature columns.

    Row r of client k's matrix corresponds to part.client_samples[k][r] and
    contains exactly the stored entries that client holds.
    """
    mats = []
    for k in range(part.n_clients):
        rect = part.pair_features[k] is None
        mask = None
        if rect:
            mask = np.zeros(dataset.n_features, dtype=bool)
            mask[part.client_features[k]] = True
        rows_idx, rows_val, indptr = [], [], [0]
        for i in part.client_samples[k]:
            idx, vals = dataset.samples[i]
            if rect:
                sel = mask[idx]
                held_i, held_v = idx[sel], vals[sel]
            else:
                held = part.pair_features[k].get(int(i), np.zeros(0, np.int64))
                pos = np.searchsorted(idx, held)
                held_i, held_v = held, vals[pos]
            rows_idx.append(held_i)
            rows_val.append(held_v)
            indptr.append(indptr[-1] + held_i.size)
        indices = np.concatenate(rows_idx) if rows_idx else np.zeros(0, np.int64)
        data = np.concatenate(rows_val) if rows_val else np.zeros(0)
        mats.append(
            sp.csr_matrix(
                (data, indices, np.array(indptr, dtype=np.int64)),
                shape=(len(part.client_samples[k]), dataset.n_features),
            )
        )
    return mats


def validate_partition(part: Partition, dataset: SparseDataset) -> None:
    """Check disjoint coverage: every stored entry held by exactly one client."""
    held = []
    mats = client_matrices(dataset, part)
    for k, mat in enumerate(mats):
        coo = mat.tocoo()
        local_rows = part.client_samples[k][coo.row]
        held.append(np.stack([local_rows, coo.col.astype(np.int64)], axis=1))
    held_all = np.concatenate(held) if held else np.zeros((0, 2), np.int64)
    want = []
    for i, (idx, _) in enumerate(dataset.samples):
        want.append(np.stack([np.full(idx.size, i, dtype=np.int64), idx], axis=1))
    want_all = np.concatenate(want) if want else np.zeros((0, 2), np.int64)
    held_sorted = held_all[np.lexsort((held_all[:, 1], held_all[:, 0]))]
    want_sorted = want_all[np.lexsort((want_all[:, 1], want_all[:, 0]))]
    if held_sorted.shape != want_sorted.shape or not np.array_equal(held_sorted, want_sorted):
        raise ConfigError("partition does not cover every stored entry exactly once")


def partition_summary(part: Partition, dataset: SparseDataset) -> dict:
    """JSON-friendly per-client summary (sample/feature/nonzero counts)."""
    mats = client_matrices(dataset, part)
    clients = [
        {
            "client": k,
            "n_samples": int(part.client_samples[k].size),
            "n_features": int(part.client_features[k].size),
            "nnz": int(mats[k].nnz),
        }
        for k in range(part.n_clients)
    ]
    return {
        "scheme": part.scheme,
        "n_clients": part.n_clients,
        "sample_groups": part.sample_groups,
        "feature_groups": part.feature_groups,
        "clients": clients,
    }
