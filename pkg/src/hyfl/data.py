"""Dataset ingestion, synthesis, and normalization.

Datasets are sample-major sparse matrices with labels in {-1, +1}. Feature
values are kept in 64-bit floats throughout; the convergence tolerances used
downstream are not reachable in 32-bit.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, LabelError, ParseError

# Samples whose L2 norm is within this slack of 1 are left untouched so that
# normalization is exactly idempotent despite rounding.
_NORM_SLACK = 1e-12


@dataclass
class SparseDataset:
    """Sparse sample-major dataset with binary labels.

    Each sample is an (indices, values) pair of aligned 1-D arrays with
    strictly increasing 0-based indices.
    """

    n_samples: int
    n_features: int
    samples: list[tuple[np.ndarray, np.ndarray]]
    labels: np.ndarray
    name: str = ""
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def validate(self) -> None:
        if len(self.samples) != self.n_samples or len(self.labels) != self.n_samples:
            raise ConfigError("sample/label count does not match n_samples")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise LabelError("labels must be -1 or +1")
        for idx, _vals in self.samples:
            if idx.size and (idx[0] < 0 or idx[-1] >= self.n_features):
                raise ConfigError("feature index out of range")
            if idx.size > 1 and np.any(np.diff(idx) <= 0):
                raise ConfigError("feature indices must be strictly increasing")

    def csr(self) -> sp.csr_matrix:
        """CSR view of the full dataset, built once and cached."""
        if self._csr is None:
            indptr = np.zeros(self.n_samples + 1, dtype=np.int64)
            for i, (idx, _) in enumerate(self.samples):
                indptr[i + 1] = indptr[i] + idx.size
            indices = np.concatenate([idx for idx, _ in self.samples]) if self.samples else np.zeros(0, np.int64)
            data = np.concatenate([v for _, v in self.samples]) if self.samples else np.zeros(0)
            self._csr = sp.csr_matrix(
                (data, indices, indptr), shape=(self.n_samples, self.n_features)
            )
        return self._csr

    def nnz(self) -> int:
        return sum(idx.size for idx, _ in self.samples)

    def subset(self, rows: np.ndarray, name: str | None = None) -> "SparseDataset":
        """New dataset holding the given sample rows (copies index arrays)."""
        rows = np.asarray(rows)
        return SparseDataset(
            n_samples=int(rows.size),
            n_features=self.n_features,
            samples=[(self.samples[i][0].copy(), self.samples[i][1].copy()) for i in rows],
            labels=self.labels[rows].copy(),
            name=self.name if name is None else name,
        )


@dataclass(frozen=True)
class DatasetStats:
    n_samples: int
    n_features: int
    sparsity: float  # zero entries / total entries


def mnist_label_map(raw: float) -> int:
    """Default digit binarization: 0-4 map to -1, 5-9 map to +1."""
    return -1 if raw <= 4 else 1


def _map_label(raw: float, label_map, line_no: int) -> int:
    if label_map is not None:
        if callable(label_map):
            mapped = label_map(raw)
        else:
            mapped = label_map.get(raw)
        if mapped not in (-1, 1):
            raise LabelError(f"label {raw!r} not mapped to -1/+1", line_no)
        return int(mapped)
    if raw == 1:
        return 1
    if raw == -1:
        return -1
    raise LabelError(f"label {raw!r} is not -1/+1 and no label map was given", line_no)


def parse_libsvm(stream, expected_features: int | None = None, label_map=None) -> SparseDataset:
    """Parse LIBSVM text ("<label> <idx>:<val> ...", 1-based indices).

    Indices are stored 0-based. The feature count is ``expected_features``
    when given, otherwise one past the largest index seen. ``label_map`` maps
    raw numeric labels to -1/+1 (dict or callable); without it labels must
    already be -1/+1.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    samples: list[tuple[np.ndarray, np.ndarray]] = []
    labels: list[int] = []
    max_index = -1
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            raw_label = float(parts[0])
        except ValueError:
            raise ParseError(f"bad label field {parts[0]!r}", line_no) from None
        labels.append(_map_label(raw_label, label_map, line_no))
        idx = np.empty(len(parts) - 1, dtype=np.int64)
        vals = np.empty(len(parts) - 1, dtype=np.float64)
        prev = 0
        for j, tok in enumerate(parts[1:]):
            try:
                k, v = tok.split(":", 1)
                one_based = int(k)
                vals[j] = float(v)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", line_no) from None
            if one_based <= prev:
                raise ParseError(
                    f"indices must be strictly increasing, got {one_based} after {prev}", line_no
                )
            prev = one_based
            idx[j] = one_based - 1
        if idx.size:
            max_index = max(max_index, int(idx[-1]))
        samples.append((idx, vals))
    n_features = expected_features if expected_features is not None else max_index + 1
    if max_index >= n_features:
        raise ParseError(f"feature index {max_index + 1} exceeds expected_features={n_features}")
    ds = SparseDataset(
        n_samples=len(samples),
        n_features=max(n_features, 0),
        samples=samples,
        labels=np.array(labels, dtype=np.int64),
    )
    ds.validate()
    return ds


def to_libsvm(dataset: SparseDataset) -> str:
    """Serialize back to LIBSVM text (1-based indices, %r float values)."""
    lines = []
    for (idx, vals), y in zip(dataset.samples, dataset.labels):
        toks = [f"{int(y):+d}"] + [f"{int(i) + 1}:{float(v)!r}" for i, v in zip(idx, vals)]
        lines.append(" ".join(toks))
    return "\n".join(lines) + ("\n" if lines else "")


def load_libsvm(path, expected_features=None, label_map=None) -> SparseDataset:
    """Load a LIBSVM file; gzip is detected by a .gz extension."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as fh:
        ds = parse_libsvm(fh, expected_features=expected_features, label_map=label_map)
    ds.name = str(path)
    return ds


def normalize_samples(dataset: SparseDataset) -> SparseDataset:
    """Scale any sample with L2 norm above 1 down to unit norm.

    Samples already at or below norm 1 (within 1e-12) are untouched, so the
    operation is exactly idempotent. Zero samples are untouched.
    """
    out = []
    for idx, vals in dataset.samples:
        norm = float(np.sqrt(np.dot(vals, vals)))
        if norm > 1.0 + _NORM_SLACK:
            out.append((idx.copy(), vals / norm))
        else:
            out.append((idx.copy(), vals.copy()))
    return SparseDataset(
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        samples=out,
        labels=dataset.labels.copy(),
        name=dataset.name,
    )


def synth_dataset(
    seed: int,
    n_samples: int,
    n_features: int,
    margin: float,
    noise_rate: float,
) -> SparseDataset:
    """Deterministic linearly-structured dataset.

    Samples are built around a random unit direction: each point sits at a
    signed distance of at least ``margin`` from the separating hyperplane,
    with the remaining mass placed orthogonally so that every norm is <= 1.
    Labels follow the side of the hyperplane, then a ``noise_rate`` fraction
    is flipped.
    """
    if n_samples < 1 or n_features < 1:
        raise ConfigError("n_samples and n_features must be >= 1")
    if not 0.0 <= noise_rate < 0.5:
        raise ConfigError("noise_rate must lie in [0, 0.5)")
    if not 0.0 < margin < 0.95:
        raise ConfigError("margin must lie in (0, 0.95)")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(n_features)
    direction /= np.linalg.norm(direction)

    signs = rng.choice((-1.0, 1.0), size=n_samples)
    dist = rng.uniform(margin, min(margin + 0.3, 0.95), size=n_samples)
    z = signs * dist
    perp_cap = np.sqrt(1.0 - z * z)
    perp_len = rng.uniform(0.5, 1.0, size=n_samples) * perp_cap

    samples = []
    all_idx = np.arange(n_features, dtype=np.int64)
    for i in range(n_samples):
        g = rng.standard_normal(n_features)
        g -= np.dot(g, direction) * direction
        gn = np.linalg.norm(g)
        perp = (g / gn) * perp_len[i] if gn > 0 else np.zeros(n_features)
        x = z[i] * direction + perp
        samples.append((all_idx.copy(), x))

    labels = signs.astype(np.int64)
    n_flip = int(np.floor(noise_rate * n_samples))
    if n_flip:
        flip = rng.choice(n_samples, size=n_flip, replace=False)
        labels[flip] = -labels[flip]

    ds = SparseDataset(
        n_samples=n_samples,
        n_features=n_features,
        samples=samples,
        labels=labels,
        name=f"synth(seed={seed},n={n_samples},m={n_features})",
    )
    return normalize_samples(ds)


def compute_stats(dataset: SparseDataset) -> DatasetStats:
    """Sample/feature counts plus sparsity = zero entries / total entries."""
    nonzeros = sum(int(np.count_nonzero(vals)) for _, vals in dataset.samples)
    total = dataset.n_samples * dataset.n_features
    sparsity = 1.0 - nonzeros / total if total else 1.0
    return DatasetStats(dataset.n_samples, dataset.n_features, sparsity)


def datasets_equal(a: SparseDataset, b: SparseDataset) -> bool:
    """Exact structural equality (used by round-trip tests)."""
    if (a.n_samples, a.n_features) != (b.n_samples, b.n_features):
        return False
    if not np.array_equal(a.labels, b.labels):
        return False
    return all(
        np.array_equal(ia, ib) and np.array_equal(va, vb)
        for (ia, va), (ib, vb) in zip(a.samples, b.samples)
    )
