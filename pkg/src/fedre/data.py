"""Synthetic datasets, heterogeneity partitioners, and CSV import/export.

Partitioning happens on the full dataset; each client then splits its own
shard into train/test. Two heterogeneity modes are provided: Dirichlet
proportions per category (pra) and fixed categories-per-client shard dealing
(pat), plus an exponential long-tail subsampler that composes with pra.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PRA = "pra"
PAT = "pat"
LONGTAIL = "longtail"
PARTITION_MODES = (PRA, PAT, LONGTAIL)


@dataclass(eq=False)
class Dataset:
    X: np.ndarray  # (n, dim)
    y: np.ndarray  # (n,) integer labels
    num_classes: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise ValueError("X must be (n, dim) and y must be (n,)")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y lengths differ")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")
        if not np.isfinite(self.X).all():
            raise ValueError("features must be finite")

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def class_indices(self, c):
        return np.flatnonzero(self.y == c)

    def class_counts(self):
        return np.bincount(self.y, minlength=self.num_classes)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.num_classes)


def _circle_means(num_classes, dim, radius):
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, dim))
    means[:, 0] = radius * np.cos(angles)
    if dim > 1:
        means[:, 1] = radius * np.sin(angles)
    return means


def make_blobs(num_classes, per_class, dim, spread, seed):
    """Isotropic Gaussian clusters with means on a circle of radius 3*spread."""
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise ValueError("num_classes, per_class, and dim must be positive")
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(seed)
    means = _circle_means(num_classes, dim, 3.0 * spread)
    X = np.empty((num_classes * per_class, dim))
    y = np.empty(num_classes * per_class, dtype=int)
    for c in range(num_classes):
        rows = slice(c * per_class, (c + 1) * per_class)
        X[rows] = means[c] + spread * rng.standard_normal((per_class, dim))
        y[rows] = c
    return Dataset(X, y, num_classes)


@dataclass
class PartitionSpec:
    mode: str
    num_clients: int
    seed: object = 0  # int or anything np.random.default_rng accepts
    alpha: float = 0.1
    categories_per_client: int = 2
    imbalance_factor: float = 100.0

    def __post_init__(self):
        if self.mode not in PARTITION_MODES:
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if self.num_clients < 1:
            raise ValueError("num_clients must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.categories_per_client < 1:
            raise ValueError("categories_per_client must be positive")
        if self.imbalance_factor < 1:
            raise ValueError("imbalance_factor must be >= 1")


def _largest_remainder(shares, total):
    """Apportion `total` items proportionally to `shares` (sums preserved)."""
    shares = np.asarray(shares, dtype=float)
    raw = shares / shares.sum() * total
    counts = np.floor(raw).astype(int)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _dirichlet(alpha, size, rng):
    # Gamma(alpha, 1) normalization; redraw the (measure-zero) all-zero case.
    while True:
        g = rng.gamma(alpha, 1.0, size)
        if g.sum() > 0:
            return g / g.sum()


def _partition_pra(ds, num_clients, alpha, rng):
    per_client = [[] for _ in range(num_clients)]
    for c in range(ds.num_classes):
        idx = ds.class_indices(c)
        if idx.size == 0:
            continue
        shares = _dirichlet(alpha, num_clients, rng)
        counts = _largest_remainder(shares, idx.size)
        shuffled = rng.permutation(idx)
        start = 0
        for k in range(num_clients):
            per_client[k].extend(shuffled[start : start + counts[k]])
            start += counts[k]
    return [ds.subset(np.sort(np.asarray(ix, dtype=int))) for ix in per_client]


def _partition_pat(ds, num_clients, categories_per_client, rng):
    """Deal per-category shards so each client holds exactly
    categories_per_client distinct categories with varying sizes."""
    C = ds.num_classes
    cpc = categories_per_client
    if cpc > C:
        raise ValueError(f"categories_per_client {cpc} exceeds {C} categories")
    total_slots = num_clients * cpc
    if total_slots % C != 0:
        raise ValueError(
            f"cannot deal {C} categories evenly: num_clients*categories_per_client"
            f" = {total_slots} is not divisible by {C}"
        )
    shards_per_cat = total_slots // C
    counts = ds.class_counts()
    starved = [c for c in range(C) if counts[c] < shards_per_cat]
    if starved:
        raise ValueError(
            f"categories {starved} have fewer samples than the {shards_per_cat}"
            " shards they must supply"
        )
    cat_perm = rng.permutation(C)
    client_perm = rng.permutation(num_clients)
    holders = [[] for _ in range(C)]  # clients holding each category, in deal order
    for k in range(num_clients):
        for j in range(cpc):
            cat = cat_perm[(k * cpc + j) % C]
            holders[cat].append(client_perm[k])
    per_client = [[] for _ in range(num_clients)]
    for c in range(C):
        idx = rng.permutation(ds.class_indices(c))
        sizes = _largest_remainder(_dirichlet(1.0, shards_per_cat, rng), idx.size)
        while (sizes == 0).any():  # every dealt shard must be nonempty
            sizes[int(np.argmax(sizes == 0))] += 1
            sizes[int(np.argmax(sizes))] -= 1
        start = 0
        for s, k in enumerate(holders[c]):
            per_client[k].extend(idx[start : start + sizes[s]])
            start += sizes[s]
    return [ds.subset(np.sort(np.asarray(ix, dtype=int))) for ix in per_client]


def apply_longtail(ds, imbalance_factor, seed):
    """Subsample category c to max(1, round(n_max * IF^(-c/(C-1)))) samples."""
    if imbalance_factor < 1:
        raise ValueError("imbalance_factor must be >= 1")
    C = ds.num_classes
    if C == 1 or imbalance_factor == 1:
        return ds.subset(np.arange(len(ds)))
    rng = np.random.default_rng(seed)
    n_max = int(ds.class_counts().max())
    keep = []
    for c in range(C):
        idx = ds.class_indices(c)
        if idx.size == 0:
            continue
        target = max(1, int(round(n_max * imbalance_factor ** (-c / (C - 1)))))
        target = min(target, idx.size)
        keep.extend(rng.permutation(idx)[:target])
    return ds.subset(np.sort(np.asarray(keep, dtype=int)))


def partition(ds, spec):
    """Split a dataset into per-client shards; the union is sample-exact."""
    if len(ds) == 0:
        raise ValueError("cannot partition an empty dataset")
    rng = np.random.default_rng(spec.seed)
    if spec.mode == PRA:
        return _partition_pra(ds, spec.num_clients, spec.alpha, rng)
    if spec.mode == PAT:
        return _partition_pat(ds, spec.num_clients, spec.categories_per_client, rng)
    # longtail: exponential subsample, then Dirichlet proportions
    sub_ss, pra_ss = np.random.SeedSequence(spec.seed).spawn(2)
    tailed = apply_longtail(ds, spec.imbalance_factor, sub_ss)
    return _partition_pra(tailed, spec.num_clients, spec.alpha, np.random.default_rng(pra_ss))


def train_test_split(ds, train_fraction, seed):
    """Stratified per-category split with an exact train total."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in [0, 1]")
    n = len(ds)
    rng = np.random.default_rng(seed)
    total_train = int(round(train_fraction * n))
    counts = ds.class_counts()
    if n == 0 or total_train == 0:
        return ds.subset([]), ds.subset(np.arange(n))
    train_counts = _largest_remainder(counts / n, total_train)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        idx = rng.permutation(ds.class_indices(c))
        train_idx.extend(idx[: train_counts[c]])
        test_idx.extend(idx[train_counts[c] :])
    return (
        ds.subset(np.sort(np.asarray(train_idx, dtype=int))),
        ds.subset(np.sort(np.asarray(test_idx, dtype=int))),
    )


def save_csv(ds, path):
    """Write a dataset as x0,...,x{dim-1},label rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(ds.dim)] + ["label"])
        for row, label in zip(ds.X, ds.y):
            writer.writerow([f"{v:.17g}" for v in row] + [int(label)])


def load_csv(path, num_classes=None):
    """Read a dataset written by save_csv; num_classes defaults to max+1."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        dim = len(header) - 1
        expected = [f"x{j}" for j in range(dim)] + ["label"]
        if header != expected:
            raise ValueError(
                f"{path} header {header!r} does not match x0..x{dim - 1},label"
            )
        feats, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ValueError(f"{path}:{line_no} has {len(row)} fields")
            feats.append([float(v) for v in row[:dim]])
            labels.append(int(row[dim]))
    X = np.asarray(feats, dtype=float).reshape(len(labels), dim)
    y = np.asarray(labels, dtype=int)
    if num_classes is None:
        num_classes = int(y.max()) + 1 if y.size else 1
    return Dataset(X, y, num_classes)


def save_partition_csvs(parts, out_dir):
    """One CSV per client shard; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, part in enumerate(parts):
        p = out_dir / f"client_{k:03d}.csv"
        save_csv(part, p)
        paths.append(p)
    return paths
