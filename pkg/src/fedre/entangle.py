"""Representation mapping and entanglement.

A client maps its raw representations to a unified dimension (block average,
block max, or a small learned layer), draws a normalized weight vector over
its local samples with one of six mechanisms, and collapses the whole set
into a single (r_tilde, y_tilde) packet: the weighted sum of mapped
representations paired with the same weighting of the one-hot labels.

Weight mechanisms, grouped by what the weights attach to:

  raw representations          prototypes (per category)
  ----------------------      -------------------------
  rsr  one random sample      rsp  one random category
  var  uniform 1/n            vap  uniform over categories
  rar  random normalized      rap  random normalized over categories
"""

from dataclasses import dataclass, field

import numpy as np

from .nets import (
    DenseNet,
    ShapeError,
    backprop,
    check_label_encoding,
    forward_pass,
)

AP = "ap"
MP = "mp"
FC = "fc"
RM_KINDS = (AP, MP, FC)

RSR = "rsr"
VAR = "var"
RAR = "rar"
RSP = "rsp"
VAP = "vap"
RAP = "rap"
MECHANISMS = (RSR, VAR, RAR, RSP, VAP, RAP)

UNIFORM = "uniform"
GAUSSIAN = "gaussian"
LAPLACE = "laplace"
DISTRIBUTIONS = (UNIFORM, GAUSSIAN, LAPLACE)

WEIGHT_ATOL = 1e-9


@dataclass(eq=False)
class RMSpec:
    """How a client maps its raw dimension down to the unified one."""

    kind: str = AP
    net: DenseNet | None = None  # fc only

    def __post_init__(self):
        if self.kind not in RM_KINDS:
            raise ValueError(f"unknown rm kind {self.kind!r}")
        if self.kind == FC and self.net is None:
            raise ValueError("fc mapping needs a net")


@dataclass
class ReMechanism:
    kind: str = RAP
    weight_distribution: str = UNIFORM  # only drawn on for rar/rap

    def __post_init__(self):
        if self.kind not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.kind!r}")
        if self.weight_distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown weight distribution {self.weight_distribution!r}"
            )


@dataclass(eq=False)
class RepresentationSet:
    """Raw representations paired with one-hot labels."""

    reps: np.ndarray  # (n, raw_dim)
    labels_onehot: np.ndarray  # (n, num_classes)

    def __post_init__(self):
        self.reps = np.asarray(self.reps, dtype=float)
        self.labels_onehot = np.asarray(self.labels_onehot, dtype=float)
        if self.reps.ndim != 2 or self.labels_onehot.ndim != 2:
            raise ShapeError("reps and labels must be 2-d arrays")
        if self.reps.shape[0] != self.labels_onehot.shape[0]:
            raise ShapeError("reps and labels lengths differ")
        for row in self.labels_onehot:
            check_label_encoding(row)
            if not np.isin(row, (0.0, 1.0)).all():
                raise ValueError("labels must be one-hot")

    def __len__(self):
        return self.reps.shape[0]

    @property
    def num_classes(self):
        return self.labels_onehot.shape[1]

    @property
    def labels(self):
        return self.labels_onehot.argmax(axis=1)


@dataclass(eq=False)
class EntangledPacket:
    r_tilde: np.ndarray  # (unified_dim,)
    y_tilde: np.ndarray  # (num_classes,)


@dataclass
class OpCounter:
    """Multiply counter for the entangle combination step."""

    multiplies: int = 0


@dataclass(eq=False)
class RMCache:
    kind: str
    m: int = 1
    argmax: np.ndarray | None = None  # (n, unified_dim) winner offsets for mp
    fc_cache: object = None


def rm_apply(R, rm, unified_dim):
    """Map a batch of raw representations to the unified dimension.

    Returns (mapped (n, unified_dim), RMCache) so gradients can be routed
    back through the mapping.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise ShapeError("rm_apply takes a batch of representation rows")
    n, raw_dim = R.shape
    if rm.kind == FC:
        net = rm.net
        if net.input_dim != raw_dim or net.output_dim != unified_dim:
            raise ShapeError(
                f"fc mapping is {net.input_dim}->{net.output_dim}, need "
                f"{raw_dim}->{unified_dim}"
            )
        out, cache = forward_pass(net, R)
        return out, RMCache(FC, fc_cache=cache)
    if raw_dim % unified_dim != 0:
        raise ShapeError(
            f"raw dimension {raw_dim} is not divisible by unified dimension "
            f"{unified_dim}"
        )
    m = raw_dim // unified_dim
    blocks = R.reshape(n, unified_dim, m)
    if rm.kind == AP:
        return blocks.mean(axis=2), RMCache(AP, m=m)
    winners = blocks.argmax(axis=2)
    mapped = np.take_along_axis(blocks, winners[:, :, None], axis=2)[:, :, 0]
    return mapped, RMCache(MP, m=m, argmax=winners)


def rm_backward(grad_mapped, rm, cache):
    """Route d(loss)/d(mapped) back to the raw representations.

    Returns (d(loss)/d(raw), fc GradientSet or None).
    """
    g = np.asarray(grad_mapped, dtype=float)
    if cache.kind == FC:
        fc_grads, grad_in = backprop(rm.net, cache.fc_cache, g)
        return grad_in, fc_grads
    n, unified_dim = g.shape
    m = cache.m
    if cache.kind == AP:
        grad_blocks = np.repeat(g[:, :, None] / m, m, axis=2)
    else:
        grad_blocks = np.zeros((n, unified_dim, m))
        np.put_along_axis(grad_blocks, cache.argmax[:, :, None], g[:, :, None], axis=2)
    return grad_blocks.reshape(n, unified_dim * m), None


def rm_map(r, rm, unified_dim):
    """Map a single raw representation vector."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise ShapeError("rm_map takes a 1-d representation")
    return rm_apply(r[None, :], rm, unified_dim)[0][0]


def check_weight_vector(w, n=None):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ShapeError("weights must be a 1-d vector")
    if n is not None and w.shape[0] != n:
        raise ShapeError(f"{w.shape[0]} weights for {n} samples")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    if w.min() < -WEIGHT_ATOL or w.max() > 1.0 + WEIGHT_ATOL:
        raise ValueError("weights must lie in [0, 1]")
    if abs(float(w.sum()) - 1.0) > WEIGHT_ATOL:
        raise ValueError(f"weights sum to {w.sum()!r}, expected 1.0")
    return w


def _draw(distribution, size, rng):
    # Gaussian/Laplace draws are folded to nonnegative magnitudes.
    if distribution == UNIFORM:
        return rng.random(size)
    if distribution == GAUSSIAN:
        return np.abs(rng.standard_normal(size))
    return np.abs(rng.laplace(0.0, 1.0, size))


def _positive_draw(distribution, size, rng):
    while True:
        u = _draw(distribution, size, rng)
        if u.sum() > 0:
            return u


def rar_weights_from_draws(u):
    """Normalize raw nonnegative draws into sample weights."""
    u = np.asarray(u, dtype=float)
    if u.sum() <= 0:
        raise ValueError("draws must have positive sum")
    return u / u.sum()


def rap_weights_from_draws(labels, categories, draws):
    """Spread one normalized draw per category evenly over its samples.

    Sample i of category c gets u_c / (n_c * sum_j u_j), so the per-category
    weight mass is u_c / sum_j u_j.
    """
    labels = np.asarray(labels, dtype=int)
    draws = np.asarray(draws, dtype=float)
    if draws.shape[0] != len(categories):
        raise ShapeError("one draw per category required")
    if draws.sum() <= 0:
        raise ValueError("draws must have positive sum")
    pos = {c: i for i, c in enumerate(categories)}
    counts = np.bincount(labels)
    total = draws.sum()
    return np.array(
        [draws[pos[c]] / (counts[c] * total) for c in labels], dtype=float
    )


def re_weights(rep_set, mech, rng):
    """Draw a normalized weight vector over the set's samples."""
    n = len(rep_set)
    if n == 0:
        raise ValueError("cannot weight an empty representation set")
    labels = rep_set.labels
    kind = mech.kind
    if kind == RSR:
        w = np.zeros(n)
        w[int(rng.integers(n))] = 1.0
        return w
    if kind == VAR:
        return np.full(n, 1.0 / n)
    if kind == RAR:
        return rar_weights_from_draws(
            _positive_draw(mech.weight_distribution, n, rng)
        )
    categories = np.unique(labels)  # sorted; fixes the draw order
    counts = np.bincount(labels)
    if kind == RSP:
        chosen = categories[int(rng.integers(categories.size))]
        w = np.where(labels == chosen, 1.0 / counts[chosen], 0.0)
        return w
    if kind == VAP:
        return np.array(
            [1.0 / (categories.size * counts[c]) for c in labels], dtype=float
        )
    # rap
    u = _positive_draw(mech.weight_distribution, categories.size, rng)
    return rap_weights_from_draws(labels, categories, u)


def entangle(rep_set, w, rm, unified_dim, counter=None):
    """Collapse a representation set into one entangled packet.

    r_tilde = sum_i w_i * rm(rep_i), y_tilde = sum_i w_i * onehot_i. The
    optional counter tallies the multiplies of the two weighted sums, which
    is n*(unified_dim + num_classes).
    """
    n = len(rep_set)
    w = check_weight_vector(w, n)
    mapped, _ = rm_apply(rep_set.reps, rm, unified_dim)
    r_tilde = w @ mapped
    y_tilde = w @ rep_set.labels_onehot
    if counter is not None:
        counter.multiplies += n * unified_dim + n * rep_set.num_classes
    return EntangledPacket(r_tilde, y_tilde)


def mixup_pair(r_i, y_i, r_j, y_j, lam):
    """Two-sample convex interpolation of mapped representations and labels."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda {lam} outside [0, 1]")
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    if r_i.shape != r_j.shape:
        raise ShapeError("representation dimensions differ")
    y_i = check_label_encoding(y_i)
    y_j = check_label_encoding(y_j, num_classes=y_i.shape[0])
    return EntangledPacket(
        lam * r_i + (1.0 - lam) * r_j, lam * y_i + (1.0 - lam) * y_j
    )


def compute_prototypes(rep_set, rm, unified_dim):
    """Per-category means of the mapped representations.

    Returns [(category, prototype)] sorted by category index.
    """
    if len(rep_set) == 0:
        raise ValueError("cannot build prototypes from an empty set")
    mapped, _ = rm_apply(rep_set.reps, rm, unified_dim)
    labels = rep_set.labels
    return [
        (int(c), mapped[labels == c].mean(axis=0)) for c in np.unique(labels)
    ]
