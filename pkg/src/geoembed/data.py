"""Datasets: synthetic generation, ID-disjoint splits, label controls, file I/O.

A dataset is columnar: features (n, D) float64, class_ids (n,) int64,
aux_labels (n,) int64. Class ids are arbitrary nonnegative integers
(splits keep the original ids); auxiliary labels always live in
[0, num_aux). Feature files are plain text, one example per line:

    #geoembed v1 dim=D classes=C aux=K
    class_id,aux_label,f1,f2,...,fD

with floats written at 17 significant digits so a load(save(ds))
round-trip is bit-exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FeatureFileError
from .mathcore import Rng

_HEADER_PREFIX = "#geoembed v1 "


@dataclass
class Example:
    features: np.ndarray
    class_id: int
    aux_label: int


@dataclass
class Dataset:
    features: np.ndarray
    class_ids: np.ndarray
    aux_labels: np.ndarray
    num_aux: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.aux_labels = np.asarray(self.aux_labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-D array")
        if self.class_ids.shape != (n,) or self.aux_labels.shape != (n,):
            raise ConfigError("label arrays must match the number of examples")
        if not np.isfinite(self.features).all():
            raise ConfigError("features contain non-finite values")
        if n and self.class_ids.min() < 0:
            raise ConfigError("class ids must be nonnegative")
        if self.num_aux < 1:
            raise ConfigError("num_aux must be >= 1")
        if n and not ((self.aux_labels >= 0) & (self.aux_labels < self.num_aux)).all():
            raise ConfigError(f"aux labels must lie in [0, {self.num_aux})")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def classes(self):
        return np.unique(self.class_ids)

    @property
    def num_classes(self):
        return len(self.classes)

    def example(self, i):
        return Example(self.features[i], int(self.class_ids[i]), int(self.aux_labels[i]))

    @property
    def examples(self):
        return [self.example(i) for i in range(len(self))]


def datasets_equal(a, b):
    """Bitwise equality of two datasets."""
    return (
        a.num_aux == b.num_aux
        and a.features.shape == b.features.shape
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.class_ids, b.class_ids)
        and np.array_equal(a.aux_labels, b.aux_labels)
    )


# ---------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Controls for the clustered generator.

    Latent structure: each class has a Gaussian center (scale
    class_spread); each auxiliary label has a latent offset (scale
    aux_offset_scale) shared by all classes. An example's latent point is
    center + offset, pushed through `mixing_depth` random tanh layers
    into input_dim dimensions, plus Gaussian feature noise (noise_scale).
    With probability 1 - aux_consistency an example swaps to a random
    other auxiliary label (offset and stored label move together).
    """

    num_classes: int
    examples_per_class: int
    num_aux: int
    latent_dim: int
    input_dim: int
    class_spread: float = 3.0
    aux_offset_scale: float = 1.0
    noise_scale: float = 0.3
    aux_consistency: float = 1.0
    mixing_depth: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.num_classes, self.examples_per_class, self.num_aux) < 1:
            raise ConfigError("counts must be >= 1")
        if min(self.latent_dim, self.input_dim) < 1:
            raise ConfigError("dimensions must be >= 1")
        if self.class_spread <= 0:
            raise ConfigError("class_spread must be positive")
        if self.aux_offset_scale < 0 or self.noise_scale < 0:
            raise ConfigError("scales must be nonnegative")
        if not 0.0 <= self.aux_consistency <= 1.0:
            raise ConfigError("aux_consistency must lie in [0, 1]")
        if self.mixing_depth < 0:
            raise ConfigError("mixing_depth must be >= 0")
        if self.mixing_depth == 0 and self.input_dim != self.latent_dim:
            raise ConfigError(
                "mixing_depth=0 needs input_dim == latent_dim (identity map)"
            )


def generate_synthetic(spec):
    """Build a dataset from a SyntheticSpec; same seed, same bits."""
    rng = Rng(spec.seed)
    C, m, K, L, D = (
        spec.num_classes,
        spec.examples_per_class,
        spec.num_aux,
        spec.latent_dim,
        spec.input_dim,
    )
    centers = rng.normal_block(C * L, std=spec.class_spread).reshape(C, L)
    offsets = rng.normal_block(K * L, std=spec.aux_offset_scale).reshape(K, L)
    mix = []
    for layer in range(spec.mixing_depth):
        out_dim = D if layer == spec.mixing_depth - 1 else L
        W = rng.normal_block(out_dim * L, std=1.0 / math.sqrt(L)).reshape(out_dim, L)
        mix.append(W)

    n = C * m
    latents = np.empty((n, L))
    noise = np.empty((n, D))
    class_ids = np.empty(n, dtype=np.int64)
    aux_labels = np.empty(n, dtype=np.int64)
    row = 0
    for c in range(C):
        for slot in range(m):
            e = slot % K
            u = rng.random()
            if u >= spec.aux_consistency and K >= 2:
                j = rng.randbelow(K - 1)
                e = j + (1 if j >= e else 0)
            noise[row] = rng.normal_block(D, std=spec.noise_scale)
            latents[row] = centers[c] + offsets[e]
            class_ids[row] = c
            aux_labels[row] = e
            row += 1

    X = latents
    for W in mix:
        X = np.tanh(X @ W.T)
    X = X + noise
    return Dataset(X, class_ids, aux_labels, num_aux=K)


# ---------------------------------------------------------------------
# splits and label controls
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Class-count split. All ints = absolute counts; all floats =
    fractions of the class count (remainder from flooring goes to train
    when the fractions cover everything)."""

    train: float
    val: float
    test: float
    seed: int = 0

    def counts(self, num_classes):
        parts = (self.train, self.val, self.test)
        if all(float(p).is_integer() and p >= 1 for p in parts):
            counts = [int(p) for p in parts]
        else:
            counts = [int(math.floor(p * num_classes)) for p in parts]
            if abs(sum(parts) - 1.0) < 1e-9:
                counts[0] += num_classes - sum(counts)
        if min(counts) < 1:
            raise ConfigError(f"each split needs >= 1 class, got {counts}")
        if sum(counts) > num_classes:
            raise ConfigError(
                f"split {counts} needs {sum(counts)} classes, dataset has {num_classes}"
            )
        return counts


def _subset_by_classes(ds, keep):
    mask = np.isin(ds.class_ids, list(keep))
    return Dataset(
        ds.features[mask], ds.class_ids[mask], ds.aux_labels[mask], ds.num_aux
    )


def split_by_class(ds, split):
    """Partition into (train, val, test) with pairwise-disjoint class sets."""
    classes = [int(c) for c in ds.classes]
    n_train, n_val, n_test = split.counts(len(classes))
    rng = Rng(split.seed)
    rng.shuffle(classes)
    train_c = set(classes[:n_train])
    val_c = set(classes[n_train : n_train + n_val])
    test_c = set(classes[n_train + n_val : n_train + n_val + n_test])
    return (
        _subset_by_classes(ds, train_c),
        _subset_by_classes(ds, val_c),
        _subset_by_classes(ds, test_c),
    )


def shuffle_aux_within_class(ds, seed):
    """Randomly permute each class's auxiliary labels over its examples.

    The per-class label multiset (and everything else) is untouched;
    this is the \"random labels\" control.
    """
    rng = Rng(seed)
    aux = ds.aux_labels.copy()
    for c in sorted(int(c) for c in ds.classes):
        idx = np.nonzero(ds.class_ids == c)[0]
        labels = [int(a) for a in aux[idx]]
        rng.shuffle(labels)
        aux[idx] = labels
    return Dataset(ds.features, ds.class_ids, aux, ds.num_aux)


def corrupt_aux(ds, flip_prob, seed):
    """Independently replace each aux label with a random *different* one
    with probability flip_prob (no-op when only one label exists)."""
    if not 0.0 <= flip_prob <= 1.0:
        raise ConfigError(f"flip_prob must lie in [0, 1], got {flip_prob}")
    rng = Rng(seed)
    aux = ds.aux_labels.copy()
    K = ds.num_aux
    for i in range(len(ds)):
        u = rng.random()
        if u < flip_prob and K >= 2:
            j = rng.randbelow(K - 1)
            old = int(aux[i])
            aux[i] = j + (1 if j >= old else 0)
    return Dataset(ds.features, ds.class_ids, aux, ds.num_aux)


# ---------------------------------------------------------------------
# feature files
# ---------------------------------------------------------------------


def save_features(ds, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_HEADER_PREFIX}dim={ds.dim} classes={ds.num_classes} aux={ds.num_aux}\n"
        )
        for i in range(len(ds)):
            feats = ",".join("%.17g" % x for x in ds.features[i])
            fh.write(f"{ds.class_ids[i]},{ds.aux_labels[i]},{feats}\n")


def _parse_header(line):
    if not line.startswith(_HEADER_PREFIX):
        raise FeatureFileError(
            f"expected header starting with {_HEADER_PREFIX!r}", line=1
        )
    fields = {}
    for tok in line[len(_HEADER_PREFIX) :].split():
        if "=" not in tok:
            raise FeatureFileError(f"malformed header token {tok!r}", line=1)
        key, _, val = tok.partition("=")
        try:
            fields[key] = int(val)
        except ValueError:
            raise FeatureFileError(f"non-integer header value {tok!r}", line=1)
    for key in ("dim", "classes", "aux"):
        if key not in fields:
            raise FeatureFileError(f"header missing {key}=", line=1)
        if fields[key] < 1:
            raise FeatureFileError(f"header {key}={fields[key]} must be >= 1", line=1)
    return fields["dim"], fields["classes"], fields["aux"]


def load_features(path):
    """Parse a feature file; raises FeatureFileError naming the bad line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FeatureFileError("empty file", line=1)
    dim, declared_classes, num_aux = _parse_header(lines[0])
    feats, cids, auxs = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split(",")
        if len(cols) != dim + 2:
            raise FeatureFileError(
                f"expected {dim + 2} columns, found {len(cols)}", line=lineno
            )
        try:
            cid = int(cols[0])
            aux = int(cols[1])
            row = [float(x) for x in cols[2:]]
        except ValueError as exc:
            raise FeatureFileError(f"unparseable value ({exc})", line=lineno)
        if cid < 0:
            raise FeatureFileError(f"negative class id {cid}", line=lineno)
        if not 0 <= aux < num_aux:
            raise FeatureFileError(
                f"aux label {aux} outside [0, {num_aux})", line=lineno
            )
        if not all(math.isfinite(x) for x in row):
            raise FeatureFileError("non-finite feature value", line=lineno)
        cids.append(cid)
        auxs.append(aux)
        feats.append(row)
    if not feats:
        raise FeatureFileError("no examples in file", line=1)
    ds = Dataset(
        np.asarray(feats), np.asarray(cids), np.asarray(auxs), num_aux=num_aux
    )
    if ds.num_classes != declared_classes:
        raise FeatureFileError(
            f"header declares classes={declared_classes} "
            f"but file contains {ds.num_classes}",
            line=1,
        )
    return ds
