"""Tuple samplers feeding each loss term, plus an independent validator.

Every emitted tuple satisfies its constraint set by construction (drawn
from precomputed eligibility structures, with rejection only where a
draw can collide). The validator re-checks the constraints from scratch
so tests can hold the sampler to a second opinion.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingError
from .losses import LossKind
from .mathcore import Rng


@dataclass
class TupleBatch:
    """Index tuples per loss kind; empty arrays for inactive kinds."""

    triplets: np.ndarray = field(default_factory=lambda: np.empty((0, 3), np.int64))
    pdm_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    pdp_quads: np.ndarray = field(default_factory=lambda: np.empty((0, 4), np.int64))
    fbv_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    ce_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    mtl_examples: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


@dataclass(frozen=True)
class SamplerConfig:
    """batch_size applies to every active tuple kind unless overridden in
    `sizes`; max_retries bounds the redraw rounds of each rejection stage."""

    batch_size: int = 128
    sizes: dict = None
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise SamplingError("batch_size must be positive")

    def size_for(self, kind):
        if self.sizes and kind in self.sizes:
            return self.sizes[kind]
        return self.batch_size


class DatasetIndex:
    """Precomputed lookup structures for constraint-respecting draws."""

    def __init__(self, ds):
        self.ds = ds
        n = len(ds)
        self.n = n
        self.K = ds.num_aux
        classes = ds.classes
        self.C = len(classes)
        remap = {int(c): i for i, c in enumerate(classes)}
        self.class_pos = np.array(
            [remap[int(c)] for c in ds.class_ids], dtype=np.int64
        )
        self.aux = ds.aux_labels

        order = np.lexsort((np.arange(n), self.class_pos))
        self.class_members = order.astype(np.int64)
        self.class_ptr = np.zeros(self.C + 1, dtype=np.int64)
        np.add.at(self.class_ptr, self.class_pos + 1, 1)
        np.cumsum(self.class_ptr, out=self.class_ptr)
        self.class_size = np.diff(self.class_ptr)
        self.rank_in_class = np.empty(n, dtype=np.int64)
        for c in range(self.C):
            lo, hi = self.class_ptr[c], self.class_ptr[c + 1]
            self.rank_in_class[self.class_members[lo:hi]] = np.arange(hi - lo)

        cell_key = self.class_pos * self.K + self.aux
        order = np.lexsort((np.arange(n), cell_key))
        self.cell_members = order.astype(np.int64)
        self.cell_ptr = np.zeros(self.C * self.K + 1, dtype=np.int64)
        np.add.at(self.cell_ptr, cell_key + 1, 1)
        np.cumsum(self.cell_ptr, out=self.cell_ptr)
        self.cell_size = np.diff(self.cell_ptr)
        self.rank_in_cell = np.empty(n, dtype=np.int64)
        for key in range(self.C * self.K):
            lo, hi = self.cell_ptr[key], self.cell_ptr[key + 1]
            self.rank_in_cell[self.cell_members[lo:hi]] = np.arange(hi - lo)

        # same-class, different-aux partner lists per (class, aux) cell
        diff_lists = []
        self.diff_ptr = np.zeros(self.C * self.K + 1, dtype=np.int64)
        for c in range(self.C):
            members = self.class_members[self.class_ptr[c] : self.class_ptr[c + 1]]
            for a in range(self.K):
                partners = members[self.aux[members] != a]
                diff_lists.append(partners)
                self.diff_ptr[c * self.K + a + 1] = (
                    self.diff_ptr[c * self.K + a] + len(partners)
                )
        self.diff_members = (
            np.concatenate(diff_lists) if diff_lists else np.empty(0, np.int64)
        )
        self.diff_size = np.diff(self.diff_ptr)

        present = (self.cell_size.reshape(self.C, self.K) > 0)
        self.present = present
        self.common_count = present.astype(np.int64) @ present.astype(np.int64).T

        all_idx = np.arange(n)
        self.elig_triplet = all_idx[self.class_size[self.class_pos] >= 2]
        self.elig_pdm = all_idx[self.cell_size[cell_key] >= 2]
        self.elig_crossaux = all_idx[self.diff_size[cell_key] >= 1]
        offdiag = self.common_count.copy()
        np.fill_diagonal(offdiag, 0)
        self.pdp_feasible = bool((offdiag >= 2).any())

    # -- feasibility ---------------------------------------------------

    def require(self, kind):
        if kind is LossKind.TL or kind is LossKind.MTL:
            if self.C < 2:
                raise SamplingError("triplet sampling needs at least 2 classes")
            if self.elig_triplet.size == 0:
                raise SamplingError(
                    "no anchor/positive pair available: every class has one example"
                )
        elif kind is LossKind.PDM:
            if self.elig_pdm.size == 0:
                raise SamplingError(
                    "no same-class same-aux pair available for PDM"
                )
        elif kind in (LossKind.FBV, LossKind.CE):
            if self.elig_crossaux.size == 0:
                raise SamplingError(
                    f"no cross-aux pair available for {kind.name}: "
                    "no class carries two distinct auxiliary labels"
                )
        elif kind is LossKind.PDP:
            if not self.pdp_feasible:
                raise SamplingError(
                    "no PDP quadruple available: no two classes share "
                    "two auxiliary labels"
                )


def _pick_from(rng, pool, count):
    return pool[rng.randbelow_block(count, len(pool))]


def _skip(j, rank):
    return j + (j >= rank)


def _sample_triplets(ix, rng, B, max_retries):
    a = _pick_from(rng, ix.elig_triplet, B)
    ac = ix.class_pos[a]
    j = _skip(rng.randbelow_block(B, ix.class_size[ac] - 1), ix.rank_in_class[a])
    p = ix.class_members[ix.class_ptr[ac] + j]
    n = rng.randbelow_block(B, ix.n)
    bad = ix.class_pos[n] == ac
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > max_retries:
            raise SamplingError("max_retries exhausted drawing triplet negatives")
        idx = np.nonzero(bad)[0]
        n[idx] = rng.randbelow_block(len(idx), ix.n)
        bad[idx] = ix.class_pos[n[idx]] == ac[idx]
    return np.stack([a, p, n], axis=1)


def _sample_pdm(ix, rng, B):
    a = _pick_from(rng, ix.elig_pdm, B)
    key = ix.class_pos[a] * ix.K + ix.aux[a]
    j = _skip(rng.randbelow_block(B, ix.cell_size[key] - 1), ix.rank_in_cell[a])
    b = ix.cell_members[ix.cell_ptr[key] + j]
    return np.stack([a, b], axis=1)


def _sample_crossaux(ix, rng, B):
    a = _pick_from(rng, ix.elig_crossaux, B)
    key = ix.class_pos[a] * ix.K + ix.aux[a]
    j = rng.randbelow_block(B, ix.diff_size[key])
    b = ix.diff_members[ix.diff_ptr[key] + j]
    return np.stack([a, b], axis=1)


def _sample_pdp(ix, rng, B, max_retries):
    c1 = rng.randbelow_block(B, ix.C)
    c3 = _skip(rng.randbelow_block(B, ix.C - 1), c1)
    bad = ix.common_count[c1, c3] < 2
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > max_retries:
            raise SamplingError("max_retries exhausted drawing PDP class pairs")
        idx = np.nonzero(bad)[0]
        c1[idx] = rng.randbelow_block(len(idx), ix.C)
        c3[idx] = _skip(rng.randbelow_block(len(idx), ix.C - 1), c1[idx])
        bad[idx] = ix.common_count[c1[idx], c3[idx]] < 2

    common = ix.present[c1] & ix.present[c3]  # (B, K) bool
    cnt = common.sum(axis=1)
    i = rng.randbelow_block(B, cnt)
    j = _skip(rng.randbelow_block(B, cnt - 1), i)
    cum = np.cumsum(common, axis=1)
    label_a = np.argmax((cum == (i + 1)[:, None]) & common, axis=1)
    label_b = np.argmax((cum == (j + 1)[:, None]) & common, axis=1)

    def member(cls, lab):
        key = cls * ix.K + lab
        k = rng.randbelow_block(B, ix.cell_size[key])
        return ix.cell_members[ix.cell_ptr[key] + k]

    x1 = member(c1, label_a)
    x2 = member(c1, label_b)
    x3 = member(c3, label_a)
    x4 = member(c3, label_b)
    return np.stack([x1, x2, x3, x4], axis=1)


_KIND_ORDER = [
    LossKind.TL,
    LossKind.PDM,
    LossKind.PDP,
    LossKind.FBV,
    LossKind.CE,
    LossKind.MTL,
]


def sample_batch(ds, recipe, cfg, rng=None, index=None):
    """One TupleBatch with cfg.size_for(kind) tuples per active kind.

    Deterministic given the rng stream; the MTL stream reuses the
    triplet anchors rather than consuming extra draws.
    """
    if rng is None:
        rng = Rng(cfg.seed)
    ix = index if index is not None else DatasetIndex(ds)
    active = set(recipe.kinds)
    batch = TupleBatch()
    for kind in _KIND_ORDER:
        if kind not in active:
            continue
        ix.require(kind)
        B = cfg.size_for(kind)
        if kind is LossKind.TL:
            batch.triplets = _sample_triplets(ix, rng, B, cfg.max_retries)
        elif kind is LossKind.PDM:
            batch.pdm_pairs = _sample_pdm(ix, rng, B)
        elif kind is LossKind.PDP:
            batch.pdp_quads = _sample_pdp(ix, rng, B, cfg.max_retries)
        elif kind is LossKind.FBV:
            batch.fbv_pairs = _sample_crossaux(ix, rng, B)
        elif kind is LossKind.CE:
            batch.ce_pairs = _sample_crossaux(ix, rng, B)
        elif kind is LossKind.MTL:
            if batch.triplets.size == 0:
                raise SamplingError(
                    "MTL examples reuse triplet anchors; no triplets were sampled"
                )
            batch.mtl_examples = batch.triplets[:, 0].copy()
    return batch


def validate_tuples(ds, batch):
    """Re-check every tuple constraint from scratch.

    Returns a list of violation strings (empty = all good); violations
    are data, not exceptions.
    """
    c = ds.class_ids
    e = ds.aux_labels
    out = []
    for t, (a, p, n) in enumerate(batch.triplets):
        if a == p:
            out.append(f"triplet {t}: anchor == positive")
        if c[a] != c[p]:
            out.append(f"triplet {t}: c(a) != c(p)")
        if c[a] == c[n]:
            out.append(f"triplet {t}: c(a) == c(n)")
    for t, (a, b) in enumerate(batch.pdm_pairs):
        if a == b:
            out.append(f"pdm pair {t}: a == b")
        if c[a] != c[b]:
            out.append(f"pdm pair {t}: c(a) != c(b)")
        if e[a] != e[b]:
            out.append(f"pdm pair {t}: e(a) != e(b)")
    for name, pairs in (("fbv", batch.fbv_pairs), ("ce", batch.ce_pairs)):
        for t, (a, b) in enumerate(pairs):
            if c[a] != c[b]:
                out.append(f"{name} pair {t}: c(a) != c(b)")
            if e[a] == e[b]:
                out.append(f"{name} pair {t}: e(a) == e(b)")
    for t, (x1, x2, x3, x4) in enumerate(batch.pdp_quads):
        if c[x1] != c[x2]:
            out.append(f"pdp quad {t}: c(x1) != c(x2)")
        if c[x3] != c[x4]:
            out.append(f"pdp quad {t}: c(x3) != c(x4)")
        if c[x1] == c[x3]:
            out.append(f"pdp quad {t}: c(x1) == c(x3)")
        if e[x1] != e[x3]:
            out.append(f"pdp quad {t}: e(x1) != e(x3)")
        if e[x2] != e[x4]:
            out.append(f"pdp quad {t}: e(x2) != e(x4)")
        if e[x1] == e[x2]:
            out.append(f"pdp quad {t}: e(x1) == e(x2)")
    return out
