"""Verification evaluation: pair building, rank-statistic AUC, ROC,
PCA export, and cluster-geometry diagnostics.

Pair score is the negative squared distance between the two embeddings
(any strictly monotone choice gives the same AUC). Ties count one half,
i.e. the Mann-Whitney convention, so the AUC equals the probability a
random positive pair outscores a random negative pair plus half the tie
probability.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels as K
from .errors import ConfigError, GeoembedError
from .losses import basis_matrix
from .mathcore import Rng, pca_project
from .svgplot import scatter_svg


@dataclass
class VerificationPairSet:
    pairs: np.ndarray  # (m, 2) int64 example indices
    same: np.ndarray  # (m,) bool
    exhaustive: bool
    seed: int

    @property
    def num_pos(self):
        return int(self.same.sum())

    @property
    def num_neg(self):
        return int((~self.same).sum())


@dataclass
class GeometryDiagnostics:
    """Cluster shape summaries over (class, aux) cells of the embeddings.

    pdm_radius: mean member-to-centroid distance within cells (>= 2 members).
    pdp_spread: mean over aux pairs of the across-class standard deviation
        of the centroid-to-centroid distance.
    fbv_residual: mean norm of (centroid_b - centroid_a) - v_ab.
    Entries are None when the structure needed to measure them is absent.
    """

    pdm_radius: float
    pdp_spread: float
    fbv_residual: float


@dataclass
class EvaluationReport:
    auc: float
    roc: np.ndarray  # (m, 2) of (fpr, tpr)
    num_pos: int
    num_neg: int
    pca_coords: np.ndarray = None
    diagnostics: GeometryDiagnostics = None


def build_pairs(ds, max_pairs=20000, seed=0):
    """All example pairs when that fits in max_pairs, else a stratified
    subsample with equal positive/negative counts (without replacement)."""
    n = len(ds)
    cls = ds.class_ids
    total = n * (n - 1) // 2
    classes, counts = np.unique(cls, return_counts=True)
    num_pos_all = int((counts * (counts - 1) // 2).sum())
    num_neg_all = total - num_pos_all
    if num_pos_all == 0:
        raise GeoembedError("no positive pairs: every class has a single example")
    if num_neg_all == 0:
        raise GeoembedError("no negative pairs: dataset has a single class")

    if total <= max_pairs:
        iu = np.triu_indices(n, k=1)
        pairs = np.stack([iu[0], iu[1]], axis=1).astype(np.int64)
        same = cls[pairs[:, 0]] == cls[pairs[:, 1]]
        return VerificationPairSet(pairs, same, True, seed)

    rng = Rng(seed)
    k = min(num_pos_all, num_neg_all, max_pairs // 2)
    by_class = {int(c): np.nonzero(cls == c)[0] for c in classes}
    pos_weights = [(int(c), int(m) * (int(m) - 1) // 2)
                   for c, m in zip(classes, counts) if m >= 2]
    total_pos_weight = sum(w for _, w in pos_weights)

    def draw_pos():
        r = rng.randbelow(total_pos_weight)
        for c, w in pos_weights:
            if r < w:
                members = by_class[c]
                i = rng.randbelow(len(members))
                j = rng.randbelow(len(members) - 1)
                j += j >= i
                return int(members[i]), int(members[j])
            r -= w
        raise AssertionError("unreachable")

    seen = set()
    pos = []
    while len(pos) < k:
        i, j = draw_pos()
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            pos.append(key)
    neg = []
    while len(neg) < k:
        i = rng.randbelow(n)
        j = rng.randbelow(n)
        if i == j or cls[i] == cls[j]:
            continue
        key = (min(i, j), max(i, j))
        if key not in seen:
            seen.add(key)
            neg.append(key)
    pairs = np.asarray(pos + neg, dtype=np.int64)
    same = np.zeros(2 * k, dtype=bool)
    same[:k] = True
    return VerificationPairSet(pairs, same, False, seed)


def pair_scores(embeddings, pairset):
    """Similarity scores (negative squared distance) per pair."""
    Y = np.ascontiguousarray(embeddings, dtype=np.float64)
    A = np.ascontiguousarray(Y[pairset.pairs[:, 0]])
    B = np.ascontiguousarray(Y[pairset.pairs[:, 1]])
    return -K.rowwise_sqdist(A, B)


def auc_from_scores(scores, labels):
    """Mann-Whitney AUC with average ranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    npos = int(labels.sum())
    nneg = labels.size - npos
    if npos == 0 or nneg == 0:
        raise GeoembedError("AUC needs at least one positive and one negative pair")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average of ranks i+1..j+1
        i = j + 1
    rank_sum = ranks[labels].sum()
    u = rank_sum - npos * (npos + 1) / 2.0
    return float(u / (npos * nneg))


def roc_points(scores, labels):
    """ROC polyline from (0,0) to (1,1); tied scores step jointly."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    npos = int(labels.sum())
    nneg = labels.size - npos
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    boundaries = np.nonzero(np.diff(s))[0]
    cut = np.concatenate([boundaries, [s.size - 1]])
    tp = np.cumsum(l)[cut]
    fp = np.cumsum(~l)[cut]
    pts = np.empty((cut.size + 1, 2))
    pts[0] = (0.0, 0.0)
    pts[1:, 0] = fp / nneg
    pts[1:, 1] = tp / npos
    return pts


def verification_auc(embeddings, pairset):
    """Score every pair and report AUC, ROC and pair counts."""
    scores = pair_scores(embeddings, pairset)
    auc = auc_from_scores(scores, pairset.same)
    roc = roc_points(scores, pairset.same)
    return EvaluationReport(auc, roc, pairset.num_pos, pairset.num_neg)


# ---------------------------------------------------------------------
# PCA export
# ---------------------------------------------------------------------


def pca_export(embeddings, class_ids, aux_labels, csv_path, svg_path=None):
    """Write (pc1, pc2, class_id, aux_label) rows plus an optional scatter
    (color = class, glyph = aux label). Returns the projected coords."""
    Y = np.asarray(embeddings, dtype=np.float64)
    if Y.shape[0] < 2:
        raise ConfigError("PCA export needs at least 2 embeddings")
    k = min(2, Y.shape[1])
    proj, _ = pca_project(Y, k)
    if k == 1:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 1))])
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("pc1,pc2,class_id,aux_label\n")
        for row, c, a in zip(proj, class_ids, aux_labels):
            fh.write(f"{row[0]!r},{row[1]!r},{int(c)},{int(a)}\n")
    if svg_path is not None:
        pts = [
            (float(row[0]), float(row[1]), int(c), int(a))
            for row, c, a in zip(proj, class_ids, aux_labels)
        ]
        scatter_svg(svg_path, pts, title="embedding PCA")
    return proj


# ---------------------------------------------------------------------
# geometry diagnostics
# ---------------------------------------------------------------------


def geometry_diagnostics(embeddings, class_ids, aux_labels, num_aux,
                         basis_magnitude=1.0):
    """Measure how regular the (class, aux) cell structure is; see
    GeometryDiagnostics for the three summaries."""
    Y = np.asarray(embeddings, dtype=np.float64)
    class_ids = np.asarray(class_ids)
    aux_labels = np.asarray(aux_labels)
    d = Y.shape[1]
    centroids = {}
    radii = []
    for c in np.unique(class_ids):
        for a in range(num_aux):
            mask = (class_ids == c) & (aux_labels == a)
            m = int(mask.sum())
            if m == 0:
                continue
            cell = Y[mask]
            mu = cell.mean(axis=0)
            centroids[(int(c), int(a))] = mu
            if m >= 2:
                radii.append(float(np.linalg.norm(cell - mu, axis=1).mean()))
    pdm_radius = float(np.mean(radii)) if radii else None

    if num_aux - 1 <= d:
        V = basis_matrix(num_aux, d, basis_magnitude)
    else:
        V = None
    spreads = []
    residuals = []
    for a in range(num_aux):
        for b in range(a + 1, num_aux):
            dists = []
            resid = []
            for c in np.unique(class_ids):
                ka, kb = (int(c), a), (int(c), b)
                if ka not in centroids or kb not in centroids:
                    continue
                delta = centroids[kb] - centroids[ka]
                dists.append(float(np.linalg.norm(delta)))
                if V is not None:
                    resid.append(float(np.linalg.norm(delta - (V[b] - V[a]))))
            if len(dists) >= 2:
                spreads.append(float(np.std(dists)))
            if resid:
                residuals.append(float(np.mean(resid)))
    pdp_spread = float(np.mean(spreads)) if spreads else None
    fbv_residual = float(np.mean(residuals)) if residuals else None
    return GeometryDiagnostics(pdm_radius, pdp_spread, fbv_residual)
