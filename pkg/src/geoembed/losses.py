"""Loss family over embeddings constrained by auxiliary labels.

Six terms, each returning (value, analytic gradients):

  TL   triplet margin loss on (anchor, positive, negative)
  PDM  squared distance between same-class same-aux pairs
  PDP  squared difference of two cross-class pair distances
  FBV  squared deviation of a pair displacement from a fixed basis vector
  CE   squared error of a learned composition net predicting the partner
  MTL  cross-entropy of an auxiliary-label classification head

The scalar functions operate on already-projected embeddings and are the
reference semantics; `combined_loss` is the batched version that also
backpropagates through the space projection and the embedding net.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import model as M
from .backend import kernels as K
from .errors import ConfigError, DimensionMismatchError, GeoembedError
from .mathcore import as_vec, sq_l2_dist
from .spaces import SpaceConfig, validate_recipe


class LossKind(enum.Enum):
    TL = "tl"
    PDM = "pdm"
    PDP = "pdp"
    FBV = "fbv"
    CE = "ce"
    MTL = "mtl"


@dataclass(frozen=True)
class LossTerm:
    kind: LossKind
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ConfigError(f"term weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class LossRecipe:
    """Weighted loss terms plus the embedding space they operate in.

    The triplet term anchors every recipe except the pure composition
    one; `hinge` selects max(0, .) for the triplet term (the signed form
    is unbounded below and only useful for analysis).
    """

    terms: tuple
    space: SpaceConfig
    hinge: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        kinds = [t.kind for t in self.terms]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("duplicate loss terms in recipe")
        if LossKind.TL not in kinds and set(kinds) != {LossKind.CE}:
            raise ConfigError(
                "recipe must contain TL unless it is the pure-CE recipe"
            )
        validate_recipe(self.space, [k.name for k in kinds])

    @property
    def kinds(self):
        return [t.kind for t in self.terms]

    def weight(self, kind):
        for t in self.terms:
            if t.kind is kind:
                return t.weight
        return 0.0


# ---------------------------------------------------------------------
# scalar reference losses
# ---------------------------------------------------------------------


def _check_same_dims(*vecs):
    vs = [as_vec(v) for v in vecs]
    if len({v.shape[0] for v in vs}) != 1:
        raise DimensionMismatchError(
            f"embedding dims differ: {[v.shape[0] for v in vs]}"
        )
    return vs


def triplet_loss(ya, yp, yn, margin, hinge=True):
    """max(0, d(a,p) - d(a,n) + margin) and gradients (signed form if
    hinge=False). The subgradient at the hinge kink is 0."""
    ya, yp, yn = _check_same_dims(ya, yp, yn)
    if margin <= 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    s = sq_l2_dist(ya, yp) - sq_l2_dist(ya, yn) + margin
    if hinge and s <= 0.0:
        z = np.zeros_like(ya)
        return 0.0, (z, z.copy(), z.copy())
    ga = 2.0 * (yn - yp)
    gp = -2.0 * (ya - yp)
    gn = 2.0 * (ya - yn)
    return (max(s, 0.0) if hinge else s), (ga, gp, gn)


def pdm_loss(ya, yb):
    """Squared distance pull between a same-class, same-aux pair."""
    ya, yb = _check_same_dims(ya, yb)
    d = ya - yb
    return float(np.dot(d, d)), (2.0 * d, -2.0 * d)


def pdp_loss(y1, y2, y3, y4):
    """(d(y1,y2) - d(y3,y4))^2: preserves a cross-class pair distance."""
    y1, y2, y3, y4 = _check_same_dims(y1, y2, y3, y4)
    s = sq_l2_dist(y1, y2) - sq_l2_dist(y3, y4)
    g12 = 4.0 * s * (y1 - y2)
    g34 = -4.0 * s * (y3 - y4)
    return s * s, (g12, -g12, g34, -g34)


def basis_vector(e_a, e_b, num_aux, dim, magnitude=1.0):
    """Fixed displacement vector for an auxiliary-label pair.

    Label 0 is the origin; label k >= 1 maps to magnitude * u_k (the k-th
    standard basis direction). The pair vector is v(e_b) - v(e_a), so it
    is antisymmetric and path-additive by construction.
    """
    if e_a == e_b:
        raise ConfigError("basis vector needs two distinct labels")
    for e in (e_a, e_b):
        if not 0 <= e < num_aux:
            raise ConfigError(f"label {e} outside [0, {num_aux})")
    if num_aux - 1 > dim:
        raise ConfigError(
            f"{num_aux} labels need {num_aux - 1} embedding dimensions, have {dim}"
        )
    v = np.zeros(dim)
    if e_b > 0:
        v[e_b - 1] += magnitude
    if e_a > 0:
        v[e_a - 1] -= magnitude
    return v


def basis_matrix(num_aux, dim, magnitude=1.0):
    """Row k is the anchor vector v(k) of label k (row 0 is the origin)."""
    if num_aux - 1 > dim:
        raise ConfigError(
            f"{num_aux} labels need {num_aux - 1} embedding dimensions, have {dim}"
        )
    V = np.zeros((num_aux, dim))
    for k in range(1, num_aux):
        V[k, k - 1] = magnitude
    return V


def fbv_loss(ya, yb, v_ab):
    """|| (yb - ya) - v_ab ||^2 and gradients."""
    ya, yb, v_ab = _check_same_dims(ya, yb, v_ab)
    r = yb - ya - v_ab
    return float(np.dot(r, r)), (-2.0 * r, 2.0 * r)


def ce_loss(g, ya, e_a, e_b, yb):
    """Composition-prediction squared error.

    Returns (value, grad_ya, grad_yb, g_param_grads) with g_param_grads
    in g.net.params_flat() order.
    """
    ya, yb = _check_same_dims(ya, yb)
    u = g.inputs(ya, [e_a], [e_b])
    z, tape = M.forward(g.net, u)
    r = z[0] - yb
    dZ = 2.0 * r
    pgrads, dU = M.backward(g.net, tape, dZ[None, :])
    ga = dU[0, : g.embed_dim]
    gb = -dZ
    return float(np.dot(r, r)), ga, gb, M.grads_flat(g.net, pgrads)


def mtl_loss(head, y, e):
    """Cross-entropy -log p_e of the head's softmax prediction.

    Returns (value, grad_y, head_param_grads).
    """
    y = as_vec(y)
    if not 0 <= e < head.num_aux:
        raise ConfigError(f"label {e} outside [0, {head.num_aux})")
    logits, tape = M.forward(head.net, np.ascontiguousarray(y[None, :]))
    z = logits[0]
    zmax = z.max()
    logsum = zmax + np.log(np.exp(z - zmax).sum())
    value = logsum - z[e]
    p = np.exp(z - logsum)
    dlogits = p.copy()
    dlogits[e] -= 1.0
    pgrads, dY = M.backward(head.net, tape, dlogits[None, :])
    return float(value), dY[0], M.grads_flat(head.net, pgrads)


# ---------------------------------------------------------------------
# batched combined loss
# ---------------------------------------------------------------------


@dataclass
class CombinedLossResult:
    value: float
    term_values: dict
    model_grads: np.ndarray
    g_grads: np.ndarray = None
    head_grads: np.ndarray = None


def _positions(index_map, idx):
    return index_map[idx]


def combined_loss(recipe, ds, batch, net, g=None, head=None, compute_grads=True):
    """Weighted mean-per-term loss over a tuple batch, with gradients.

    Embeds the union of referenced examples once, accumulates per-term
    gradients on the projected embeddings, then backpropagates through
    the projection and the net. Gradients for g / head are returned when
    the corresponding term is active.
    """
    active = recipe.kinds
    needed = {
        LossKind.TL: batch.triplets,
        LossKind.PDM: batch.pdm_pairs,
        LossKind.PDP: batch.pdp_quads,
        LossKind.FBV: batch.fbv_pairs,
        LossKind.CE: batch.ce_pairs,
        LossKind.MTL: batch.mtl_examples,
    }
    refs = []
    for kind in active:
        tups = needed[kind]
        if tups.size == 0:
            raise GeoembedError(
                f"batch has no tuples for active loss term {kind.name}"
            )
        refs.append(tups.ravel())
        if kind is LossKind.CE and g is None:
            raise ConfigError("CE term is active but no composition net was given")
        if kind is LossKind.MTL and head is None:
            raise ConfigError("MTL term is active but no classification head was given")

    idx = np.unique(np.concatenate(refs))
    index_map = np.full(int(idx.max()) + 1, -1, dtype=np.int64)
    index_map[idx] = np.arange(idx.size)

    y, etape = M.embed_with_tape(net, recipe.space, ds.features[idx])
    Y = etape.projected
    d = Y.shape[1]
    dY = np.zeros_like(Y)
    aux = ds.aux_labels

    total = 0.0
    term_values = {}
    g_grads = None
    head_grads = None

    for kind in active:
        w = recipe.weight(kind)
        tups = needed[kind]
        B = tups.shape[0]
        scale = w / B

        if kind is LossKind.TL:
            A = _positions(index_map, tups[:, 0])
            P = _positions(index_map, tups[:, 1])
            N = _positions(index_map, tups[:, 2])
            dpos = K.rowwise_sqdist(Y[A], Y[P])
            dneg = K.rowwise_sqdist(Y[A], Y[N])
            s = dpos - dneg + recipe.space.margin
            if recipe.hinge:
                act_mask = s > 0.0
                vals = np.where(act_mask, s, 0.0)
            else:
                act_mask = np.ones_like(s, dtype=bool)
                vals = s
            term = float(vals.mean())
            if compute_grads:
                f = (scale * act_mask).astype(np.float64)[:, None]
                np.add.at(dY, A, 2.0 * (Y[N] - Y[P]) * f)
                np.add.at(dY, P, -2.0 * (Y[A] - Y[P]) * f)
                np.add.at(dY, N, 2.0 * (Y[A] - Y[N]) * f)

        elif kind is LossKind.PDM:
            A = _positions(index_map, tups[:, 0])
            Bp = _positions(index_map, tups[:, 1])
            diff = Y[A] - Y[Bp]
            term = float(np.einsum("ij,ij->i", diff, diff).mean())
            if compute_grads:
                np.add.at(dY, A, 2.0 * scale * diff)
                np.add.at(dY, Bp, -2.0 * scale * diff)

        elif kind is LossKind.PDP:
            P1 = _positions(index_map, tups[:, 0])
            P2 = _positions(index_map, tups[:, 1])
            P3 = _positions(index_map, tups[:, 2])
            P4 = _positions(index_map, tups[:, 3])
            d12 = K.rowwise_sqdist(Y[P1], Y[P2])
            d34 = K.rowwise_sqdist(Y[P3], Y[P4])
            s = d12 - d34
            term = float((s * s).mean())
            if compute_grads:
                f = (scale * 4.0 * s)[:, None]
                np.add.at(dY, P1, f * (Y[P1] - Y[P2]))
                np.add.at(dY, P2, -f * (Y[P1] - Y[P2]))
                np.add.at(dY, P3, -f * (Y[P3] - Y[P4]))
                np.add.at(dY, P4, f * (Y[P3] - Y[P4]))

        elif kind is LossKind.FBV:
            A = _positions(index_map, tups[:, 0])
            Bp = _positions(index_map, tups[:, 1])
            V = basis_matrix(ds.num_aux, d, recipe.space.basis_magnitude)
            v_ab = V[aux[tups[:, 1]]] - V[aux[tups[:, 0]]]
            r = Y[Bp] - Y[A] - v_ab
            term = float(np.einsum("ij,ij->i", r, r).mean())
            if compute_grads:
                np.add.at(dY, Bp, 2.0 * scale * r)
                np.add.at(dY, A, -2.0 * scale * r)

        elif kind is LossKind.CE:
            A = _positions(index_map, tups[:, 0])
            Bp = _positions(index_map, tups[:, 1])
            U = g.inputs(Y[A], aux[tups[:, 0]], aux[tups[:, 1]])
            Z, gtape = M.forward(g.net, U)
            r = Z - Y[Bp]
            term = float(np.einsum("ij,ij->i", r, r).mean())
            if compute_grads:
                dZ = 2.0 * scale * r
                pgrads, dU = M.backward(g.net, gtape, dZ)
                gg = M.grads_flat(g.net, pgrads)
                g_grads = gg if g_grads is None else g_grads + gg
                np.add.at(dY, A, dU[:, :d])
                np.add.at(dY, Bp, -dZ)

        elif kind is LossKind.MTL:
            E = _positions(index_map, tups)
            labels = aux[tups]
            logits, htape = M.forward(head.net, Y[E])
            zmax = logits.max(axis=1, keepdims=True)
            logsum = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
            term = float((logsum - logits[np.arange(B), labels]).mean())
            if compute_grads:
                Pm = np.exp(logits - logsum[:, None])
                Pm[np.arange(B), labels] -= 1.0
                pgrads, dyh = M.backward(head.net, htape, scale * Pm)
                hg = M.grads_flat(head.net, pgrads)
                head_grads = hg if head_grads is None else head_grads + hg
                np.add.at(dY, E, dyh)

        term_values[kind.name] = term
        total += w * term

    model_grads = None
    if compute_grads:
        pgrads, _ = M.embed_backward(net, recipe.space, etape, dY)
        model_grads = M.grads_flat(net, pgrads)
    return CombinedLossResult(total, term_values, model_grads, g_grads, head_grads)
