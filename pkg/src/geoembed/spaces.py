"""Embedding-space choice (Euclidean vs spherical) and its margins."""

import enum
from dataclasses import dataclass

import numpy as np

from .backend import kernels as K
from .errors import ConfigError, DegenerateEmbeddingError
from .mathcore import EPS_NORM, as_vec, l2_normalize


class SpaceKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERICAL = "spherical"


@dataclass(frozen=True)
class SpaceConfig:
    """Embedding space plus the scale knobs tied to it.

    margin is the triplet margin; basis_magnitude is the length of the
    fixed displacement vectors used by the basis-vector loss (only
    meaningful in Euclidean space).
    """

    kind: SpaceKind
    margin: float
    basis_magnitude: float = 1.0

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.basis_magnitude <= 0:
            raise ConfigError(
                f"basis_magnitude must be positive, got {self.basis_magnitude}"
            )

    @staticmethod
    def spherical(margin=1.0):
        return SpaceConfig(SpaceKind.SPHERICAL, margin)

    @staticmethod
    def euclidean(margin=5.0, basis_magnitude=1.0):
        return SpaceConfig(SpaceKind.EUCLIDEAN, margin, basis_magnitude)


def project(space, raw):
    """Map a raw model output into the embedding space.

    Identity for Euclidean; L2 normalization for spherical (error on
    near-zero input).
    """
    raw = as_vec(raw)
    if space.kind is SpaceKind.SPHERICAL:
        return l2_normalize(raw)
    return raw


def project_rows(space, Z):
    """Batch projection. Returns (Y, norms); norms is None for Euclidean."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if space.kind is SpaceKind.EUCLIDEAN:
        return Z, None
    Y, norms = K.l2normalize_rows(Z)
    if norms.size and norms.min() <= EPS_NORM:
        bad = int(np.argmin(norms))
        raise DegenerateEmbeddingError(
            f"row {bad} has norm {norms[bad]:.3e}; cannot project onto the sphere"
        )
    return Y, norms


def project_rows_backward(space, Y, norms, dY):
    """Chain rule through project_rows."""
    if space.kind is SpaceKind.EUCLIDEAN:
        return dY
    return K.l2normalize_rows_backward(Y, norms, dY)


# Loss-term names that only make sense in a particular space.
_EUCLIDEAN_ONLY = ("FBV",)


def validate_recipe(space, terms):
    """Reject loss-term combinations incompatible with the space.

    `terms` is an iterable of term identifiers (strings or enums with a
    .name). Displacement-to-a-fixed-vector terms need an unconstrained
    Euclidean space; everything else works in either.
    """
    names = [getattr(t, "name", str(t)).upper() for t in terms]
    if space.kind is SpaceKind.SPHERICAL:
        for name in names:
            if name in _EUCLIDEAN_ONLY:
                raise ConfigError(
                    f"loss term {name} requires a Euclidean embedding space"
                )
