"""Experiment configuration: recipe registry and the key=value file format.

Config files are flat text, one `section.key=value` per line, `#` for
comments. Every run-controlling value lives here so an experiment is
replayable from (config file, seeds) alone.
"""

from dataclasses import dataclass, field, replace

from .data import SplitSpec, SyntheticSpec
from .errors import ConfigError
from .losses import LossKind, LossRecipe, LossTerm
from .spaces import SpaceConfig
from .training import TrainConfig

# recipe name -> (term kinds, spherical?)
_RECIPES = {
    "TL_S": ((LossKind.TL,), True),
    "TL_E": ((LossKind.TL,), False),
    "TL_MTL_S": ((LossKind.TL, LossKind.MTL), True),
    "TL_PDM_S": ((LossKind.TL, LossKind.PDM), True),
    "TL_PDP_S": ((LossKind.TL, LossKind.PDP), True),
    "TL_PDM_FBV_E": ((LossKind.TL, LossKind.PDM, LossKind.FBV), False),
    "TL_PDP_FBV_E": ((LossKind.TL, LossKind.PDP, LossKind.FBV), False),
    "CE_S": ((LossKind.CE,), True),
    "TL_CE_S": ((LossKind.TL, LossKind.CE), True),
}

RECIPE_NAMES = tuple(_RECIPES)


def build_recipe(name, margin_spherical=1.0, margin_euclidean=5.0,
                 basis_magnitude=1.0, hinge=True, weights=None):
    """LossRecipe for a registered name; weights default to 1.0 each."""
    if name not in _RECIPES:
        raise ConfigError(
            f"unknown recipe {name!r}; known: {', '.join(RECIPE_NAMES)}"
        )
    kinds, spherical = _RECIPES[name]
    if spherical:
        space = SpaceConfig.spherical(margin_spherical)
    else:
        space = SpaceConfig.euclidean(margin_euclidean, basis_magnitude)
    terms = tuple(
        LossTerm(k, (weights or {}).get(k, 1.0)) for k in kinds
    )
    return LossRecipe(terms, space, hinge=hinge)


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticSpec = field(
        default_factory=lambda: SyntheticSpec(
            num_classes=40,
            examples_per_class=20,
            num_aux=4,
            latent_dim=8,
            input_dim=32,
            class_spread=3.0,
            aux_offset_scale=1.0,
            noise_scale=0.3,
            aux_consistency=1.0,
            mixing_depth=1,
            seed=101,
        )
    )
    features_path: str = None  # overrides the synthetic source when set
    split: SplitSpec = field(default_factory=lambda: SplitSpec(24, 8, 8, seed=202))
    recipes: tuple = ("TL_S", "TL_E", "TL_MTL_S", "TL_PDM_S", "TL_PDP_S",
                      "TL_PDM_FBV_E", "TL_PDP_FBV_E", "CE_S", "TL_CE_S")
    seeds: tuple = (1, 2, 3, 4, 5)
    train: TrainConfig = field(default_factory=TrainConfig)
    embed_dim: int = 32
    hidden: tuple = (128, 64)
    margin_spherical: float = 1.0
    margin_euclidean: float = 5.0
    basis_magnitude: float = 1.0
    hinge: bool = True
    max_pairs: int = 20000
    sizes: tuple = (1000, 3000, 10000, 30000, 100000)
    flip_probs: tuple = (0.0, 0.15, 0.3, 0.5)
    re_recipe: str = "TL_PDM_FBV_E"
    corruption_recipe: str = "TL_PDP_FBV_E"
    sweep_recipes: tuple = ("TL_S", "TL_PDP_S", "TL_PDP_FBV_E")

    def __post_init__(self):
        for name in self.recipes + (self.re_recipe, self.corruption_recipe) \
                + self.sweep_recipes:
            if name not in _RECIPES:
                raise ConfigError(f"unknown recipe {name!r}")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def recipe(self, name):
        return build_recipe(
            name,
            margin_spherical=self.margin_spherical,
            margin_euclidean=self.margin_euclidean,
            basis_magnitude=self.basis_magnitude,
            hinge=self.hinge,
        )


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _str_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _num(text):
    f = float(text)
    return int(f) if f.is_integer() else f


# key -> (group, field, caster); groups are merged into the dataclasses
_SCHEMA = {
    "data.num_classes": ("synthetic", "num_classes", int),
    "data.examples_per_class": ("synthetic", "examples_per_class", int),
    "data.num_aux": ("synthetic", "num_aux", int),
    "data.latent_dim": ("synthetic", "latent_dim", int),
    "data.input_dim": ("synthetic", "input_dim", int),
    "data.class_spread": ("synthetic", "class_spread", float),
    "data.aux_offset_scale": ("synthetic", "aux_offset_scale", float),
    "data.noise_scale": ("synthetic", "noise_scale", float),
    "data.aux_consistency": ("synthetic", "aux_consistency", float),
    "data.mixing_depth": ("synthetic", "mixing_depth", int),
    "data.seed": ("synthetic", "seed", int),
    "data.features": ("top", "features_path", str),
    "split.train": ("split", "train", _num),
    "split.val": ("split", "val", _num),
    "split.test": ("split", "test", _num),
    "split.seed": ("split", "seed", int),
    "train.epochs": ("train", "epochs", int),
    "train.batches_per_epoch": ("train", "batches_per_epoch", int),
    "train.batch_size": ("train", "batch_size", int),
    "train.patience": ("train", "patience", int),
    "train.learning_rate": ("train", "learning_rate", float),
    "train.val_batches": ("train", "val_batches", int),
    "train.validate_on_composite": ("train", "validate_on_composite", _bool),
    "train.max_retries": ("train", "max_retries", int),
    "model.embed_dim": ("top", "embed_dim", int),
    "model.hidden": ("top", "hidden", _int_list),
    "space.margin_spherical": ("top", "margin_spherical", float),
    "space.margin_euclidean": ("top", "margin_euclidean", float),
    "space.basis_magnitude": ("top", "basis_magnitude", float),
    "loss.hinge": ("top", "hinge", _bool),
    "eval.max_pairs": ("top", "max_pairs", int),
    "run.recipes": ("top", "recipes", _str_list),
    "run.seeds": ("top", "seeds", _int_list),
    "run.sizes": ("top", "sizes", _int_list),
    "run.flip_probs": ("top", "flip_probs", _float_list),
    "run.re_recipe": ("top", "re_recipe", str),
    "run.corruption_recipe": ("top", "corruption_recipe", str),
    "run.sweep_recipes": ("top", "sweep_recipes", _str_list),
}


def parse_config(text):
    """ExperimentConfig from config-file text (defaults where unset)."""
    groups = {"synthetic": {}, "split": {}, "train": {}, "top": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        group, fname, caster = _SCHEMA[key]
        try:
            groups[group][fname] = caster(value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")

    base = ExperimentConfig()
    synthetic = replace(base.synthetic, **groups["synthetic"])
    split = replace(base.split, **groups["split"])
    train = replace(base.train, **groups["train"])
    return replace(base, synthetic=synthetic, split=split, train=train,
                   **groups["top"])


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
