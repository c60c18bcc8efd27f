"""Adam optimization and the training loop with validation early stopping.

Validation defaults to the triplet term alone on a tuple set frozen at
the start of the run, so every recipe is scored on the same yardstick;
set validate_on_composite for the full weighted loss instead. The whole
loop is a pure function of (inputs, seed): rerunning a config reproduces
the log bit for bit.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as M
from .backend import kernels as K
from .errors import ConfigError, TrainingDivergedError
from .losses import LossKind, LossRecipe, LossTerm, combined_loss
from .mathcore import Rng, derive_seed
from .sampling import DatasetIndex, SamplerConfig, sample_batch


@dataclass
class AdamState:
    """First/second moment estimates plus hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(num_params, learning_rate=0.001):
        return AdamState(np.zeros(num_params), np.zeros(num_params),
                         learning_rate=learning_rate)


def adam_step(state, params, grads):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ConfigError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"moments {state.m.shape}"
        )
    new = replace(state, m=state.m.copy(), v=state.v.copy(), t=state.t + 1)
    out = params.copy()
    K.adam_update(out, grads, new.m, new.v, new.t, new.learning_rate,
                  new.beta1, new.beta2, new.eps)
    return out, new


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batches_per_epoch: int = 50
    batch_size: int = 128
    patience: int = 10
    learning_rate: float = 0.001
    seed: int = 0
    val_batches: int = 10
    validate_on_composite: bool = False
    max_retries: int = 100
    max_tuples: int = None  # cap on triplets observed (size sweeps)

    def __post_init__(self):
        for name in ("epochs", "batches_per_epoch", "batch_size", "patience",
                     "val_batches"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class EpochStats:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float
    term_means: dict


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    tuples_seen: int = 0

    def to_csv(self, path):
        kinds = sorted(self.epochs[0].term_means) if self.epochs else []
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,val_loss"
                     + "".join(f",loss_{k.lower()}" for k in kinds) + "\n")
            for st in self.epochs:
                row = [str(st.epoch), repr(st.train_loss), repr(st.val_loss)]
                row += [repr(st.term_means[k]) for k in kinds]
                fh.write(",".join(row) + "\n")


@dataclass
class TrainResult:
    model: M.MlpNet
    g: object
    head: object
    log: TrainLog
    recipe: LossRecipe


class _FlatParams:
    """Concatenated parameter vector across model (+ g, + head)."""

    def __init__(self, net, g, head):
        self.parts = [("model", net)]
        if g is not None:
            self.parts.append(("g", g.net))
        if head is not None:
            self.parts.append(("head", head.net))
        self.sizes = [p.num_params for _, p in self.parts]

    def get(self):
        return np.concatenate([p.params_flat() for _, p in self.parts])

    def set(self, flat):
        pos = 0
        for (_, p), size in zip(self.parts, self.sizes):
            p.set_params_flat(flat[pos : pos + size])
            pos += size

    def gather_grads(self, result):
        by_name = {"model": result.model_grads, "g": result.g_grads,
                   "head": result.head_grads}
        out = []
        for (name, p), size in zip(self.parts, self.sizes):
            grad = by_name[name]
            out.append(grad if grad is not None else np.zeros(size))
        return np.concatenate(out)


def _val_recipe(recipe, composite):
    if composite:
        return recipe
    return LossRecipe((LossTerm(LossKind.TL),), recipe.space, hinge=recipe.hinge)


def train(net, recipe, train_ds, val_ds, cfg, g=None, head=None):
    """Optimize and return the best-validation snapshot plus the log.

    Missing auxiliary nets required by the recipe (composition net /
    classification head) are initialized here from derived seeds.
    """
    kinds = set(recipe.kinds)
    embed_dim = net.spec.output_dim
    if LossKind.CE in kinds and g is None:
        g = M.CompositionNet.initialize(
            embed_dim, train_ds.num_aux, derive_seed(cfg.seed, "init-g")
        )
    if LossKind.MTL in kinds and head is None:
        head = M.MtlHead.initialize(
            embed_dim, train_ds.num_aux, derive_seed(cfg.seed, "init-head")
        )

    train_ix = DatasetIndex(train_ds)
    val_ix = DatasetIndex(val_ds)
    scfg = SamplerConfig(batch_size=cfg.batch_size, max_retries=cfg.max_retries)

    vrecipe = _val_recipe(recipe, cfg.validate_on_composite)
    val_rng = Rng(derive_seed(cfg.seed, "val-sampler"))
    vcfg = SamplerConfig(batch_size=cfg.batch_size * cfg.val_batches,
                         max_retries=cfg.max_retries)
    val_batch = sample_batch(val_ds, vrecipe, vcfg, val_rng, index=val_ix)

    flat = _FlatParams(net, g, head)
    params = flat.get()
    state = AdamState.for_params(params.size, learning_rate=cfg.learning_rate)

    train_rng = Rng(derive_seed(cfg.seed, "train-sampler"))
    log = TrainLog()
    best_params = params.copy()
    since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        term_sums = {}
        batches = 0
        for _ in range(cfg.batches_per_epoch):
            bcfg = scfg
            if cfg.max_tuples is not None:
                remaining = cfg.max_tuples - log.tuples_seen
                if remaining <= 0:
                    break
                if remaining < cfg.batch_size:
                    bcfg = replace(scfg, batch_size=int(remaining))
            batch = sample_batch(train_ds, recipe, bcfg, train_rng, index=train_ix)
            result = combined_loss(recipe, train_ds, batch, net, g=g, head=head)
            if not math.isfinite(result.value):
                raise TrainingDivergedError(
                    f"non-finite loss {result.value} at epoch {epoch}, "
                    f"batch {batches + 1}"
                )
            grads = flat.gather_grads(result)
            params, state = adam_step(state, params, grads)
            flat.set(params)
            epoch_loss += result.value
            for k, v in result.term_values.items():
                term_sums[k] = term_sums.get(k, 0.0) + v
            # size sweeps cap on triplets observed; for the pure-CE recipe
            # the pair count is the analogous budget unit
            log.tuples_seen += max(
                len(batch.triplets), len(batch.ce_pairs)
            )
            batches += 1
        if batches == 0:
            break

        val = combined_loss(vrecipe, val_ds, val_batch, net, g=g, head=head,
                            compute_grads=False)
        if not math.isfinite(val.value):
            raise TrainingDivergedError(
                f"non-finite validation loss {val.value} at epoch {epoch}"
            )
        log.epochs.append(EpochStats(
            epoch,
            epoch_loss / batches,
            val.value,
            {k: s / batches for k, s in term_sums.items()},
        ))
        if val.value < log.best_val_loss:
            log.best_val_loss = val.value
            log.best_epoch = epoch
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
        if cfg.max_tuples is not None and log.tuples_seen >= cfg.max_tuples:
            break

    flat.set(best_params)
    return TrainResult(net, g, head, log, recipe)
