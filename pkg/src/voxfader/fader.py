"""Attribute fader: pretrained gender discriminator, autoencoder, adversarial classifier.

Shapes for the default configuration::

    discriminator   128 -> 64 (tanh) -> 1 logit
    encoder         128 -> 100                (linear)
    decoder         100 + 1 -> 128 (tanh)     (latent code concatenated with w)
    classifier      100 -> 1 logit

The autoencoder and the discriminator read standardized embeddings. The
decoder's tanh output is compared against the raw embedding, which already
lives in (-1, 1), so decoded vectors are directly usable as speaker embeddings.

The latent classifier gets its own, larger learning rate. With a wide latent
code and a slow classifier, the flipped-label objective lets the encoder
overshoot into an inverted gender code instead of removing it.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import nn_core as nn
from .errors import DomainError, NumericError, UsageError, ValidationError
from .nn_core import ParameterSet, Tape
from .speaker_space import Standardizer, substream

log = logging.getLogger(__name__)


def _lecun(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    return rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


# ------------------------------------------------------------ discriminator

@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 3
    lr: float = 3e-2
    momentum: float = 0.9
    batch_size: int = 64
    hidden: int = 64

    def validate(self) -> "PretrainConfig":
        if self.epochs < 0:
            raise ValidationError("pretrain.epochs: must be >= 0")
        if self.lr < 0 or not 0 <= self.momentum < 1:
            raise ValidationError("pretrain.lr/momentum out of range")
        if self.batch_size < 1 or self.hidden < 1:
            raise ValidationError("pretrain.batch_size/hidden: must be positive")
        return self


def discriminator_logits(params, x):
    """Logits of the 2-layer tanh MLP; ``params`` may hold arrays or tape leaves."""
    hidden = nn.tanh(nn.affine(params["disc.W1"], params["disc.b1"], x))
    out = nn.affine(params["disc.W2"], params["disc.b2"], hidden)
    return out


@dataclass
class PretrainedDiscriminator:
    params: ParameterSet
    standardizer: Standardizer
    history: list[dict] = field(default_factory=list)

    def logits(self, h: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(h)
        return discriminator_logits(self.params, self.standardizer.apply(h))[:, 0]

    def posterior(self, h: np.ndarray) -> np.ndarray:
        return smooth_posterior(self, h)


def init_discriminator(dim: int, hidden: int, rng: np.random.Generator) -> ParameterSet:
    return ParameterSet({
        "disc.W1": _lecun(rng, hidden, dim),
        "disc.b1": np.zeros(hidden),
        "disc.W2": _lecun(rng, 1, hidden),
        "disc.b2": np.zeros(1),
    })


def pretrain_discriminator(h: np.ndarray, genders: np.ndarray, standardizer: Standardizer,
                           config: PretrainConfig = PretrainConfig(), seed: int = 0,
                           heldout: tuple[np.ndarray, np.ndarray] | None = None) -> PretrainedDiscriminator:
    """Fit the gender discriminator by binary cross-entropy on standardized embeddings."""
    config.validate()
    y = np.asarray(genders, dtype=np.float64)
    if np.unique(y).size < 2:
        raise ValidationError("discriminator pretraining needs both genders present")
    x = standardizer.apply(h)
    params = init_discriminator(x.shape[1], config.hidden, substream(seed, "init/discriminator"))
    opt = nn.sgd_momentum(params, lr=config.lr, momentum=config.momentum)
    disc = PretrainedDiscriminator(params, standardizer)
    for epoch in range(config.epochs):
        losses = []
        for idx in _batches(len(x), config.batch_size, substream(seed, "batching/discriminator", epoch)):
            tape = Tape()
            leaves = params.attach(tape)
            logit = discriminator_logits(leaves, x[idx])
            loss = nn.bce_from_logit(logit, y[idx, None])
            params = nn.optimizer_step(opt, params, nn.backward(tape, loss))
            losses.append(float(loss.value))
        disc.params = params
        row = {"epoch": epoch, "loss": float(np.mean(losses))}
        if heldout is not None:
            row["heldout_accuracy"] = float(np.mean((disc.logits(heldout[0]) >= 0) == (heldout[1] == 1)))
        disc.history.append(row)
        log.info("discriminator epoch %d: %s", epoch, row)
    return disc


def smooth_posterior(disc: PretrainedDiscriminator, h: np.ndarray) -> np.ndarray:
    """Sigmoid of the discriminator logit, the soft gender label in (0, 1)."""
    return nn.sigmoid(disc.logits(h))


# ------------------------------------------------------------ autoencoder

def init_autoencoder(dim: int, latent_dim: int, rng: np.random.Generator) -> ParameterSet:
    return ParameterSet({
        "enc.W": _lecun(rng, latent_dim, dim),
        "enc.b": np.zeros(latent_dim),
        "dec.W": _lecun(rng, dim, latent_dim + 1),
        "dec.b": np.zeros(dim),
    })


def init_classifier(latent_dim: int, rng: np.random.Generator) -> ParameterSet:
    return ParameterSet({"cls.W": _lecun(rng, 1, latent_dim), "cls.b": np.zeros(1)})


def encode(ae, x_std):
    return nn.affine(ae["enc.W"], ae["enc.b"], x_std)


def decode(ae, z, w):
    """Decode latent rows ``z`` conditioned on ``w`` (scalar or one value per row)."""
    w_arr = w.value if isinstance(w, nn.Var) else np.asarray(w, dtype=np.float64)
    if not np.all((w_arr >= 0.0) & (w_arr <= 1.0)):
        raise DomainError("conditioning value w must lie in [0, 1]")
    z_val = z.value if isinstance(z, nn.Var) else np.asarray(z)
    if not isinstance(w, nn.Var):
        w = np.broadcast_to(w_arr.reshape(-1, 1) if w_arr.ndim else w_arr, z_val.shape[:-1] + (1,)).astype(np.float64)
    return nn.tanh(nn.affine(ae["dec.W"], ae["dec.b"], nn.concat(z, w)))


def classifier_logits(cls, z):
    return nn.affine(cls["cls.W"], cls["cls.b"], z)


def reconstruction_loss(rec, h, reduction: str = "mean"):
    """Absolute reconstruction error averaged over the batch.

    ``"mean"`` also averages over embedding components; ``"l1_sum"`` sums them,
    i.e. the per-sample L1 norm of the residual.
    """
    loss = nn.mae_loss(rec, h)
    if reduction == "mean":
        return loss
    return nn.mul(loss, float(np.shape(h)[-1]))


@dataclass(frozen=True)
class FaderLossReport:
    L_RC: float
    L_ACC: float
    L_ADV: float


def fader_losses(ae, cls, x_std: np.ndarray, h_target: np.ndarray, y: np.ndarray,
                 reconstruction: str = "mean") -> FaderLossReport:
    """Batch-averaged reconstruction, classifier and adversarial losses."""
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if len(y) == 0:
        raise ValidationError("fader_losses: empty batch")
    z = encode(ae, x_std)
    rec = decode(ae, z, y)
    logit = classifier_logits(cls, z)
    return FaderLossReport(float(reconstruction_loss(rec, h_target, reconstruction)), nn.bce_from_logit(logit, y), nn.bce_from_logit(logit, 1.0 - y))


# ------------------------------------------------------------ training

@dataclass(frozen=True)
class FaderConfig:
    latent_dim: int = 100
    epochs: int = 400
    lr: float = 1e-3
    classifier_lr: float = 3e-2
    momentum: float = 0.9
    batch_size: int = 64
    use_adversarial: bool = True
    lambda_max: float = 2.0
    lambda_ramp_fraction: float = 0.1
    use_smooth_labels: bool = False
    update_scheme: str = "alternating"
    reconstruction: str = "l1_sum"

    def validate(self) -> "FaderConfig":
        if not 1 <= self.latent_dim:
            raise ValidationError("fader.latent_dim: must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValidationError("fader.epochs/batch_size out of range")
        if self.lr < 0 or self.classifier_lr < 0 or not 0 <= self.momentum < 1:
            raise ValidationError("fader.lr/classifier_lr/momentum out of range")
        if self.lambda_max < 0 or not 0 <= self.lambda_ramp_fraction <= 1:
            raise ValidationError("fader.lambda_max/lambda_ramp_fraction out of range")
        if self.reconstruction not in ("l1_sum", "mean"):
            raise ValidationError(f"fader.reconstruction: unknown reduction {self.reconstruction!r}")
        if self.update_scheme not in ("alternating", "gradient_reversal"):
            raise ValidationError(f"fader.update_scheme: unknown scheme {self.update_scheme!r}")
        return self


def lambda_schedule(step: int, total_steps: int, config: FaderConfig) -> float:
    """Adversarial weight: linear ramp from 0 over the first fraction of steps, then flat."""
    if not config.use_adversarial:
        return 0.0
    ramp = config.lambda_ramp_fraction * total_steps
    if ramp <= 0:
        return config.lambda_max
    return config.lambda_max * min(1.0, step / ramp)


@dataclass
class FaderModel:
    ae: ParameterSet
    cls: ParameterSet
    standardizer: Standardizer
    trained: bool = False

    @property
    def latent_dim(self) -> int:
        return self.ae["enc.W"].shape[0]

    def encode(self, h: np.ndarray) -> np.ndarray:
        return encode(self.ae, self.standardizer.apply(np.atleast_2d(h)))

    def decode(self, z: np.ndarray, w) -> np.ndarray:
        return decode(self.ae, np.atleast_2d(z), w)


HISTORY_FIELDS = ("epoch", "L_RC", "L_ACC", "L_ADV", "lambda_adv")


class FaderTrainer:
    """Owns a fader model and its optimizers across epochs; resumable from checkpoints.

    Batch order for epoch ``e`` comes from a generator seeded by ``(seed, e)``,
    so a run resumed at an epoch boundary replays the same updates as an
    uninterrupted one.
    """

    def __init__(self, h: np.ndarray, labels: np.ndarray, standardizer: Standardizer,
                 config: FaderConfig = FaderConfig(), seed: int = 0):
        self.config = config.validate()
        self.seed = int(seed)
        self.h = np.asarray(h, dtype=np.float64)
        self.x = standardizer.apply(self.h)
        self.y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
        if np.any(self.y < 0) or np.any(self.y > 1):
            raise DomainError("training labels must lie in [0, 1]")
        rng = substream(self.seed, "init/fader")
        dim = self.h.shape[1]
        self.model = FaderModel(init_autoencoder(dim, config.latent_dim, rng),
                                init_classifier(config.latent_dim, rng), standardizer)
        self.opt_ae = nn.sgd_momentum(self.model.ae, config.lr, config.momentum)
        self.opt_cls = nn.sgd_momentum(self.model.cls, config.classifier_lr, config.momentum)
        self.epoch = 0
        self.step = 0
        self.history: list[dict] = []

    @property
    def steps_per_epoch(self) -> int:
        return -(-len(self.x) // self.config.batch_size)

    @property
    def total_steps(self) -> int:
        return self.steps_per_epoch * self.config.epochs

    def _alternating_step(self, x, h, y, lam):
        ae, cls = self.model.ae, self.model.cls
        # (i) classifier on a frozen latent code
        z = encode(ae, x)
        tape = Tape()
        c = cls.attach(tape)
        l_acc = nn.bce_from_logit(classifier_logits(c, z), y)
        cls = nn.optimizer_step(self.opt_cls, cls, nn.backward(tape, l_acc))
        # (ii) autoencoder against the updated, frozen classifier
        tape = Tape()
        a = ae.attach(tape)
        zv = encode(a, x)
        l_rc = reconstruction_loss(decode(a, zv, y), h, self.config.reconstruction)
        logit = classifier_logits(cls, zv)
        l_adv = nn.bce_from_logit(logit, 1.0 - y)
        l_acc2 = nn.bce_from_logit(logit, y)
        total = nn.add(l_rc, nn.mul(l_adv, lam)) if lam != 0.0 else l_rc
        ae = nn.optimizer_step(self.opt_ae, ae, nn.backward(tape, total))
        self.model.ae, self.model.cls = ae, cls
        return float(l_rc.value), float(l_acc2.value), float(l_adv.value)

    def _reversal_step(self, x, h, y, lam):
        ae, cls = self.model.ae, self.model.cls
        tape = Tape()
        a = ae.attach(tape)
        c = cls.attach(tape)
        z = encode(a, x)
        l_rc = reconstruction_loss(decode(a, z, y), h, self.config.reconstruction)
        logit = classifier_logits(c, z)
        l_acc = nn.bce_from_logit(logit, y)
        l_adv = nn.bce_from_logit(logit, 1.0 - y)
        g_acc = nn.backward(tape, l_acc)
        g_rc = nn.backward(tape, l_rc)
        g_ae = {k: g_rc[k] - lam * g_acc[k] for k in ae}
        self.model.cls = nn.optimizer_step(self.opt_cls, cls, cls.select(g_acc))
        self.model.ae = nn.optimizer_step(self.opt_ae, ae, g_ae)
        return float(l_rc.value), float(l_acc.value), float(l_adv.value)

    def run_epoch(self) -> dict:
        cfg = self.config
        step_fn = self._alternating_step if cfg.update_scheme == "alternating" else self._reversal_step
        sums = np.zeros(3)
        n_batches = 0
        lam = 0.0
        for idx in _batches(len(self.x), cfg.batch_size, substream(self.seed, "batching/fader", self.epoch)):
            lam = lambda_schedule(self.step, self.total_steps, cfg)
            sums += step_fn(self.x[idx], self.h[idx], self.y[idx], lam)
            self.step += 1
            n_batches += 1
        row = {"epoch": self.epoch, "L_RC": sums[0] / n_batches, "L_ACC": sums[1] / n_batches,
               "L_ADV": sums[2] / n_batches, "lambda_adv": lam}
        row = {k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()}
        for k in ("L_RC", "L_ACC", "L_ADV"):
            if not np.isfinite(row[k]):
                raise NumericError(f"non-finite {k} at epoch {self.epoch}")
        self.history.append(row)
        self.epoch += 1
        return row

    def train(self, until_epoch: int | None = None,
              on_epoch: Callable[["FaderTrainer"], None] | None = None) -> FaderModel:
        stop = self.config.epochs if until_epoch is None else min(until_epoch, self.config.epochs)
        while self.epoch < stop:
            row = self.run_epoch()
            if self.epoch % 50 == 0:
                log.info("fader epoch %d: %s", row["epoch"], row)
            if on_epoch is not None:
                on_epoch(self)
        self.model.trained = self.epoch >= self.config.epochs
        return self.model

    # checkpointing ---------------------------------------------------
    def save(self, directory) -> Path:
        meta = {
            "epoch": self.epoch,
            "step": self.step,
            "seed": self.seed,
            "config": asdict(self.config),
            "history": self.history,
            "trained": self.model.trained,
        }
        params = {"ae": self.model.ae, "cls": self.model.cls,
                  "standardizer": ParameterSet({"mean": self.model.standardizer.mean,
                                                "std": self.model.standardizer.std})}
        return nn.save_checkpoint(directory, params, {"ae": self.opt_ae, "cls": self.opt_cls}, meta)

    def restore(self, directory) -> None:
        params, opts, meta = nn.load_checkpoint(directory)
        if meta["seed"] != self.seed or FaderConfig(**meta["config"]) != self.config:
            raise ValidationError(f"{directory}: checkpoint was written by a different run configuration")
        if params["ae"].shapes != self.model.ae.shapes:
            raise ValidationError(f"{directory}: checkpoint dimensions do not match the training data")
        self.model.ae, self.model.cls = params["ae"], params["cls"]
        self.model.trained = bool(meta["trained"])
        self.opt_ae, self.opt_cls = opts["ae"], opts["cls"]
        self.epoch, self.step = int(meta["epoch"]), int(meta["step"])
        self.history = list(meta["history"])


def train_fader(h: np.ndarray, labels: np.ndarray, standardizer: Standardizer,
                config: FaderConfig = FaderConfig(), seed: int = 0) -> tuple[FaderModel, list[dict]]:
    """Train from scratch; returns the model and per-epoch loss history."""
    trainer = FaderTrainer(h, labels, standardizer, config, seed)
    model = trainer.train()
    return model, trainer.history


def training_labels(genders: np.ndarray, h: np.ndarray, config: FaderConfig,
                    disc: PretrainedDiscriminator | None = None) -> np.ndarray:
    """Binary gender labels, or the pretrained discriminator's posteriors when smooth labels are enabled."""
    if not config.use_smooth_labels:
        return np.asarray(genders, dtype=np.float64)
    if disc is None:
        raise UsageError("use_smooth_labels requires a pretrained discriminator")
    return smooth_posterior(disc, h)


def load_fader(directory) -> FaderModel:
    params, _, meta = nn.load_checkpoint(directory)
    st = params["standardizer"]
    return FaderModel(params["ae"], params["cls"], Standardizer(st["mean"], st["std"]), bool(meta["trained"]))


def save_discriminator(disc: PretrainedDiscriminator, directory) -> Path:
    params = {"disc": disc.params,
              "standardizer": ParameterSet({"mean": disc.standardizer.mean, "std": disc.standardizer.std})}
    return nn.save_checkpoint(directory, params, meta={"history": disc.history})


def load_discriminator(directory) -> PretrainedDiscriminator:
    params, _, meta = nn.load_checkpoint(directory)
    st = params["standardizer"]
    return PretrainedDiscriminator(params["disc"], Standardizer(st["mean"], st["std"]), list(meta.get("history", [])))


# ------------------------------------------------------------ manipulation

CONDITIONING_MODES = ("estimated", "inverted", "neutral", "explicit")


@dataclass(frozen=True)
class Conditioning:
    mode: str
    value: float | None = None

    def __post_init__(self):
        if self.mode not in CONDITIONING_MODES:
            raise ValidationError(f"unknown conditioning mode {self.mode!r}")
        if self.mode == "explicit":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise DomainError("explicit conditioning needs w in [0, 1]")

    def resolve(self, posterior: np.ndarray) -> np.ndarray:
        posterior = np.asarray(posterior, dtype=np.float64)
        if self.mode == "estimated":
            return posterior
        if self.mode == "inverted":
            return 1.0 - posterior
        if self.mode == "neutral":
            return np.full_like(posterior, 0.5)
        return np.full_like(posterior, self.value)


ESTIMATED = Conditioning("estimated")
INVERTED = Conditioning("inverted")
NEUTRAL = Conditioning("neutral")
SWEEP = tuple(Conditioning("explicit", w) for w in (0.0, 0.25, 0.5, 0.75, 1.0))


def manipulate(model: FaderModel, disc: PretrainedDiscriminator, h: np.ndarray,
               conditioning: Conditioning) -> np.ndarray:
    """Re-synthesize embeddings with the gender conditioning chosen by ``conditioning``."""
    if not model.trained:
        raise UsageError("manipulate() needs a fully trained fader model")
    h = np.atleast_2d(h)
    w = conditioning.resolve(smooth_posterior(disc, h))
    return model.decode(model.encode(h), w)
