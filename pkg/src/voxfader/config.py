"""Run configuration: one JSON document drives every pipeline stage.

Schema (all sections optional; omitted fields take the defaults shown by
``RunConfig().to_dict()``)::

    {
      "seed": 0,
      "output_dir": "run",
      "corpus":     {n_speakers, utterances_per_speaker, embedding_dim, gender_balance,
                     noise_sigma, gender_strength, identity_sigma},
      "split":      {holdout_fraction},
      "pretrain":   {epochs, lr, momentum, batch_size, hidden},
      "fader":      {latent_dim, epochs, lr, classifier_lr, momentum, batch_size, use_adversarial, lambda_max,
                     lambda_ramp_fraction, use_smooth_labels, update_scheme, reconstruction},
      "train":      {checkpoint_every},
      "evaluation": {k, pca_dims, n_impostors, probe_max_iter}
    }

Unknown keys anywhere are rejected. A relative ``output_dir`` is resolved
against the directory holding the config file. The corpus seed is always the
run seed.
"""

from __future__ import annotations

import hashlib
import json
import numbers
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ValidationError
from .fader import FaderConfig, PretrainConfig
from .speaker_space import SyntheticCorpusConfig


@dataclass(frozen=True)
class SplitConfig:
    holdout_fraction: float = 0.1

    def validate(self):
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValidationError("split.holdout_fraction: must lie in (0, 1)")
        return self


@dataclass(frozen=True)
class TrainConfig:
    checkpoint_every: int = 50

    def validate(self):
        if self.checkpoint_every < 1:
            raise ValidationError("train.checkpoint_every: must be >= 1")
        return self


@dataclass(frozen=True)
class EvaluationConfig:
    k: int = 3
    pca_dims: int = 8
    n_impostors: int = 10
    probe_max_iter: int = 5000

    def validate(self):
        if self.k < 1:
            raise ValidationError("evaluation.k: must be >= 1")
        if self.pca_dims < 2:
            raise ValidationError("evaluation.pca_dims: must be >= 2")
        if self.n_impostors < 1:
            raise ValidationError("evaluation.n_impostors: must be >= 1")
        if self.probe_max_iter < 1:
            raise ValidationError("evaluation.probe_max_iter: must be >= 1")
        return self


_SECTIONS = {
    "corpus": SyntheticCorpusConfig,
    "split": SplitConfig,
    "pretrain": PretrainConfig,
    "fader": FaderConfig,
    "train": TrainConfig,
    "evaluation": EvaluationConfig,
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "run"
    corpus: SyntheticCorpusConfig = field(default_factory=SyntheticCorpusConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    fader: FaderConfig = field(default_factory=FaderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self):
        object.__setattr__(self, "corpus", replace(self.corpus, seed=self.seed))

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["corpus"]["seed"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """Hash of everything except the output location."""
        d = self.to_dict()
        del d["output_dir"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def validate(self) -> "RunConfig":
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be an integer in [0, 2^64)")
        for name in _SECTIONS:
            try:
                getattr(self, name).validate()
            except ConfigError:
                raise
            except ValidationError as exc:
                msg = str(exc)
                raise ConfigError(msg if msg.startswith(name + ".") else f"{name}.{msg}") from None
        return self


def _check_type(path: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}")
    return value


def _build(section: str, cls, data) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    defaults = cls()
    known = {f.name for f in fields(cls) if not (cls is SyntheticCorpusConfig and f.name == "seed")}
    for key in data:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown key")
    kwargs = {k: _check_type(f"{section}.{k}", v, getattr(defaults, k)) for k, v in data.items()}
    return cls(**kwargs)


def config_from_dict(data: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    top = {"seed", "output_dir", *_SECTIONS}
    for key in data:
        if key not in top:
            raise ConfigError(f"{key}: unknown key")
    kwargs = {}
    if "seed" in data:
        kwargs["seed"] = _check_type("seed", data["seed"], 0)
    if "output_dir" in data:
        kwargs["output_dir"] = _check_type("output_dir", data["output_dir"], "")
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build(name, cls, data[name])
    cfg = RunConfig(**kwargs)
    if base_dir is not None and not Path(cfg.output_dir).is_absolute():
        cfg = replace(cfg, output_dir=str(Path(base_dir) / cfg.output_dir))
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, base_dir=path.parent)
