"""Synthetic speaker-embedding corpus and input standardization.

Embeddings follow::

    h = tanh(M @ (u_speaker + g * gender_strength * v + eps))

with a fixed random mixing matrix ``M``, a per-speaker identity vector
``u_speaker``, a unit gender direction ``v``, the speaker's gender ``g`` in
{0, 1} and per-utterance noise ``eps ~ N(0, noise_sigma^2 I)``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ValidationError

FEMALE, MALE = 0, 1


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for a named purpose derived from one global seed."""
    key = (zlib.crc32(name.encode()),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


@dataclass(frozen=True)
class SyntheticCorpusConfig:
    n_speakers: int = 200
    utterances_per_speaker: int = 20
    embedding_dim: int = 128
    gender_balance: float = 0.5
    noise_sigma: float = 0.3
    gender_strength: float = 1.5
    identity_sigma: float = 0.15
    seed: int = 0

    def validate(self) -> "SyntheticCorpusConfig":
        if self.n_speakers < 2:
            raise ValidationError("n_speakers: must be >= 2")
        if self.utterances_per_speaker < 2:
            raise ValidationError("utterances_per_speaker: must be >= 2")
        if self.embedding_dim < 1:
            raise ValidationError("embedding_dim: must be positive")
        if not 0.0 <= self.gender_balance <= 1.0:
            raise ValidationError("gender_balance: must lie in [0, 1]")
        if 0.0 < self.gender_balance < 1.0:
            n_male = self.n_males
            if n_male == 0 or n_male == self.n_speakers:
                raise ValidationError("gender_balance: corpus would contain a single gender")
        if self.noise_sigma < 0.0:
            raise ValidationError("noise_sigma: must be >= 0")
        if self.gender_strength <= 0.0:
            raise ValidationError("gender_strength: must be > 0")
        if self.identity_sigma < 0.0:
            raise ValidationError("identity_sigma: must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed: must be a 64-bit unsigned integer")
        return self

    @property
    def n_males(self) -> int:
        return int(round(self.gender_balance * self.n_speakers))

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


class SpeakerEmbedding(NamedTuple):
    values: np.ndarray
    speaker_id: int
    gender: int


@dataclass
class Corpus:
    """Column-oriented corpus, rows ordered by (speaker_id, utterance index)."""

    embeddings: np.ndarray
    speaker_ids: np.ndarray
    genders: np.ndarray

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.speaker_ids = np.asarray(self.speaker_ids, dtype=np.int64)
        self.genders = np.asarray(self.genders, dtype=np.int64)
        n = self.embeddings.shape[0]
        if self.embeddings.ndim != 2 or self.speaker_ids.shape != (n,) or self.genders.shape != (n,):
            raise ValidationError("corpus columns have inconsistent lengths")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValidationError("corpus contains non-finite embeddings")
        if not np.all(np.isin(self.genders, (FEMALE, MALE))):
            raise ValidationError("gender labels must be 0 or 1")

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def __iter__(self) -> Iterator[SpeakerEmbedding]:
        for h, s, g in zip(self.embeddings, self.speaker_ids, self.genders):
            yield SpeakerEmbedding(h, int(s), int(g))

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def subset(self, idx) -> "Corpus":
        return Corpus(self.embeddings[idx], self.speaker_ids[idx], self.genders[idx])

    def with_embeddings(self, embeddings: np.ndarray) -> "Corpus":
        return Corpus(embeddings, self.speaker_ids, self.genders)


def generate_corpus(config: SyntheticCorpusConfig) -> Corpus:
    config.validate()
    d = config.embedding_dim
    shared = substream(config.seed, "corpus/shared")
    mixing = shared.standard_normal((d, d)) / np.sqrt(d)
    direction = shared.standard_normal(d)
    direction /= np.linalg.norm(direction)
    male_ids = set(shared.permutation(config.n_speakers)[: config.n_males].tolist())

    rows, sids, genders = [], [], []
    for spk in range(config.n_speakers):
        rng = substream(config.seed, "corpus/speaker", spk)
        g = MALE if spk in male_ids else FEMALE
        u = config.identity_sigma * rng.standard_normal(d)
        eps = config.noise_sigma * rng.standard_normal((config.utterances_per_speaker, d))
        latent = u + g * config.gender_strength * direction + eps
        rows.append(np.tanh(latent @ mixing.T))
        sids += [spk] * config.utterances_per_speaker
        genders += [g] * config.utterances_per_speaker
    return Corpus(np.vstack(rows), np.array(sids), np.array(genders))


def split_utterances(corpus: Corpus, holdout_fraction: float = 0.1, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-speaker random split of utterance indices into (train, held-out).

    Every speaker keeps at least one utterance on each side.
    """
    rng = substream(seed, "split")
    train, held = [], []
    for spk in np.unique(corpus.speaker_ids):
        idx = np.flatnonzero(corpus.speaker_ids == spk)
        idx = idx[rng.permutation(idx.size)]
        n_held = min(max(1, int(round(holdout_fraction * idx.size))), idx.size - 1)
        held.append(np.sort(idx[:n_held]))
        train.append(np.sort(idx[n_held:]))
    return np.concatenate(train), np.concatenate(held)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    def apply(self, h: np.ndarray) -> np.ndarray:
        return (np.asarray(h, dtype=np.float64) - self.mean) / self.std

    def invert(self, h_std: np.ndarray) -> np.ndarray:
        return np.asarray(h_std, dtype=np.float64) * self.std + self.mean


def fit_standardizer(embeddings, epsilon: float = 1e-8) -> Standardizer:
    if isinstance(embeddings, Corpus):
        embeddings = embeddings.embeddings
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError("cannot fit a standardizer on an empty corpus")
    # shifted mean keeps constant dimensions exact, so they standardize to 0
    mean = x[0] + (x - x[0]).mean(axis=0)
    std = np.maximum(x.std(axis=0), epsilon)
    return Standardizer(mean, std, epsilon)


# ---------------------------------------------------------------- corpus files

def write_corpus_csv(corpus: Corpus, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["speaker_id", "gender"] + [f"h{i}" for i in range(corpus.dim)])
        for h, s, g in zip(corpus.embeddings, corpus.speaker_ids, corpus.genders):
            # repr() gives the shortest string that round-trips a float64 exactly
            w.writerow([int(s), int(g)] + [repr(float(x)) for x in h])


def read_corpus_csv(path) -> Corpus:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["speaker_id", "gender"]:
            raise ValidationError(f"{path}: unexpected header {header[:2]}")
        sids, genders, rows = [], [], []
        for line in r:
            sids.append(int(line[0]))
            genders.append(int(line[1]))
            rows.append([float(x) for x in line[2:]])
    return Corpus(np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 2), np.array(sids), np.array(genders))


def write_corpus_binary(corpus: Corpus, directory, config: SyntheticCorpusConfig | None = None) -> None:
    """Manifest plus ``corpus.bin`` holding rows of (speaker_id, gender, values...) as '<f8'."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([corpus.speaker_ids.astype(np.float64), corpus.genders.astype(np.float64), corpus.embeddings])
    (directory / "corpus.bin").write_bytes(np.ascontiguousarray(table, dtype="<f8").tobytes())
    manifest = {
        "format": "voxfader-corpus/1",
        "n_rows": len(corpus),
        "embedding_dim": corpus.dim,
        "columns": ["speaker_id", "gender"] + [f"h{i}" for i in range(corpus.dim)],
        "dtype": "<f8",
    }
    if config is not None:
        manifest["config"] = config.to_dict()
        manifest["config_sha256"] = config.digest()
        manifest["seed"] = config.seed
    (directory / "corpus.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_corpus_binary(directory) -> Corpus:
    directory = Path(directory)
    manifest = json.loads((directory / "corpus.json").read_text())
    if manifest.get("format") != "voxfader-corpus/1":
        raise ValidationError(f"{directory}: not a corpus manifest")
    n, d = manifest["n_rows"], manifest["embedding_dim"]
    table = np.frombuffer((directory / "corpus.bin").read_bytes(), dtype="<f8")
    if table.size != n * (d + 2):
        raise ValidationError(f"{directory}: corpus.bin has {table.size} values, expected {n * (d + 2)}")
    table = table.reshape(n, d + 2)
    return Corpus(table[:, 2:].copy(), table[:, 0].astype(np.int64), table[:, 1].astype(np.int64))
