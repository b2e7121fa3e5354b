"""Phoneme/frame alignment algebra and the two alignment contrastive losses.

An alignment splits ``T`` frames into ``N`` contiguous phoneme occurrences.
The decompression matrix ``D`` (``N x T``) replicates one vector per
occurrence across its frames; ``compress`` mean-pools frames back to
occurrences.

Both losses compare two ``T x d`` embedding sequences after L2-normalizing
their rows. With ``d(i, j) = ||a_i - b_j||^2``::

    L = sum_i d(i, i) + sum_{i != j} max(m - d(i, j), 0)

The frame-level loss indexes rows by frame. The phoneme-level loss first
averages normalized rows per symbol, re-normalizes the centroids and indexes
the table by symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import nn_core as nn
from .errors import DimensionError, DomainError, ValidationError

__all__ = [
    "PhonemeAlphabet", "Occurrence", "FrameAlignment", "DecompressionMatrix", "LinguisticEmbeddingPair",
    "ContrastiveResult", "build_decompression", "decompress", "compress", "pseudo_contrastive_loss",
    "phoneme_contrastive_loss", "read_alignment", "write_alignment",
]


@dataclass(frozen=True)
class PhonemeAlphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ValidationError("alphabet needs at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("alphabet symbols must be distinct")
        for s in self.symbols:
            if not s or any(c.isspace() for c in s):
                raise ValidationError(f"invalid phoneme symbol {s!r}")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValidationError(f"symbol {symbol!r} is not in the alphabet") from None


class Occurrence(NamedTuple):
    symbol: int
    start: int
    end: int  # inclusive

    @property
    def duration(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class FrameAlignment:
    """``N`` occurrences tiling frames ``0 .. T-1`` without gaps or overlaps."""

    T: int
    sequence: tuple[Occurrence, ...]

    def __post_init__(self):
        seq = tuple(Occurrence(*map(int, occ)) for occ in self.sequence)
        object.__setattr__(self, "sequence", seq)
        if self.T < 1 or not seq:
            raise ValidationError("alignment needs at least one frame and one occurrence")
        expected = 0
        for n, occ in enumerate(seq):
            if occ.symbol < 0:
                raise ValidationError(f"occurrence {n}: negative symbol index")
            if occ.end < occ.start:
                raise ValidationError(f"occurrence {n}: end frame {occ.end} precedes start {occ.start}")
            if occ.start > expected:
                raise ValidationError(f"occurrence {n}: gap before frame {occ.start}")
            if occ.start < expected:
                raise ValidationError(f"occurrence {n}: overlaps the previous occurrence at frame {occ.start}")
            expected = occ.end + 1
        if expected != self.T:
            raise ValidationError(f"alignment covers {expected} frames, expected T={self.T}")

    @classmethod
    def from_durations(cls, symbols: Sequence[int], durations: Sequence[int]) -> "FrameAlignment":
        if len(symbols) != len(durations):
            raise ValidationError("symbols and durations differ in length")
        seq, start = [], 0
        for s, dur in zip(symbols, durations):
            if dur < 1:
                raise ValidationError("every duration must be at least one frame")
            seq.append(Occurrence(int(s), start, start + int(dur) - 1))
            start += int(dur)
        return cls(start, tuple(seq))

    @property
    def N(self) -> int:
        return len(self.sequence)

    def frame_owner(self) -> np.ndarray:
        """Occurrence index of every frame."""
        return np.repeat(np.arange(self.N), [o.duration for o in self.sequence])

    def frame_symbols(self) -> np.ndarray:
        return np.array([o.symbol for o in self.sequence])[self.frame_owner()]


@dataclass(frozen=True)
class DecompressionMatrix:
    D: np.ndarray
    membership: str = "instance"

    def __post_init__(self):
        D = np.array(self.D, dtype=np.float64)
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape


def build_decompression(alignment: FrameAlignment, membership: str = "instance") -> DecompressionMatrix:
    """Binary ``N x T`` matrix mapping occurrences to frames.

    ``membership="instance"`` marks frame ``t`` in row ``n`` iff ``t`` lies in
    occurrence ``n``'s span. ``membership="symbol"`` marks it whenever the
    frame carries the same symbol as occurrence ``n``; repeated phonemes then
    share columns, so columns no longer sum to one.
    """
    owner = alignment.frame_owner()
    if membership == "instance":
        D = (owner[None, :] == np.arange(alignment.N)[:, None])
    elif membership == "symbol":
        occ_sym = np.array([o.symbol for o in alignment.sequence])
        D = occ_sym[:, None] == occ_sym[owner][None, :]
    else:
        raise ValidationError(f"unknown membership {membership!r}")
    return DecompressionMatrix(D.astype(np.float64), membership)


def _as_matrix(D) -> np.ndarray:
    return D.D if isinstance(D, DecompressionMatrix) else np.asarray(D, dtype=np.float64)


def decompress(H_N: np.ndarray, D) -> np.ndarray:
    """Replicate occurrence rows across their frames: ``D.T @ H_N``."""
    D = _as_matrix(D)
    H_N = np.asarray(H_N, dtype=np.float64)
    if H_N.ndim != 2 or H_N.shape[0] != D.shape[0]:
        raise DimensionError(f"H_N has shape {H_N.shape}, D has {D.shape[0]} rows")
    return D.T @ H_N


def compress(H_T: np.ndarray, D) -> np.ndarray:
    """Mean-pool frame rows over each occurrence."""
    D = _as_matrix(D)
    H_T = np.asarray(H_T, dtype=np.float64)
    if H_T.ndim != 2 or H_T.shape[0] != D.shape[1]:
        raise DimensionError(f"H_T has shape {H_T.shape}, D has {D.shape[1]} columns")
    out = np.empty((D.shape[0], H_T.shape[1]))
    for n, row in enumerate(D):
        frames = np.flatnonzero(row)
        if frames.size == 0:
            raise DimensionError(f"occurrence {n} owns no frames")
        # shifted mean: exact when every frame carries the same row
        ref = H_T[frames[0]]
        out[n] = ref + (H_T[frames] - ref).mean(axis=0)
    return out


# ------------------------------------------------------------ losses

@dataclass(frozen=True)
class LinguisticEmbeddingPair:
    H_r: np.ndarray
    H_t: np.ndarray
    margin: float = 1.0

    def __post_init__(self):
        H_r = np.asarray(self.H_r, dtype=np.float64)
        H_t = np.asarray(self.H_t, dtype=np.float64)
        if H_r.ndim != 2 or H_r.shape != H_t.shape:
            raise DimensionError(f"embedding matrices must share a 2-D shape, got {H_r.shape} and {H_t.shape}")
        if not (self.margin > 0):
            raise DomainError("margin must be positive")
        object.__setattr__(self, "H_r", H_r)
        object.__setattr__(self, "H_t", H_t)


class ContrastiveResult(NamedTuple):
    loss: float
    grad_r: np.ndarray
    grad_t: np.ndarray
    diagnostics: dict


def _margin_table_loss(A, B, margin):
    """Loss over the distance table between normalized rows of tape values A and B."""
    d = nn.pairwise_sqdist(A, B)
    eye = np.eye(d.shape[0], d.shape[1])
    matched = nn.sum_(nn.mul(d, eye))
    hinge = nn.sum_(nn.mul(nn.relu(nn.sub(margin, d)), 1.0 - eye))
    return nn.add(matched, hinge)


def pseudo_contrastive_loss(pair: LinguisticEmbeddingPair) -> ContrastiveResult:
    """Frame-level margin loss between two aligned embedding sequences, with gradients."""
    tape = nn.Tape()
    r = tape.leaf(pair.H_r, name="H_r")
    t = tape.leaf(pair.H_t, name="H_t")
    loss = _margin_table_loss(nn.l2_normalize_rows(r), nn.l2_normalize_rows(t), pair.margin)
    g = nn.backward(tape, loss)
    return ContrastiveResult(float(loss.value), g["H_r"], g["H_t"], {"T": pair.H_r.shape[0]})


def phoneme_contrastive_loss(H_r: np.ndarray, H_t: np.ndarray, alignment: FrameAlignment,
                             alphabet: PhonemeAlphabet, margin: float = 1.0) -> ContrastiveResult:
    """Symbol-level margin loss over the table of per-symbol centroids.

    Alphabet symbols without any frame are left out of the table and listed
    in ``diagnostics["excluded"]``.
    """
    pair = LinguisticEmbeddingPair(H_r, H_t, margin)
    if pair.H_r.shape[0] != alignment.T:
        raise DimensionError(f"{pair.H_r.shape[0]} embedding rows for an alignment of T={alignment.T} frames")
    frame_sym = alignment.frame_symbols()
    if frame_sym.max() >= len(alphabet):
        raise ValidationError("alignment uses a symbol index outside the alphabet")
    present = np.unique(frame_sym)
    # pooling matrix: row a averages the frames labelled with present[a]
    S = (frame_sym[None, :] == present[:, None]).astype(np.float64)
    S /= S.sum(axis=1, keepdims=True)

    tape = nn.Tape()
    r = tape.leaf(pair.H_r, name="H_r")
    t = tape.leaf(pair.H_t, name="H_t")
    c_r = nn.l2_normalize_rows(nn.matmul(S, nn.l2_normalize_rows(r)))
    c_t = nn.l2_normalize_rows(nn.matmul(S, nn.l2_normalize_rows(t)))
    loss = _margin_table_loss(c_r, c_t, margin)
    g = nn.backward(tape, loss)
    excluded = tuple(s for i, s in enumerate(alphabet.symbols) if i not in set(present.tolist()))
    diagnostics = {"symbols": tuple(alphabet.symbols[i] for i in present), "excluded": excluded}
    return ContrastiveResult(float(loss.value), g["H_r"], g["H_t"], diagnostics)


# ------------------------------------------------------------ file format

def write_alignment(path, alignment: FrameAlignment, alphabet: PhonemeAlphabet) -> None:
    """One ``symbol start end`` line per occurrence; frames 0-indexed and inclusive."""
    lines = [f"{alphabet.symbols[o.symbol]} {o.start} {o.end}\n" for o in alignment.sequence]
    Path(path).write_text("".join(lines))


def read_alignment(path, alphabet: PhonemeAlphabet | None = None) -> tuple[FrameAlignment, PhonemeAlphabet]:
    """Parse and validate an alignment file.

    Without an ``alphabet`` one is built from the symbols in order of first
    appearance.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"{path}:{lineno}: expected 'symbol start end', got {line!r}")
        try:
            start, end = int(parts[1]), int(parts[2])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: frame indices must be integers") from None
        rows.append((parts[0], start, end))
    if not rows:
        raise ValidationError(f"{path}: no occurrences")
    if alphabet is None:
        alphabet = PhonemeAlphabet(tuple(dict.fromkeys(r[0] for r in rows)))
    seq = tuple(Occurrence(alphabet.index(s), a, b) for s, a, b in rows)
    try:
        alignment = FrameAlignment(rows[-1][2] + 1, seq)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return alignment, alphabet
