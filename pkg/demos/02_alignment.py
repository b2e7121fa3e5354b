"""Phoneme-rate vs frame-rate sequences and the two alignment losses.

A decompression matrix repeats each phoneme occurrence for as many frames as
it lasts. Compression goes the other way by averaging the frames of each
occurrence.
"""

import numpy as np

from voxfader.alignment import (
    FrameAlignment, LinguisticEmbeddingPair, PhonemeAlphabet, build_decompression, compress, decompress,
    phoneme_contrastive_loss, pseudo_contrastive_loss,
)

alphabet = PhonemeAlphabet(("sil", "h", "e", "l", "o"))
# "hello" with a little silence on each side; "l" appears once but lasts 3 frames
alignment = FrameAlignment.from_durations(
    [alphabet.index(s) for s in ("sil", "h", "e", "l", "o", "sil")], [2, 1, 2, 3, 2, 1])
print("frames:", " ".join(alphabet.symbols[s] for s in alignment.frame_symbols()))

D = build_decompression(alignment)
print("D is", D.D.shape, "(occurrences x frames); column sums:", D.D.sum(axis=0))

rng = np.random.default_rng(1)
H_N = rng.normal(size=(alignment.N, 4))
H_T = decompress(H_N, D)
print("decompressed:", H_T.shape, " round trip exact:", np.array_equal(compress(H_T, D), H_N))

# the symbol variant merges both "sil" occurrences into one row pattern
D_sym = build_decompression(alignment, membership="symbol")
print("symbol membership, first row:", D_sym.D[0].astype(int))

# linguistic embeddings from a "reference" and a slightly perturbed "target" branch
H_r = H_T + 0.05 * rng.normal(size=H_T.shape)
H_t = H_T + 0.05 * rng.normal(size=H_T.shape)
res = pseudo_contrastive_loss(LinguisticEmbeddingPair(H_r, H_t, margin=1.0))
print(f"frame-level contrastive loss  {res.loss:.4f}  |grad_r| {np.linalg.norm(res.grad_r):.4f}")

res = phoneme_contrastive_loss(H_r, H_t, alignment, alphabet, margin=1.0)
print(f"phoneme-level contrastive loss {res.loss:.4f}  symbols {res.diagnostics['symbols']}")

# shuffling the target frames breaks the diagonal match and the loss jumps
res = pseudo_contrastive_loss(LinguisticEmbeddingPair(H_r, H_t[rng.permutation(alignment.T)]))
print(f"with shuffled target frames    {res.loss:.4f}")
