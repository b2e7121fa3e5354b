"""Train a gender fader on the synthetic corpus and turn the dial.

The default configuration takes about a minute and a half on one CPU core.
Pass ``--quick`` for a shorter, weaker run.
"""

import argparse
import time

import numpy as np

from voxfader.fader import (
    ESTIMATED, INVERTED, NEUTRAL, SWEEP, FaderConfig, manipulate, pretrain_discriminator, train_fader,
)
from voxfader.metrics import probe_accuracy
from voxfader.speaker_space import SyntheticCorpusConfig, fit_standardizer, generate_corpus, split_utterances

parser = argparse.ArgumentParser()
parser.add_argument("--seed", type=int, default=1)
parser.add_argument("--quick", action="store_true", help="100 epochs instead of 400")
args = parser.parse_args()

corpus = generate_corpus(SyntheticCorpusConfig(seed=args.seed))
train, held = split_utterances(corpus, 0.1, seed=args.seed)
h, g = corpus.embeddings, corpus.genders
print(f"{len(corpus)} utterances from {len(np.unique(corpus.speaker_ids))} speakers, "
      f"{len(held)} held out")

standardizer = fit_standardizer(h[train])
disc = pretrain_discriminator(h[train], g[train], standardizer, seed=args.seed)


def accuracy(x):
    return np.mean((disc.logits(x) >= 0) == (g[held] == 1))


print(f"discriminator on held-out originals: {accuracy(h[held]):.3f}")

for adversarial in (True, False):
    cfg = FaderConfig(use_adversarial=adversarial, epochs=100 if args.quick else 400)
    t0 = time.time()
    model, history = train_fader(h[train], g[train], standardizer, cfg, seed=args.seed)
    print(f"\n{'with' if adversarial else 'without'} adversarial loss "
          f"({time.time() - t0:.0f} s, final L_RC {history[-1]['L_RC']:.2f}, L_ACC {history[-1]['L_ACC']:.3f})")
    for name, cond in (("est", ESTIMATED), ("inv", INVERTED), ("de", NEUTRAL)):
        print(f"  {name:>3}-gender reconstruction judged as own gender: {accuracy(manipulate(model, disc, h[held], cond)):.3f}")
    z = model.encode(h)
    print(f"  gender probe on the latent code (unseen speakers): {probe_accuracy(z, g, corpus.speaker_ids):.3f}")
    if adversarial:
        # explicit w: share of held-out utterances the discriminator calls female (label 1)
        shares = [np.mean(disc.logits(manipulate(model, disc, h[held], c)) >= 0) for c in SWEEP]
        print("  w sweep:", "  ".join(f"w={c.value:.2f}:{s:.2f}" for c, s in zip(SWEEP, shares)))
