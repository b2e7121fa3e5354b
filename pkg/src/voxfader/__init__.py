"""Adversarial attribute disentanglement of speaker embeddings with a fader autoencoder.

Subpackages and modules:

- ``nn_core``: tape-based reverse-mode differentiation, optimizers, checkpoints
- ``alignment``: phoneme/frame decompression and alignment contrastive losses
- ``speaker_space``: synthetic speaker-embedding corpus and standardization
- ``fader``: discriminator pretraining, fader training and attribute manipulation
- ``metrics``: accuracy, ROC/EER, kNN mutual information, PCA
- ``pipeline`` / ``cli``: configured end-to-end runs
"""

__version__ = "0.1.0"
