"""Objective evaluation measures: accuracy, ROC/EER, kNN mutual information, PCA."""

from .classification import binary_accuracy, probe_accuracy
from .mutual_info import knn_mutual_information, mi_table, select_mi_pair
from .pca import PcaModel, pca_fit, pca_project
from .roc import ScoredTrials, eer, roc_auc, roc_curve
from .verification import SpeakerClassifier, speaker_verification_eer, verification_trials

__all__ = [
    "binary_accuracy", "probe_accuracy", "knn_mutual_information", "mi_table", "select_mi_pair",
    "PcaModel", "pca_fit", "pca_project", "ScoredTrials", "eer", "roc_auc", "roc_curve",
    "SpeakerClassifier", "speaker_verification_eer", "verification_trials",
]
