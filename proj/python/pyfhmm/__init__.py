from ._pyfhmm import (
    Model,
    confusion,
    em_fit,
    f1_scores,
    forecast,
    kmeans_init,
    knn_mi,
    kron_transition,
    loglik,
    mi_weights,
    posteriors,
    roc_auc,
    sample,
    supervised_fit,
    validate,
    viterbi,
)

__all__ = [
    "Model",
    "confusion",
    "em_fit",
    "f1_scores",
    "forecast",
    "kmeans_init",
    "knn_mi",
    "kron_transition",
    "loglik",
    "mi_weights",
    "posteriors",
    "roc_auc",
    "sample",
    "supervised_fit",
    "validate",
    "viterbi",
]
