"""Id-only collaborative filtering baselines."""

from .als import MfModel, als_objective, fit_rsvd
from .cocluster import CoClusterModel, fit_cocluster
from .knn import KnnModel, KnnPrediction, fit_knn, msd_similarity, predict_knn
from .svdpp import SvdPpModel, fit_svdpp, svdpp_objective

__all__ = [
    "MfModel",
    "als_objective",
    "fit_rsvd",
    "CoClusterModel",
    "fit_cocluster",
    "KnnModel",
    "KnnPrediction",
    "fit_knn",
    "msd_similarity",
    "predict_knn",
    "SvdPpModel",
    "fit_svdpp",
    "svdpp_objective",
]
