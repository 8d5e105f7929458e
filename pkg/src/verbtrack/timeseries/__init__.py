from .dtw import DtwBank, dtw_classify, dtw_distance
from .hmm import HmmModel, hmm_loglik, hmm_train

__all__ = ["DtwBank", "HmmModel", "dtw_classify", "dtw_distance", "hmm_loglik", "hmm_train"]
