"""Granular-ball K-class twin support vector classification."""

import importlib

from .errors import GBTwinError
from .modes import GB_TWKSVC, MODES, OVR_TSVM, TWIN_KSVC

__version__ = "0.1.0"

# public names resolved on first access, so light entry points (the stats
# command) do not pay for compiling the solver
_LAZY = {
    "granulation": ("BallSet", "GranularBall", "LabeledDataset", "generate_balls", "kmeans", "purity"),
    "kernels": ("KernelSpec", "gram"),
    "multiclass": ("Granulation", "TrainedModel", "load_model", "predict", "save_model", "train", "vote_pair", "vote_scores"),
    "numerics": ("BoxQP", "DualSolution", "solve_box_qp", "solve_spd"),
    "twinpair": ("HyperParams", "PairProblem", "PlanePair", "train_pair"),
}
_WHERE = {name: module for module, names in _LAZY.items() for name in names}

__all__ = ["GBTwinError", "GB_TWKSVC", "MODES", "OVR_TSVM", "TWIN_KSVC", *_WHERE]


def __getattr__(name):
    module = _WHERE.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{module}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(__all__)
