"""Pairwise training, ternary voting and the one-versus-rest TSVM baseline.

Three model families share this module:

* ``gb-twksvc``  granular balls feed every class pair (centroids + radii);
* ``twin-ksvc``  the same pair solver on raw points with zero radii;
* ``ovr-tsvm``   K binary twin SVMs, class k against all the others.

Inputs are min-max scaled with statistics fitted on the training data and
stored in the model, so ``predict`` accepts raw features.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .dataio import Normalization, atomic_write_json, fit_normalization
from .errors import DimensionMismatch, TooFewClasses
from .granulation import BallSet, LabeledDataset, generate_balls
from .kernels import gram
from .modes import GB_TWKSVC, MODES, OVR_TSVM, TWIN_KSVC  # noqa: F401
from .twinpair import HyperParams, PairProblem, PlanePair, train_pair

MODEL_FORMAT = "gbtwin-model/1"


@dataclass(frozen=True)
class Granulation:
    theta: float = 0.97
    min_points: int = 2
    seed: int = 0

    def to_dict(self):
        return {"theta": self.theta, "min_points": self.min_points, "seed": self.seed}


@dataclass(frozen=True)
class TrainedModel:
    classes: tuple
    # pairwise modes: {(p, q): PlanePair} with p < q;  ovr-tsvm: {k: PlanePair}
    pairs: dict
    mode: str
    normalization: Normalization
    hyperparams: HyperParams
    granulation: Granulation | None = None
    normalize_distance: bool = False
    label_names: tuple | None = None
    n_balls: int | None = None

    def __post_init__(self):
        K = len(self.classes)
        expected = K if self.mode == OVR_TSVM else K * (K - 1) // 2
        if len(self.pairs) != expected:
            raise ValueError(f"{self.mode} model with {K} classes needs {expected} plane records")

    @property
    def d(self) -> int:
        return self.normalization.mins.size

    def iter_diagnostics(self):
        for pp in self.pairs.values():
            yield pp.diagnostics

    def to_dict(self):
        if self.mode == OVR_TSVM:
            records = [{"class": k, **pp.to_dict()} for k, pp in self.pairs.items()]
        else:
            records = [{"p": p, "q": q, **pp.to_dict()} for (p, q), pp in self.pairs.items()]
        return {
            "format": MODEL_FORMAT,
            "classes": list(self.classes),
            "label_names": None if self.label_names is None else list(self.label_names),
            "mode": self.mode,
            "hyperparams": self.hyperparams.to_dict(),
            "normalization": self.normalization.to_dict(),
            "granulation": None if self.granulation is None else self.granulation.to_dict(),
            "normalize_distance": self.normalize_distance,
            "n_balls": self.n_balls,
            "planes": records,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        pairs = {}
        for rec in d["planes"]:
            key = rec["class"] if d["mode"] == OVR_TSVM else (rec["p"], rec["q"])
            pairs[key] = PlanePair.from_dict(rec)
        gran = d.get("granulation")
        names = d.get("label_names")
        return cls(
            classes=tuple(d["classes"]),
            pairs=pairs,
            mode=d["mode"],
            normalization=Normalization.from_dict(d["normalization"]),
            hyperparams=HyperParams.from_dict(d["hyperparams"]),
            granulation=None if gran is None else Granulation(**gran),
            normalize_distance=bool(d.get("normalize_distance", False)),
            label_names=None if names is None else tuple(names),
            n_balls=d.get("n_balls"),
        )


def save_model(model: TrainedModel, path) -> None:
    atomic_write_json(path, model.to_dict())


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return TrainedModel.from_dict(json.load(fh))


def _map(fn, items, n_jobs):
    if n_jobs and n_jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _train_pairwise(rows, radii, labels, hp, n_jobs=None):
    classes = tuple(sorted(np.unique(labels).tolist()))
    if len(classes) < 2:
        raise TooFewClasses(f"need at least 2 classes, got {len(classes)}")
    masks = {k: labels == k for k in classes}

    def fit(pair):
        p, q = pair
        rest = ~(masks[p] | masks[q])
        problem = PairProblem(
            rows[masks[p]], rows[masks[q]], rows[rest],
            radii[masks[p]], radii[masks[q]], radii[rest],
        )
        return train_pair(problem, hp)

    keys = list(combinations(classes, 2))
    return classes, dict(zip(keys, _map(fit, keys, n_jobs)))


def _train_ovr(X, y, hp, n_jobs=None):
    classes = tuple(sorted(np.unique(y).tolist()))
    if len(classes) < 2:
        raise TooFewClasses(f"need at least 2 classes, got {len(classes)}")

    def fit(k):
        return train_pair(PairProblem.from_points(X[y == k], X[y != k]), hp)

    return classes, dict(zip(classes, _map(fit, list(classes), n_jobs)))


def train_from_balls(
    balls: BallSet,
    normalization: Normalization,
    hp: HyperParams,
    granulation: Granulation | None = None,
    n_jobs: int | None = None,
    normalize_distance: bool = False,
    label_names=None,
) -> TrainedModel:
    """Fit a GB-TWKSVC model on balls built in the normalized feature space."""
    classes, pairs = _train_pairwise(balls.centroids, balls.radii, balls.labels, hp, n_jobs)
    return TrainedModel(
        classes, pairs, GB_TWKSVC, normalization, hp,
        granulation=granulation,
        normalize_distance=normalize_distance,
        label_names=label_names,
        n_balls=len(balls),
    )


def train(
    data: LabeledDataset,
    hp: HyperParams,
    mode: str = GB_TWKSVC,
    granulation: Granulation | None = None,
    n_jobs: int | None = None,
    normalize_distance: bool = False,
    label_names=None,
) -> TrainedModel:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if len(np.unique(data.labels)) < 2:
        raise TooFewClasses("training data has fewer than 2 classes")
    norm = fit_normalization(data.features)
    X = norm.apply(data.features)
    y = data.labels
    if mode == GB_TWKSVC:
        granulation = granulation or Granulation()
        balls = generate_balls(
            LabeledDataset(X, y), granulation.theta, granulation.min_points, granulation.seed
        )
        return train_from_balls(
            balls, norm, hp, granulation, n_jobs, normalize_distance, label_names
        )
    if mode == TWIN_KSVC:
        classes, pairs = _train_pairwise(X, np.zeros(len(X)), y, hp, n_jobs)
    else:
        classes, pairs = _train_ovr(X, y, hp, n_jobs)
    return TrainedModel(
        classes, pairs, mode, norm, hp,
        normalize_distance=normalize_distance,
        label_names=label_names,
    )


def _weight_norm(pp: PlanePair, w) -> float:
    if pp.reference is None:
        return float(np.linalg.norm(w))
    # norm of the plane normal in the kernel feature space
    K = gram(pp.reference, pp.reference, pp.kernel)
    return float(np.sqrt(max(w @ K @ w, 0.0)))


def _pair_outcomes(pp: PlanePair, Z, epsilon, normalize_distance):
    """Per row: +1 vote for p, -1 vote for q, 0 for no vote."""
    f1, f2 = pp.decision(Z)
    tube = 1.0 - epsilon
    p_side = f1 > -tube
    q_side = f2 < tube
    d1, d2 = np.abs(f1), np.abs(f2)
    if normalize_distance:
        d1 = d1 / max(_weight_norm(pp, pp.w1), 1e-300)
        d2 = d2 / max(_weight_norm(pp, pp.w2), 1e-300)
    both = p_side & q_side
    out = np.where(p_side, 1, 0) - np.where(q_side, 1, 0)
    out[both] = np.where(d1[both] <= d2[both], 1, -1)
    return out


def vote_pair(pp: PlanePair, z, epsilon: float, normalize_distance: bool = False):
    """Ternary outcome for one point: ``"p"``, ``"q"`` or ``None``."""
    out = _pair_outcomes(pp, np.atleast_2d(z), epsilon, normalize_distance)[0]
    return {1: "p", -1: "q", 0: None}[int(out)]


def _prepare(model: TrainedModel, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.d:
        raise DimensionMismatch(f"model expects {model.d} features, got {X.shape[1]}")
    return model.normalization.apply(X)


def vote_scores(model: TrainedModel, X) -> np.ndarray:
    """Vote counts, shape ``(t, K)``, columns ordered as ``model.classes``."""
    if model.mode == OVR_TSVM:
        raise ValueError("vote counts are defined for the pairwise modes only")
    Z = _prepare(model, X)
    index = {k: i for i, k in enumerate(model.classes)}
    votes = np.zeros((Z.shape[0], len(model.classes)), dtype=np.int64)
    eps = model.hyperparams.epsilon
    for (p, q), pp in model.pairs.items():
        out = _pair_outcomes(pp, Z, eps, model.normalize_distance)
        votes[:, index[p]] += out == 1
        votes[:, index[q]] += out == -1
    return votes


def ovr_distances(model: TrainedModel, X) -> np.ndarray:
    """Normalized distance of each row to each class's proximal plane."""
    Z = _prepare(model, X)
    cols = []
    for k in model.classes:
        pp = model.pairs[k]
        f1, _ = pp.decision(Z)
        cols.append(np.abs(f1) / max(_weight_norm(pp, pp.w1), 1e-300))
    return np.column_stack(cols)


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Per-class scores where larger means more likely; used for AUC."""
    if model.mode == OVR_TSVM:
        return -ovr_distances(model, X)
    return vote_scores(model, X).astype(np.float64)


def predict(model: TrainedModel, X) -> np.ndarray:
    """Class identifiers; vote ties go to the smallest identifier."""
    if model.mode == OVR_TSVM:
        idx = np.argmin(ovr_distances(model, X), axis=1)
    else:
        idx = np.argmax(vote_scores(model, X), axis=1)
    return np.asarray(model.classes)[idx]
