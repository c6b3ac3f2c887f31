"""Metrics, stratified splits, cross-validation and grid search."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataio import fit_normalization
from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyInput,
    GBTwinError,
    UndefinedAUC,
)
from .granulation import LabeledDataset, generate_balls
from .kernels import KernelSpec
from .multiclass import (
    GB_TWKSVC,
    MODES,
    OVR_TSVM,
    Granulation,
    TrainedModel,
    decision_scores,
    train,
    train_from_balls,
)
from .stats import (  # noqa: F401  (re-exported)
    TestResult,
    average_ranks,
    descriptive_stats,
    paired_t_test,
    student_t_sf_two_sided,
    wilcoxon_signed_rank,
)
from .twinpair import HyperParams

log = logging.getLogger(__name__)

# grids used in the original experiments
FULL_C_GRID = (2.0**-4, 2.0**-2, 2.0**0, 2.0**1, 2.0**2, 2.0**4, 2.0**6, 2.0**8)
FULL_P_GRID = FULL_C_GRID
FULL_EPS_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
FULL_NUM_GRID = (1, 2, 3, 4, 5)
FULL_PUR_GRID = (0.95, 0.96, 0.97, 0.98, 0.99, 1.0)


# ----------------------------------------------------------------------------
# metrics


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"{pred.shape} predictions for {truth.shape} labels")
    if truth.size == 0:
        raise EmptyInput("accuracy of zero predictions is undefined")
    return 100.0 * float(np.mean(pred == truth))


def _rank_auc(scores, positive) -> float:
    """Mann-Whitney AUC; tied pairs count one half."""
    ranks = average_ranks(scores)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def macro_ovr_auc(scores, truth, classes=None) -> float:
    """Macro average over classes of one-vs-rest rank AUC, as a percentage.

    Column j of ``scores`` scores class ``classes[j]`` (default 0..K-1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.ndim != 2 or scores.shape[0] != truth.size:
        raise DimensionMismatch("scores must be (t, K) with one row per label")
    K = scores.shape[1]
    if K < 2:
        raise ValueError("need at least two classes")
    classes = list(range(K)) if classes is None else list(classes)
    aucs = []
    for j, k in enumerate(classes):
        positive = truth == k
        if positive.all() or not positive.any():
            raise UndefinedAUC(f"class {k!r} is absent from (or is all of) the labels")
        aucs.append(_rank_auc(scores[:, j], positive))
    return 100.0 * float(np.mean(aucs))


# ----------------------------------------------------------------------------
# splitting


def _check_class_sizes(labels, minimum):
    values, counts = np.unique(labels, return_counts=True)
    small = [(v, c) for v, c in zip(values.tolist(), counts.tolist()) if c < minimum]
    if small:
        raise ClassTooSmall(f"classes with fewer than {minimum} members: {small}")
    return values


def stratified_split(data: LabeledDataset, train_fraction: float, seed: int = 0):
    """Split preserving class proportions; returns ``(train, test)`` datasets."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    classes = _check_class_sizes(data.labels, 2)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k in classes:
        idx = np.flatnonzero(data.labels == k)
        rng.shuffle(idx)
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return data.subset(tr), data.subset(te)


def stratified_folds(labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample; every class is dealt round-robin across folds."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    labels = np.asarray(labels)
    classes = _check_class_sizes(labels, k)
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in classes:
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        fold[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return fold


# ----------------------------------------------------------------------------
# cross-validation


@dataclass
class EvalReport:
    per_fold_accuracy: list
    mean_accuracy: float
    std_accuracy: float
    macro_auc: float | None
    train_time_seconds: float
    chosen_params: dict = field(default_factory=dict)
    per_fold_auc: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, accs, times, aucs=None, chosen_params=None, extras=None):
        accs = [float(a) for a in accs]
        aucs = [float(a) for a in aucs] if aucs else []
        return cls(
            per_fold_accuracy=accs,
            mean_accuracy=float(np.mean(accs)),
            std_accuracy=float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
            macro_auc=float(np.mean(aucs)) if aucs else None,
            train_time_seconds=float(np.mean(times)),
            chosen_params=dict(chosen_params or {}),
            per_fold_auc=aucs,
            extras=dict(extras or {}),
        )

    def to_dict(self, include_timing: bool = True):
        d = asdict(self)
        if not include_timing:
            d.pop("train_time_seconds")
        return d


def _fold_auc(scores, model_classes, truth, all_classes):
    """AUC on one fold, padding classes the model never saw with a floor score."""
    if scores is None:
        return None
    col = {k: i for i, k in enumerate(model_classes)}
    floor = float(np.min(scores)) - 1.0 if scores.size else 0.0
    full = np.full((scores.shape[0], len(all_classes)), floor)
    for j, k in enumerate(all_classes):
        if k in col:
            full[:, j] = scores[:, col[k]]
    try:
        return macro_ovr_auc(full, truth, all_classes)
    except GBTwinError:
        return None


def _scores_of(fitted, X):
    if isinstance(fitted, TrainedModel):
        s = decision_scores(fitted, X)
        return s, np.asarray(fitted.classes)[np.argmax(s, axis=1)], fitted.classes
    pred = np.asarray(fitted.predict(X))
    return None, pred, None


def kfold_cv(data: LabeledDataset, k: int, trainer, seed: int = 0) -> EvalReport:
    """Stratified k-fold CV of ``trainer(train_data) -> fitted``.

    ``fitted`` is a TrainedModel or any object with ``predict(X)``.  The
    reported time is the mean wall-clock duration of the trainer call.
    """
    folds = stratified_folds(data.labels, k, seed)
    all_classes = data.classes
    accs, times, aucs = [], [], []
    max_stat, feasible = 0.0, True
    for f in range(k):
        tr, te = data.subset(folds != f), data.subset(folds == f)
        t0 = time.perf_counter()
        fitted = trainer(tr)
        times.append(time.perf_counter() - t0)
        scores, pred, model_classes = _scores_of(fitted, te.features)
        accs.append(accuracy(pred, te.labels))
        auc = _fold_auc(scores, model_classes, te.labels, all_classes)
        if auc is not None:
            aucs.append(auc)
        if isinstance(fitted, TrainedModel):
            for diag in fitted.iter_diagnostics():
                max_stat = max(max_stat, *diag["stationarity"])
                feasible &= diag["feasible"]
    extras = {"max_stationarity_residual": max_stat, "all_feasible": bool(feasible)}
    return EvalReport.from_folds(
        accs, times, aucs if len(aucs) == k else None, extras=extras
    )


# ----------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class Grid:
    """Hyperparameter grid.  c1 and c3 share ``c1`` values; c2 and c4 share ``c2``.

    For the one-versus-rest TSVM the two values are the penalties of its two
    planes and ``epsilons`` is ignored.  ``p_values`` is used only with the
    Gaussian kernel.
    """

    c1: tuple = FULL_C_GRID
    c2: tuple = FULL_C_GRID
    epsilons: tuple = FULL_EPS_GRID
    kernel: str = "linear"
    p_values: tuple = (1.0,)
    nums: tuple = FULL_NUM_GRID
    purs: tuple = FULL_PUR_GRID
    delta: float = 1e-4

    def __post_init__(self):
        for name in ("c1", "c2", "epsilons", "p_values", "nums", "purs"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"grid field {name} is empty")

    def hyperparams(self, mode):
        """Inner grid in iteration order."""
        eps = (0.5,) if mode == OVR_TSVM else self.epsilons
        ps = self.p_values if self.kernel == "gaussian" else (1.0,)
        for c1, c2, e, p in itertools.product(self.c1, self.c2, eps, ps):
            yield HyperParams(
                c1=c1, c2=c2, c3=c1, c4=c2, epsilon=e, delta=self.delta,
                kernel=KernelSpec(self.kernel, p),
            )

    def granulations(self, mode, seed):
        if mode != GB_TWKSVC:
            return [None]
        return [Granulation(pur, num, seed) for num, pur in itertools.product(self.nums, self.purs)]


def reduced_grid(kernel="linear", p_values=(1.0,)) -> Grid:
    """The desk-scale grid used by the acceptance runs."""
    return Grid(
        c1=(2.0**-2, 2.0**0, 2.0**2),
        c2=(2.0**-2, 2.0**0, 2.0**2),
        epsilons=(0.1, 0.5),
        kernel=kernel,
        p_values=p_values,
        nums=(2, 3),
        purs=(0.97, 0.99),
    )


@dataclass
class GridResult:
    best_hyperparams: HyperParams
    best_granulation: Granulation | None
    report: EvalReport
    # one row per configuration: (granulation, hyperparams, mean accuracy)
    table: list = field(default_factory=list)

    def best_params_dict(self):
        d = {"hyperparams": self.best_hyperparams.to_dict()}
        d["granulation"] = None if self.best_granulation is None else self.best_granulation.to_dict()
        return d


def _params_dict(mode, hp, gran):
    return {
        "mode": mode,
        "hyperparams": hp.to_dict(),
        "granulation": None if gran is None else gran.to_dict(),
    }


def grid_search(
    data: LabeledDataset,
    grid: Grid,
    mode: str = GB_TWKSVC,
    folds: int = 5,
    seed: int = 0,
    n_jobs: int | None = None,
) -> GridResult:
    """Exhaustive CV grid search; balls are built once per fold and (num, pur).

    Configurations that raise are scored 0 on the failing fold.  Ties keep
    the configuration that comes first in grid order.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    fold_id = stratified_folds(data.labels, folds, seed)
    all_classes = data.classes
    hps = list(grid.hyperparams(mode))
    grans = grid.granulations(mode, seed)
    # results[(gi, hi)] -> per-fold lists
    acc = {}
    auc = {}
    tim = {}
    max_stat, feasible, n_failed = 0.0, True, 0

    for f in range(folds):
        tr = data.subset(fold_id != f)
        te = data.subset(fold_id == f)
        for gi, gran in enumerate(grans):
            balls, norm, gran_time, gran_error = None, None, 0.0, None
            if gran is not None:
                t0 = time.perf_counter()
                norm = fit_normalization(tr.features)
                try:
                    balls = generate_balls(
                        LabeledDataset(norm.apply(tr.features), tr.labels),
                        gran.theta, gran.min_points, gran.seed,
                    )
                except GBTwinError as exc:
                    gran_error = exc
                gran_time = time.perf_counter() - t0
            for hi, hp in enumerate(hps):
                key = (gi, hi)
                t0 = time.perf_counter()
                try:
                    if gran_error is not None:
                        raise gran_error
                    if gran is not None:
                        model = train_from_balls(balls, norm, hp, gran, n_jobs=n_jobs)
                    else:
                        model = train(tr, hp, mode, n_jobs=n_jobs)
                    elapsed = time.perf_counter() - t0 + gran_time
                    scores = decision_scores(model, te.features)
                    pred = np.asarray(model.classes)[np.argmax(scores, axis=1)]
                    a = accuracy(pred, te.labels)
                    u = _fold_auc(scores, model.classes, te.labels, all_classes)
                    for diag in model.iter_diagnostics():
                        max_stat = max(max_stat, *diag["stationarity"])
                        feasible &= diag["feasible"]
                except GBTwinError as exc:
                    log.info("config %s failed on fold %d: %s", _params_dict(mode, hp, gran), f, exc)
                    n_failed += 1
                    elapsed = time.perf_counter() - t0 + gran_time
                    a, u = 0.0, None
                acc.setdefault(key, []).append(a)
                auc.setdefault(key, []).append(u)
                tim.setdefault(key, []).append(elapsed)

    table = []
    best_key, best_mean = None, -1.0
    for gi, gran in enumerate(grans):
        for hi, hp in enumerate(hps):
            key = (gi, hi)
            m = float(np.mean(acc[key]))
            table.append((gran, hp, m))
            if m > best_mean:
                best_key, best_mean = key, m
    gi, hi = best_key
    aucs = auc[best_key]
    report = EvalReport.from_folds(
        acc[best_key],
        tim[best_key],
        aucs if all(a is not None for a in aucs) else None,
        chosen_params=_params_dict(mode, hps[hi], grans[gi]),
        extras={
            "max_stationarity_residual": max_stat,
            "all_feasible": bool(feasible),
            "failed_fold_fits": n_failed,
            "configurations": len(table),
            "folds": folds,
            "seed": seed,
        },
    )
    return GridResult(hps[hi], grans[gi], report, table)
