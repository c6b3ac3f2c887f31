import itertools
import json

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import rankdata
from oracles import blobs

from gbtwin import LabeledDataset
from gbtwin.errors import (
    AllZeroDifferences,
    ClassTooSmall,
    DegenerateVariance,
    DimensionMismatch,
    EmptyInput,
    UndefinedAUC,
)
from gbtwin.evaluation import (
    FULL_EPS_GRID,
    EvalReport,
    Grid,
    accuracy,
    average_ranks,
    descriptive_stats,
    grid_search,
    kfold_cv,
    macro_ovr_auc,
    paired_t_test,
    reduced_grid,
    stratified_folds,
    stratified_split,
    wilcoxon_signed_rank,
)
from gbtwin.multiclass import GB_TWKSVC, OVR_TSVM, TWIN_KSVC

# mean accuracies of the three models over the nine benchmark datasets
GB = [89.58, 90.74, 91.04, 76.74, 52.44, 99.34, 90.13, 97.61, 74.38]
TK = [87.72, 84.34, 88.66, 69.99, 54.13, 97.31, 89.01, 93.81, 67.33]
TS = [84.88, 69.73, 80.68, 62.45, 51.17, 95.33, 77.03, 89.98, 64.67]


def t_two_sided_oracle(t, df):
    """Two-sided tail by quadrature of the Student-t density at 40 digits."""
    with mpmath.workdps(40):
        nu = mpmath.mpf(df)
        c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))
        tail = mpmath.quad(lambda x: c * (1 + x * x / nu) ** (-(nu + 1) / 2), [abs(t), mpmath.inf])
        return float(2 * tail)


def wilcoxon_brute(d):
    d = np.asarray(d, dtype=float)
    d = d[d != 0]
    r = rankdata(np.abs(d))
    w = min(r[d > 0].sum(), r[d < 0].sum())
    hits = 0
    for signs in itertools.product((0, 1), repeat=d.size):
        s = np.array(signs, dtype=bool)
        if min(r[s].sum(), r[~s].sum()) <= w + 1e-9:
            hits += 1
    return w, hits / 2 ** d.size


class TestAccuracyAndAUC:
    def test_accuracy(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 100.0
        assert accuracy([1, 1], [2, 2]) == 0.0
        assert accuracy([0, 1, 1, 1], [0, 1, 1, 0]) == 75.0
        with pytest.raises(EmptyInput):
            accuracy([], [])
        with pytest.raises(DimensionMismatch):
            accuracy([1], [1, 2])

    def test_auc_perfect_and_constant(self):
        truth = np.array([0, 0, 1, 1, 2, 2])
        assert macro_ovr_auc(np.eye(3)[truth], truth) == 100.0
        assert macro_ovr_auc(np.ones((6, 3)), truth) == 50.0

    def test_auc_one_inversion(self):
        # class 0 scores: positives {3, 1}, negatives {2, 0}: one inverted pair of four
        truth = np.array([0, 0, 1, 1])
        scores = np.array([[3.0, 0.0], [1.0, 0.0], [2.0, 1.0], [0.0, 1.0]])
        from gbtwin.evaluation import _rank_auc

        assert 100 * _rank_auc(scores[:, 0], truth == 0) == 75.0
        truth4 = np.array([0, 0, 1, 1])
        s = np.array([4.0, 2.0, 3.0, 1.0])
        assert 100 * _rank_auc(s, truth4 == 0) == 75.0
        s = np.array([4.0, 3.0, 3.0, 1.0])
        # a tie between a positive and a negative contributes one half: 3.5 / 4
        assert 100 * _rank_auc(s, truth4 == 0) == 87.5

    def test_auc_absent_class(self):
        with pytest.raises(UndefinedAUC):
            macro_ovr_auc(np.ones((3, 3)), np.array([0, 0, 1]))

    @given(st.integers(0, 10_000))
    def test_auc_monotone_invariance(self, seed):
        rng = np.random.default_rng(seed)
        truth = np.r_[np.arange(3), rng.integers(0, 3, size=27)]
        scores = rng.integers(0, 5, size=(30, 3)).astype(float)
        base = macro_ovr_auc(scores, truth)
        assert macro_ovr_auc(np.exp(scores) * 3 + 1, truth) == pytest.approx(base, abs=1e-12)
        assert macro_ovr_auc(scores**3 - 7, truth) == pytest.approx(base, abs=1e-12)


class TestStatistics:
    @pytest.mark.parametrize(
        "a,b,t,p",
        [(GB, TK, 3.347, 0.0101), (GB, TS, 4.737, 0.0015), (TK, TS, 4.116, 0.0034)],
    )
    def test_paired_t_table_values(self, a, b, t, p):
        res = paired_t_test(a, b)
        assert res.statistic == pytest.approx(t, abs=0.005)
        assert res.p_value == pytest.approx(p, abs=0.0005)

    @pytest.mark.parametrize(
        "a,b,w,p",
        [(GB, TK, 2.0, 0.0117), (GB, TS, 0.0, 0.0039), (TK, TS, 0.0, 0.0039)],
    )
    def test_wilcoxon_table_values(self, a, b, w, p):
        res = wilcoxon_signed_rank(a, b)
        assert res.statistic == w
        assert res.p_value == pytest.approx(p, abs=0.0005)

    def test_exact_small_p_values(self):
        # W = 0 with n = 9 is 2 of 512 sign patterns
        assert wilcoxon_signed_rank(GB, TS).p_value == pytest.approx(2 / 512, abs=1e-15)
        assert wilcoxon_signed_rank(GB, TK).p_value == pytest.approx(6 / 512, abs=1e-15)

    def test_descriptive_means_and_population_std(self):
        for col, mean, std in ((GB, 84.67, 13.83), (TK, 81.37, 13.49), (TS, 75.10, 13.46)):
            s = descriptive_stats(col)
            assert s["mean"] == pytest.approx(mean, abs=0.01)
            assert s["std"] == pytest.approx(std, abs=0.01)
        assert descriptive_stats(GB)["min"] == 52.44 and descriptive_stats(GB)["max"] == 99.34

    def test_degenerate_inputs(self):
        b = np.arange(9.0)
        with pytest.raises(DegenerateVariance):
            paired_t_test(b + 1, b)
        with pytest.raises(AllZeroDifferences):
            wilcoxon_signed_rank(b, b)
        with pytest.raises(DimensionMismatch):
            paired_t_test([1, 2], [1, 2, 3])

    def test_all_positive_differences(self):
        a = np.arange(9.0) + 1
        assert wilcoxon_signed_rank(a, a - np.linspace(0.1, 0.9, 9)).statistic == 0.0

    def test_t_against_quadrature_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n = int(rng.integers(2, 31))
            a = rng.normal(size=n)
            b = a + rng.normal(loc=rng.normal(), scale=rng.uniform(0.1, 2), size=n)
            res = paired_t_test(a, b)
            assert res.p_value == pytest.approx(t_two_sided_oracle(res.statistic, n - 1), abs=1e-6)

    @given(st.integers(0, 10_000))
    def test_t_antisymmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=8), rng.normal(size=8)
        assert paired_t_test(a, b).statistic == -paired_t_test(b, a).statistic
        assert paired_t_test(a, b).p_value == pytest.approx(paired_t_test(b, a).p_value, abs=1e-15)

    @given(st.integers(0, 10_000), st.integers(1, 10))
    def test_wilcoxon_brute_force(self, seed, n):
        rng = np.random.default_rng(seed)
        # rounding creates ties and zeros on purpose
        a = np.round(rng.normal(size=n), 1)
        b = np.round(rng.normal(size=n), 1)
        if np.all(a == b):
            return
        w, p = wilcoxon_brute(a - b)
        res = wilcoxon_signed_rank(a, b)
        assert res.statistic == pytest.approx(w)
        # the two tails are disjoint unless w is the midpoint, where both give 1
        assert res.p_value == pytest.approx(p, abs=1e-12)

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
    def test_average_ranks_match_scipy(self, values):
        np.testing.assert_array_equal(average_ranks(values), rankdata(values))

    def test_wilcoxon_monte_carlo(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            n = int(rng.integers(8, 16))
            d = rng.normal(loc=0.3, size=n)
            res = wilcoxon_signed_rank(d, np.zeros(n))
            r = rankdata(np.abs(d))
            draws = 20_000
            signs = rng.integers(0, 2, size=(draws, n)).astype(bool)
            pos = (signs * r).sum(axis=1)
            stat = np.minimum(pos, r.sum() - pos)
            est = np.mean(stat <= res.statistic + 1e-9)
            se = np.sqrt(est * (1 - est) / draws)
            assert abs(res.p_value - est) <= 3 * se + 1e-12


class TestSplits:
    def test_balanced_split(self):
        y = np.repeat([0, 1], 50)
        data = LabeledDataset(np.arange(100.0)[:, None], y)
        tr, te = stratified_split(data, 0.8, seed=0)
        assert np.bincount(tr.labels).tolist() == [40, 40]
        assert np.bincount(te.labels).tolist() == [10, 10]

    def test_iris_like_split(self):
        y = np.repeat([0, 1, 2], 50)
        tr, _ = stratified_split(LabeledDataset(np.zeros((150, 1)), y), 0.8, seed=3)
        assert np.bincount(tr.labels).tolist() == [40, 40, 40]

    @given(st.integers(0, 10_000), st.floats(0.1, 0.9))
    def test_skewed_proportions_within_one(self, seed, frac):
        # 46.08 / 46.08 / 7.84 percent class mix
        y = np.repeat([0, 1, 2], [288, 288, 49])
        data = LabeledDataset(np.zeros((y.size, 1)), y)
        tr, te = stratified_split(data, frac, seed)
        for k, size in zip(range(3), (288, 288, 49)):
            assert abs(np.sum(tr.labels == k) - frac * size) <= 1
        assert tr.n + te.n == y.size
        again, _ = stratified_split(data, frac, seed)
        np.testing.assert_array_equal(again.labels, tr.labels)

    def test_split_errors(self):
        with pytest.raises(ClassTooSmall):
            stratified_split(LabeledDataset(np.zeros((3, 1)), [0, 0, 1]), 0.5)
        with pytest.raises(ValueError):
            stratified_split(LabeledDataset(np.zeros((4, 1)), [0, 0, 1, 1]), 1.0)

    def test_folds_are_stratified(self):
        y = np.repeat([0, 1, 2], [20, 15, 10])
        folds = stratified_folds(y, 5, seed=0)
        for f in range(5):
            np.testing.assert_array_equal(np.bincount(y[folds == f]), [4, 3, 2])
        with pytest.raises(ClassTooSmall):
            stratified_folds(np.array([0, 0, 0, 1]), 2)


class _Constant:
    def __init__(self, label):
        self.label = label

    def predict(self, X):
        return np.full(len(X), self.label)


class _Oracle:
    """Looks labels up by the (unique) first feature."""

    def __init__(self, data):
        self.table = dict(zip(data.features[:, 0].tolist(), data.labels.tolist()))

    def predict(self, X):
        return np.array([self.table[x] for x in X[:, 0]])


class TestCrossValidation:
    def test_constant_model_half_accuracy(self):
        data = LabeledDataset(np.arange(20.0)[:, None], np.repeat([0, 1], 10))
        report = kfold_cv(data, 5, lambda tr: _Constant(0), seed=0)
        assert report.per_fold_accuracy == [50.0] * 5
        assert report.macro_auc is None

    def test_perfect_model(self):
        data = LabeledDataset(np.arange(30.0)[:, None], np.repeat([0, 1, 2], 10))
        report = kfold_cv(data, 5, lambda tr: _Oracle(data), seed=0)
        assert report.mean_accuracy == 100.0 and report.std_accuracy == 0.0

    def test_report_json_determinism(self, three_blobs):
        from gbtwin.multiclass import train
        from gbtwin.twinpair import HyperParams

        runs = [
            json.dumps(kfold_cv(three_blobs, 3, lambda tr: train(tr, HyperParams(), TWIN_KSVC), 7).to_dict(False), sort_keys=True)
            for _ in range(2)
        ]
        assert runs[0] == runs[1]
        assert "train_time_seconds" not in json.loads(runs[0])


class TestGridSearch:
    def test_full_eps_grid_inside_open_interval(self):
        assert all(0 < e < 1 for e in FULL_EPS_GRID)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            Grid(c1=())

    def test_singleton_grid(self, three_blobs):
        grid = Grid(c1=(2.0,), c2=(0.5,), epsilons=(0.3,), nums=(2,), purs=(0.97,))
        res = grid_search(three_blobs, grid, GB_TWKSVC, folds=3)
        assert (res.best_hyperparams.c1, res.best_hyperparams.c2, res.best_hyperparams.epsilon) == (2.0, 0.5, 0.3)
        assert (res.best_granulation.min_points, res.best_granulation.theta) == (2, 0.97)
        assert len(res.table) == 1

    def test_strictly_better_configuration_chosen(self):
        # two well-separated classes plus a third far away; a huge min_points
        # wipes out the granulation so that configuration scores 0 everywhere
        X, y = blobs(np.random.default_rng(2), [[0, 0], [3, 3], [0, 3]], 20, spread=0.2)
        data = LabeledDataset(X, y)
        grid = Grid(c1=(1.0,), c2=(1.0,), epsilons=(0.1,), nums=(100, 2), purs=(0.97,))
        res = grid_search(data, grid, GB_TWKSVC, folds=4)
        assert res.best_granulation.min_points == 2
        assert res.report.extras["failed_fold_fits"] == 4
        scores = [acc for _, _, acc in res.table]
        assert scores[0] == 0.0 and scores[1] > 0

    def test_tie_keeps_first(self, three_blobs):
        grid = Grid(c1=(1.0, 1.0), c2=(1.0,), epsilons=(0.1,), nums=(1,), purs=(0.97,))
        res = grid_search(three_blobs, grid, TWIN_KSVC, folds=3)
        assert res.table[0][2] == res.table[1][2]
        assert res.report.chosen_params["hyperparams"] == res.table[0][1].to_dict()

    def test_ovr_ignores_epsilon_and_granulation(self, three_blobs):
        res = grid_search(three_blobs, reduced_grid(), OVR_TSVM, folds=3)
        assert len(res.table) == 9
        assert res.best_granulation is None

    def test_report_serializes(self, three_blobs):
        res = grid_search(three_blobs, Grid(c1=(1.0,), c2=(1.0,), epsilons=(0.1,), nums=(2,), purs=(0.97,)), GB_TWKSVC, folds=3)
        d = res.report.to_dict()
        json.dumps(d)
        assert set(d) >= {"per_fold_accuracy", "mean_accuracy", "std_accuracy", "macro_auc", "train_time_seconds"}
        assert EvalReport(**d).mean_accuracy == res.report.mean_accuracy
