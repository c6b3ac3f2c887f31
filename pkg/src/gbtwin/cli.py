"""Command-line interface: ``gbtwin <subcommand> ...``.

Subcommands
-----------
gen-balls    dataset -> granular-ball CSV
train        dataset (+ config) -> model JSON
predict      model + dataset -> label CSV
cv           dataset (+ config) -> EvalReport JSON
grid         dataset (+ grids) -> best configuration + report JSON
bench        fixture datasets x models -> benchmark CSV
stats        accuracy columns -> paired t-test and Wilcoxon results
sensitivity  dataset -> (num, pur, accuracy) CSV
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np

from .errors import GBTwinError
from .modes import GB_TWKSVC, MODES
from .stats import descriptive_stats, paired_t_test, wilcoxon_signed_rank

# The training stack (and numba) is imported inside the commands that use it,
# so that ``gbtwin stats`` starts quickly.
if TYPE_CHECKING:
    from .dataio import LoadedDataset
    from .evaluation import Grid
    from .granulation import LabeledDataset
    from .multiclass import Granulation
    from .twinpair import HyperParams

log = logging.getLogger("gbtwin")

SEED_ENV = "GBTWIN_SEED"
MODEL_LABELS = {"gb-twksvc": "GB-TWKSVC", "twin-ksvc": "Twin-KSVC", "ovr-tsvm": "1-versus-rest TSVM"}


@dataclass
class RunConfig:
    """Settings shared by the training and evaluation subcommands."""

    mode: str = "gb-twksvc"
    c1: float = 1.0
    c2: float = 1.0
    c3: float | None = None  # defaults to c1
    c4: float | None = None  # defaults to c2
    epsilon: float = 0.1
    delta: float = 1e-4
    kernel: str = "linear"
    p: float = 1.0
    theta: float = 0.97
    min_points: int = 2
    grid: dict = field(default_factory=dict)  # overrides applied to the reduced grid
    folds: int = 5
    seed: int = 0
    holdout: float | None = None  # fraction held out for testing; None = CV on all data
    normalize_distance: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def hyperparams(self) -> HyperParams:
        from .kernels import KernelSpec
        from .twinpair import HyperParams

        return HyperParams(
            c1=self.c1,
            c2=self.c2,
            c3=self.c1 if self.c3 is None else self.c3,
            c4=self.c2 if self.c4 is None else self.c4,
            epsilon=self.epsilon,
            delta=self.delta,
            kernel=KernelSpec(self.kernel, self.p),
        )

    def granulation(self) -> Granulation:
        from .multiclass import Granulation

        return Granulation(self.theta, self.min_points, int(self.seed))

    def build_grid(self) -> Grid:
        from .evaluation import Grid, reduced_grid

        base = reduced_grid(kernel=self.kernel, p_values=(self.p,))
        if self.grid.get("preset") == "full":
            base = Grid(kernel=self.kernel, p_values=base.p_values)
        overrides = {k: tuple(v) if isinstance(v, list) else v for k, v in self.grid.items() if k != "preset"}
        return dataclasses.replace(base, delta=self.delta, **overrides)


# ----------------------------------------------------------------------------
# argument helpers


def _add_dataset_args(p, positional=True):
    if positional:
        p.add_argument("data", help="CSV file, or fixture:<name> for a bundled dataset")
    p.add_argument("--label", default=None, help="label column name or index (default: last)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")


def _add_config_args(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--mode", choices=MODES)
    for name in ("c1", "c2", "c3", "c4", "epsilon", "delta", "p", "theta"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kernel", choices=("linear", "gaussian"))
    p.add_argument("--min-points", type=int, dest="min_points")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--holdout", type=float, help="hold out this fraction for testing")
    p.add_argument(
        "--normalize-distance",
        action="store_const",
        const=True,
        dest="normalize_distance",
        help="divide |f| by the plane normal's norm in the both-sides tie-break",
    )


def _load_dataset(args) -> LoadedDataset:
    from .dataio import DatasetSpec, load_csv, load_fixture

    if args.data.startswith("fixture:"):
        return load_fixture(args.data.split(":", 1)[1])
    return load_csv(
        DatasetSpec(args.data, args.label, not args.no_header, args.delimiter)
    )


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        cfg.seed = int(env_seed)
    for name in (
        "mode", "c1", "c2", "c3", "c4", "epsilon", "delta", "p", "theta",
        "kernel", "min_points", "folds", "seed", "holdout", "normalize_distance",
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.__post_init__()
    return cfg


def _label_name(loaded: LoadedDataset, label):
    names = loaded.label_names
    return names[label] if names and 0 <= int(label) < len(names) else label


# ----------------------------------------------------------------------------
# subcommands


def cmd_gen_balls(args):
    from .dataio import atomic_write_csv, fit_normalization
    from .granulation import LabeledDataset, generate_balls

    cfg = _resolve_config(args)
    loaded = _load_dataset(args)
    data = loaded.data
    X = data.features if args.raw else fit_normalization(data.features).apply(data.features)
    balls = generate_balls(LabeledDataset(X, data.labels), cfg.theta, cfg.min_points, cfg.seed)
    header = ["label", "radius", "member_count"] + [f"c{i}" for i in range(data.d)]
    rows = [[_label_name(loaded, r[0]), *r[1:]] for r in balls.to_rows()]
    atomic_write_csv(args.out, header, rows)
    print(f"{len(balls)} balls from {data.n} points -> {args.out}")
    return 0


def cmd_train(args):
    from .evaluation import accuracy
    from .multiclass import predict, save_model, train

    cfg = _resolve_config(args)
    loaded = _load_dataset(args)
    t0 = time.perf_counter()
    model = train(
        loaded.data,
        cfg.hyperparams(),
        cfg.mode,
        granulation=cfg.granulation(),
        normalize_distance=cfg.normalize_distance,
        label_names=loaded.label_names,
    )
    elapsed = time.perf_counter() - t0
    save_model(model, args.out)
    acc = accuracy(predict(model, loaded.data.features), loaded.data.labels)
    print(f"trained {cfg.mode} on {loaded.data.n} rows in {elapsed:.4f}s; training accuracy {acc:.2f}%")
    return 0


def cmd_predict(args):
    from .dataio import atomic_write_csv
    from .multiclass import load_model, predict

    model = load_model(args.model)
    if args.no_labels:
        with open(args.data, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=args.delimiter))
        if not args.no_header:
            rows = rows[1:]
        X = np.array([[float(v) for v in r] for r in rows if r])
        truth = None
    else:
        loaded = _load_dataset(args)
        X = loaded.data.features
        truth = [loaded.label_names[i] for i in loaded.data.labels]
    pred = predict(model, X)
    names = model.label_names
    labels = [names[int(k)] if names else k for k in pred]
    atomic_write_csv(args.out, ["predicted"], [[v] for v in labels])
    if truth is not None:
        acc = 100.0 * np.mean([a == b for a, b in zip(labels, truth)])
        print(f"accuracy {acc:.2f}% on {len(labels)} rows")
    print(f"predictions -> {args.out}")
    return 0


def _cv_report(cfg: RunConfig, data: LabeledDataset):
    from .evaluation import accuracy, kfold_cv, stratified_split
    from .multiclass import predict, train

    hp, gran = cfg.hyperparams(), cfg.granulation()

    def trainer(tr):
        return train(tr, hp, cfg.mode, granulation=gran, normalize_distance=cfg.normalize_distance)

    if cfg.holdout is None:
        report = kfold_cv(data, cfg.folds, trainer, cfg.seed)
    else:
        tr, te = stratified_split(data, 1.0 - cfg.holdout, cfg.seed)
        report = kfold_cv(tr, cfg.folds, trainer, cfg.seed)
        model = trainer(tr)
        report.extras["holdout_accuracy"] = accuracy(predict(model, te.features), te.labels)
    report.chosen_params = {
        "mode": cfg.mode,
        "hyperparams": hp.to_dict(),
        "granulation": gran.to_dict() if cfg.mode == GB_TWKSVC else None,
    }
    report.extras.update({"folds": cfg.folds, "seed": cfg.seed, "holdout": cfg.holdout})
    return report


def _emit_json(obj, out):
    from .dataio import atomic_write_json

    if out:
        atomic_write_json(out, obj)
        print(f"report -> {out}")
    else:
        print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_cv(args):
    cfg = _resolve_config(args)
    report = _cv_report(cfg, _load_dataset(args).data)
    _emit_json(report.to_dict(), args.out)
    return 0


def _grid_run(cfg: RunConfig, data: LabeledDataset):
    from .evaluation import accuracy, grid_search, stratified_split
    from .multiclass import predict, train

    grid = cfg.build_grid()
    if cfg.holdout is None:
        return grid_search(data, grid, cfg.mode, cfg.folds, cfg.seed), None
    tr, te = stratified_split(data, 1.0 - cfg.holdout, cfg.seed)
    result = grid_search(tr, grid, cfg.mode, cfg.folds, cfg.seed)
    model = train(tr, result.best_hyperparams, cfg.mode, granulation=result.best_granulation)
    return result, accuracy(predict(model, te.features), te.labels)


def cmd_grid(args):
    cfg = _resolve_config(args)
    result, holdout_acc = _grid_run(cfg, _load_dataset(args).data)
    out = {"best": result.best_params_dict(), "report": result.report.to_dict()}
    if holdout_acc is not None:
        out["holdout_accuracy"] = holdout_acc
    _emit_json(out, args.out)
    return 0


def cmd_bench(args):
    from .dataio import atomic_write_csv, available_fixtures, load_fixture

    cfg = _resolve_config(args)
    names = args.datasets or available_fixtures()
    modes = args.models or list(MODES)
    rows = []
    for name in names:
        data = load_fixture(name).data
        for mode in modes:
            mcfg = dataclasses.replace(cfg, mode=mode)
            result, holdout_acc = _grid_run(mcfg, data)
            rep = result.report
            mean = rep.mean_accuracy if holdout_acc is None else holdout_acc
            rows.append([name, MODEL_LABELS[mode], f"{mean:.4f}", f"{rep.std_accuracy:.4f}", f"{rep.train_time_seconds:.6f}"])
            print(",".join(rows[-1]), flush=True)
    atomic_write_csv(args.out, ["dataset", "model", "mean_accuracy", "std_accuracy", "mean_time_s"], rows)
    print(f"benchmark -> {args.out}")
    return 0


def _read_columns(path, columns, delimiter):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        rows = list(reader)
    if columns:
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValueError(f"columns not found: {missing}")
        use = columns
    else:
        use = []
        for c in header:
            try:
                [float(r[c]) for r in rows]
                use.append(c)
            except (TypeError, ValueError):
                continue
    if len(use) < 2:
        raise ValueError("need at least two numeric accuracy columns")
    return {c: np.array([float(r[c]) for r in rows]) for c in use}


def cmd_stats(args):
    cols = _read_columns(args.data, args.columns, args.delimiter)
    out = {"descriptive": {c: descriptive_stats(v) for c, v in cols.items()}, "comparisons": []}
    for a, b in combinations(cols, 2):
        t = paired_t_test(cols[a], cols[b])
        w = wilcoxon_signed_rank(cols[a], cols[b])
        out["comparisons"].append(
            {"a": a, "b": b, "t": t.statistic, "t_p": t.p_value, "W": w.statistic, "W_p": w.p_value}
        )
    for c, s in out["descriptive"].items():
        print(f"{c}: mean={s['mean']:.2f} std={s['std']:.2f} min={s['min']:.2f} max={s['max']:.2f}")
    for r in out["comparisons"]:
        print(f"{r['a']} vs {r['b']}: t={r['t']:.3f}, p={r['t_p']:.4f}; W={r['W']:.2f}, p={r['W_p']:.4f}")
    if args.out:
        from .dataio import atomic_write_json

        atomic_write_json(args.out, out)
    return 0


def cmd_sensitivity(args):
    from .dataio import atomic_write_csv
    from .evaluation import grid_search

    cfg = _resolve_config(args)
    cfg.mode = GB_TWKSVC
    data = _load_dataset(args).data
    grid = cfg.build_grid()
    if args.nums:
        grid = dataclasses.replace(grid, nums=tuple(args.nums))
    if args.purs:
        grid = dataclasses.replace(grid, purs=tuple(args.purs))
    result = grid_search(data, grid, GB_TWKSVC, cfg.folds, cfg.seed)
    best = {}
    for gran, hp, acc in result.table:
        key = (gran.min_points, gran.theta)
        best[key] = max(best.get(key, -1.0), acc)
    rows = [[num, pur, f"{acc:.4f}"] for (num, pur), acc in sorted(best.items())]
    atomic_write_csv(args.out, ["num", "pur", "accuracy"], rows)
    print(f"{len(rows)} (num, pur) cells -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbtwin", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-balls", help="dump the granular balls of a dataset")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--raw", action="store_true", help="granulate unscaled features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_balls)

    p = sub.add_parser("train", help="train a model and save it as JSON")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels with a saved model")
    p.add_argument("model")
    _add_dataset_args(p)
    p.add_argument("--no-labels", action="store_true", help="input has feature columns only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="cross-validate one configuration")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("grid", help="grid search by cross-validation")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("bench", help="grid-searched comparison over bundled datasets")
    _add_config_args(p)
    p.add_argument("--datasets", nargs="+", help="bundled fixtures (default: all)")
    p.add_argument("--models", nargs="+", choices=MODES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="paired t-test and Wilcoxon test between accuracy columns")
    p.add_argument("data", help="CSV with one accuracy column per model")
    p.add_argument("--columns", nargs="+")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sensitivity", help="accuracy over the (num, pur) grid")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--nums", nargs="+", type=int)
    p.add_argument("--purs", nargs="+", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (GBTwinError, ValueError, OSError, KeyError) as exc:
        print(f"gbtwin {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())
