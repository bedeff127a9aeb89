"""Command-line interface: ``generate``, ``train``, ``check`` and ``eval``."""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import data as datamod
from .check import GRADIENT_TOL, INVARIANT_TOL, run_check
from .dynamics import ArchitectureKind, LayerControls
from .errors import ConfigurationError
from .loss import accuracy, batch_loss, hypothesis, scores
from .optimizer import TrainOptions, train
from .params import Parameters
from .propagation import DEFAULT_T, forward, make_config
from .tableau import METHODS

log = logging.getLogger("odectrl")

ARCHS = [k.value for k in ArchitectureKind]


def default_out():
    return os.environ.get("ODECTRL_OUT", "out")


@dataclass
class ExperimentConfig:
    arch: str = "ResNet"
    tableau: str = "euler"
    layers: int = 20
    dt: Optional[float] = None
    T: float = DEFAULT_T
    iters: int = 10000
    seed: int = 1
    data: str = "donut1d"
    samples: Optional[int] = None
    data_seed: int = 1
    test_data: Optional[str] = None
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None
    digits: tuple = (0, 8)
    train_count: int = 100
    test_count: int = 500
    fixed_classifier: bool = False
    trajectory_samples: Optional[int] = None
    out: Optional[str] = None
    threads: int = 1

    def validate(self):
        ArchitectureKind.parse(self.arch)
        if self.tableau not in METHODS:
            raise ConfigurationError(f"unknown tableau {self.tableau!r}; expected one of {', '.join(METHODS)}")
        if self.layers < 1:
            raise ConfigurationError("need at least one layer")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.iters < 0:
            raise ConfigurationError("iters must be non-negative")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        self.digits = tuple(self.digits)
        return self


def load_datasets(cfg):
    """Training and test sets named by ``cfg.data``."""
    if cfg.data in datamod.DATASETS:
        return datamod.generate_split(cfg.data, cfg.samples, cfg.data_seed)
    if cfg.data == "mnist100":
        if not (cfg.idx_images and cfg.idx_labels):
            raise ConfigurationError("mnist100 needs --idx-images and --idx-labels")
        return datamod.load_idx(
            cfg.idx_images, cfg.idx_labels, cfg.digits, cfg.train_count, cfg.test_count, cfg.data_seed
        )
    path = Path(cfg.data)
    if path.suffix != ".csv" or not path.exists():
        raise ConfigurationError(
            f"--data must be one of {', '.join(datamod.DATASETS)}, mnist100 or an existing .csv file"
        )
    train_ds = datamod.load_csv(path)
    test_ds = datamod.load_csv(cfg.test_data) if cfg.test_data else None
    return train_ds, test_ds


def _fmt(x):
    return repr(float(x))


def write_history(path, record):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "train_loss", "test_loss", "train_acc", "test_acc", "L"])
        for k in range(len(record)):
            w.writerow([k] + [_fmt(v[k]) for v in (
                record.train_loss, record.test_loss, record.train_acc, record.test_acc, record.L)])


def write_alphas(path, record, N):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter"] + [f"alpha_{j}" for j in range(N)])
        for k, a in enumerate(record.alphas):
            w.writerow([k] + [_fmt(v) for v in a])


def write_trajectory(path, config, params, ds, limit=None):
    X, c = ds.X, ds.c
    if limit is not None:
        X, c = X[:limit], c[:limit]
    states = forward(config, params.controls, X).states
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "layer", "label"] + [f"y{q + 1}" for q in range(config.n)])
        for i in range(X.shape[0]):
            for j in range(config.N + 1):
                w.writerow([i, j, int(c[i])] + [_fmt(v) for v in states[j, i]])


def params_to_json(params, config_echo):
    return {
        "config": config_echo,
        "K": [u.K.tolist() for u in params.controls],
        "beta": [u.beta.tolist() for u in params.controls],
        "alpha": None if not params.has_alpha else [u.alpha for u in params.controls],
        "W": params.W.tolist(),
        "mu": params.mu,
    }


def params_from_json(doc):
    alphas = doc["alpha"] or [None] * len(doc["K"])
    controls = [
        LayerControls(np.array(K, dtype=float), np.array(b, dtype=float), a)
        for K, b, a in zip(doc["K"], doc["beta"], alphas)
    ]
    return Parameters(controls, np.array(doc["W"], dtype=float), float(doc["mu"]))


def cmd_generate(args):
    ds = datamod.generate(args.name, args.m, args.seed)
    out = Path(args.out) if args.out else Path(default_out()) / f"{args.name}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    datamod.save_csv(ds, out)
    print(f"wrote {ds.m} samples to {out}")
    return 0


def cmd_train(cfg):
    cfg.validate()
    train_ds, test_ds = load_datasets(cfg)
    config = make_config(cfg.arch, cfg.tableau, train_ds.n, cfg.layers, cfg.dt, cfg.T)
    out = Path(cfg.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    options = TrainOptions(max_iters=cfg.iters, seed=cfg.seed, fixed_classifier=cfg.fixed_classifier)
    record = train(config, train_ds, test_ds, options)
    params = record.params

    echo = asdict(cfg)
    echo.pop("out")
    echo["digits"] = list(cfg.digits)
    echo.update(n=config.n, dt_effective=config.dt)
    write_history(out / "history.csv", record)
    (out / "params.json").write_text(json.dumps(params_to_json(params, echo), indent=1) + "\n")
    write_trajectory(out / "trajectory.csv", config, params, test_ds or train_ds, cfg.trajectory_samples)
    if config.kind.has_alpha:
        write_alphas(out / "alphas.csv", record, config.N)
    msg = f"final train loss {record.train_loss[-1]:.6g}, train acc {record.train_acc[-1]:.4f}"
    if test_ds is not None:
        msg += f", test acc {record.test_acc[-1]:.4f}"
    print(msg)
    print(f"results in {out}")
    return 0


def cmd_check(cfg):
    cfg.validate()
    report = run_check(cfg.arch, cfg.tableau, seed=cfg.seed)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {report.arch} {report.tableau}")
    print(f"  gradient max rel err  {report.gradient_error:.3e} (tol {GRADIENT_TOL:g})")
    print(f"  <p,v> max rel drift   {report.invariant_drift:.3e} (tol {INVARIANT_TOL:g})")
    for line in report.offending:
        print(f"  offending {line}")
    return 0 if report.passed else 1


def cmd_eval(cfg, params_path, predictions=None):
    doc = json.loads(Path(params_path).read_text())
    params = params_from_json(doc)
    saved = doc.get("config", {})
    arch = saved.get("arch", cfg.arch)
    tableau = saved.get("tableau", cfg.tableau)
    train_ds, test_ds = load_datasets(cfg)
    config = make_config(arch, tableau, params.n, params.N, saved.get("dt_effective", cfg.dt), cfg.T)
    for label, ds in (("train", train_ds), ("test", test_ds)):
        if ds is None:
            continue
        yN = forward(config, params.controls, ds.X).final
        print(f"{label}: loss {batch_loss(yN, ds.c, params.head):.6g} "
              f"accuracy {accuracy(yN, ds.c, params.head):.4f} (m={ds.m})")
    if predictions:
        ds = test_ds or train_ds
        z = scores(forward(config, params.controls, ds.X).final, params.head)
        with open(predictions, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "label", "probability", "prediction"])
            for i, (zi, ci) in enumerate(zip(z, ds.c)):
                w.writerow([i, int(ci), _fmt(hypothesis(zi)), int(zi > 0)])
    return 0


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON file with experiment settings; flags override it")
    p.add_argument("--arch", choices=ARCHS)
    p.add_argument("--tableau", choices=METHODS)
    p.add_argument("--layers", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data", help="donut1d, donut2d, squares, spiral, mnist100 or a CSV path")
    p.add_argument("--samples", type=int, help="number of generated samples")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--test-data", help="CSV with test samples when --data is a CSV")
    p.add_argument("--idx-images")
    p.add_argument("--idx-labels")
    p.add_argument("--out")
    p.add_argument("--fixed-classifier", action="store_true", default=None)
    p.add_argument("--trajectory-samples", type=int)
    p.add_argument("--threads", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="odectrl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset to CSV")
    g.add_argument("name", choices=datamod.DATASETS)
    g.add_argument("m", type=int, nargs="?")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out")

    for name, text in (("train", "train a network"), ("check", "audit adjoint gradients"),
                       ("eval", "evaluate saved parameters")):
        p = sub.add_parser(name, help=text)
        _add_experiment_flags(p)
        if name == "eval":
            p.add_argument("--params", required=True)
            p.add_argument("--predictions")
    return parser


def experiment_config(args):
    values = {}
    if args.config:
        values.update(json.loads(Path(args.config).read_text()))
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return ExperimentConfig(**values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = experiment_config(args)
        with threadpool_limits(limits=cfg.threads):
            if args.command == "train":
                return cmd_train(cfg)
            if args.command == "check":
                return cmd_check(cfg)
            return cmd_eval(cfg, args.params, args.predictions)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"odectrl {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
