"""Command-line entry point: synth, train, arc, ood, selfcheck.

Options can come from three layers, later ones winning: built-in
defaults, a ``--config`` file of ``key = value`` lines, and explicit
flags. ``arc`` and ``ood`` additionally start from the ``config.txt`` that
``train`` wrote into the run directory. Every command writes its resolved
configuration next to its outputs.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 IO error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import datasets as D
from . import evaluation as E
from . import selfcheck
from .models import checkpoint
from .models.graph import MODEL_KINDS
from .models.train import TrainConfig, TrainingDiverged, predict_report, train
from .secondorder import MEASURES

log = logging.getLogger("lopgpn")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
NO_SCENARIO = "none"
CONFIG_NAME = "config.txt"
LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "grad_norm")


class UsageError(Exception):
    pass


# option table -------------------------------------------------------------------


def _optional_float(text: str):
    return None if text.strip().lower() == "none" else float(text)


def _str_list(text: str):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str):
    return [int(t) for t in _str_list(text)]


def _bool(text: str):
    value = text.strip().lower()
    if value not in ("true", "false", "1", "0", "yes", "no"):
        raise ValueError(f"not a boolean: {text!r}")
    return value in ("true", "1", "yes")


@dataclass(frozen=True)
class Option:
    parse: Callable[[str], object]
    default: object
    help: str


_TRAIN_DEFAULTS = TrainConfig()

DATA_OPTIONS = {
    "dataset": Option(str, None, "dataset directory (see the datasets module for the format)"),
    "preset": Option(str, "sbm-small", f"synthetic preset used when no dataset is given ({', '.join(D.PRESETS)})"),
    "dataset_seed": Option(int, 0, "seed of the synthetic preset"),
    "train_fraction": Option(float, 0.05, "training fraction of labeled nodes"),
    "val_fraction": Option(float, 0.15, "validation fraction"),
    "test_fraction": Option(float, 0.80, "test fraction"),
    "stratified": Option(_bool, True, "stratify the split by class"),
    "node_fraction": Option(float, 0.1, "fraction of nodes perturbed by feature OOD scenarios"),
    "keep_prob": Option(float, 0.5, "keep probability of bernoulli_dropout"),
}

RUN_OPTIONS = {
    "models": Option(_str_list, list(MODEL_KINDS), "comma-separated model kinds"),
    "seeds": Option(_int_list, [0], "comma-separated seeds; each seed fixes split, scenario and init"),
    "scenarios": Option(_str_list, [NO_SCENARIO], f"comma-separated: {NO_SCENARIO}, {', '.join(D.SCENARIO_NAMES)}"),
}

TRAIN_OPTIONS = {
    "teleport_epsilon": Option(float, _TRAIN_DEFAULTS.teleport_epsilon, "teleport weight epsilon"),
    "power_iterations": Option(int, _TRAIN_DEFAULTS.power_iterations, "propagation steps L"),
    "sparsify_delta": Option(_optional_float, None, "PPR sparsification threshold (none: off)"),
    "hidden_dim": Option(int, _TRAIN_DEFAULTS.hidden_dim, "encoder hidden width"),
    "latent_dim": Option(int, _TRAIN_DEFAULTS.latent_dim, "latent dimension"),
    "flow_layers": Option(int, _TRAIN_DEFAULTS.flow_layers, "radial flow layers per class"),
    "learning_rate": Option(float, _TRAIN_DEFAULTS.learning_rate, "Adam learning rate"),
    "max_epochs": Option(int, _TRAIN_DEFAULTS.max_epochs, "maximum epochs"),
    "patience": Option(int, _TRAIN_DEFAULTS.patience, "early-stopping patience"),
    "entropy_weight": Option(float, _TRAIN_DEFAULTS.entropy_weight, "entropy regularizer weight"),
    "grad_clip": Option(_optional_float, _TRAIN_DEFAULTS.grad_clip, "global gradient-norm clip (none: off)"),
    "certainty_budget": Option(_optional_float, None, "certainty budget N (none: scaled training size)"),
}

EVAL_OPTIONS = {
    "measures": Option(_str_list, list(MEASURES), f"comma-separated measures ({', '.join(MEASURES)})"),
}

SYNTH_OPTIONS = {
    "n_nodes": Option(int, None, "number of nodes (overrides the preset)"),
    "n_classes": Option(int, None, "number of classes"),
    "intra_p": Option(float, None, "intra-class edge probability"),
    "inter_p": Option(float, None, "inter-class edge probability"),
    "feature_dim": Option(int, None, "feature dimension"),
    "class_separation": Option(float, None, "distance between class means"),
    "feature_noise": Option(float, None, "within-class feature standard deviation"),
}


def _format(value) -> str:
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_config(path) -> Dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_config(path, values: dict) -> None:
    text = "".join(f"{k} = {_format(values[k])}\n" for k in sorted(values))
    Path(path).write_text(text, encoding="utf-8")


def resolve(table: Dict[str, Option], layers: List[Dict[str, str]], flags: argparse.Namespace) -> dict:
    """Defaults, then text layers in order, then explicitly given flags."""
    values = {k: opt.default for k, opt in table.items()}
    for layer in layers:
        for key, text in layer.items():
            if key not in table:
                continue
            values[key] = None if text == "None" else _parse(table, key, text)
    for key in table:
        given = getattr(flags, key, None)
        if given is not None:
            values[key] = given
    return values


def _parse(table, key, text):
    try:
        return table[key].parse(text)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {exc}") from None


def _add_options(parser: argparse.ArgumentParser, table: Dict[str, Option]):
    for key, opt in table.items():
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, type=opt.parse, default=None,
                            help=f"{opt.help} (default: {_format(opt.default)})")


# dataset resolution -------------------------------------------------------------


def dataset_name(cfg: dict) -> str:
    return Path(cfg["dataset"]).name if cfg.get("dataset") else cfg["preset"]


def load_base(cfg: dict) -> D.GraphDataset:
    if cfg.get("dataset"):
        return D.load(cfg["dataset"])
    return D.preset(cfg["preset"], cfg["dataset_seed"])


def prepare(base: D.GraphDataset, cfg: dict, scenario: str, seed: int) -> D.GraphDataset:
    """Split with ``seed`` and apply the scenario drawn with the same seed."""
    spec = D.SplitSpec(cfg["train_fraction"], cfg["val_fraction"], cfg["test_fraction"], seed, cfg["stratified"])
    ds = D.split(base, spec)
    if scenario == NO_SCENARIO:
        return ds
    return D.apply_ood(ds, D.make_scenario(scenario, ds.n_classes, seed, cfg["node_fraction"], cfg["keep_prob"]))


def _validate_run(cfg: dict):
    unknown = [m for m in cfg["models"] if m not in MODEL_KINDS]
    if unknown or not cfg["models"]:
        raise UsageError(f"unknown model kind(s) {unknown}; valid: {', '.join(MODEL_KINDS)}")
    if not cfg["seeds"]:
        raise UsageError("at least one seed is required")
    valid = (NO_SCENARIO,) + D.SCENARIO_NAMES
    bad = [s for s in cfg["scenarios"] if s not in valid]
    if bad:
        raise UsageError(f"unknown scenario(s) {bad}; valid: {', '.join(valid)}")


def _validate_measures(measures):
    bad = [m for m in measures if m not in MEASURES]
    if bad or not measures:
        raise UsageError(f"unknown measure(s) {bad}; valid: {', '.join(MEASURES)}")


def checkpoint_path(out: Path, scenario: str, model: str, seed: int) -> Path:
    return out / "checkpoints" / scenario / model / f"seed{seed}.ckpt"


def log_path(out: Path, scenario: str, model: str, seed: int) -> Path:
    return out / "logs" / scenario / model / f"seed{seed}.csv"


# commands -----------------------------------------------------------------------


def cmd_synth(args) -> int:
    layers = [read_config(args.config)] if args.config else []
    table = {**{k: DATA_OPTIONS[k] for k in ("preset", "dataset_seed")}, **SYNTH_OPTIONS}
    cfg = resolve(table, layers, args)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise FileExistsError(f"{out} is not empty; pass --force to overwrite")
    if cfg["preset"] not in D.PRESETS:
        raise UsageError(f"unknown preset {cfg['preset']!r}; valid: {', '.join(D.PRESETS)}")
    params = dict(D.PRESETS[cfg["preset"]])
    params.update({k: v for k, v in cfg.items() if k in SYNTH_OPTIONS and v is not None})
    data = D.synth_sbm(seed=cfg["dataset_seed"], **params)
    D.save(data, out)
    write_config(out / "synth_config.txt", {**cfg, **params})
    print(f"wrote {data.n_nodes}-node dataset to {out}")
    return EXIT_OK


def _train_table():
    return {**DATA_OPTIONS, **RUN_OPTIONS, **TRAIN_OPTIONS}


def _train_job(base, cfg, scenario, model, seed):
    ds = prepare(base, cfg, scenario, seed)
    tcfg = TrainConfig(model=model, **{k: cfg[k] for k in TRAIN_OPTIONS})
    trained = train(model, ds, tcfg, seed)
    return trained


def cmd_train(args) -> int:
    layers = [read_config(args.config)] if args.config else []
    cfg = resolve(_train_table(), layers, args)
    _validate_run(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / CONFIG_NAME, cfg)
    base = load_base(cfg)
    jobs = [(s, m, seed) for s in cfg["scenarios"] for m in cfg["models"] for seed in cfg["seeds"]]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(_train_job, base, cfg, *job) for job in jobs]
        # collect in submission order; files are written by this thread only
        for (scenario, model, seed), fut in zip(jobs, futures):
            trained = fut.result()
            extra = {"scenario": scenario, "dataset": dataset_name(cfg)}
            path = checkpoint_path(out, scenario, model, seed)
            path.parent.mkdir(parents=True, exist_ok=True)
            checkpoint.save(trained, path, extra)
            lpath = log_path(out, scenario, model, seed)
            lpath.parent.mkdir(parents=True, exist_ok=True)
            rows = [{k: (repr(float(h[k])) if k != "epoch" else h[k]) for k in LOG_COLUMNS} for h in trained.history]
            E.write_csv(lpath, LOG_COLUMNS, rows)
            log.info("%s/%s seed %d: %d epochs, best %d", scenario, model, seed, len(trained.history), trained.best_epoch)
    print(f"trained {len(jobs)} model(s) into {out}")
    return EXIT_OK


def _eval_config(args) -> dict:
    out = Path(args.out)
    layers = []
    if (out / CONFIG_NAME).exists():
        layers.append(read_config(out / CONFIG_NAME))
    if args.config:
        layers.append(read_config(args.config))
    cfg = resolve({**_train_table(), **EVAL_OPTIONS}, layers, args)
    _validate_run(cfg)
    _validate_measures(cfg["measures"])
    return cfg


def _predictions(out: Path, base, cfg, scenario):
    """Yield (model, [(dataset, prediction) per seed]) for checkpoints of one scenario."""
    for model in cfg["models"]:
        per_seed = []
        for seed in cfg["seeds"]:
            path = checkpoint_path(out, scenario, model, seed)
            if not path.exists():
                raise FileNotFoundError(f"missing checkpoint {path}")
            trained, _ = checkpoint.load(path)
            ds = prepare(base, cfg, scenario, seed)
            per_seed.append((ds, predict_report(trained, ds)))
        yield model, per_seed


def _available(report, measure) -> bool:
    return not np.all(np.isnan(report.get(measure)))


def cmd_arc(args) -> int:
    cfg = _eval_config(args)
    out = Path(args.out)
    base = load_base(cfg)
    name = dataset_name(cfg)
    rows = []
    for model, per_seed in _predictions(out, base, cfg, NO_SCENARIO):
        for measure in cfg["measures"]:
            if not _available(per_seed[0][1].report, measure):
                continue
            curves = []
            for ds, pred in per_seed:
                idx = np.flatnonzero(ds.test_mask)
                correct = pred.predicted[idx] == ds.labels[idx]
                curves.append(E.arc(pred.report.get(measure)[idx], correct, measure=measure, model=model))
            rows += E.arc_rows(name, model, measure, curves)
    E.write_csv(out / "arc.csv", E.ARC_COLUMNS, rows)
    write_config(out / "arc_config.txt", cfg)
    print(f"wrote {len(rows)} rows to {out / 'arc.csv'}")
    return EXIT_OK


def cmd_ood(args) -> int:
    cfg = _eval_config(args)
    scenarios = [s for s in cfg["scenarios"] if s != NO_SCENARIO]
    if not scenarios:
        raise UsageError("ood needs at least one OOD scenario among --scenarios")
    out = Path(args.out)
    base = load_base(cfg)
    name = dataset_name(cfg)
    rows = []
    for scenario in scenarios:
        for model, per_seed in _predictions(out, base, cfg, scenario):
            results = [
                E.ood_evaluate(pred.report, pred.predicted, ds.labels, ds.test_mask, ds.ood_flags,
                               cfg["measures"], scenario)
                for ds, pred in per_seed
            ]
            rows += E.ood_rows(name, model, results)
    E.write_csv(out / "ood.csv", E.OOD_COLUMNS, rows)
    write_config(out / "ood_config.txt", cfg)
    print(f"wrote {len(rows)} rows to {out / 'ood.csv'}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = selfcheck.run(quick=args.quick)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


# parser -------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lopgpn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic SBM dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="write into a non-empty directory")
    p.add_argument("--config", help="key = value config file")
    _add_options(p, {k: DATA_OPTIONS[k] for k in ("preset", "dataset_seed")})
    p.add_argument("--seed", dest="dataset_seed", type=int, default=None, help="alias of --dataset-seed")
    _add_options(p, SYNTH_OPTIONS)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train models; writes checkpoints and training logs")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel training jobs (default: 1)")
    _add_options(p, _train_table())
    p.add_argument("--epochs", dest="max_epochs", type=int, default=None, help="alias of --max-epochs")
    p.set_defaults(func=cmd_train)

    for name, func, text in (("arc", cmd_arc, "accuracy-rejection curves into arc.csv"),
                             ("ood", cmd_ood, "OOD detection AUC into ood.csv")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--out", required=True, help="run directory written by train")
        p.add_argument("--config", help="key = value config file")
        _add_options(p, {**_train_table(), **EVAL_OPTIONS})
        p.set_defaults(func=func)

    p = sub.add_parser("selfcheck", help="run built-in numerical oracles")
    p.add_argument("--quick", action="store_true", help="fewer samples and trials")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: synth, train, arc, ood, selfcheck")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, D.DatasetError, checkpoint.CheckpointError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
