"""``s2v`` command-line tool: train, cv, eval, embed, stats, gradcheck.

Exit codes: 0 ok, 1 check failure or aborted training, 2 usage or config
error, 3 data error. Settings precedence (lowest first): built-in defaults,
config file, ``--set key=value``, dedicated flags such as ``--seed``. The
``S2V_SEED`` environment variable supplies the seed when neither the config
file nor the command line does.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .autodiff import grad_check
from .checkpoint import CheckpointError, ModelCheckpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, TrainConfig, build_config, parse_config_text
from .dataio import (
    DataError,
    Dataset,
    bundled_path,
    dataset_stats,
    kfold,
    load_bundled,
    load_graph_dataset,
    load_string_dataset,
    split_validation,
    write_atomic,
)
from .embed import EngineKind, pool
from .graph import GraphError
from .head import TaskKind
from .model import forward, init_params
from .synthetic import random_graph
from .train import BatchFactory, TrainingDiverged, evaluate, history_csv, train

log = logging.getLogger("structure2vec")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _parse_sets(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve_config(args) -> TrainConfig:
    file_values = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        file_values = parse_config_text(text, args.config)
    overrides = _parse_sets(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if "seed" not in overrides and "seed" not in file_values and os.environ.get("S2V_SEED"):
        overrides["seed"] = os.environ["S2V_SEED"]
    return build_config(file_values, overrides)


def load_data(args, num_tags: int | None = None, task: str = "auto") -> Dataset:
    if args.bundled:
        if num_tags is None:
            return load_bundled(args.bundled)
        return load_graph_dataset(bundled_path(args.bundled), task, num_tags)
    if not args.data:
        raise UsageError("one of --data or --bundled is required")
    if args.format == "string":
        return load_string_dataset(args.data, args.alphabet, task)
    return load_graph_dataset(args.data, task, num_tags)


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _metrics_line(split: str, metrics: dict, **extra) -> str:
    row = {"split": split, **extra, **{k: float(v) for k, v in metrics.items()}}
    return json.dumps(row, sort_keys=True)


def cmd_train(args) -> int:
    config = resolve_config(args)
    ds = load_data(args, task=config.task)
    train_idx, val_idx = split_validation(ds, np.arange(len(ds)), config.val_fraction, config.seed)
    result = train(ds, (train_idx, val_idx), config, log=log.info)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.checkpoint, out / "model.s2v")
    write_atomic(out / "history.csv", history_csv(result.history))
    factory = BatchFactory(ds, config)
    lines = [_metrics_line("train", evaluate(result.params, ds, train_idx, factory), best_epoch=result.checkpoint.epoch)]
    if val_idx.size:
        lines.append(_metrics_line("val", evaluate(result.params, ds, val_idx, factory), best_epoch=result.checkpoint.epoch))
    write_atomic(out / "metrics.jsonl", "\n".join(lines) + "\n")
    print(f"best epoch {result.checkpoint.epoch}; wrote {out / 'model.s2v'}, {out / 'history.csv'}, {out / 'metrics.jsonl'}")
    return EXIT_OK


def cv_report(ds: Dataset, config: TrainConfig, k: int, seed: int) -> str:
    """Run k-fold CV and return a plain-text report (no timings, so it is reproducible)."""
    plan = kfold(ds, k, seed)
    primary = "accuracy" if ds.task.is_classification else "mae"
    rows, values = [], []
    for f, (tr, te) in enumerate(plan):
        fit_idx, val_idx = split_validation(ds, tr, config.val_fraction, config.seed)
        result = train(ds, (fit_idx, val_idx), config)
        m = evaluate(result.params, ds, te, BatchFactory(ds, config))
        values.append(m[primary])
        extra = "  ".join(f"{name}={_fmt(m[name])}" for name in ("auc", "rmse") if name in m)
        rows.append(f"fold {f:2d}  n_test={te.size:4d}  best_epoch={result.checkpoint.epoch:4d}  "
                    f"{primary}={_fmt(m[primary])}  {extra}".rstrip())
        log.info(rows[-1])
    vals = np.array(values)
    head = [f"dataset={ds.name} graphs={len(ds)} k={k} seed={seed}",
            "config: " + " ".join(config.to_text().split("\n")).replace(" = ", "=").strip()]
    tail = [f"mean {primary} = {_fmt(vals.mean())}", f"std {primary} = {_fmt(vals.std())}"]
    return "\n".join(head + rows + tail) + "\n"


def cmd_cv(args) -> int:
    config = resolve_config(args)
    if args.k < 2:
        raise UsageError("k must be at least 2")
    ds = load_data(args, task=config.task)
    report = cv_report(ds, config, args.k, config.seed)
    if args.out:
        write_atomic(args.out, report)
    sys.stdout.write(report)
    return EXIT_OK


def _load_for_checkpoint(args, ckpt: ModelCheckpoint) -> Dataset:
    p = ckpt.params.embed.p
    task = ckpt.params.task.kind
    if args.format == "string" and not args.bundled:
        ds = load_data(args, task=task)
        if ds.num_tags != p:
            raise DataError(f"alphabet has {ds.num_tags} symbols but the checkpoint expects {p}")
        return ds
    return load_data(args, num_tags=p, task=task)


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds = _load_for_checkpoint(args, ckpt)
    if ds.task != ckpt.params.task:
        raise DataError(f"data task {ds.task} does not match checkpoint task {ckpt.params.task}")
    m = evaluate(ckpt.params, ds, factory=BatchFactory(ds, ckpt.config))
    line = _metrics_line("eval", m, graphs=len(ds))
    if args.out:
        write_atomic(args.out, line + "\n")
    print(line)
    return EXIT_OK


def embed_csv(ckpt: ModelCheckpoint, ds: Dataset, batch_size: int = 256) -> str:
    d = ckpt.params.embed.d
    factory = BatchFactory(ds, ckpt.config)
    lines = ["graph_index," + ",".join(f"e{j}" for j in range(d))]
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        batch = factory(idx)
        state, _ = forward(ckpt.params, batch)
        pooled = pool(state, batch)
        for i, row in zip(idx, pooled):
            lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def cmd_embed(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds = _load_for_checkpoint(args, ckpt)
    write_atomic(args.out, embed_csv(ckpt, ds))
    print(f"wrote {len(ds)} embeddings of dimension {ckpt.params.embed.d} to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    ds = load_data(args)
    st = dataset_stats(ds)
    print(f"dataset {ds.name}: {st}")
    print(f"task {ds.task.kind}" + (f" K={ds.task.K}" if ds.task.is_classification else ""))
    if ds.task.is_classification:
        counts = np.bincount(ds.targets(), minlength=ds.task.K)
        names = ds.label_values or list(range(ds.task.K))
        print("classes " + " ".join(f"{n}:{c}" for n, c in zip(names, counts)))
    return EXIT_OK


def gradcheck_suite(config: TrainConfig, engines, seed: int, instances: int = 3, corrupt: bool = False):
    """Grad-check small random instances for each engine and both task kinds.

    Dimensions are shrunk to d=p=b=4 so central differences stay cheap; T and
    head depth follow the config. Yields ``(label, report)``.
    """
    rng = np.random.default_rng(seed)
    p = 4
    for engine in engines:
        for task in (TaskKind.regression(), TaskKind.classification(3)):
            for n in range(instances):
                V = int(rng.integers(2, 9))
                g = random_graph(V, rng, num_tags=p, edge_prob=0.4)
                y = float(rng.normal()) if not task.is_classification else int(rng.integers(0, 3))
                params = init_params(engine, 4, p, config.T, task, rng, depth=config.head_depth, b=4, bias=config.bias)
                bad = {name: 2.0 for name in params.arrays()} if corrupt else None
                yield f"{engine.value} {task.kind} #{n}", grad_check(g, params, y, corrupt=bad)


def cmd_gradcheck(args) -> int:
    config = resolve_config(args)
    engines = list(EngineKind) if args.all_engines else [config.engine_kind]
    ok = True
    for label, report in gradcheck_suite(config, engines, config.seed, args.instances, args.corrupt_grad):
        status = "PASS" if report.passed else "FAIL"
        print(f"{label}: {status} max_rel_err={report.max_rel_error:.3e}")
        if not report.passed:
            print(report)
        ok &= report.passed
    print("gradcheck: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s2v", description="Graph and sequence embedding by unrolled inference.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_opts(p):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--data", help="dataset file")
        src.add_argument("--bundled", help="dataset shipped with the package, e.g. MUTAG")
        p.add_argument("--format", choices=("graph", "string"), default="graph")
        p.add_argument("--alphabet", help="symbols for string data (default: inferred, sorted)")

    def config_opts(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, help="threads per minibatch (deterministic merge)")

    p = sub.add_parser("train", help="train a model")
    data_opts(p)
    config_opts(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    data_opts(p)
    config_opts(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    data_opts(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="write pooled embeddings as CSV")
    data_opts(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("stats", help="dataset statistics")
    data_opts(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gradcheck", help="check analytic gradients against finite differences")
    config_opts(p)
    p.add_argument("--all-engines", action="store_true", help="check every engine, not just the configured one")
    p.add_argument("--instances", type=int, default=3, help="random instances per engine and task")
    p.add_argument("--corrupt-grad", action="store_true", help="perturb analytic gradients (must fail)")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
