"""Command-line harness for the benchmark.

Subcommands: generate a synthetic stream, run one strategy, compare several
strategies across seeds, sweep one hyper-parameter, and score parallel text
files with the text metrics. Every CSV starts with '#' meta lines carrying the
resolved configuration and version; the body below them is byte-reproducible,
timestamps live only in the meta block. Exit codes: 0 success, 1 validation
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from statistics import mean, median

from . import __version__
from .corpus import DriftConfig, generate_synthetic, load_stream, read_manifest
from .exemplar import store_to_json
from .metrics import bleu4, meteor, rouge_l
from .metrics import omega as omega_curve
from .report import HISTORY_COLUMNS, forgetting_report, history_from_csv
from .strategy import KINDS, EvalRecord, StrategyConfig, build_omega, run_stream

OMEGA_METRICS = ("accuracy", "precision", "recall", "f1")

COMPARE_COLUMNS = ("row_type", "strategy", "seed", "step", "omega_accuracy",
                   "omega_precision", "omega_recall", "omega_f1",
                   "first_partition_accuracy")
FORGETTING_COLUMNS = ("row_type", "strategy", "seed", "test_partition",
                      "first_score", "final_score", "absolute_drop",
                      "relative_drop")
SCORE_COLUMNS = ("row_type", "line", "bleu4", "rouge_l", "meteor")

_STRATEGY_DEFAULTS = {
    "epochs": 10,
    "batch_size": 32,
    "budget_fraction": 0.01,
    "budget_absolute": None,
    "n_clusters": 5,
    "pool_factor": 5,
    "lambda_base": 2000.0,
    "selection": "representative",
    "feature_dim": 2 ** 14,
    "hidden_dim": 64,
    "learning_rate": 1e-3,
}

SWEEP_PARAMS = {
    "M": "budget_fraction",
    "lambda_base": "lambda_base",
    "K": "n_clusters",
    "mu": "pool_factor",
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_csv(path: Path, columns, rows, config: dict) -> None:
    meta = [
        f"# config: {json.dumps(config, sort_keys=True)}",
        f"# version: {__version__}",
        f"# created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]
    body = [",".join(columns)]
    body += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(meta + body) + "\n", encoding="utf-8")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class _Parser(argparse.ArgumentParser):
    """argparse flags things like unknown options as usage problems; those are
    validation errors here, so they exit with 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_strategy_flags(parser) -> None:
    sup = argparse.SUPPRESS
    parser.add_argument("--epochs", type=int, default=sup)
    parser.add_argument("--batch-size", type=int, default=sup)
    parser.add_argument("--budget-fraction", type=float, default=sup,
                        help="exemplar budget as a fraction of cumulative train size")
    parser.add_argument("--budget-absolute", type=int, default=sup,
                        help="fixed exemplar budget; overrides --budget-fraction")
    parser.add_argument("--n-clusters", type=int, default=sup)
    parser.add_argument("--pool-factor", type=int, default=sup)
    parser.add_argument("--lambda-base", type=float, default=sup)
    parser.add_argument("--selection", choices=("representative", "random"), default=sup)
    parser.add_argument("--feature-dim", type=int, default=sup)
    parser.add_argument("--hidden-dim", type=int, default=sup)
    parser.add_argument("--learning-rate", type=float, default=sup)
    parser.add_argument("--config", default=sup,
                        help="JSON file of option defaults; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="driftbench",
                     description="continual-learning benchmark on drifting text streams")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sup = argparse.SUPPRESS

    p = sub.add_parser("generate", help="write a synthetic drifting stream")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--partitions", type=int, default=sup)
    p.add_argument("--classes", type=int, default=sup)
    p.add_argument("--train-size", type=int, default=sup)
    p.add_argument("--valid-size", type=int, default=sup)
    p.add_argument("--test-size", type=int, default=sup)
    p.add_argument("--vocab-size", type=int, default=sup)
    p.add_argument("--tokens-per-sample", type=int, default=sup)
    p.add_argument("--drift-strength", type=float, default=sup)
    p.add_argument("--noise-rate", type=float, default=sup)
    p.add_argument("--seed", type=int, default=sup)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run one strategy over a stream")
    p.add_argument("--manifest", default=sup, help="path to a stream manifest.json")
    p.add_argument("--strategy", choices=KINDS, default=sup)
    p.add_argument("--seed", type=int, default=sup)
    p.add_argument("--out-dir", default=".")
    _add_strategy_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several strategies across seeds")
    p.add_argument("--manifest", default=sup)
    p.add_argument("--strategies", default=sup,
                   help="comma-separated subset of " + ",".join(KINDS))
    p.add_argument("--seeds", default=sup, help="comma-separated integers")
    p.add_argument("--jobs", type=int, default=sup, help="parallel worker processes")
    p.add_argument("--out-dir", default=".")
    _add_strategy_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="repeat a comparison over one parameter grid")
    p.add_argument("--manifest", default=sup)
    p.add_argument("--param", choices=sorted(SWEEP_PARAMS), default=sup)
    p.add_argument("--values", default=sup, help="comma-separated parameter values")
    p.add_argument("--strategies", default=sup)
    p.add_argument("--seeds", default=sup)
    p.add_argument("--jobs", type=int, default=sup)
    p.add_argument("--out-dir", default=".")
    _add_strategy_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", help="score two parallel text files line by line")
    p.add_argument("--candidates", default=sup, help="file with one candidate per line")
    p.add_argument("--references", default=sup, help="file with one reference per line")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_score)

    return parser


def _merge_options(ns, defaults: dict) -> dict:
    """Layer resolved options: built-in defaults, then the optional JSON
    config file, then explicit flags."""
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "func")}
    merged = dict(defaults)
    config_path = given.pop("config", None)
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}: malformed config: {err}") from err
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        unknown = sorted(set(doc) - set(defaults))
        if unknown:
            raise ValueError(f"{path}: unknown config keys: {', '.join(unknown)}")
        merged.update(doc)
        merged["_explicit"] = set(doc)
    merged.setdefault("_explicit", set())
    merged["_explicit"] |= set(given)
    merged.update(given)
    return merged


def _require(options: dict, *names: str) -> None:
    missing = [n for n in names if options.get(n) is None]
    if missing:
        raise ValueError("missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


def _strategy_config(options: dict, kind: str, seed: int) -> StrategyConfig:
    explicit = options["_explicit"]
    fraction = options["budget_fraction"]
    absolute = options["budget_absolute"]
    if absolute is not None and "budget_fraction" not in explicit:
        fraction = None
    cfg = StrategyConfig(
        kind=kind,
        epochs=options["epochs"],
        batch_size=options["batch_size"],
        budget_fraction=fraction,
        budget_absolute=absolute,
        n_clusters=options["n_clusters"],
        pool_factor=options["pool_factor"],
        lambda_base=options["lambda_base"],
        selection=options["selection"],
        feature_dim=options["feature_dim"],
        hidden_dim=options["hidden_dim"],
        learning_rate=options["learning_rate"],
        seed=seed,
    )
    cfg.validate()
    return cfg


def _config_meta(options: dict, **extra) -> dict:
    doc = {k: v for k, v in options.items()
           if k not in ("_explicit", "jobs", "out_dir")}
    doc.update(extra)
    return doc


def _parse_int_list(text, flag: str) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as err:
        raise ValueError(f"{flag} expects comma-separated integers: {err}") from err


def _parse_strategies(text) -> list[str]:
    names = ([str(v) for v in text] if isinstance(text, list)
             else [part.strip() for part in str(text).split(",") if part.strip()])
    for name in names:
        if name not in KINDS:
            raise ValueError(f"unknown strategy '{name}'")
    if len(set(names)) != len(names):
        raise ValueError("duplicate strategy names")
    return names


def _out_dir(options: dict) -> Path:
    out = Path(options["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _history_rows(history: list[EvalRecord]) -> list[list]:
    return [[r.strategy, r.seed, r.step, r.test_partition,
             r.accuracy, r.precision, r.recall, r.f1] for r in history]


def _omega_summary(history: list[EvalRecord]) -> dict:
    doc = {}
    for metric in OMEGA_METRICS:
        per_step, overall = omega_curve(build_omega(history, metric))
        doc[metric] = {"overall": overall, "per_step": per_step}
    return doc


def cmd_generate(ns) -> int:
    options = _merge_options(ns, {
        "out_dir": ".", "partitions": 5, "classes": 3, "train_size": 2000,
        "valid_size": 250, "test_size": 250, "vocab_size": 5000,
        "tokens_per_sample": 30, "drift_strength": 0.9, "noise_rate": 0.1,
        "seed": 7})
    cfg = DriftConfig(
        n_partitions=options["partitions"],
        n_classes=options["classes"],
        train_size=options["train_size"],
        valid_size=options["valid_size"],
        test_size=options["test_size"],
        vocab_size=options["vocab_size"],
        tokens_per_sample=options["tokens_per_sample"],
        drift_strength=options["drift_strength"],
        noise_rate=options["noise_rate"],
        seed=options["seed"],
    )
    out = _out_dir(options)
    generate_synthetic(cfg, out)
    print(out / "manifest.json")
    return 0


def _run_defaults() -> dict:
    return {"manifest": None, "out_dir": ".", **_STRATEGY_DEFAULTS}


def cmd_run(ns) -> int:
    options = _merge_options(ns, {**_run_defaults(), "strategy": None, "seed": 0})
    _require(options, "manifest", "strategy")
    cfg = _strategy_config(options, options["strategy"], options["seed"])
    stream = load_stream(options["manifest"])
    class_count = read_manifest(options["manifest"]).class_count
    history, state = run_stream(cfg, stream, class_count)

    out = _out_dir(options)
    meta = _config_meta(options)
    _write_csv(out / "history.csv", HISTORY_COLUMNS, _history_rows(history), meta)
    summary = {
        "config": meta,
        "version": __version__,
        "omega": _omega_summary(history),
    }
    if cfg.kind in ("ewc", "repeat"):
        summary["lambdas"] = state.lambdas
        rows = [[cfg.kind, cfg.seed, t, lam]
                for t, lam in enumerate(state.lambdas, start=1)]
        _write_csv(out / "lambdas.csv", ("strategy", "seed", "step", "lambda"), rows, meta)
    if cfg.kind in ("emr", "repeat"):
        _write_json(out / "store.json",
                    {"config": meta, "version": __version__, **store_to_json(state.store)})
    _write_json(out / "summary.json", summary)
    print(out / "summary.json")
    return 0


def _run_job(manifest_path: str, cfg_kwargs: dict):
    """One (strategy, seed) run; top level so worker processes can import it."""
    stream = load_stream(manifest_path)
    class_count = read_manifest(manifest_path).class_count
    history, state = run_stream(StrategyConfig(**cfg_kwargs), stream, class_count)
    return history, state.lambdas


def _fan_out(manifest: str, configs: list[StrategyConfig], jobs: int):
    """Run every config, in-process when jobs == 1, else across processes.
    Results come back keyed and are re-sorted by the caller."""
    kwargs = [dict(cfg.__dict__) for cfg in configs]
    if jobs <= 1 or len(configs) <= 1:
        return [_run_job(manifest, kw) for kw in kwargs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_job, manifest, kw) for kw in kwargs]
        return [f.result() for f in futures]


def _compare_rows(strategies, seeds, results):
    """Run, aggregate, and first-partition curve rows for compare.csv."""
    by_run = {}
    omegas = {}
    for cfg_key, (history, lambdas) in results.items():
        omegas[cfg_key] = {m: omega_curve(build_omega(history, m))[1]
                           for m in OMEGA_METRICS}
        by_run[cfg_key] = history

    rows = []
    for kind in strategies:
        for seed in seeds:
            o = omegas[(kind, seed)]
            rows.append(["run", kind, seed, None,
                         o["accuracy"], o["precision"], o["recall"], o["f1"], None])
    for kind in strategies:
        per_metric = {m: [omegas[(kind, s)][m] for s in seeds] for m in OMEGA_METRICS}
        rows.append(["median", kind, None, None,
                     *[median(per_metric[m]) for m in OMEGA_METRICS], None])
        rows.append(["mean", kind, None, None,
                     *[mean(per_metric[m]) for m in OMEGA_METRICS], None])
    n_steps = max(r.step for r in next(iter(by_run.values())))
    for kind in strategies:
        for step in range(1, n_steps + 1):
            scores = []
            for seed in seeds:
                scores.extend(r.accuracy for r in by_run[(kind, seed)]
                              if r.test_partition == 1 and r.step == step)
            rows.append(["curve", kind, None, step, None, None, None, None,
                         median(scores)])
    return rows


def _forgetting_rows(history: list[EvalRecord], order: dict) -> list[list]:
    records, aggregates = forgetting_report(history, "accuracy")
    records.sort(key=lambda r: (order.get(r.strategy, 99), r.seed, r.test_partition))
    rows = [["run", r.strategy, r.seed, r.test_partition,
             r.first_score, r.final_score, r.absolute_drop, r.relative_drop]
            for r in records]
    aggregates.sort(key=lambda a: (order.get(a["strategy"], 99), a["test_partition"]))
    rows += [["median", a["strategy"], None, a["test_partition"],
              a["median_first"], a["median_final"], a["median_absolute_drop"],
              a["median_relative_drop"]] for a in aggregates]
    return rows


def _default_jobs() -> int:
    return max(1, min(4, os.cpu_count() or 1))


def _run_comparison(options: dict):
    """Shared engine for compare and sweep: returns (strategies, seeds,
    results dict keyed (kind, seed))."""
    _require(options, "manifest")
    strategies = _parse_strategies(options["strategies"])
    seeds = _parse_int_list(options["seeds"], "--seeds")
    if not seeds:
        raise ValueError("--seeds needs at least one seed")
    configs = [_strategy_config(options, kind, seed)
               for kind in strategies for seed in seeds]
    jobs = options.get("jobs")
    if jobs is None:
        jobs = _default_jobs()
    elif jobs < 1:
        raise ValueError("--jobs must be at least 1")
    results = _fan_out(options["manifest"], configs, jobs)
    keyed = {(cfg.kind, cfg.seed): res for cfg, res in zip(configs, results)}
    return strategies, seeds, keyed


def cmd_compare(ns) -> int:
    options = _merge_options(ns, {
        **_run_defaults(), "strategies": ",".join(KINDS), "seeds": "0,1,2,3,4",
        "jobs": None})
    strategies, seeds, results = _run_comparison(options)
    order = {kind: i for i, kind in enumerate(KINDS)}
    strategies = sorted(strategies, key=order.__getitem__)
    seeds = sorted(seeds)

    out = _out_dir(options)
    meta = _config_meta(options, strategies=strategies, seeds=seeds)

    history = [r for kind in strategies for seed in seeds
               for r in results[(kind, seed)][0]]
    _write_csv(out / "history.csv", HISTORY_COLUMNS, _history_rows(history), meta)
    _write_csv(out / "compare.csv", COMPARE_COLUMNS,
               _compare_rows(strategies, seeds, results), meta)
    _write_csv(out / "forgetting.csv", FORGETTING_COLUMNS,
               _forgetting_rows(history_from_csv(out / "history.csv"), order), meta)

    runs = []
    for kind in strategies:
        for seed in seeds:
            hist, lambdas = results[(kind, seed)]
            entry = {"strategy": kind, "seed": seed,
                     "omega": _omega_summary(hist)}
            if kind in ("ewc", "repeat"):
                entry["lambdas"] = lambdas
            runs.append(entry)
    aggregates = {}
    for kind in strategies:
        per_metric = {}
        for metric in OMEGA_METRICS:
            vals = [omega_curve(build_omega(results[(kind, s)][0], metric))[1]
                    for s in seeds]
            per_metric[metric] = {"median": median(vals), "mean": mean(vals)}
        aggregates[kind] = per_metric
    _write_json(out / "summary.json", {
        "config": meta, "version": __version__,
        "runs": runs, "aggregates": aggregates,
    })
    print(out / "compare.csv")
    return 0


def _parse_sweep_values(param: str, text) -> list:
    raw = ([v for v in text] if isinstance(text, list)
           else [part.strip() for part in str(text).split(",") if part.strip()])
    if not raw:
        raise ValueError("--values needs at least one value")
    values = []
    for item in raw:
        try:
            v = float(item)
        except ValueError as err:
            raise ValueError(f"--values: '{item}' is not a number") from err
        if param in ("K", "mu"):
            if v != int(v):
                raise ValueError(f"--values: {param} must be an integer, got {item}")
            v = int(v)
        values.append(v)
    return values


def cmd_sweep(ns) -> int:
    options = _merge_options(ns, {
        **_run_defaults(), "strategies": "repeat", "seeds": "0,1,2,3,4",
        "jobs": None, "param": None, "values": None})
    _require(options, "param", "values")
    param = options["param"]
    values = _parse_sweep_values(param, options["values"])
    field = SWEEP_PARAMS[param]

    order = {kind: i for i, kind in enumerate(KINDS)}
    strategies_all = sorted(_parse_strategies(options["strategies"]), key=order.__getitem__)
    seeds_all = sorted(_parse_int_list(options["seeds"], "--seeds"))
    rows = []
    blocks = []
    for value in values:
        sub_options = dict(options)
        sub_options[field] = value
        sub_options["_explicit"] = options["_explicit"] | {field}
        strategies, seeds, results = _run_comparison(sub_options)
        strategies = sorted(strategies, key=order.__getitem__)
        seeds = sorted(seeds)
        block = _compare_rows(strategies, seeds, results)
        rows += [[param, value, *row] for row in block]
        blocks.append({"value": value, "strategies": strategies, "seeds": seeds})

    out = _out_dir(options)
    meta = _config_meta(options, values=values, strategies=strategies_all,
                        seeds=seeds_all)
    _write_csv(out / "sweep.csv", ("param", "value", *COMPARE_COLUMNS), rows, meta)
    _write_json(out / "summary.json",
                {"config": meta, "version": __version__, "blocks": blocks})
    print(out / "sweep.csv")
    return 0


def cmd_score(ns) -> int:
    options = _merge_options(ns, {"candidates": None, "references": None,
                                  "out_dir": "."})
    _require(options, "candidates", "references")
    texts = []
    for name in ("candidates", "references"):
        path = Path(options[name])
        if not path.exists():
            raise FileNotFoundError(f"{name} file not found: {path}")
        texts.append([line.split() for line in
                      path.read_text(encoding="utf-8").splitlines()])
    candidates, references = texts
    if len(candidates) != len(references):
        raise ValueError(
            f"line counts differ: {len(candidates)} candidates "
            f"vs {len(references)} references")
    if not candidates:
        raise ValueError("empty input files")

    rows = []
    for i, (cand, ref) in enumerate(zip(candidates, references), start=1):
        rows.append(["line", i,
                     bleu4([cand], [ref], mode="sentence_smoothed"),
                     rouge_l(cand, ref), meteor(cand, ref)])
    aggregate = {
        "bleu4_corpus": bleu4(candidates, references, mode="corpus"),
        "rouge_l_mean": mean(r[3] for r in rows),
        "meteor_mean": mean(r[4] for r in rows),
        "lines": len(rows),
    }
    rows.append(["corpus", None, aggregate["bleu4_corpus"],
                 aggregate["rouge_l_mean"], aggregate["meteor_mean"]])

    out = _out_dir(options)
    meta = _config_meta(options)
    _write_csv(out / "score.csv", SCORE_COLUMNS, rows, meta)
    print(json.dumps(aggregate, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return ns.func(ns)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:
        print(f"unexpected failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
