"""Command-line entry point: ``search``, ``eval``, ``enumerate`` and ``report``.

Settings resolve as: command-line flags, then a JSON ``--config`` file, then
``P3S_SEED`` (seed only), then the defaults in :class:`RunConfig`.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .learners import LEARNER_KINDS, TREE, LearnerSpec, evaluate_suite
from .prims import PipelineTriple, enumerate_pipelines
from .search import (
    METHODS,
    RunDirError,
    SearchConfig,
    embedding_csv,
    load_curve,
    load_trials,
    result_json,
    run_method,
    write_run_dir,
)
from .tabular import DEFAULT_MISSING_MARKERS, TableError, load_csv

log = logging.getLogger("clusterp3s")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class SpecMismatch(ValueError):
    pass


@dataclass
class RunConfig:
    data_path: str | None = None
    target_name: str | None = None
    method: str = "clusterp3s"
    K: int = 5
    outer_iters: int = 50
    inner_iters: int = 10
    seed: int = 0
    reward_learner: str = TREE
    eval_learners: tuple[str, ...] = LEARNER_KINDS
    folds: int = 10
    onehot_cap: int = 64
    out_dir: str = "runs/latest"
    workers: int = 1
    ae_epochs: int = 100
    pretrain_epochs: int = 200

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            K=self.K, outer_iters=self.outer_iters, inner_iters=self.inner_iters, seed=self.seed,
            reward_learner=self.reward_learner, folds=self.folds, onehot_cap=self.onehot_cap,
            ae_epochs=self.ae_epochs, pretrain_epochs=self.pretrain_epochs, workers=self.workers,
        )

    def snapshot(self) -> dict:
        # out_dir is where the snapshot lives, not part of the experiment
        d = asdict(self)
        d.pop("out_dir")
        d["eval_learners"] = list(d["eval_learners"])
        return d


CONFIG_FIELDS = {f.name for f in fields(RunConfig)}

# flag name -> RunConfig field
_FLAG_FIELDS = {
    "data": "data_path",
    "target": "target_name",
    "method": "method",
    "k": "K",
    "outer_iters": "outer_iters",
    "inner_iters": "inner_iters",
    "seed": "seed",
    "reward_learner": "reward_learner",
    "eval_learners": "eval_learners",
    "folds": "folds",
    "onehot_cap": "onehot_cap",
    "out_dir": "out_dir",
    "workers": "workers",
    "ae_epochs": "ae_epochs",
    "pretrain_epochs": "pretrain_epochs",
}


def resolve_config(flags: dict, file_values: dict | None = None, env: dict | None = None) -> RunConfig:
    """Merge settings by precedence: flags > config file > P3S_SEED > defaults."""
    merged: dict = {}
    env = os.environ if env is None else env
    if env.get("P3S_SEED") not in (None, ""):
        merged["seed"] = int(env["P3S_SEED"])
    for source in (file_values or {}, flags):
        for key, value in source.items():
            if value is None:
                continue
            if key not in CONFIG_FIELDS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = value
    if "eval_learners" in merged:
        learners = merged["eval_learners"]
        if isinstance(learners, str):
            learners = [s.strip() for s in learners.split(",") if s.strip()]
        merged["eval_learners"] = tuple(learners)
    return RunConfig(**merged)


def _parse_triple_map(d: dict) -> dict[str, PipelineTriple]:
    return {name: PipelineTriple.from_dict(t) for name, t in d.items()}


def load_pipeline_spec(path: str | Path) -> tuple[dict[str, PipelineTriple], dict]:
    """Per-feature triples from a result.json, ``{"per_feature": ...}`` or a bare feature map."""
    doc = json.loads(Path(path).read_text())
    if "best" in doc:
        return _parse_triple_map(doc["best"]["per_feature"]), doc
    if "per_feature" in doc:
        return _parse_triple_map(doc["per_feature"]), doc
    return _parse_triple_map(doc), {}


# ---------------------------------------------------------------------------
# commands


def cmd_search(cfg: RunConfig, dump_embedding: str | None = None) -> int:
    if cfg.method not in METHODS:
        raise ValueError(f"unknown method {cfg.method!r}; choose from {METHODS}")
    for name in (cfg.reward_learner, *cfg.eval_learners):
        if name not in LEARNER_KINDS:
            raise ValueError(f"unknown learner {name!r}; choose from {LEARNER_KINDS}")
    table = load_csv(cfg.data_path, cfg.target_name)
    run = run_method(cfg.method, table, cfg.search_config())
    out = write_run_dir(run, cfg.out_dir)

    doc = run.result_dict()
    doc["run_config"] = cfg.snapshot()
    doc["suite"] = None
    try:
        suite = evaluate_suite(table, run.best.per_feature, cfg.eval_learners, cfg.folds, cfg.seed, cfg.onehot_cap)
        doc["suite"] = suite.to_dict()
    except Exception as err:  # an invalid fallback pipeline still gets a run directory
        log.warning("suite evaluation failed: %s", err)
    (out / "result.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if dump_embedding and run.embedding is not None:
        Path(dump_embedding).write_text(embedding_csv(run.embedding, table.feature_names))

    score = run.best.score
    print(f"method: {run.method}  trials: {len(run.trials)}  best {cfg.reward_learner} accuracy: "
          f"{'n/a' if score is None else f'{score:.4f}'}")
    if doc["suite"] is not None:
        print(f"suite accuracy: {doc['suite']['mean_accuracy']:.4f}")
    for name, triple in zip(table.feature_names, run.best.per_feature):
        cid = "" if run.best.assignment is None else f"[c{run.best.assignment[table.feature_names.index(name)]}] "
        print(f"  {cid}{name}: {triple}")
    print(f"run directory: {out}")
    return EXIT_OK


def cmd_eval(spec_path: str, data_path: str, target: str, folds: int, seed: int, out: str | None = None,
             learners=LEARNER_KINDS) -> int:
    table = load_csv(data_path, target)
    per_feature, _ = load_pipeline_spec(spec_path)
    unknown = sorted(set(per_feature) - set(table.feature_names))
    missing = [n for n in table.feature_names if n not in per_feature]
    if unknown or missing:
        raise SpecMismatch(f"spec/table mismatch: unknown features {unknown}, uncovered features {missing}")
    specs = [per_feature[n] for n in table.feature_names]
    suite = evaluate_suite(table, specs, learners, folds, seed)
    doc = {"data": data_path, "target": target, "folds": folds, "seed": seed, **suite.to_dict()}
    out_path = Path(out) if out else Path(spec_path).parent / "eval.json"
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for r in suite.results:
        print(f"{r.learner.kind:18s} {r.mean_accuracy:.4f}")
    print(f"{'suite mean':18s} {suite.mean_accuracy:.4f}")
    print(f"wrote {out_path}")
    return EXIT_OK


def enumerate_lines() -> list[str]:
    return [f"{i:2d} {json.dumps(t.to_dict())}" for i, t in enumerate(enumerate_pipelines())]


def cmd_enumerate() -> int:
    for line in enumerate_lines():
        print(line)
    return EXIT_OK


def report_lines(run_dir: str | Path) -> list[str]:
    run_dir = Path(run_dir)
    try:
        doc = json.loads((run_dir / "result.json").read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise RunDirError(f"{run_dir / 'result.json'}: {err}") from None
    trials = load_trials(run_dir / "trials.jsonl")
    curve = load_curve(run_dir / "curve.csv")
    best = doc["best"]
    lines = [
        f"method: {doc['method']}",
        f"seed: {doc['seed']}",
        f"iterations: {doc['iterations']}",
        f"trials: {len(trials)} ({sum(t.valid for t in trials)} valid)",
        f"best score: {best['score']}",
        f"best source: {best['source']}",
    ]
    if doc.get("suite"):
        lines.append(f"suite accuracy: {doc['suite']['mean_accuracy']:.4f}")
    lines.append("")
    lines.append(f"{'outer_iter':>10} {'best_score':>12} {'wall_time':>10}")
    for row in curve:
        score = f"{float(row['best_score']):.4f}" if row["best_score"] else "-"
        lines.append(f"{row['outer_iter']:>10} {score:>12} {row['wall_time']:>10}")
    lines.append("")
    lines.append("pipelines:")
    assignment = best.get("assignment") or {}
    for name, t in best["per_feature"].items():
        cid = f"[c{assignment[name]}] " if name in assignment else ""
        lines.append(f"  {cid}{name}: {PipelineTriple.from_dict(t)}")
    return lines


def cmd_report(run_dir: str) -> int:
    for line in report_lines(run_dir):
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterp3s", description="Personalized preprocessing pipeline search.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="run a search method and write a run directory")
    s.add_argument("--config", help="JSON file with RunConfig fields")
    s.add_argument("--data")
    s.add_argument("--target")
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--k", type=int)
    s.add_argument("--outer-iters", type=int)
    s.add_argument("--inner-iters", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--reward-learner", choices=LEARNER_KINDS)
    s.add_argument("--eval-learners", help="comma-separated learner kinds")
    s.add_argument("--folds", type=int)
    s.add_argument("--onehot-cap", type=int)
    s.add_argument("--out-dir")
    s.add_argument("--workers", type=int)
    s.add_argument("--ae-epochs", type=int)
    s.add_argument("--pretrain-epochs", type=int)
    s.add_argument("--dump-embedding", metavar="CSV", help="write the condensed feature embedding")

    e = sub.add_parser("eval", help="cross-validate a saved pipeline spec with every learner")
    e.add_argument("--spec", required=True, help="result.json or a feature -> triple JSON map")
    e.add_argument("--data", required=True)
    e.add_argument("--target", required=True)
    e.add_argument("--folds", type=int, default=10)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="eval.json path (default: next to the --spec file)")

    sub.add_parser("enumerate", help="list the 48 pipelines")

    r = sub.add_parser("report", help="summarize a run directory")
    r.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        if args.command == "enumerate":
            return cmd_enumerate()
        if args.command == "report":
            return cmd_report(args.run_dir)
        if args.command == "eval":
            seed = args.seed
            if seed is None:
                seed = int(os.environ.get("P3S_SEED") or 0)
            return cmd_eval(args.spec, args.data, args.target, args.folds, seed, args.out)

        file_values = {}
        if args.config:
            file_values = json.loads(Path(args.config).read_text())
        flags = {field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()}
        try:
            cfg = resolve_config(flags, file_values)
        except (TypeError, ValueError) as err:
            parser.error(str(err))
        if not cfg.data_path or not cfg.target_name:
            parser.error("search needs --data and --target (on the command line or in --config)")
        return cmd_search(cfg, args.dump_embedding)
    except (TableError, SpecMismatch, RunDirError, OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
