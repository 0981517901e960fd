"""``graphre`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data integrity
error, 3 runtime or numeric error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import statistics
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import RunConfig, load_config
from .data import (DatasetSpec, complexity_stats, drop_relation_label, filter_min_relations,
                   format_stats_csv, format_stats_table, load_documents)
from .decoder import prediction_record, write_predictions
from .embeddings import make_provider
from .errors import FormatError, GraphREError, UsageError
from .evaluation import TripleSet, exact_micro_f1
from .llm import Layout, PromptSchema, PromptSpec, emit_finetune_corpus, parse_completion, render_prompt
from .network import ParserNetwork, load_network
from .training import TrainConfig, predict_documents, train

logger = logging.getLogger("graphre")

METRICS = ("micro_P", "micro_R", "micro_F1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers

def _config(args) -> RunConfig:
    overrides = list(getattr(args, "set", None) or [])
    cfg = load_config(getattr(args, "config", None), overrides)
    return cfg


def _echo(cfg: RunConfig) -> None:
    sys.stderr.write("# merged configuration\n" + cfg.to_toml() + "\n")


def _read_jsonl(path) -> List[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{n}: invalid JSON ({exc.msg})") from None
    return out


def _triple_sets(path) -> Dict[str, TripleSet]:
    """id -> TripleSet from prediction JSONL or from an annotated dataset file."""
    p = str(path)
    if p.endswith(".jsonl"):
        out = {}
        for rec in _read_jsonl(path):
            if "id" not in rec or "triples" not in rec:
                raise FormatError(f"{path}: every record needs 'id' and 'triples'")
            out[str(rec["id"])] = TripleSet.from_json(rec["triples"])
        return out
    return {d.id: d.gold_triples() for d in load_documents(path)}


def _doc_ks(path) -> Optional[Dict[str, int]]:
    if str(path).endswith(".jsonl"):
        return None
    return {d.id: d.k for d in load_documents(path)}


# ---------------------------------------------------------------- stats

def cmd_stats(args) -> int:
    rows = []
    if args.config:
        cfg = _config(args)
        docs = []
        for split in ("train", "dev", "test"):
            docs += cfg.load_split(split)
        rows.append((cfg.data.name, complexity_stats(docs)))
    for item in args.inputs:
        name, _, paths = item.rpartition("=")
        docs = []
        for path in paths.split(","):
            docs += load_documents(path)
        if args.drop_relation:
            docs = drop_relation_label(docs, args.drop_relation)
        if args.min_relations:
            before = len(docs)
            docs = filter_min_relations(docs, args.min_relations)
            logger.info("min-relations filter %d kept %d of %d documents",
                        args.min_relations, len(docs), before)
        rows.append((name or Path(paths.split(",")[0]).stem, complexity_stats(docs)))
    if not rows:
        raise UsageError("stats needs input files or --config")
    sys.stdout.write(format_stats_csv(rows) if args.format == "csv" else format_stats_table(rows))
    return 0


# ---------------------------------------------------------------- train

def build_network(cfg: RunConfig, spec: DatasetSpec, seed: int, train_docs) -> ParserNetwork:
    e, m = cfg.embeddings, cfg.model
    provider = make_provider(e.kind, e.d_f, seed, e.path or None, train_docs)
    return ParserNetwork(spec, provider, l_psi=m.l_psi, l_phi=m.l_phi, d_h=m.d_h, d_tag=m.d_tag,
                         d_psi=m.d_psi, d_edge=m.d_edge, d_rel=m.d_rel, top_k=m.top_k,
                         oracle_tags=spec.oracle_tags, seed=seed)


def train_config(cfg: RunConfig, spec: DatasetSpec, seed: int) -> TrainConfig:
    t = cfg.training
    return TrainConfig(lr=t.lr, batch_size=t.batch_size, max_steps=t.max_steps,
                       eval_every=t.eval_every, lambda_tag=t.lambda_tag, lambda_parse=t.lambda_parse,
                       weight_decay=t.weight_decay, clip_norm=t.clip_norm or None, seed=seed,
                       oracle_tags=spec.oracle_tags)


def run_training(cfg: RunConfig, seed: int, out_dir: Path):
    """One seed of one configuration; writes config.toml, metrics.csv and checkpoints."""
    train_docs = cfg.load_split("train")
    spec = cfg.dataset_spec(train_docs)
    train_docs = cfg.load_split("train", spec)
    dev_docs = cfg.load_split("dev", spec)
    single = replace(cfg, run=replace(cfg.run, seeds=[seed]))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.toml").write_text(single.to_toml(), encoding="utf-8")
    net = build_network(cfg, spec, seed, train_docs)
    run_config = {**net.config(), "run": single.to_dict()}
    return train(net, train_config(cfg, spec, seed), train_docs, dev_docs, out_dir=out_dir,
                 run_config=run_config, decode_mode=cfg.decode.mode, scale=cfg.decode.scale)


def cmd_train(args) -> int:
    cfg = _config(args)
    seeds = args.seed or cfg.run.seeds
    out_root = Path(args.out_dir or cfg.run.out_dir)
    if args.grid:
        grid = [(a, b) for a in range(4) for b in range(4)]
    else:
        grid = [(cfg.model.l_psi, cfg.model.l_phi)]
    _echo(cfg)
    for l_psi, l_phi in grid:
        run_cfg = replace(cfg, model=replace(cfg.model, l_psi=l_psi, l_phi=l_phi))
        base = out_root / f"psi{l_psi}-phi{l_phi}" if args.grid else out_root
        for seed in seeds:
            result = run_training(run_cfg, seed, base / f"seed-{seed}")
            print(f"l_psi={l_psi} l_phi={l_phi} seed={seed} best_step={result.best_step} "
                  f"best_dev_F1={result.best_f1:.4f} -> {base / f'seed-{seed}'}")
    return 0


# ---------------------------------------------------------------- decode / eval

def cmd_decode(args) -> int:
    net, config, _ = load_network(args.checkpoint)
    docs = load_documents(args.input, net.spec)
    mode = args.mode or config.get("run", {}).get("decode", {}).get("mode", "auto")
    scale = args.scale or config.get("run", {}).get("decode", {}).get("scale", 10.0)
    results = predict_documents(net, docs, mode=mode, scale=scale, jobs=args.jobs)
    records = [prediction_record(doc.id, pr, triples, net.spec) for doc, _, pr, triples, _ in results]
    if args.output:
        write_predictions(records, args.output)
    else:
        for rec in records:
            sys.stdout.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return 0


def _buckets(text: Optional[str]):
    if not text:
        return None
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        if part.endswith("+"):
            out.append((int(part[:-1]), None))
        else:
            out.append((int(lo), int(hi) if hi else int(lo)))
    return tuple(out)


def cmd_eval(args) -> int:
    pred, gold = _triple_sets(args.pred), _triple_sets(args.gold)
    kw = {}
    buckets = _buckets(args.buckets)
    if buckets:
        kw["buckets"] = buckets
    report = exact_micro_f1(pred, gold, ks=_doc_ks(args.gold), **kw)
    if args.format == "json":
        sys.stdout.write(json.dumps(report.to_json(per_doc=args.per_doc), indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(report.to_csv(per_doc=args.per_doc))
    else:
        sys.stdout.write(report.to_text(per_doc=args.per_doc))
    return 0


# ---------------------------------------------------------------- prompts

def _prompt_spec(args, docs) -> PromptSpec:
    spec = DatasetSpec.from_documents(args.name, docs)
    descriptions = None
    if args.descriptions:
        descriptions = json.loads(Path(args.descriptions).read_text(encoding="utf-8"))
    pool = load_documents(args.pool) if args.pool else docs
    return PromptSpec(Layout.parse(args.layout), PromptSchema.from_spec(spec, descriptions),
                      n_icl=args.n_icl, icl_pool=pool, seed=args.seed, task=args.name)


def cmd_prompts_render(args) -> int:
    docs = load_documents(args.input)
    ps = _prompt_spec(args, docs)
    chosen = [d for d in docs if d.id in set(args.id)] if args.id else docs
    for doc in chosen:
        sys.stdout.write(render_prompt(doc, ps, with_completion=args.with_completion) + "\n\n")
    return 0


def cmd_prompts_corpus(args) -> int:
    docs = load_documents(args.input)
    n = emit_finetune_corpus(docs, _prompt_spec(args, docs), args.output)
    print(f"wrote {n} records to {args.output}")
    return 0


def cmd_prompts_parse(args) -> int:
    if args.text is not None:
        parsed = parse_completion(args.text, strict=args.strict)
        print(json.dumps({"status": parsed.status.value, "triples": parsed.triples.to_json(),
                          "warnings": parsed.warnings}, ensure_ascii=False))
        return 0
    out = sys.stdout if not args.output else open(args.output, "w", encoding="utf-8")
    try:
        for rec in _read_jsonl(args.input):
            parsed = parse_completion(str(rec.get("completion", "")), strict=args.strict)
            out.write(json.dumps({"id": rec.get("id"), "status": parsed.status.value,
                                  "triples": parsed.triples.to_json()}, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_prompts_complete(args) -> int:
    from .llm.client import CompletionClient, EndpointConfig

    cfg = EndpointConfig(base_url=args.base_url, model=args.model, token_env=args.token_env,
                         api=args.api, max_concurrent=args.max_concurrent, timeout=args.timeout)
    records = _read_jsonl(args.corpus)
    with CompletionClient(cfg) as client:
        completions = client.complete_all([r["prompt"] for r in records])
    with open(args.output, "w", encoding="utf-8") as fh:
        for rec, text in zip(records, completions):
            fh.write(json.dumps({"id": rec["id"], "completion": text}, ensure_ascii=False) + "\n")
    return 0


# ---------------------------------------------------------------- seeds

def read_run_metrics(path) -> Dict[str, float]:
    """Best dev row (by micro_F1) of a training log, or the headline numbers of an eval JSON."""
    p = Path(path)
    if p.suffix == ".json":
        data = json.loads(p.read_text(encoding="utf-8"))
        try:
            return {m: float(data[m]) for m in METRICS}
        except KeyError as exc:
            raise UsageError(f"{path}: missing metric {exc}") from None
    with p.open(encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(METRICS) <= set(reader.fieldnames):
            raise UsageError(f"{path}: not a metric log (columns {reader.fieldnames})")
        dev = [r for r in reader if r.get("split") == "dev" and r["micro_F1"]]
    if not dev:
        raise UsageError(f"{path}: no dev evaluations logged")
    best = max(dev, key=lambda r: float(r["micro_F1"]))
    return {m: float(best[m]) for m in METRICS}


def aggregate_seeds(runs: Sequence[Dict[str, float]]) -> Dict[str, tuple]:
    """metric -> (mean, sample std or None when there is one run)."""
    if not runs:
        raise UsageError("aggregate_seeds needs at least one run")
    keys = set(runs[0])
    for r in runs[1:]:
        if set(r) != keys:
            raise UsageError(f"metric schemas differ: {sorted(keys)} vs {sorted(r)}")
    out = {}
    for k in sorted(keys):
        vals = [r[k] for r in runs]
        mean = math.fsum(vals) / len(vals)
        out[k] = (mean, statistics.stdev(vals) if len(vals) > 1 else None)
    return out


def format_aggregate(agg: Dict[str, tuple], n: int, fmt: str = "text") -> str:
    if fmt == "csv":
        lines = ["metric,mean,std,n"]
        lines += [f"{k},{m:.4f},{'' if s is None else f'{s:.4f}'},{n}" for k, (m, s) in agg.items()]
    else:
        lines = [f"{k:<10} {m:.4f}" + ("" if s is None else f" ± {s:.4f}") for k, (m, s) in agg.items()]
    return "\n".join(lines) + "\n"


def cmd_seeds(args) -> int:
    runs = [read_run_metrics(p) for p in args.logs]
    sys.stdout.write(format_aggregate(aggregate_seeds(runs), len(runs), args.format))
    return 0


# ---------------------------------------------------------------- parser

def _add_config_flags(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one configuration value (repeatable)")


def _add_prompt_flags(p):
    p.add_argument("--input", required=True, help="annotated documents (JSON or CoNLL-U)")
    p.add_argument("--layout", default="NoDesc", help="NoDesc, Desc, UUID or Adversarial")
    p.add_argument("--n-icl", type=int, default=0, choices=(0, 1))
    p.add_argument("--pool", help="documents to draw in-context examples from (default: --input)")
    p.add_argument("--descriptions", help='JSON {"entities": {...}, "relations": {...}}')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="task", help="dataset/task name (also keys the UUID)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphre", description="Graph-based relation extraction toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="relation-count statistics per dataset")
    p.add_argument("inputs", nargs="*", metavar="[NAME=]PATH[,PATH...]",
                   help="dataset files; comma-joined paths are pooled into one row")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--min-relations", type=int, default=0, help="drop documents with fewer relations")
    p.add_argument("--drop-relation", default="", help="relation label to discard before counting")
    _add_config_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the parser (one run per seed)")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, action="append", help="seed (repeatable; overrides [run].seeds)")
    p.add_argument("--out-dir", help="output directory (overrides [run].out_dir)")
    p.add_argument("--grid", action="store_true", help="sweep l_psi x l_phi over {0..3}^2")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="predict triples with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="prediction JSONL (default: stdout)")
    p.add_argument("--mode", choices=("auto", "greedy", "mst"))
    p.add_argument("--scale", type=float)
    p.add_argument("--jobs", type=int, default=1, help="decode documents in parallel")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True, help="prediction JSONL")
    p.add_argument("--gold", required=True, help="gold JSONL, JSON dataset or CoNLL-U")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--per-doc", action="store_true", help="also dump per-document (k, F1)")
    p.add_argument("--buckets", help="k buckets, e.g. 0-5,6-20,21-50,51+")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prompts", help="LLM prompt tooling")
    psub = p.add_subparsers(dest="prompts_command", required=True, parser_class=_Parser)
    r = psub.add_parser("render", help="print prompts")
    _add_prompt_flags(r)
    r.add_argument("--with-completion", action="store_true")
    r.add_argument("--id", action="append", help="only these document ids")
    r.set_defaults(func=cmd_prompts_render)
    c = psub.add_parser("corpus", help="write a fine-tuning JSONL corpus")
    _add_prompt_flags(c)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_prompts_corpus)
    q = psub.add_parser("parse", help="parse model completions into triples")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help='JSONL with {"id", "completion"}')
    src.add_argument("--text", help="a single completion string")
    q.add_argument("--output")
    q.add_argument("--strict", action="store_true")
    q.set_defaults(func=cmd_prompts_parse)
    e = psub.add_parser("complete", help="query an OpenAI-compatible endpoint")
    e.add_argument("--corpus", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--base-url", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--api", choices=("completions", "chat"), default="completions")
    e.add_argument("--token-env", default="GRAPHRE_API_TOKEN")
    e.add_argument("--max-concurrent", type=int, default=4)
    e.add_argument("--timeout", type=float, default=60.0)
    e.set_defaults(func=cmd_prompts_complete)

    p = sub.add_parser("seeds", help="mean ± std across run logs")
    p.add_argument("logs", nargs="+", help="metrics.csv logs or eval JSON reports")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_seeds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GraphREError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        sys.stderr.write(f"error: unreadable input ({exc})\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - map anything else to the runtime code
        logger.debug("unhandled", exc_info=True)
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
