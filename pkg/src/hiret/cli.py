"""Single entry point: corpus/index builds, pipeline runs, sampling,
evaluation, sweeps and ablations.

Configuration is an INI document with sections [task], [paragraph_level],
[sentence_level], [scorers], [downstream] and [data]; relative paths resolve
against the config file's directory. Any option can be overridden through
environment variables prefixed ``HIRET_`` (for example ``HIRET_SEED``,
``HIRET_THREADS``, ``HIRET_LOG_LEVEL``).

Exit codes: 0 success, 1 usage error, 2 data error, 3 remote-component error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

from . import downstream as ds
from .corpus import Corpus, CorpusError, NotFoundError, ingest_corpus
from .harness import (
    SweepSpec,
    emit_report,
    render_report,
    run_ablation,
    run_sweep,
)
from .metrics import breakdown_report
from .pipeline import (
    PipelineConfig,
    PipelineModules,
    decompose_sentences,
    read_runs,
    run_batch,
    write_runs,
)
from .predictions import (
    evaluate_qa_files,
    evaluate_verification_files,
    load_qa_predictions,
    load_verification_predictions,
    write_qa_predictions,
    write_verification_predictions,
)
from .queries import Query, load_queries
from .sampling import (
    SamplingError,
    SamplingSpec,
    build_nli_context,
    build_qa_context,
    sample_retrieval_pairs,
)
from .scoring import (
    LexicalScorer,
    LexicalScorerModel,
    ScorerError,
    ScorerTransportError,
    TableScorer,
    connect_remote_scorer,
)
from .term_index import TermIndex, build_index

log = logging.getLogger("hiret")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REMOTE = 3

ENV_PREFIX = "HIRET_"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


# ---------------------------------------------------------------------------
# config loading


def load_run_config(path: str | Path) -> tuple[PipelineConfig, configparser.ConfigParser, Path]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    base = Path(path).resolve().parent

    task = parser.get("task", "name", fallback="hotpot")
    seed = parser.getint("task", "seed", fallback=int(_env("seed", 0)))
    stages = set()
    if parser.getboolean("paragraph_level", "enabled", fallback=True):
        stages.add("paragraph_level")
    if parser.getboolean("sentence_level", "enabled", fallback=True):
        stages.add("sentence_level")
    config = PipelineConfig(
        task=task,
        k_p=parser.getint("paragraph_level", "k", fallback=2),
        h_p=parser.getfloat("paragraph_level", "h", fallback=0.01),
        k_s=parser.getint("sentence_level", "k", fallback=5),
        h_s=parser.getfloat("sentence_level", "h", fallback=0.2),
        stage_mask=frozenset(stages),
        seed=seed,
    )
    return config, parser, base


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _build_scorer(parser: configparser.ConfigParser, base: Path, level: str):
    kind = parser.get("scorers", level, fallback="builtin")
    if kind == "builtin":
        model_path = parser.get("scorers", f"{level}_model", fallback=None)
        model = LexicalScorerModel.load(_resolve(base, model_path)) if model_path else None
        return LexicalScorer(model)
    if kind == "table":
        table_path = parser.get("scorers", f"{level}_table")
        return TableScorer.load(_resolve(base, table_path))
    if kind == "remote":
        endpoint = parser.get("scorers", f"{level}_endpoint")
        return connect_remote_scorer(
            endpoint,
            timeout=parser.getfloat("scorers", "timeout", fallback=10.0),
            batch_size=parser.getint("scorers", "batch_size", fallback=128),
        )
    raise ValueError(f"unknown scorer kind for {level}: {kind!r}")


def assemble_modules(
    parser: configparser.ConfigParser, base: Path, queries: list[Query]
) -> PipelineModules:
    corpus = Corpus.open(_resolve(base, parser.get("data", "corpus")))
    index = TermIndex.load(_resolve(base, parser.get("data", "index")))

    adapter = parser.get("downstream", "adapter", fallback="baseline")
    if adapter == "baseline":
        qa_reader, verifier = ds.BaselineQAReader(), ds.BaselineVerifier()
    elif adapter == "oracle":
        qa_reader = ds.OracleQAReader({q.query_id: q.answer or "" for q in queries})
        verifier = ds.OracleVerifier({q.query_id: q.label or "NEI" for q in queries})
    elif adapter == "remote":
        timeout = parser.getfloat("downstream", "timeout", fallback=10.0)
        qa_reader = ds.RemoteQAReader(parser.get("downstream", "qa_endpoint"), timeout=timeout)
        verifier = ds.RemoteVerifier(parser.get("downstream", "verify_endpoint"), timeout=timeout)
    else:
        raise ValueError(f"unknown downstream adapter: {adapter!r}")

    return PipelineModules(
        corpus=corpus,
        index=index,
        paragraph_scorer=_build_scorer(parser, base, "paragraph"),
        sentence_scorer=_build_scorer(parser, base, "sentence"),
        qa_reader=qa_reader,
        verifier=verifier,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_corpus(args) -> int:
    corpus = ingest_corpus(args.input, args.format, args.out, jsonl_path=args.jsonl)
    print(json.dumps(corpus.counts))
    return EXIT_OK


def cmd_build_index(args) -> int:
    corpus = Corpus.open(args.corpus)
    index = build_index(corpus, granularity=args.granularity)
    index.save(args.out)
    print(json.dumps({"doc_count": index.doc_count, "vocab_size": index.vocab_size,
                      "granularity": index.granularity}))
    return EXIT_OK


def cmd_run(args) -> int:
    config, parser, base = load_run_config(args.config)
    queries = load_queries(args.queries, args.queries_format)
    modules = assemble_modules(parser, base, queries)
    result = run_batch(queries, config, modules, threads=args.threads)
    write_runs(result.runs, args.out, include_timings=args.timings)
    if args.pred_out:
        if config.task == "hotpot":
            write_qa_predictions(result.runs, args.pred_out)
        else:
            write_verification_predictions(result.runs, args.pred_out)
    for failure in result.failures:
        log.error("query %s failed: %s", failure.query_id, failure.error)
    print(json.dumps({"runs": len(result.runs), "failures": len(result.failures)}))
    if any(f.kind == "remote" for f in result.failures):
        return EXIT_REMOTE
    return EXIT_OK if not result.failures else EXIT_DATA


def _emit_sample(fh, query: Query, context: str, target_field: str, target, provenance: str):
    fh.write(json.dumps({
        "query_id": query.query_id,
        "query": query.text,
        "context": context,
        target_field: target,
        "provenance": provenance,
    }, ensure_ascii=False, sort_keys=True) + "\n")


def cmd_sample(args) -> int:
    corpus = Corpus.open(args.corpus)
    queries = {q.query_id: q for q in load_queries(args.queries, args.queries_format)}
    runs = read_runs(args.runs)
    spec = SamplingSpec(
        level="paragraph" if args.level == "paragraph" else "sentence",
        neg_per_pos=args.neg_per_pos,
        seed=args.seed,
        max_neg_pool=args.max_neg_pool,
    )
    n_rows = 0
    n_errors = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for run in runs:
            query = queries.get(run.query_id)
            if query is None:
                log.warning("trace %s has no matching query; skipped", run.query_id)
                continue
            try:
                n_rows += _sample_one(fh, args, corpus, query, run, spec)
            except SamplingError as exc:
                log.error("sample failed for %s: %s", run.query_id, exc)
                n_errors += 1
    print(json.dumps({"rows": n_rows, "errors": n_errors}))
    return EXIT_OK if n_errors == 0 else EXIT_DATA


def _sample_one(fh, args, corpus, query, run, spec) -> int:
    """Emit rows for one trace; returns the row count."""
    qspec = spec.for_query(run.query_id)
    n_rows = 0
    if args.level == "paragraph":
        upstream = run.p_initial.ids()
        if not upstream:
            return 0
        gold = set()
        for sid in query.gold_sentences():
            try:
                para = corpus.paragraph_of_sentence(sid)
            except (NotFoundError, KeyError):
                log.warning("gold sentence %s not in corpus", sid)
                continue
            gold.add((para.title, para.para_index))
        gold &= set(upstream)
        result = sample_retrieval_pairs(
            query.text, gold, upstream, qspec,
            resolve_text=lambda pid: corpus.get_paragraph(*pid).text(),
        )
        for pair in result.pairs:
            _emit_sample(fh, query, pair.context_text, "label", pair.label, pair.provenance)
            n_rows += 1
        return n_rows

    pool = decompose_sentences(corpus, sorted(run.paragraph_set()))
    if not pool:
        return 0
    texts = dict(pool)
    upstream_sents = [sid for sid, _ in pool]
    gold = query.gold_sentences() & set(texts)
    if args.level == "sentence":
        result = sample_retrieval_pairs(
            query.text, gold, upstream_sents, qspec,
            resolve_text=lambda sid: texts[sid],
        )
        for pair in result.pairs:
            _emit_sample(fh, query, pair.context_text, "label", pair.label, pair.provenance)
            n_rows += 1
    elif args.level == "qa":
        ctx = build_qa_context(
            query.query_id, gold, upstream_sents, query.answer or "", qspec,
            resolve_text=lambda sid: texts[sid],
        )
        _emit_sample(fh, query, ctx.text(), "answer", ctx.label_or_answer, "gold_plus_sampled")
        n_rows += 1
    else:  # nli
        label = query.label or "NEI"
        gold_for_label = set() if label == "NEI" else gold
        ctx = build_nli_context(
            query.query_id, label, gold_for_label, upstream_sents, qspec,
            resolve_text=lambda sid: texts[sid],
        )
        provenance = "upstream_sampled" if label == "NEI" else "gold_plus_sampled"
        _emit_sample(fh, query, ctx.text(), "label", ctx.label_or_answer, provenance)
        n_rows += 1
    return n_rows


def cmd_eval(args) -> int:
    queries = load_queries(args.gold, args.gold_format)
    corpus = Corpus.open(args.corpus) if args.corpus else None
    if args.task == "hotpot":
        evaluation = evaluate_qa_files(load_qa_predictions(args.pred), queries)
        report = evaluation.report
        per_example = evaluation.per_example
        for warning in evaluation.warnings:
            log.warning("%s", warning)
        correctness = {e.query_id: e.em_a > 0 for e in per_example}
    else:
        metrics, warnings = evaluate_verification_files(
            load_verification_predictions(args.pred), queries,
            evidence_mode=args.evidence_mode,
        )
        for warning in warnings:
            log.warning("%s", warning)
        report = _verification_report(metrics, queries, args, corpus)
        per_example = metrics.per_example
        correctness = {e.query_id: e.label_correct for e in per_example}

    if args.runs and args.task == "hotpot":
        report = _merge_trace_metrics(report, args, queries, corpus)

    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")

    if args.per_example_out:
        with open(args.per_example_out, "w", encoding="utf-8") as fh:
            for e in per_example:
                fh.write(json.dumps(e.__dict__, sort_keys=True) + "\n")

    if args.tags:
        tags = json.loads(Path(args.tags).read_text(encoding="utf-8"))
        rows, warnings = breakdown_report(correctness, tags)
        for warning in warnings:
            log.warning("%s", warning)
        for tag, total, n_correct, acc in rows:
            print(f"{tag}\t{total}\t{n_correct}\t{100 * acc:.1f}")
    return EXIT_OK


def _verification_report(metrics, queries, args, corpus):
    from .metrics import MetricsReport

    report = MetricsReport(task="fever", count=len(queries))
    report.label_accuracy = metrics.label_accuracy
    report.fever_score = metrics.fever_score
    report.sentence_precision = metrics.evidence_precision
    report.sentence_recall = metrics.evidence_recall
    report.sentence_f1 = metrics.evidence_f1
    report.label_f1 = metrics.label_f1
    if args.runs:
        from .harness import evaluate_runs

        runs = read_runs(args.runs)
        trace_report = evaluate_runs(runs, queries, corpus=corpus)
        report.oracle_paragraph = trace_report.oracle_paragraph
        report.oracle_sentence = trace_report.oracle_sentence
        report.paragraph_em = trace_report.paragraph_em
        report.paragraph_precision = trace_report.paragraph_precision
        report.paragraph_recall = trace_report.paragraph_recall
        report.paragraph_f1 = trace_report.paragraph_f1
    return report


def _merge_trace_metrics(report, args, queries, corpus):
    from .harness import evaluate_runs

    runs = read_runs(args.runs)
    trace_report = evaluate_runs(runs, queries, corpus=corpus)
    report.paragraph_em = trace_report.paragraph_em
    report.paragraph_precision = trace_report.paragraph_precision
    report.paragraph_recall = trace_report.paragraph_recall
    report.paragraph_f1 = trace_report.paragraph_f1
    return report


def _parse_values(raw: str, parameter: str):
    if ":" in raw:
        start_s, stop_s, step_s = raw.split(":")
        start, stop, step = float(start_s), float(stop_s), float(step_s)
        if step <= 0:
            raise ValueError("sweep step must be positive")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 10))
            v += step
    else:
        values = [float(v) for v in raw.split(",") if v.strip()]
    if parameter.startswith("k"):
        values = [int(v) for v in values]
    return tuple(values)


def cmd_sweep(args) -> int:
    config, parser, base = load_run_config(args.config)
    queries = load_queries(args.queries, args.queries_format)
    modules = assemble_modules(parser, base, queries)
    spec = SweepSpec(
        parameter=args.param,
        values=_parse_values(args.values, args.param),
        base_config=config,
        retrain_downstream=args.retrain_downstream,
    )
    rows = run_sweep(spec, queries, modules, threads=args.threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(rows, "csv", out_dir / f"sweep_{args.param}.csv")
    emit_report(rows, "json", out_dir / f"sweep_{args.param}.json")
    print(render_report(rows, "table"), end="")
    return EXIT_OK


def cmd_ablate(args) -> int:
    config, parser, base = load_run_config(args.config)
    queries = load_queries(args.queries, args.queries_format)
    modules = assemble_modules(parser, base, queries)
    result = run_ablation(
        args.mode, config, queries, modules,
        retrain_downstream=args.retrain_downstream,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(result.report, "json", out_dir / f"ablation_{args.mode}.json")
    emit_report(result.report, "table", out_dir / f"ablation_{args.mode}.txt")
    write_runs(result.batch.runs, out_dir / f"ablation_{args.mode}_runs.jsonl")
    print(render_report(result.report, "table"), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="hiret", description=__doc__)
    parser.add_argument("--log-level", default=_env("log_level", "warning"),
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="ingest a wiki dump into a corpus store")
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--format", required=True, choices=["fever_wiki", "hotpot_wiki", "plain_jsonl"])
    p.add_argument("--out", required=True)
    p.add_argument("--jsonl", default=None, help="normalized jsonl mirror path")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("build-index", help="build a term index over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--granularity", default="document", choices=["document", "paragraph"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("run", help="run the retrieval pipeline over queries")
    p.add_argument("--config", default=_env("config"), required=_env("config") is None)
    p.add_argument("--queries", required=True)
    p.add_argument("--queries-format", default="auto", choices=["auto", "hotpot", "fever", "jsonl"])
    p.add_argument("--out", required=True)
    p.add_argument("--pred-out", default=None, help="also write an official-format prediction file")
    p.add_argument("--timings", action="store_true", help="include stage timings in the trace")
    p.add_argument("--threads", type=int, default=int(_env("threads", 1)))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sample", help="emit training pairs/contexts from a trace")
    p.add_argument("--level", required=True, choices=["paragraph", "sentence", "qa", "nli"])
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--runs", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--queries-format", default="auto", choices=["auto", "hotpot", "fever", "jsonl"])
    p.add_argument("--corpus", required=True)
    p.add_argument("--neg-per-pos", type=int, default=2)
    p.add_argument("--max-neg-pool", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("--task", required=True, choices=["hotpot", "fever"])
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--gold-format", default="auto", choices=["auto", "hotpot", "fever", "jsonl"])
    p.add_argument("--runs", default=None, help="pipeline trace for stage-level metrics")
    p.add_argument("--corpus", default=None)
    p.add_argument("--tags", default=None, help="query_id -> answer-type tag JSON file")
    p.add_argument("--evidence-mode", default="any_group", choices=["any_group", "all_facts"])
    p.add_argument("--format", default="table", choices=["json", "csv", "table"])
    p.add_argument("--out", default=None)
    p.add_argument("--per-example-out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep one filtering parameter")
    p.add_argument("--param", required=True, choices=["k_p", "h_p", "k_s", "h_s"])
    p.add_argument("--values", required=True, help="start:stop:step or comma list")
    p.add_argument("--config", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--queries-format", default="auto", choices=["auto", "hotpot", "fever", "jsonl"])
    p.add_argument("--out", required=True)
    p.add_argument("--retrain-downstream", action="store_true")
    p.add_argument("--threads", type=int, default=int(_env("threads", 1)))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="run a stage ablation")
    p.add_argument("--mode", required=True, choices=["full", "no_paragraph", "no_sentence"])
    p.add_argument("--config", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--queries-format", default="auto", choices=["auto", "hotpot", "fever", "jsonl"])
    p.add_argument("--out", required=True)
    p.add_argument("--retrain-downstream", action="store_true")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScorerTransportError as exc:
        print(f"remote component error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except ScorerError as exc:
        print(f"remote component error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except (CorpusError, NotFoundError, SamplingError, OSError,
            json.JSONDecodeError, ValueError, KeyError, configparser.Error) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
