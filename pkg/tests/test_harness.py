import json

import numpy as np
import pytest

from hiret.corpus import SentenceId, ingest_corpus
from hiret.downstream import BaselineVerifier, OracleQAReader, OracleVerifier
from hiret.harness import (
    CachingScorer,
    SweepRow,
    SweepSpec,
    emit_report,
    evaluate_runs,
    regenerate_sentence_pairs,
    render_report,
    run_ablation,
    run_sweep,
)
from hiret.pipeline import PipelineConfig, PipelineModules, run_batch
from hiret.queries import Query
from hiret.scoring import LexicalScorer, LexicalScorerModel, TableScorer
from hiret.term_index import build_index


# ---------------------------------------------------------------------------
# distractor fixture: passes lexical sentence scoring, fails paragraph scoring


RELICS = [f"Relic {name}" for name in ["Axe", "Bell", "Crown", "Drum"]]
DECOYS = [f"Decoy {name}" for name in ["East", "North", "West"]]


@pytest.fixture
def distractor_setup(tmp_path):
    # Each query's term retrieval reaches exactly its own gold document plus
    # the shared decoys: gold documents share no query term with each other,
    # while every decoy mentions every signature.
    sigs = {title: f"rv{i}" for i, title in enumerate(RELICS)}
    docs = []
    for title in RELICS:
        docs.append({"title": title, "paragraphs": [{
            "sentences": [
                f"{title} holds the sigil {sigs[title]}.",
                f"It sits inside the {title.split()[1].lower()} chamber.",
            ],
            "links": [],
        }]})
    rumor = " ".join(sigs.values())
    for title in DECOYS:
        docs.append({"title": title, "paragraphs": [{
            "sentences": [
                f"The {rumor} rumors spread widely in {title}.",
                f"{title} archives say {rumor} without proof.",
            ],
            "links": [],
        }]})
    src = tmp_path / "distractor.jsonl"
    with src.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")
    corpus = ingest_corpus(src, "plain_jsonl", tmp_path / "distractor.store")

    p_scores = {}
    s_scores = {}
    for title in RELICS:
        p_scores[f"{title}#p0"] = 0.95
        s_scores[f"{title}#s0"] = 0.9
        s_scores[f"{title}#s1"] = 0.88
    for title in DECOYS:
        p_scores[f"{title}#p0"] = 0.1
        s_scores[f"{title}#s0"] = 0.85
        s_scores[f"{title}#s1"] = 0.84

    queries = []
    for title in RELICS:
        queries.append(Query(
            query_id=f"dq-{sigs[title]}",
            text=f"what do the archives say about {sigs[title]}?",
            task="hotpot",
            answer=title,
            evidence_groups=[[SentenceId(title, 0), SentenceId(title, 1)]],
        ))
    modules = PipelineModules(
        corpus=corpus,
        index=build_index(corpus),
        paragraph_scorer=TableScorer(p_scores),
        sentence_scorer=TableScorer(s_scores),
        qa_reader=OracleQAReader({q.query_id: q.answer for q in queries}),
        verifier=BaselineVerifier(),
    )
    config = PipelineConfig(task="hotpot", k_p=1, h_p=0.0, k_s=5, h_s=0.2)
    return corpus, modules, queries, config


def test_ablation_no_paragraph_hurts_precision(distractor_setup):
    corpus, modules, queries, config = distractor_setup
    full = run_ablation("full", config, queries, modules)
    ablated = run_ablation("no_paragraph", config, queries, modules)
    assert full.report.sentence_precision == pytest.approx(1.0)
    assert ablated.report.sentence_precision < full.report.sentence_precision
    # higher recall upper bound does not save downstream precision
    assert ablated.report.sentence_recall >= full.report.sentence_recall


def test_ablation_no_sentence_reports_absent_metrics(distractor_setup):
    _, modules, queries, config = distractor_setup
    result = run_ablation("no_sentence", config, queries, modules)
    report = result.report
    assert report.sentence_precision is None
    assert report.sentence_em is None
    assert report.joint_em is None
    assert report.answer_em is not None
    rendered = render_report(report, "table")
    assert "-" in rendered


def test_ablation_deterministic(distractor_setup):
    _, modules, queries, config = distractor_setup
    a = run_ablation("full", config, queries, modules)
    b = run_ablation("full", config, queries, modules)
    assert a.report.as_dict() == b.report.as_dict()


def test_ablation_mode_tagging_and_validation(distractor_setup):
    _, modules, queries, config = distractor_setup
    assert run_ablation("full", config, queries, modules).report.mode == "full"
    with pytest.raises(ValueError):
        run_ablation("no_everything", config, queries, modules)


def test_sentence_sampling_pool_rewired_without_paragraph_stage(distractor_setup):
    corpus, modules, queries, config = distractor_setup
    from hiret.sampling import SamplingSpec

    spec = SamplingSpec(level="sentence", neg_per_pos=4, seed=1)
    full_pairs = regenerate_sentence_pairs(queries, modules, config, spec)
    masked = config.with_stages("sentence_level")
    rewired_pairs = regenerate_sentence_pairs(queries, modules, masked, spec)
    decoy_ids = {f"{t}#s{i}" for t in DECOYS for i in range(2)}
    full_negatives = {p.context_id for p in full_pairs if p.label == "negative"}
    rewired_negatives = {p.context_id for p in rewired_pairs if p.label == "negative"}
    # with k_p=1 the paragraph stage only passes the gold paragraph, so decoys
    # can only appear as negatives when sampling from the term-based set
    assert not (full_negatives & decoy_ids)
    assert rewired_negatives & decoy_ids


def test_ablation_retrain_uses_lexical_scorer(distractor_setup):
    corpus, modules, queries, config = distractor_setup
    from dataclasses import replace

    trainable = replace(modules, sentence_scorer=LexicalScorer())
    result = run_ablation("no_paragraph", config, queries, trainable, retrain_downstream=True)
    assert result.retrained
    assert result.training_pairs > 0


def test_oracle_adapters_make_joint_em_equal_retrieval_em(distractor_setup):
    # with a perfect reader, the downstream stage contributes no loss: per
    # example em_j = em_a * em_s collapses to em_s whenever retrieval is
    # exact, and to 0 when it is not, so the aggregates coincide
    _, modules, queries, config = distractor_setup
    for sentence_scorer in (modules.sentence_scorer, TableScorer({}, default=0.3)):
        from dataclasses import replace

        mods = replace(modules, sentence_scorer=sentence_scorer)
        result = run_batch(queries, config, mods)
        from hiret.metrics import score_qa_example

        per = [
            score_qa_example(
                r.query_id,
                r.prediction.answer if r.prediction else "",
                next(q for q in queries if q.query_id == r.query_id).answer,
                r.sentence_set(),
                next(q for q in queries if q.query_id == r.query_id).gold_sentences(),
            )
            for r in result.runs
        ]
        joint_em = sum(e.em_j for e in per) / len(per)
        retrieval_em = sum(e.em_s for e in per) / len(per)
        assert joint_em == retrieval_em


# ---------------------------------------------------------------------------
# sweeps


def lexical_modules(synth, synth_corpus, synth_index):
    model = LexicalScorerModel(weights=np.array([3.0, 1.0, 1.0, 0.0, 1.0, 2.0]), bias=-2.0)
    return PipelineModules(
        corpus=synth_corpus,
        index=synth_index,
        paragraph_scorer=LexicalScorer(model),
        sentence_scorer=LexicalScorer(model),
        qa_reader=OracleQAReader({q.query_id: q.answer for q in synth.hotpot_queries}),
        verifier=OracleVerifier({q.query_id: q.label for q in synth.fever_queries}),
    )


def test_h_s_sweep_recall_non_increasing(synth, synth_corpus, synth_index):
    modules = lexical_modules(synth, synth_corpus, synth_index)
    spec = SweepSpec(
        parameter="h_s",
        values=tuple(round(0.1 * i, 1) for i in range(10)),
        base_config=PipelineConfig(task="hotpot", k_p=5, h_p=0.0, k_s=5, h_s=0.0),
    )
    rows = run_sweep(spec, synth.hotpot_queries, modules)
    assert len(rows) == 10
    recalls = [row.report.sentence_recall for row in rows]
    assert all(r is not None for r in recalls)
    for before, after in zip(recalls, recalls[1:]):
        assert after <= before + 1e-12
    assert recalls[0] > recalls[-1]  # the sweep actually bites


def test_k_p_sweep_selected_sizes_non_decreasing(synth, synth_corpus, synth_index):
    modules = lexical_modules(synth, synth_corpus, synth_index)
    spec = SweepSpec(
        parameter="k_p",
        values=tuple(range(1, 13)),
        base_config=PipelineConfig(task="hotpot", k_p=2, h_p=0.0, k_s=5, h_s=0.1),
    )
    rows = run_sweep(spec, synth.hotpot_queries[:10], modules)
    assert len(rows) == 12
    sizes = [row.report.paragraphs_selected for row in rows]
    for before, after in zip(sizes, sizes[1:]):
        assert after >= before - 1e-12


def test_single_value_sweep_equals_direct_run(synth, synth_corpus, synth_index):
    modules = lexical_modules(synth, synth_corpus, synth_index)
    config = PipelineConfig(task="fever", k_p=2, h_p=0.0, k_s=5, h_s=0.3)
    spec = SweepSpec(parameter="h_s", values=(0.3,), base_config=config)
    rows = run_sweep(spec, synth.fever_queries, modules)
    direct = run_batch(synth.fever_queries, config, modules)
    direct_report = evaluate_runs(direct.runs, synth.fever_queries, corpus=synth_corpus)
    assert rows[0].report.as_dict() == direct_report.as_dict()


def test_sweep_score_caching_sound(synth, synth_corpus, synth_index):
    # identical reports with and without the cache, field tolerance zero
    modules = lexical_modules(synth, synth_corpus, synth_index)
    values = (0.0, 0.2, 0.4)
    spec = SweepSpec(parameter="h_s", values=values,
                     base_config=PipelineConfig(task="fever", k_p=2, h_p=0.0, k_s=5, h_s=0.0))
    cached_rows = run_sweep(spec, synth.fever_queries, modules)
    for value, row in zip(values, cached_rows):
        config = PipelineConfig(task="fever", k_p=2, h_p=0.0, k_s=5, h_s=value)
        direct = run_batch(synth.fever_queries, config, modules)
        report = evaluate_runs(direct.runs, synth.fever_queries, corpus=synth_corpus)
        assert row.report.as_dict() == report.as_dict()


def test_sweep_rows_independent_of_order(synth, synth_corpus, synth_index):
    modules = lexical_modules(synth, synth_corpus, synth_index)
    base = PipelineConfig(task="fever", k_p=2, h_p=0.0, k_s=5, h_s=0.0)
    forward = run_sweep(SweepSpec(parameter="h_s", values=(0.1, 0.5), base_config=base),
                        synth.fever_queries, modules)
    backward = run_sweep(SweepSpec(parameter="h_s", values=(0.5, 0.1), base_config=base),
                         synth.fever_queries, modules)
    assert forward[0].report.as_dict() == backward[1].report.as_dict()
    assert forward[1].report.as_dict() == backward[0].report.as_dict()


def test_sweep_value_domain_validation():
    base = PipelineConfig(task="fever")
    with pytest.raises(ValueError):
        SweepSpec(parameter="h_s", values=(1.5,), base_config=base)
    with pytest.raises(ValueError):
        SweepSpec(parameter="k_p", values=(0,), base_config=base)
    with pytest.raises(ValueError):
        SweepSpec(parameter="nope", values=(1,), base_config=base)
    with pytest.raises(ValueError):
        SweepSpec(parameter="h_s", values=(), base_config=base)


def test_caching_scorer_transparent():
    inner = TableScorer({"a": 0.3, "b": 0.8}, default=0.5)
    cached = CachingScorer(inner)
    contexts = [("a", "x"), ("b", "y"), ("c", "z")]
    assert cached.score_batch("q", contexts) == inner.score_batch("q", contexts)
    assert cached.score_batch("q", contexts) == inner.score_batch("q", contexts)


# ---------------------------------------------------------------------------
# report emission


def make_rows(n):
    rows = []
    for i in range(n):
        report = evaluate_runs([], [], mode="full")
        report.count = i
        rows.append(SweepRow(value=i / 10, report=report))
    return rows


def test_csv_line_count(tmp_path):
    rows = make_rows(10)
    path = tmp_path / "rows.csv"
    emit_report(rows, "csv", path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 11  # header + 10 data rows


def test_csv_column_order_matches_appendix_layout(tmp_path):
    path = tmp_path / "one.csv"
    emit_report(make_rows(1), "csv", path)
    header = path.read_text().split("\n")[0].split(",")
    assert header[:11] == [
        "value", "s_em", "s_prec", "s_rec", "s_f1",
        "ans_em", "ans_f1", "joint_em", "joint_f1", "joint_prec", "joint_rec",
    ]


def test_json_and_csv_field_equivalence(distractor_setup, tmp_path):
    _, modules, queries, config = distractor_setup
    result = run_ablation("full", config, queries, modules)
    emit_report(result.report, "json", tmp_path / "r.json")
    emit_report(result.report, "csv", tmp_path / "r.csv")
    json_row = json.loads((tmp_path / "r.json").read_text())[0]
    import csv as csv_mod

    with open(tmp_path / "r.csv", newline="") as fh:
        csv_row = next(csv_mod.DictReader(fh))
    for key, value in json_row.items():
        raw = csv_row[key]
        if value is None:
            assert raw == ""
        elif isinstance(value, float):
            assert float(raw) == value
        else:
            assert raw == str(value)


def test_table_renders_dashes_for_absent(distractor_setup):
    _, modules, queries, config = distractor_setup
    result = run_ablation("no_sentence", config, queries, modules)
    table = render_report(result.report, "table")
    header, row = table.strip().split("\n")
    cols = header.split()
    cells = row.split()
    dash_cols = {c for c, cell in zip(cols, cells) if cell == "-"}
    assert {"s_em", "s_prec", "s_rec", "s_f1", "joint_em"} <= dash_cols
