#!/usr/bin/env python3
"""Set up a self-contained desk-scale workspace: synthetic corpus, term index,
query files, trained built-in scorer models, and a ready-to-run config.

    python scripts/build_synth_workspace.py --out work/ [--docs 200] [--seed 7]

Afterwards the CLI can be driven directly, e.g.

    hiret run   --config work/run_hotpot.ini --queries work/hotpot_queries.jsonl --out work/runs.jsonl
    hiret sweep --param h_s --values 0:0.9:0.1 --config work/run_fever.ini \
                --queries work/fever_queries.jsonl --out work/sweep/
"""

import argparse
from pathlib import Path

from hiret.harness import regenerate_sentence_pairs
from hiret.pipeline import PipelineConfig, PipelineModules
from hiret.queries import dump_plain_queries
from hiret.sampling import SamplingSpec
from hiret.scoring import LexicalScorer, TrainConfig, train_logistic_scorer
from hiret.synth import generate_fixture, write_fixture
from hiret.term_index import build_index

CONFIG_TEMPLATE = """[task]
name = {task}
seed = {seed}

[paragraph_level]
enabled = true
k = 2
h = 0.01

[sentence_level]
enabled = true
k = 5
h = 0.2

[scorers]
paragraph = builtin
paragraph_model = scorer_model.json
sentence = builtin
sentence_model = scorer_model.json

[downstream]
adapter = baseline

[data]
corpus = synth_corpus.store
index = index.bin
"""


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--docs", type=int, default=200)
    parser.add_argument("--queries", type=int, default=30)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=40)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fixture = generate_fixture(n_docs=args.docs, n_queries=args.queries, seed=args.seed)
    paths = write_fixture(fixture, out)
    corpus = fixture.corpus
    print(f"corpus: {corpus.counts}")

    index = build_index(corpus, granularity="document")
    index.save(out / "index.bin")
    print(f"index: {index.doc_count} documents, {index.vocab_size} terms")

    dump_plain_queries(fixture.hotpot_queries, out / "hotpot_queries.jsonl")
    dump_plain_queries(fixture.fever_queries, out / "fever_queries.jsonl")

    # bootstrap a scorer: sample pairs against the untrained pipeline, then fit
    modules = PipelineModules(
        corpus=corpus, index=index,
        paragraph_scorer=LexicalScorer(), sentence_scorer=LexicalScorer(),
    )
    config = PipelineConfig(task="hotpot", k_p=5, h_p=0.0)
    pairs = regenerate_sentence_pairs(
        fixture.hotpot_queries, modules, config.with_stages("sentence_level"),
        SamplingSpec(level="sentence", neg_per_pos=4, seed=args.seed),
    )
    model, losses = train_logistic_scorer(pairs, TrainConfig(epochs=args.epochs, seed=args.seed))
    model.save(out / "scorer_model.json")
    print(f"scorer: {len(pairs)} pairs, objective {losses[0]:.2f} -> {losses[-1]:.2f}")

    for task in ("hotpot", "fever"):
        (out / f"run_{task}.ini").write_text(
            CONFIG_TEMPLATE.format(task=task, seed=args.seed), encoding="utf-8"
        )
    print(f"workspace ready under {out}/")


if __name__ == "__main__":
    main()
