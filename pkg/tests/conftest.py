import json

import pytest

from hiret.corpus import ingest_corpus
from hiret.synth import generate_fixture, write_fixture
from hiret.term_index import build_index


@pytest.fixture
def tiny_corpus(tmp_path):
    """Three documents with a known link graph and distinctive terms."""
    docs = [
        {
            "title": "Alpha Station",
            "paragraphs": [
                {"sentences": ["Alpha Station is a research outpost.",
                               "It studies quasar emissions daily."],
                 "links": ["Beta Bridge", "Gamma Gate"]},
            ],
        },
        {
            "title": "Beta Bridge",
            "paragraphs": [
                {"sentences": ["Beta Bridge spans the frozen river.",
                               "Engineers praise its lattice design."],
                 "links": []},
            ],
        },
        {
            "title": "Gamma Gate",
            "paragraphs": [
                {"sentences": ["Gamma Gate guards the mountain pass.",
                               "Its lattice doors never rust."],
                 "links": ["Alpha Station"]},
            ],
        },
    ]
    src = tmp_path / "tiny.jsonl"
    with src.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")
    return ingest_corpus(src, "plain_jsonl", tmp_path / "tiny.store")


# The running example used across pipeline tests: two gold documents, one
# lexically attractive distractor document.
FIG_QUESTION = "Wojtek Wolski played for what team based in the Miami metropolitan area?"
FIG_ANSWER = "Florida Panthers"
FIG_DOCS = [
    {
        "title": "Florida Panthers",
        "paragraphs": [
            {"sentences": [
                "The Florida Panthers are a professional ice hockey team based in the Miami metropolitan area.",
            ], "links": []},
        ],
    },
    {
        "title": "Wojtek Wolski",
        "paragraphs": [
            {"sentences": [
                "Wojtek Wolski is a Polish-Canadian professional ice hockey player.",
                "In the NHL, he has played for the Colorado Avalanche, Phoenix Coyotes, New York Rangers, Florida Panthers, and the Washington Capitals.",
            ], "links": []},
        ],
    },
    {
        "title": "History of the Miami Dolphins",
        "paragraphs": [
            {"sentences": [
                "The Miami Dolphins are a professional American football franchise based in the Miami metropolitan area.",
            ], "links": []},
        ],
    },
]
# Stage scores for the running example, keyed by candidate id string.
FIG_P_SCORES = {
    "Florida Panthers#p0": 0.99,
    "Wojtek Wolski#p0": 0.98,
    "History of the Miami Dolphins#p0": 0.56,
}
FIG_S_SCORES = {
    "Florida Panthers#s0": 0.98,
    "Wojtek Wolski#s1": 0.95,
    "History of the Miami Dolphins#s0": 0.97,
}


@pytest.fixture
def fig_corpus(tmp_path):
    src = tmp_path / "fig.jsonl"
    with src.open("w", encoding="utf-8") as fh:
        for doc in FIG_DOCS:
            fh.write(json.dumps(doc) + "\n")
    return ingest_corpus(src, "plain_jsonl", tmp_path / "fig.store")


@pytest.fixture(scope="session")
def synth():
    """The 200-document fixture with manifest, queries and an open corpus."""
    fixture = generate_fixture(n_docs=200, n_queries=30, seed=7)
    return fixture


@pytest.fixture(scope="session")
def synth_paths(synth, tmp_path_factory):
    return write_fixture(synth, tmp_path_factory.mktemp("synth"))


@pytest.fixture(scope="session")
def synth_corpus(synth, synth_paths):
    return synth.corpus


@pytest.fixture(scope="session")
def synth_index(synth_corpus):
    return build_index(synth_corpus, granularity="document")
