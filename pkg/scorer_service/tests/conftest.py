import json
import random

import pytest

from scorer_service.training import TrainHyper, train

TOPICS = [
    "solar farm output", "harbor tide records", "violin repair guild",
    "granite quarry survey", "lighthouse lens repair",
]


def make_pairs_file(path, n_per_class=50, seed=0):
    rng = random.Random(seed)
    rows = []
    for i in range(n_per_class):
        topic = rng.choice(TOPICS)
        rows.append({"query": f"report about {topic}",
                     "context": f"the {topic} report was filed in {1990 + i}",
                     "label": "positive", "provenance": "ground_truth"})
        rows.append({"query": f"report about {rng.choice(TOPICS)}",
                     "context": f"unrelated memo {i} concerning nothing shared",
                     "label": "negative", "provenance": "upstream_sampled"})
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return rows


@pytest.fixture(scope="session")
def toy_pairs_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("pairs") / "pairs.jsonl"
    make_pairs_file(path)
    return path


@pytest.fixture(scope="session")
def trained(toy_pairs_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "model"
    backend, losses = train(toy_pairs_path, out,
                            TrainHyper(lr=1e-3, epochs=3, seed=1))
    return backend, losses, out
