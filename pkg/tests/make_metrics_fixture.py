"""Build the frozen 50-example metrics fixture.

Expected values are computed with the independent transcriptions in
oracles.py and written next to the inputs; the acceptance suite replays the
inputs through the library and compares against these frozen numbers.

Run from the repository root:  python tests/make_metrics_fixture.py
"""

import json
import random
from pathlib import Path

from oracles import fever_official_score, label_f1_by_counting, qa_official_eval

OUT = Path(__file__).parent / "data" / "metrics_fixture.json"

TITLES = ["Abbey Mill", "Cedar Point", "Harbor Light", "Quarry Row"]
ANSWER_BANK = [
    ("Florida Panthers", "Florida Panthers"),            # exact
    ("the Florida Panthers", "Florida Panthers"),        # article stripped
    ("florida panthers team", "Florida Panthers"),       # partial overlap
    ("Miami Dolphins", "Florida Panthers"),              # disjoint
    ("yes", "yes"),                                      # yes correct
    ("no", "yes"),                                       # yes/no mismatch
    ("yes", "no"),
    ("Wycliffe Hall , Oxford", "Wycliffe Hall, Oxford"), # punctuation
    ("from 1986 to 2013", "from 1986 to 2013"),
    ("1945 and 1969", "from 1986 to 2013"),              # wrong span, shared tokens
    ("Drifting", "Drifting (motorsport)"),
    ("", "Florida Panthers"),                            # empty prediction
]


def build_qa_side(rng):
    gold = []
    pred = {"answer": {}, "sp": {}}
    for i in range(25):
        qid = f"qa{i:02d}"
        pred_answer, gold_answer = ANSWER_BANK[i % len(ANSWER_BANK)]
        gold_sp = sorted(
            {(rng.choice(TITLES), rng.randrange(4)) for _ in range(rng.randint(1, 3))}
        )
        style = i % 5
        if style == 0:
            pred_sp = list(gold_sp)                      # exact
        elif style == 1:
            pred_sp = list(gold_sp)[:1]                  # subset
        elif style == 2:
            pred_sp = list(gold_sp) + [("Decoy Hall", 9)]  # superset
        elif style == 3:
            pred_sp = [("Decoy Hall", rng.randrange(4))]   # disjoint
        else:
            pred_sp = []                                  # empty prediction
        gold.append({
            "_id": qid,
            "question": f"question {i}?",
            "answer": gold_answer,
            "supporting_facts": [list(p) for p in gold_sp],
        })
        if i != 23:   # one missing answer entry, official missing semantics
            pred["answer"][qid] = pred_answer
        if i != 24:   # one missing sp entry
            pred["sp"][qid] = [list(p) for p in pred_sp]
    return pred, gold


def build_fever_side(rng):
    gold = []
    pred = []
    labels = ["SUPPORTS", "REFUTES", "NOT ENOUGH INFO"]
    for i in range(25):
        gold_label = labels[i % 3]
        evidence = []
        if gold_label != "NOT ENOUGH INFO":
            evidence = [
                [[100 + i, 200 + i, rng.choice(TITLES), rng.randrange(4)]
                 for _ in range(rng.randint(1, 2))]
                for _ in range(rng.randint(1, 2))
            ]
        style = i % 5
        pred_label = gold_label if style != 3 else labels[(i + 1) % 3]
        if style == 0 and evidence:
            pred_ev = [[e[2], e[3]] for e in evidence[0]]          # first group complete
        elif style == 1 and evidence:
            pred_ev = [[evidence[0][0][2], evidence[0][0][3]]]     # maybe incomplete
        elif style == 2:
            pred_ev = [[rng.choice(TITLES), rng.randrange(4)] for _ in range(6)]  # overlong
        else:
            pred_ev = []
        deduped = []
        for item in pred_ev:
            if item not in deduped:
                deduped.append(item)
        gold.append({"id": 1000 + i, "claim": f"claim {i}", "label": gold_label,
                     "evidence": evidence})
        pred.append({"id": 1000 + i, "predicted_label": pred_label,
                     "predicted_evidence": deduped})
    return pred, gold


def main():
    rng = random.Random(20240423)
    qa_pred, qa_gold = build_qa_side(rng)
    fever_pred, fever_gold = build_fever_side(rng)

    qa_metrics, qa_rows = qa_official_eval(qa_pred, qa_gold)
    merged = [dict(g, **p) for g, p in zip(fever_gold, fever_pred)]
    (strict, acc, prec, rec, f1), fever_rows = fever_official_score(merged, max_evidence=5)
    label_f1 = label_f1_by_counting(merged)

    payload = {
        "qa": {
            "pred": qa_pred,
            "gold": qa_gold,
            "expected_aggregate": qa_metrics,
            "expected_per_example": qa_rows,
        },
        "fever": {
            "pred": fever_pred,
            "gold": fever_gold,
            "expected": {
                "fever_score": strict,
                "label_accuracy": acc,
                "evidence_precision": prec,
                "evidence_recall": rec,
                "evidence_f1": f1,
                "label_f1": label_f1,
            },
            "expected_per_example": fever_rows,
        },
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
