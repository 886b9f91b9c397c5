import random

import pytest

from hiret.corpus import SentenceId
from hiret.metrics import (
    VerificationRecord,
    answer_em_f1,
    breakdown_report,
    fever_metrics,
    joint_from_components,
    label_wise_f1,
    normalize_answer,
    oracle_score,
    score_qa_example,
    set_retrieval_metrics,
)

from oracles import fever_official_score, label_f1_by_counting, qa_f1_score, qa_normalize


def sid(title, index):
    return SentenceId(title, index)


# ---------------------------------------------------------------------------
# answer normalization and EM/F1


def test_normalize_article_and_case():
    assert normalize_answer("The Miami Dolphins") == "miami dolphins"


def test_normalize_fixed_point():
    assert normalize_answer("from 1986 to 2013") == "from 1986 to 2013"


def test_normalize_punctuation():
    assert normalize_answer("Wycliffe Hall , Oxford") == "wycliffe hall oxford"


@pytest.mark.parametrize("raw", [
    "The Miami Dolphins", "a-b", "an    answer", "Drifting (motorsport)",
    "1,000,000", "yes", "O'Brien's", "THE THE the",
])
def test_normalize_matches_official(raw):
    assert normalize_answer(raw) == qa_normalize(raw)


def test_answer_identity():
    assert answer_em_f1("Florida Panthers", "Florida Panthers") == (1, 1, 1, 1)


def test_answer_disjoint():
    assert answer_em_f1("Miami Dolphins", "Florida Panthers") == (0, 0, 0, 0)


def test_answer_token_bag_arithmetic():
    em, f1, p, r = answer_em_f1("florida panthers team", "Florida Panthers")
    assert em == 0
    assert p == pytest.approx(2 / 3)
    assert r == pytest.approx(1.0)
    assert f1 == pytest.approx(0.8)


def test_answer_yes_no_mismatch_zeroes_f1():
    em, f1, p, r = answer_em_f1("yes", "yes indeed")
    assert (em, f1, p, r) == (0, 0, 0, 0)
    oracle_f1 = qa_f1_score("yes", "yes indeed")
    assert (f1, p, r) == oracle_f1


def test_answer_f1_matches_official_on_random_strings():
    rng = random.Random(11)
    vocab = ["alpha", "beta", "the", "a", "1986", "panthers", "yes", "no"]
    for _ in range(200):
        pred = " ".join(rng.choices(vocab, k=rng.randint(0, 4)))
        gold = " ".join(rng.choices(vocab, k=rng.randint(1, 4)))
        em, f1, p, r = answer_em_f1(pred, gold)
        assert (f1, p, r) == qa_f1_score(pred, gold)


# ---------------------------------------------------------------------------
# set metrics and joint composition


def test_set_metrics_identity():
    assert set_retrieval_metrics({1, 2}, {1, 2}) == (1, 1, 1, 1)


def test_set_metrics_hand_arithmetic():
    em, p, r, f1 = set_retrieval_metrics({"a", "b", "c"}, {"a", "b"})
    assert em == 0
    assert p == pytest.approx(2 / 3)
    assert r == pytest.approx(1.0)
    assert f1 == pytest.approx(0.8)


def test_set_metrics_empty_prediction():
    assert set_retrieval_metrics(set(), {"a"}) == (0, 0, 0, 0)


def test_set_metrics_both_empty():
    assert set_retrieval_metrics(set(), set()) == (1, 1, 1, 1)


def test_joint_products():
    em_j, f1_j, p_j, r_j = joint_from_components(1.0, 1.0, 1.0, 0.0, 0.5, 1.0)
    assert p_j == 0.5
    assert em_j == 0.0


def test_joint_em_product():
    assert joint_from_components(1, 1, 1, 0, 1, 1)[0] == 0


def test_aggregate_joint_is_mean_of_per_example_products():
    # two examples with em_j (1, 0): aggregate joint EM is 0.5
    e1 = score_qa_example("a", "x", "x", {1}, {1})
    e2 = score_qa_example("b", "x", "x", {1}, {2})
    assert (e1.em_j, e2.em_j) == (1.0, 0.0)
    assert (e1.em_j + e2.em_j) / 2 == 0.5
    # and the aggregate is NOT the product of aggregate means: with answer
    # and support EMs of (1, 0) and (0, 1) the per-example products are all
    # zero while the means multiply to 0.25
    f1 = score_qa_example("c", "x", "x", {1}, {2})
    f2 = score_qa_example("d", "x", "y", {1}, {1})
    joint_mean = (f1.em_j + f2.em_j) / 2
    mean_a = (f1.em_a + f2.em_a) / 2
    mean_s = (f1.em_s + f2.em_s) / 2
    assert joint_mean == 0.0
    assert mean_a * mean_s == 0.25
    assert joint_mean != mean_a * mean_s


def test_joint_identities_hold_per_example():
    rng = random.Random(5)
    for _ in range(100):
        pred_sp = {("T", i) for i in rng.sample(range(6), rng.randint(0, 4))}
        gold_sp = {("T", i) for i in rng.sample(range(6), rng.randint(1, 4))}
        e = score_qa_example("q", "alpha beta", "alpha", pred_sp, gold_sp)
        assert e.p_j == e.p_a * e.p_s
        assert e.r_j == e.r_a * e.r_s
        assert e.em_j == e.em_a * e.em_s
        if e.p_j + e.r_j > 0:
            assert e.f1_j == pytest.approx(2 * e.p_j * e.r_j / (e.p_j + e.r_j))
        else:
            assert e.f1_j == 0.0


# ---------------------------------------------------------------------------
# verification metrics


def vrec(qid, gold_label, groups, pred_label, evidence):
    return VerificationRecord(
        query_id=qid, gold_label=gold_label, gold_groups=groups,
        pred_label=pred_label, pred_evidence=evidence,
    )


def test_fever_point_nei_label_only():
    m = fever_metrics([vrec("1", "NEI", [], "NEI", [])])
    assert m.fever_score == 1.0
    assert m.label_accuracy == 1.0


def test_fever_point_incomplete_group():
    groups = [[sid("T", 0), sid("U", 1)]]
    m = fever_metrics([vrec("1", "SUPPORTS", groups, "SUPPORTS", [sid("T", 0)])])
    assert m.label_accuracy == 1.0
    assert m.fever_score == 0.0


def test_fever_point_any_complete_group():
    groups = [[sid("T", 0)], [sid("U", 1), sid("U", 2)]]
    record = vrec("1", "SUPPORTS", groups, "SUPPORTS", [sid("T", 0)])
    m = fever_metrics([record])
    assert m.fever_score == 1.0
    # brute force over groups confirms: exactly one group is fully contained
    contained = [all(s in record.pred_evidence for s in g) for g in groups]
    assert contained == [True, False]


def test_fever_all_facts_mode_is_stricter():
    groups = [[sid("T", 0)], [sid("U", 1)]]
    record = vrec("1", "SUPPORTS", groups, "SUPPORTS", [sid("T", 0)])
    assert fever_metrics([record], evidence_mode="any_group").fever_score == 1.0
    assert fever_metrics([record], evidence_mode="all_facts").fever_score == 0.0


def test_fever_wrong_label_never_scores():
    groups = [[sid("T", 0)]]
    m = fever_metrics([vrec("1", "SUPPORTS", groups, "REFUTES", [sid("T", 0)])])
    assert m.label_accuracy == 0.0
    assert m.fever_score == 0.0


def test_fever_evidence_cap():
    group = [sid("T", 9)]
    evidence = [sid("X", i) for i in range(5)] + [sid("T", 9)]
    m = fever_metrics([vrec("1", "SUPPORTS", [group], "SUPPORTS", evidence)])
    assert m.fever_score == 0.0  # the completing sentence sits beyond the cap


def test_fever_unknown_label_rejected():
    with pytest.raises(ValueError):
        fever_metrics([vrec("1", "MAYBE", [], "NEI", [])])


def _random_records(rng, n):
    labels = ["SUPPORTS", "REFUTES", "NEI"]
    records = []
    for i in range(n):
        gold = rng.choice(labels)
        groups = []
        if gold != "NEI":
            groups = [
                [sid(f"D{rng.randrange(4)}", rng.randrange(4))
                 for _ in range(rng.randint(1, 2))]
                for _ in range(rng.randint(1, 2))
            ]
        pred = rng.choice(labels)
        evidence = [sid(f"D{rng.randrange(4)}", rng.randrange(4)) for _ in range(rng.randint(0, 5))]
        # dedupe while keeping order, the way pipeline output behaves
        seen, unique = set(), []
        for s in evidence:
            if s not in seen:
                seen.add(s)
                unique.append(s)
        records.append(vrec(str(i), gold, groups, pred, unique))
    return records


def _to_official(records):
    instances = []
    for rec in records:
        instances.append({
            "label": "NOT ENOUGH INFO" if rec.gold_label == "NEI" else rec.gold_label,
            "predicted_label": "NOT ENOUGH INFO" if rec.pred_label == "NEI" else rec.pred_label,
            "evidence": [
                [[None, None, s.title, s.sent_index] for s in group] for group in rec.gold_groups
            ],
            "predicted_evidence": [[s.title, s.sent_index] for s in rec.pred_evidence],
        })
    return instances


def test_fever_metrics_match_official_transcription():
    rng = random.Random(23)
    for _ in range(20):
        records = _random_records(rng, 25)
        ours = fever_metrics(records)
        (strict, acc, prec, rec_, f1), per = fever_official_score(_to_official(records))
        assert ours.fever_score == pytest.approx(strict, abs=1e-12)
        assert ours.label_accuracy == pytest.approx(acc, abs=1e-12)
        assert ours.evidence_precision == pytest.approx(prec, abs=1e-12)
        assert ours.evidence_recall == pytest.approx(rec_, abs=1e-12)
        assert ours.evidence_f1 == pytest.approx(f1, abs=1e-12)
        for mine, official in zip(ours.per_example, per):
            assert mine.label_correct == official["label_correct"]
            assert (mine.label_correct and mine.evidence_complete) == official["strict"]


def test_label_wise_f1_matches_counting_oracle():
    rng = random.Random(29)
    records = _random_records(rng, 60)
    ours = label_wise_f1(records)
    oracle = label_f1_by_counting(_to_official(records))
    assert ours["SUPPORTS"] == pytest.approx(oracle["SUPPORTS"])
    assert ours["REFUTES"] == pytest.approx(oracle["REFUTES"])
    assert ours["NEI"] == pytest.approx(oracle["NOT ENOUGH INFO"])


def test_fever_score_never_exceeds_label_accuracy():
    rng = random.Random(31)
    for _ in range(50):
        m = fever_metrics(_random_records(rng, 20))
        assert m.fever_score <= m.label_accuracy + 1e-12


# ---------------------------------------------------------------------------
# oracle score


def test_oracle_all_nei():
    records = [vrec(str(i), "NEI", [], "NEI", []) for i in range(5)]
    assert oracle_score(records, {}, "sentence") == 1.0
    assert oracle_score(records, {}, "paragraph") == 1.0


def test_oracle_paragraph_hit_sentence_miss():
    records = [vrec("1", "SUPPORTS", [[sid("T", 3)]], "SUPPORTS", [])]
    p_sets = {"1": {("T", 0)}}
    s_sets = {"1": {sid("T", 1)}}
    mapper = lambda s: ("T", 0)
    assert oracle_score(records, p_sets, "paragraph", mapper) == 1.0
    assert oracle_score(records, s_sets, "sentence") == 0.0


def test_oracle_matches_brute_force_scan():
    rng = random.Random(37)
    records = _random_records(rng, 100)
    stage_sets = {
        rec.query_id: {sid(f"D{rng.randrange(4)}", rng.randrange(4)) for _ in range(rng.randint(0, 6))}
        for rec in records
    }
    ours = oracle_score(records, stage_sets, "sentence")
    hits = 0
    for rec in records:
        if rec.gold_label == "NEI":
            hits += 1
            continue
        retrieved = stage_sets[rec.query_id]
        if any(all(s in retrieved for s in group) for group in rec.gold_groups):
            hits += 1
    assert ours == pytest.approx(hits / len(records))


def test_oracle_monotonic_across_nested_stages():
    rng = random.Random(41)
    records = _random_records(rng, 50)
    sentence_sets = {}
    paragraph_titles = {}
    for rec in records:
        full = {sid(f"D{i}", j) for i in range(4) for j in range(4)}
        selected = {s for s in full if rng.random() < 0.6}
        sentence_sets[rec.query_id] = selected
        paragraph_titles[rec.query_id] = {s.title for s in full}
    # the sentence stage set is nested inside the paragraph stage coverage
    o_p = oracle_score(records, paragraph_titles, "paragraph")
    o_s = oracle_score(records, sentence_sets, "sentence")
    assert o_p >= o_s


# ---------------------------------------------------------------------------
# breakdown


def test_breakdown_single_tag_accuracy():
    correct = {f"q{i}": i < 5 for i in range(10)}
    rows, warnings = breakdown_report(correct, {f"q{i}": "Person" for i in range(10)})
    assert rows == [("Person", 10, 5, 0.5)]
    assert warnings == []


def test_breakdown_yes_no_percentage():
    correct = {f"q{i}": i < 12 for i in range(17)}
    rows, _ = breakdown_report(correct, {f"q{i}": "Yes/No" for i in range(17)})
    tag, total, n_correct, acc = rows[0]
    assert (tag, total, n_correct) == ("Yes/No", 17, 12)
    assert f"{100 * acc:.1f}" == "70.6"


def test_breakdown_empty_tag_file():
    correct = {"a": True, "b": False}
    rows, _ = breakdown_report(correct, {})
    assert rows == [("untagged", 2, 1, 0.5)]


def test_breakdown_unknown_qid_warns():
    rows, warnings = breakdown_report({"a": True}, {"zz": "Person"})
    assert rows == [("untagged", 1, 1, 1.0)]
    assert len(warnings) == 1
