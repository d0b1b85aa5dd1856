"""Smoke tests for the _core extension module.

Run with PYTHONPATH pointing at the built module directory (ctest sets this
up automatically).
"""

import os

import pytest

_core = pytest.importorskip("_core")

FIXTURES = os.environ.get("GB_FIXTURE_DIR", os.path.join(os.path.dirname(__file__), "..", "fixtures"))


def test_reward_scoring():
    good = _core.score_response("<explanation>x</explanation> <answer>c</answer>", "c")
    assert good["total"] == 3
    assert good["format_reward"] == 1
    assert good["correctness_reward"] == 2

    wrong = _core.score_response("<explanation>x</explanation> <answer>a</answer>", "c")
    assert wrong["total"] == 1

    malformed = _core.score_response("<answer>d</answer> thanks!", "d")
    assert malformed["total"] == 2
    assert _core.extract_answer("no tags here") is None


def test_encode_decode_roundtrip():
    encoded = _core.encode_answer("some expert reasoning", "e")
    assert encoded == "<explanation>some expert reasoning</explanation> <answer>e</answer>"
    explanation, label = _core.decode_answer(encoded)
    assert explanation == "some expert reasoning"
    assert label == "e"


def test_assemble_mcq_tracks_gold():
    item = _core.assemble_mcq("Which option?", ["A", "B", "C", "D", "E"], 2, "why", 42)
    label_index = ord(item["correct_label"]) - ord("a")
    assert item["options"][label_index] == "C"
    assert "Please choose one of the following options:" in item["question"]


def test_group_advantages_and_kl():
    assert _core.group_advantages([3, 0, 0, 3]) == [1.0, -1.0, -1.0, 1.0]
    assert _core.group_advantages([2, 2, 2, 2]) == [0.0, 0.0, 0.0, 0.0]
    assert _core.kl_exact([0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)
    assert _core.clipped_term(1.5, 1.0, 0.2) == pytest.approx(1.2)


def test_train_grpo_learns_separable_toy():
    policy = _core.CategoricalPolicy(5, 5)
    items = [([(g % 5, 1.0)], g % 5) for g in range(100)]
    log = _core.train_grpo(policy, items, {"learning_rate": 0.2, "weight_decay": 0.0}, seed=1)
    assert log[-1]["accuracy"] >= 0.9


def test_featurize_and_union_accuracy():
    features = _core.featurize("guide design question", 1 << 14)
    assert features == _core.featurize("guide design question", 1 << 14)
    norm = sum(v * v for _, v in features)
    assert norm == pytest.approx(1.0)

    assert _core.union_accuracy([[True, False], [False, True]]) == 1.0
    matrix = _core.complementarity([[True, False, True], [False, False, True]])
    assert matrix[0][0] == 1
    assert matrix[0][1] == 1


def test_eval_with_mock_backend():
    items = [
        _core.assemble_mcq(f"Question number {i}?", ["1", "2", "3", "4", "5"], i % 5, "e", i)
        for i in range(4)
    ]
    rules = [
        {"match": item["question"].split("\n")[0], "responses": [_core.encode_answer("r", item["correct_label"])]}
        for item in items
    ]
    backend = _core.MockBackend(rules)
    records = _core.run_eval(items, backend, runs=2, seed=0)
    assert len(records) == 8
    report = _core.make_report(records, items, [1, 2])
    assert report["overall_accuracy"] == 1.0
    assert report["pass_at_k"]["pass@2"] == 1.0

    table = _core.pass_at_k(records, [1, 2])
    assert table[0][1] == 1.0


def test_parse_mbox_fixture():
    threads, report = _core.parse_mbox(os.path.join(FIXTURES, "threads.mbox"))
    assert report["messages_read"] == 21
    assert report["threads_formed"] == 8
    anonymized, aliases = _core.anonymize_thread(threads[0])
    assert anonymized["messages"][0]["sender"].startswith("Person")
    assert len(aliases) >= 1


def test_keyword_table_and_curation():
    table = _core.KeywordTable.load(
        os.path.join(os.environ.get("GB_ASSET_DIR", "assets"), "keyword_table.json"))
    category, fallback = _core.assign_category(
        "What plasmid backbone should I use for ligation of my insert?", table)
    assert category == "Cloning&PlasmidConstruction"
    assert not fallback
    assert _core.assign_difficulty("Which buffer for ligation?", table) == "Easy"

    items = [
        _core.assemble_mcq("identical duplicated question text for the cluster",
                           ["1", "2", "3", "4", "5"], 0, "e", seed)
        for seed in (1, 2)
    ]
    items[0]["id"], items[1]["id"] = "qa", "qb"
    kept, groups = _core.near_dedup(items, 0.9)
    assert len(kept) == 1
    assert groups == [["qa", "qb"]]

    pool = [
        _core.assemble_mcq(f"unique question number {i} about lab protocols",
                           ["1", "2", "3", "4", "5"], i % 5, "e", i)
        for i in range(10)
    ]
    train, test = _core.split_dataset(pool, 0.2, 3)
    assert len(train) == 8 and len(test) == 2


def test_router_training_roundtrip(tmp_path):
    rows = []
    questions = []
    for e in range(2):
        for q in range(8):
            qid = f"rq{e}_{q}"
            questions.append(f"marker{e} marker{e} body{q}")
            for m in range(2):
                rows.append(
                    '{"question_id":"%s","expert":%d,"run":0,"response":"r","is_correct":%s}'
                    % (qid, m, "true" if m == e else "false"))
    path = tmp_path / "experts.jsonl"
    path.write_text("\n".join(rows) + "\n")

    responses = _core.ExpertResponses.load(str(path))
    assert responses.expert_count == 2
    policy, log = _core.train_router(responses, questions,
                                     {"learning_rate": 0.1, "epochs": 2}, seed=1)
    report = _core.route_and_report(policy, responses, questions)
    assert report["routed_accuracy"] >= report["best_single_accuracy"]
    assert sum(report["selection_shares"]) == pytest.approx(1.0)


def test_package_import():
    import genomebench

    assert genomebench.__version__
    assert genomebench.group_advantages([3, 0, 0, 3]) == [1.0, -1.0, -1.0, 1.0]
