import json
from fractions import Fraction

import pytest

from paraspeech.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def manifest_line(rid, transcript, speaker="s1"):
    return json.dumps(
        {
            "id": rid,
            "audio_path": f"audio/{rid}.wav",
            "duration_s": 2.0,
            "speaker": speaker,
            "source": "game",
            "transcript": transcript,
            "provenance": "human",
            "lang": "zh",
        },
        ensure_ascii=False,
    )


@pytest.fixture
def golden_manifests(tmp_path, fixtures_dir):
    golden = json.loads((fixtures_dir / "golden_pairs.json").read_text())
    ref = tmp_path / "ref.jsonl"
    hyp = tmp_path / "hyp.jsonl"
    ref.write_text("\n".join(manifest_line(p["id"], p["ref"]) for p in golden["pairs"]) + "\n")
    hyp.write_text("\n".join(manifest_line(p["id"], p["hyp"]) for p in golden["pairs"]) + "\n")
    return golden, ref, hyp


def test_validate_clean(capsys, fixtures_dir):
    code, doc = run(capsys, "validate", str(fixtures_dir / "manifest_20.jsonl"))
    assert code == 0
    assert doc["valid"] == 20


def test_validate_bad_manifest_exits_1(capsys, tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(manifest_line("a", "你好[Sneeze]") + "\n")
    code, doc = run(capsys, "validate", str(path))
    assert code == 1
    assert doc["errors"][0]["kind"] == "unknown-tag"


def test_stats_fixture(capsys, fixtures_dir):
    code, doc = run(capsys, "stats", str(fixtures_dir / "manifest_20.jsonl"))
    assert code == 0
    assert doc["utterance_count"] == 20
    assert doc["total_hours"] == 0.02


def test_stats_empty_manifest(capsys, tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    code, doc = run(capsys, "stats", str(path))
    assert code == 0
    assert doc["utterance_count"] == 0


def test_split_writes_manifests(capsys, tmp_path, fixtures_dir):
    out = tmp_path / "splits"
    code, doc = run(
        capsys,
        "split",
        str(fixtures_dir / "manifest_20.jsonl"),
        "--ratios",
        "train=0.8,test=0.2",
        "--seed",
        "7",
        "--out-dir",
        str(out),
    )
    assert code == 0
    assert doc == {"train": 16, "test": 4}
    assert (out / "train.jsonl").exists() and (out / "test.jsonl").exists()


def test_score_golden_fixture(capsys, golden_manifests):
    golden, ref, hyp = golden_manifests
    code, doc = run(capsys, "score", "--ref", str(ref), "--hyp", str(hyp), "--taxonomy", "default")
    assert code == 0
    expected = golden["corpus"]
    assert doc["cer_full"] == float(Fraction(*expected["cer_full"]))
    assert doc["cer_wo_para"] == float(Fraction(*expected["cer_wo_para"]))
    assert doc["para_detection_rate"] == float(Fraction(*expected["para_detection_rate"]))
    tp, fp, fn = expected["event_tp"], expected["event_fp"], expected["event_fn"]
    assert doc["event_f1"] == float(Fraction(2 * tp, 2 * tp + fp + fn))
    assert doc["counts"] == {
        "utterances": 10,
        "ref_chars": expected["ref_chars"],
        "ref_events": expected["ref_events"],
    }


def test_score_report_schema(capsys, golden_manifests):
    _, ref, hyp = golden_manifests
    code, doc = run(capsys, "score", "--ref", str(ref), "--hyp", str(hyp))
    assert code == 0
    assert set(doc) == {
        "toolkit_version",
        "taxonomy_version",
        "flags",
        "cer_full",
        "cer_wo_para",
        "para_detection_rate",
        "event_precision",
        "event_recall",
        "event_f1",
        "per_category",
        "counts",
    }
    assert len(doc["per_category"]) == 18  # one row per taxonomy category
    for row in doc["per_category"].values():
        assert set(row) == {"tp", "fp", "fn", "f1"}


def test_score_mismatched_ids_exit_1(capsys, tmp_path):
    ref = tmp_path / "r.jsonl"
    hyp = tmp_path / "h.jsonl"
    ref.write_text(manifest_line("a", "你好") + "\n")
    hyp.write_text(manifest_line("b", "你好") + "\n")
    assert main(["score", "--ref", str(ref), "--hyp", str(hyp)]) == 1


def test_tag_score(capsys, tmp_path):
    ref = tmp_path / "ref_tags.jsonl"
    hyp = tmp_path / "hyp_tags.jsonl"
    ref.write_text(
        json.dumps({"id": "a", "tags": {"laughter": 1}}) + "\n"
        + json.dumps({"id": "b", "tags": {"cough": 1}}) + "\n"
    )
    hyp.write_text(
        json.dumps({"id": "a", "tags": {"laughter": 0.9}}) + "\n"
        + json.dumps({"id": "b", "tags": {"uhm": 0.8}}) + "\n"
    )
    code, doc = run(capsys, "tag-score", "--ref", str(ref), "--hyp", str(hyp))
    assert code == 0
    assert doc["precision"] == 0.5
    assert doc["recall"] == 0.5


def test_kappa_identical_manifests(capsys, tmp_path):
    a = tmp_path / "a.jsonl"
    lines = [manifest_line("r1", "你好[Laughter]"), manifest_line("r2", "再见")]
    a.write_text("\n".join(lines) + "\n")
    code, doc = run(capsys, "kappa", str(a), str(a))
    assert code == 0
    assert doc["per_category"]["laughter"] == 1.0
    assert doc["macro"] == 1.0


def test_mix_subcommand(capsys, tmp_path, fixtures_dir):
    out = tmp_path / "mix.jsonl"
    code, doc = run(
        capsys,
        "mix",
        str(fixtures_dir / "manifest_20.jsonl"),
        "--fraction",
        "0.5",
        "--size",
        "10",
        "--seed",
        "2",
        "--out",
        str(out),
    )
    assert code == 0
    assert doc["written"] == 10


def test_merge_auto_subcommand(capsys, tmp_path):
    base = tmp_path / "base.jsonl"
    base.write_text(manifest_line("a", "你好") + "\n" + manifest_line("b", "再见") + "\n")
    hyps = tmp_path / "hyps.jsonl"
    hyps.write_text(
        json.dumps({"id": "a", "transcript": "你好[Laughter]"}, ensure_ascii=False) + "\n"
        + json.dumps({"id": "b", "transcript": "再见[Oops]"}, ensure_ascii=False) + "\n"
    )
    out = tmp_path / "merged.jsonl"
    quarantine = tmp_path / "quarantine.jsonl"
    code, doc = run(
        capsys, "merge-auto", str(base), str(hyps),
        "--out", str(out), "--quarantine", str(quarantine),
    )
    assert code == 0
    assert doc == {"merged": 1, "quarantined": 1}
    qdoc = json.loads(quarantine.read_text().splitlines()[0])
    assert qdoc["id"] == "b"
    assert "reason" in qdoc


def test_assign_cross_subcommand(capsys, tmp_path, fixtures_dir):
    code, doc = run(
        capsys,
        "assign-cross",
        str(fixtures_dir / "manifest_20.jsonl"),
        "--fraction",
        "0.1",
        "--annotators",
        "alice,bob",
        "--seed",
        "5",
    )
    assert code == 0
    assert len(doc) == 2
    assert all(pair == ["alice", "bob"] for pair in doc.values())


def test_ctc_check_fixture(capsys, fixtures_dir):
    code, doc = run(capsys, "ctc-check", str(fixtures_dir / "ctc_small.txt"), "--target", "1,2")
    assert code == 0
    assert doc["within_tolerance"] is True
    assert doc["diff"] <= 1e-9


def test_ctc_check_greedy_default(capsys, fixtures_dir):
    code, doc = run(capsys, "ctc-check", str(fixtures_dir / "ctc_small.txt"))
    assert code == 0
    assert doc["target"] == [1, 2]  # greedy decode of the fixture


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score"])  # missing required --ref/--hyp
    assert exc.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_out_flag_writes_file(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "report.json"
    code = main(["stats", str(fixtures_dir / "manifest_20.jsonl"), "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["utterance_count"] == 20
