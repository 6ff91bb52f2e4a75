import json
import subprocess
import sys

import pytest

from statefulrec.cli import main
from statefulrec.experiment import ExperimentConfig, run_experiment


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def log(tmp_path):
    path = tmp_path / "log.jsonl"
    assert run("synth", "--seed", 42, "--out", path) == 0
    return path


class TestSynth:
    def test_deterministic(self, tmp_path, log):
        other = tmp_path / "again.jsonl"
        run("synth", "--seed", 42, "--out", other)
        assert log.read_bytes() == other.read_bytes()
        lines = log.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 50
        assert len({json.loads(x)["learner_id"] for x in lines}) <= 20

    def test_sizes(self, tmp_path):
        out = tmp_path / "small.jsonl"
        assert run("synth", "--seed", 1, "--n-questions", 2, "--n-learners", 3, "--out", out) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 2

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("", encoding="utf-8")
        assert run("synth", "--out", blocker / "x.jsonl") == 3


class TestIngestAndRecommend:
    def test_ingest_then_recommend(self, tmp_path, log, capsys):
        store = tmp_path / "state.jsonl"
        assert run("ingest", log, "--store", store) == 0
        out = capsys.readouterr().out
        assert "top_need=" in out and "persona=" in out
        learner = json.loads(store.read_text(encoding="utf-8").splitlines()[0])["learner_id"]

        assert run("recommend", "How do I practice recursion?", "--condition", "memory",
                   "--learner", learner, "--store", store) == 0
        out = capsys.readouterr().out
        payload = json.loads(out[out.index("{"):])
        assert payload["condition"] == "memory" and payload["learner_id"] == learner
        assert "Student context:" in payload["prompt"]

    def test_replayed_log_is_stale(self, tmp_path, log, capsys):
        store = tmp_path / "state.jsonl"
        assert run("ingest", log, "--store", store) == 0
        before = store.read_bytes()
        assert run("ingest", log, "--store", store) == 3
        assert f"{log}:1:" in capsys.readouterr().err
        assert store.read_bytes() == before

    def test_bad_log_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"learner_id": "a", "question_id": "q", "question_text": "why", "timestamp": 1}\n{oops\n',
                       encoding="utf-8")
        assert run("ingest", bad, "--store", tmp_path / "s.jsonl") == 3
        assert ":2" in capsys.readouterr().err

    def test_contextual_needs_no_store(self, capsys):
        assert run("recommend", "Why is my exam score low?") == 0
        payload = json.loads(capsys.readouterr().out.split("\n", 1)[1])
        assert payload["condition"] == "contextual" and payload["tactic"] is None

    def test_unknown_learner_is_explicit(self, tmp_path, log, capsys):
        store = tmp_path / "state.jsonl"
        run("ingest", log, "--store", store)
        capsys.readouterr()
        code = run("recommend", "why?", "--condition", "memory", "--learner", "nobody", "--store", store)
        assert code == 3
        captured = capsys.readouterr()
        assert "nobody" in captured.err and captured.out == ""

    def test_memory_without_learner(self):
        assert run("recommend", "why?", "--condition", "memory") == 3


class TestExperiment:
    def test_byte_identical_reports(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("experiment", "--seed", 42, "--out", a) == 0
        assert run("experiment", "--seed", 42, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.items.jsonl").read_bytes() == (tmp_path / "b.items.jsonl").read_bytes()
        out = capsys.readouterr().out
        assert "rho" in out and "report written" in out

    @pytest.mark.parametrize("learners", [2, 20])
    def test_minimal_n(self, tmp_path, learners):
        out = tmp_path / "r.json"
        assert run("experiment", "--seed", 42, "--n-questions", 2, "--n-learners", learners, "--out", out) == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["n_items"] == 2
        assert 0 <= report["t_result"]["p_value"] <= 1

    def test_same_questions_both_conditions(self):
        result = run_experiment(ExperimentConfig(seed=7, n_questions=20))
        ids = [it.question_id for it in result.items]
        assert ids == sorted(ids)
        assert list(result.report.question_ids) == ids
        assert len(result.report.per_item_contextual) == len(result.report.per_item_memory) == 20

    def test_digest_tracks_inputs(self, tmp_path):
        base = run_experiment(ExperimentConfig(seed=1, n_questions=5)).report.config_digest
        assert run_experiment(ExperimentConfig(seed=2, n_questions=5)).report.config_digest != base
        mapping = tmp_path / "m.json"
        mapping.write_text(json.dumps({"engagement": "feed_forward", "performance": "feed_back",
                                       "skill_progression": "feed_up"}), encoding="utf-8")
        assert run_experiment(ExperimentConfig(seed=1, n_questions=5,
                                               mapping_path=str(mapping))).report.config_digest != base
        tdir = tmp_path / "t"
        tdir.mkdir()
        (tdir / "question_block.txt").write_text("Q: {question}\n", encoding="utf-8")
        (tdir / "contextual.txt").write_text("{question}\nRecommend.", encoding="utf-8")
        (tdir / "memory.txt").write_text("{persona} {top_need} {need_vector} {tactic}\n{question}",
                                         encoding="utf-8")
        assert run_experiment(ExperimentConfig(seed=1, n_questions=5,
                                               template_dir=str(tdir))).report.config_digest != base

    def test_external_log_and_store(self, tmp_path, log):
        out, store = tmp_path / "r.json", tmp_path / "s.jsonl"
        assert run("experiment", "--log", log, "--n-questions", 10, "--store", store, "--out", out) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["n_items"] == 10
        assert store.exists()

    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "n_questions": 6, "output_path": str(tmp_path / "from_file.json")}),
                       encoding="utf-8")
        flagged = tmp_path / "flag.json"
        assert run("experiment", "--config", cfg, "--out", flagged) == 0
        assert flagged.exists() and not (tmp_path / "from_file.json").exists()
        assert json.loads(flagged.read_text(encoding="utf-8"))["n_items"] == 6

    @pytest.mark.parametrize("argv", [
        ["experiment", "--n-questions", "1"],
        ["experiment", "--alpha", "0"],
        ["experiment", "--mapping", "/nonexistent/map.json"],
        ["experiment", "--backend", "http"],
    ])
    def test_config_errors(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path / "r.json")]) == 2
        assert not (tmp_path / "r.json").exists()

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"seed": 1, "colour": "blue"}', encoding="utf-8")
        assert run("experiment", "--config", cfg) == 2

    def test_backend_failure_exit_code(self, tmp_path, fake_server, capsys):
        server = fake_server(lambda body: (500, b"{}"))
        out = tmp_path / "r.json"
        code = run("experiment", "--n-questions", 4, "--backend", "http", "--endpoint", server.url, "--out", out)
        assert code == 4
        assert "generate" in capsys.readouterr().err
        assert not out.exists()


class TestDiagnose:
    def test_matches_experiment(self, tmp_path):
        report = tmp_path / "r.json"
        run("experiment", "--seed", 42, "--out", report)
        again = tmp_path / "d.json"
        assert run("diagnose", tmp_path / "r.items.jsonl", "--out", again) == 0
        a = json.loads(report.read_text(encoding="utf-8"))
        b = json.loads(again.read_text(encoding="utf-8"))
        for key in ("rho_contextual", "rho_memory", "t_result", "wilcoxon_result", "effect"):
            assert a[key] == b[key]

    def test_bad_items(self, tmp_path):
        bad = tmp_path / "i.jsonl"
        bad.write_text("nope\n", encoding="utf-8")
        assert run("diagnose", bad) == 3

    def test_degenerate(self, tmp_path):
        items = tmp_path / "i.jsonl"
        rows = [{"question_id": "a", "question_vec": [1, 0], "rec_vec_contextual": [1, 0], "rec_vec_memory": [0, 1]},
                {"question_id": "b", "question_vec": [-1, 0], "rec_vec_contextual": [-1, 0],
                 "rec_vec_memory": [0, -1]}]
        items.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
        assert run("diagnose", items) == 5


def test_module_entry_point(tmp_path):
    out = tmp_path / "x.jsonl"
    proc = subprocess.run([sys.executable, "-m", "statefulrec", "synth", "--n-questions", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text(encoding="utf-8").splitlines()) == 3
