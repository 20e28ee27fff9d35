from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from conftest import base_config, toy_corpus_seeds, write_config, write_corpus
from graphsynth.cli import main as cli_main
from graphsynth.config import load_config, parse_config
from graphsynth.errors import CheckpointError, ConfigurationError, ValidationError
from graphsynth.pipeline import FAULT_ABORT_ENV, OUTPUT_FILES, RunLock, run_stage
from graphsynth.store import load_concepts, load_items, load_seed_corpus

G0_SEEDS = [
    {"id": "P1", "question": "Relate [Alpha], [Beta] and [Gamma] in one problem.",
     "solution": "combine"},
    {"id": "P2", "question": "Relate [Beta], [Gamma] and [Delta] in one problem.",
     "solution": "combine"},
    {"id": "P3", "question": "Relate [Delta] and [Epsilon] in one problem.",
     "solution": "combine"},
]


def make_run(tmp_path, seeds=None, run_name="run", **config_extra):
    corpus = write_corpus(tmp_path / "corpus.jsonl", seeds or G0_SEEDS)
    config_dict = base_config(tmp_path, corpus, run_name=run_name, **config_extra)
    config_path = write_config(tmp_path / f"{run_name}.json", config_dict)
    return config_path, config_dict


def read_outputs(run_dir: Path) -> dict[str, bytes]:
    out = {}
    for name in OUTPUT_FILES:
        path = run_dir / name
        out[name] = path.read_bytes() if path.exists() else b"<missing>"
    return out


class TestExtractStage:
    def test_knowledge_base_from_bracketed_corpus(self, tmp_path):
        config_path, _ = make_run(tmp_path)
        config = load_config(config_path)
        run_stage(config, "extract")
        kb = load_concepts(config.run_dir / "knowledge_base.jsonl")
        texts = {c.text for c in kb if c.status == "representative"}
        assert texts == {"Alpha", "Beta", "Gamma", "Delta", "Epsilon"}
        enriched = load_seed_corpus(config.run_dir / "seeds_enriched.jsonl")
        by_id = {s.id: s for s in enriched}
        assert len(by_id["P1"].concept_ids) == 3
        rep_ids = {c.id for c in kb if c.status == "representative"}
        for seed in enriched:
            assert set(seed.concept_ids) <= rep_ids

    def test_rerun_is_idempotent(self, tmp_path):
        config_path, _ = make_run(tmp_path)
        config = load_config(config_path)
        run_stage(config, "extract")
        first = (config.run_dir / "knowledge_base.jsonl").read_bytes()
        run_stage(config, "extract")
        assert (config.run_dir / "knowledge_base.jsonl").read_bytes() == first

    def test_missing_extractor_is_preflight_error(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        del config_dict["backends"]["extractor"]
        write_config(config_path, config_dict)
        with pytest.raises(ConfigurationError, match="extractor"):
            run_stage(load_config(config_path), "extract")

    def test_rejected_concepts_never_reach_seeds(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["quality_flags"] = {"Alpha": "vague"}
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        kb = load_concepts(config.run_dir / "knowledge_base.jsonl")
        assert "Alpha" not in {c.text for c in kb}
        enriched = load_seed_corpus(config.run_dir / "seeds_enriched.jsonl")
        assert len(next(s for s in enriched if s.id == "P1").concept_ids) == 2
        filtered = [json.loads(l) for l in
                    (config.run_dir / "concepts.filtered.jsonl").read_text().splitlines()]
        rejected = [r for r in filtered if not r["kept"]]
        assert rejected and rejected[0]["text"] == "Alpha"
        assert rejected[0]["category"] == "vague"


class TestGraphStage:
    def run_through_graph(self, tmp_path, **config_extra):
        config_path, _ = make_run(tmp_path, **config_extra)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        return config

    def test_g0_combination_sets(self, tmp_path):
        config = self.run_through_graph(tmp_path)
        kb = load_concepts(config.run_dir / "knowledge_base.jsonl")
        text_of = {c.id: c.text for c in kb}
        combos = [json.loads(l) for l in
                  (config.run_dir / "combinations.jsonl").read_text().splitlines()]

        def as_texts(combo):
            return frozenset(text_of[c] for c in combo["concept_ids"])

        one = {as_texts(c) for c in combos if c["kind"] == "one_hop"}
        two = {as_texts(c) for c in combos if c["kind"] == "two_hop"}
        three = {as_texts(c) for c in combos if c["kind"] == "three_hop"}
        community = {as_texts(c) for c in combos if c["kind"] == "community"}

        assert one == {frozenset(p) for p in (
            ("Alpha", "Beta"), ("Alpha", "Gamma"), ("Beta", "Gamma"),
            ("Beta", "Delta"), ("Gamma", "Delta"), ("Delta", "Epsilon"))}
        assert two == {frozenset(p) for p in (
            ("Alpha", "Delta"), ("Beta", "Epsilon"), ("Gamma", "Epsilon"))}
        # hub_fraction=1.0 makes every node a hub: the lone distance-3 pair.
        assert three == {frozenset(("Alpha", "Epsilon"))}
        assert community == {
            frozenset(("Alpha", "Beta", "Gamma")),
            frozenset(("Beta", "Gamma", "Delta")),
        }
        weights = {as_texts(c): c["weight"] for c in combos if c["kind"] == "one_hop"}
        assert weights[frozenset(("Beta", "Gamma"))] == 2

    def test_budget_zero_empty_file(self, tmp_path):
        config = self.run_through_graph(
            tmp_path, graph={"hub_fraction": 1.0, "three_hop_min_weight": 1,
                             "combination_budget": 0})
        assert (config.run_dir / "combinations.jsonl").read_text() == ""

    def test_empty_knowledge_base_rejected(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["quality_flags"] = {
            t: "vague" for t in ("Alpha", "Beta", "Gamma", "Delta", "Epsilon")}
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        with pytest.raises(ValidationError, match="empty"):
            run_stage(config, "graph")

    def test_community_cap_truncation_recorded(self, tmp_path):
        config = self.run_through_graph(
            tmp_path, graph={"hub_fraction": 1.0, "three_hop_min_weight": 1,
                             "community_cap": 1})
        stats = json.loads((config.run_dir / "stats" / "graph.json").read_text())
        assert stats["community_cap_truncated"] == 1
        assert stats["enumerated"]["community"] == 1


class TestSynthesizeStage:
    def run_through_synthesize(self, tmp_path, **config_extra):
        config_path, _ = make_run(tmp_path, **config_extra)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        run_stage(config, "synthesize")
        return config

    def test_statuses_follow_kind_scores(self, tmp_path):
        config = self.run_through_synthesize(
            tmp_path,
            judges_scores_by_kind={"one_hop": 0.94, "two_hop": 0.72,
                                   "three_hop": 0.62, "community": 0.88},
        )
        items = load_items(config.run_dir / "items.jsonl")
        assert items
        for item in items:
            kind = item.combination["kind"]
            if kind in ("one_hop", "community"):
                assert item.status == "solution_accepted"
                assert item.solution
                assert set(item.solution_votes.values()) == {1}
            else:
                assert item.status == "problem_rejected"
                assert item.solution is None

    def test_all_zero_scores_accept_nothing(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["problem_score"] = 0.0
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        run_stage(config, "synthesize")
        items = load_items(config.run_dir / "items.jsonl")
        assert items
        assert all(i.status == "problem_rejected" for i in items)

    def test_all_one_scores_accept_every_problem(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["problem_score"] = 1.0
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        run_stage(config, "synthesize")
        items = load_items(config.run_dir / "items.jsonl")
        assert items
        assert all(i.status == "solution_accepted" for i in items)
        assert all(i.weighted_score == 1.0 for i in items)

    def test_dissenting_judge_vetoes_solutions(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["problem_score"] = 1.0
        config_dict["mock"]["behaviors"]["solution_vote_by_model"] = {"mock-judge-b": 0}
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        run_stage(config, "synthesize")
        items = load_items(config.run_dir / "items.jsonl")
        assert items
        assert all(i.status == "solution_rejected" for i in items)
        assert all(i.solution_votes["judge-b"] == 0 for i in items)

    def test_difficulty_routing_recorded(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["problem_score"] = 1.0
        config_dict["mock"]["behaviors"]["difficulty"] = "high"
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        run_stage(config, "synthesize")
        items = load_items(config.run_dir / "items.jsonl")
        assert all(i.difficulty == "high" for i in items)

    def test_missing_judges_is_preflight_error(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["judges"] = []
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        with pytest.raises(ConfigurationError, match="judge"):
            run_stage(config, "synthesize")

    def test_retained_questions_have_distinct_canonical_hashes(self, tmp_path):
        from graphsynth.synthesis import QuestionDeduper

        config = self.run_through_synthesize(tmp_path)
        items = load_items(config.run_dir / "items.jsonl")
        hashes = [QuestionDeduper.canonical_hash(i.question) for i in items]
        assert len(set(hashes)) == len(hashes)


class TestAnalyzeStage:
    def test_report_sections(self, tmp_path):
        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(8, 1, 3))
        reference = tmp_path / "reference.jsonl"
        reference.write_text(json.dumps({"question": "quantity q0"}) + "\n")
        config_dict = base_config(
            tmp_path, corpus,
            judges_scores_by_kind={"one_hop": 0.94, "two_hop": 0.72,
                                   "three_hop": 0.62, "community": 0.88},
        )
        config_dict["analytics"] = {
            "ngram_sizes": [2, 3],
            "decontamination_reference": str(reference),
            "adherence_sample": 10,
        }
        config_dict["cost"] = {
            "mode": "gpu_hourly", "gpu_rate": 0.42, "gpu_count": 8,
            "hours": 36, "sample_count": 2123345,
        }
        config_path = write_config(tmp_path / "run.json", config_dict)
        config = load_config(config_path)
        run_stage(config, "run-all")
        report = json.loads((config.run_dir / "report.json").read_text())

        assert report["seed_count"] == 10
        assert report["expansion"]["ratio"] == pytest.approx(
            report["expansion"]["synthesized"] / 10)
        quality = report["problem_quality_by_kind"]
        assert quality["one_hop"]["mean_weighted_score"] == pytest.approx(0.94)
        assert quality["two_hop"]["mean_weighted_score"] == pytest.approx(0.72)
        assert 0.0 <= report["novelty"]["rate"] <= 1.0
        assert report["cost"]["per_sample"] == pytest.approx(0.42 * 8 * 36 / 2123345)
        assert "2" in report["decontamination"]["per_n"]
        assert report["adherence"]["full_match_ratio"] >= 0.0
        assert report["backend_usage"]["calls"] > 0
        # Mock generator embeds every concept phrase: adherence must be perfect.
        assert report["adherence"]["full_match_ratio"] == 1.0
        assert (config.run_dir / "similarity_histogram.csv").exists()

    def test_zero_accepted_items_gives_sparse_report(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["mock"]["behaviors"]["problem_score"] = 0.0
        write_config(config_path, config_dict)
        config = load_config(config_path)
        run_stage(config, "run-all")
        report = json.loads((config.run_dir / "report.json").read_text())
        assert report["expansion"]["synthesized"] == 0
        assert report["similarity"] == "not computed"
        assert report["adherence"] == "not computed"


class TestDeterminismAndResume:
    def test_two_runs_byte_identical(self, tmp_path):
        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(8, 1, 3))
        outputs = []
        for name in ("run-a", "run-b"):
            config_dict = base_config(tmp_path, corpus, run_name=name)
            config_path = write_config(tmp_path / f"{name}.json", config_dict)
            config = load_config(config_path)
            run_stage(config, "run-all")
            outputs.append(read_outputs(config.run_dir))
        assert outputs[0] == outputs[1]

    def test_interrupt_and_resume_equals_uninterrupted(self, tmp_path, monkeypatch):
        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(8, 1, 3))

        baseline_dict = base_config(tmp_path, corpus, run_name="baseline")
        baseline_path = write_config(tmp_path / "baseline.json", baseline_dict)
        baseline = load_config(baseline_path)
        run_stage(baseline, "run-all")

        interrupted_dict = base_config(tmp_path, corpus, run_name="interrupted")
        interrupted_path = write_config(tmp_path / "interrupted.json", interrupted_dict)
        interrupted = load_config(interrupted_path)
        monkeypatch.setenv(FAULT_ABORT_ENV, "7")
        with pytest.raises(KeyboardInterrupt):
            run_stage(interrupted, "run-all")
        monkeypatch.delenv(FAULT_ABORT_ENV)
        # Checkpoint survived the interrupt.
        assert any((interrupted.run_dir / "checkpoints").iterdir())
        run_stage(load_config(interrupted_path), "run-all")

        assert read_outputs(baseline.run_dir) == read_outputs(interrupted.run_dir)

    def test_interrupt_mid_synthesize_and_resume(self, tmp_path, monkeypatch):
        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(8, 1, 3))
        baseline_dict = base_config(tmp_path, corpus, run_name="base2")
        baseline = load_config(write_config(tmp_path / "base2.json", baseline_dict))
        run_stage(baseline, "run-all")

        config_dict = base_config(tmp_path, corpus, run_name="mid")
        config_path = write_config(tmp_path / "mid.json", config_dict)
        config = load_config(config_path)
        run_stage(config, "extract")
        run_stage(config, "graph")
        monkeypatch.setenv(FAULT_ABORT_ENV, "3")
        with pytest.raises(KeyboardInterrupt):
            run_stage(load_config(config_path), "synthesize")
        monkeypatch.delenv(FAULT_ABORT_ENV)
        run_stage(load_config(config_path), "synthesize")
        run_stage(load_config(config_path), "analyze")
        assert read_outputs(baseline.run_dir) == read_outputs(config.run_dir)

    def test_config_change_mid_run_refuses_resume(self, tmp_path, monkeypatch):
        config_path, config_dict = make_run(tmp_path)
        monkeypatch.setenv(FAULT_ABORT_ENV, "2")
        with pytest.raises(KeyboardInterrupt):
            run_stage(load_config(config_path), "run-all")
        monkeypatch.delenv(FAULT_ABORT_ENV)
        config_dict["random_seed"] = 99
        write_config(config_path, config_dict)
        with pytest.raises(CheckpointError, match="restart"):
            run_stage(load_config(config_path), "run-all")

    def test_torn_cache_line_recovered_on_resume(self, tmp_path, monkeypatch):
        # A hard kill can truncate the final cache append; the torn record
        # was never checkpointed, so resume must quietly redo it.
        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(8, 1, 3))
        baseline_dict = base_config(tmp_path, corpus, run_name="torn-base")
        baseline = load_config(write_config(tmp_path / "tb.json", baseline_dict))
        run_stage(baseline, "run-all")

        config_dict = base_config(tmp_path, corpus, run_name="torn")
        config_path = write_config(tmp_path / "torn.json", config_dict)
        monkeypatch.setenv(FAULT_ABORT_ENV, "4")
        with pytest.raises(KeyboardInterrupt):
            run_stage(load_config(config_path), "run-all")
        monkeypatch.delenv(FAULT_ABORT_ENV)
        cache = Path(config_dict["run_dir"]) / "cache" / "extract.concepts.jsonl"
        with open(cache, "a", encoding="utf-8") as fh:
            fh.write('{"id": "chain-0-5", "result": {"phrases": ["tor')  # torn
        run_stage(load_config(config_path), "run-all")
        assert read_outputs(baseline.run_dir) == read_outputs(Path(config_dict["run_dir"]))

    def test_checkpoint_ids_only_grow(self, tmp_path, monkeypatch):
        from graphsynth.store import read_checkpoint

        config_path, config_dict = make_run(tmp_path)
        run_dir = Path(config_dict["run_dir"])
        monkeypatch.setenv(FAULT_ABORT_ENV, "2")
        with pytest.raises(KeyboardInterrupt):
            run_stage(load_config(config_path), "run-all")
        monkeypatch.delenv(FAULT_ABORT_ENV)
        partial = read_checkpoint(run_dir / "checkpoints" / "extract.concepts.json")
        assert partial is not None and partial.completed_item_ids
        run_stage(load_config(config_path), "run-all")
        final = read_checkpoint(run_dir / "checkpoints" / "extract.concepts.json")
        assert partial.completed_item_ids <= final.completed_item_ids

    def test_two_processes_byte_identical(self, tmp_path):
        # Fresh interpreters: determinism must not lean on per-process state.
        import subprocess
        import sys

        corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(6, 1, 2))
        dirs = []
        for name in ("proc-a", "proc-b"):
            config_dict = base_config(tmp_path, corpus, run_name=name)
            config_path = write_config(tmp_path / f"{name}.json", config_dict)
            proc = subprocess.run(
                [sys.executable, "-m", "graphsynth.cli", "run-all",
                 "--config", str(config_path)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
            dirs.append(Path(config_dict["run_dir"]))
        assert read_outputs(dirs[0]) == read_outputs(dirs[1])


class TestWireProtocolEquivalence:
    def test_http_served_mock_matches_in_process_mock(self, tmp_path):
        # Serve the deterministic mock over real HTTP with the same wire
        # shapes; the pipeline must produce byte-identical outputs either way.
        import json as jsonlib
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        from graphsynth.backends import MockServer

        mock = MockServer(seed=7)

        class MockHttpHandler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = jsonlib.loads(self.rfile.read(length))
                if self.path.endswith("/embeddings"):
                    payload = mock.embeddings(body)
                else:
                    payload = mock.chat_completion(body)
                data = jsonlib.dumps(payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), MockHttpHandler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        endpoint = f"http://127.0.0.1:{server.server_port}/v1"
        try:
            corpus = write_corpus(tmp_path / "corpus.jsonl", toy_corpus_seeds(6, 1, 2))

            local_dict = base_config(tmp_path, corpus, run_name="wire-local")
            local = load_config(write_config(tmp_path / "wl.json", local_dict))
            run_stage(local, "run-all")

            http_dict = base_config(tmp_path, corpus, run_name="wire-http")
            for key in http_dict["backends"]:
                http_dict["backends"][key] = {
                    "endpoint": endpoint, "model_name": f"mock-{key}",
                }
            for judge in http_dict["judges"]:
                judge["endpoint"] = endpoint
                judge["model_name"] = f"mock-{judge['backend_id']}"
            over_http = load_config(write_config(tmp_path / "wh.json", http_dict))
            run_stage(over_http, "run-all")

            assert read_outputs(local.run_dir) == read_outputs(over_http.run_dir)
        finally:
            server.shutdown()


class TestRunLock:
    def test_live_lock_refused(self, tmp_path):
        lock_path = tmp_path / ".lock"
        lock_path.write_text(str(os.getpid()))
        with pytest.raises(ValidationError, match="locked"):
            RunLock(lock_path).__enter__()

    def test_stale_lock_replaced(self, tmp_path):
        lock_path = tmp_path / ".lock"
        lock_path.write_text("999999999")
        with RunLock(lock_path):
            assert lock_path.read_text() == str(os.getpid())
        assert not lock_path.exists()


class TestCli:
    def test_run_all_exit_zero(self, tmp_path, capsys):
        config_path, _ = make_run(tmp_path)
        assert cli_main(["run-all", "--config", str(config_path)]) == 0

    def test_bad_config_exit_one(self, tmp_path):
        config_path = tmp_path / "bad.json"
        config_path.write_text("{}")
        assert cli_main(["extract", "--config", str(config_path)]) == 1

    def test_missing_config_file_exit_one(self, tmp_path):
        assert cli_main(["extract", "--config", str(tmp_path / "nope.json")]) == 1

    def test_interrupted_exit_three(self, tmp_path, monkeypatch):
        config_path, _ = make_run(tmp_path)
        monkeypatch.setenv(FAULT_ABORT_ENV, "2")
        assert cli_main(["run-all", "--config", str(config_path)]) == 3

    def test_budget_flag_overrides_config(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        assert cli_main(["run-all", "--config", str(config_path), "--budget", "0"]) == 0
        run_dir = Path(config_dict["run_dir"])
        assert (run_dir / "combinations.jsonl").read_text() == ""

    def test_set_override_dotted_key(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        code = cli_main([
            "run-all", "--config", str(config_path),
            "--set", "graph.combination_budget=2",
        ])
        assert code == 0
        run_dir = Path(config_dict["run_dir"])
        combos = (run_dir / "combinations.jsonl").read_text().splitlines()
        assert len(combos) == 2

    def test_unreachable_backend_exit_two(self, tmp_path):
        config_path, config_dict = make_run(tmp_path)
        config_dict["backends"]["embedder"] = {
            "endpoint": "http://127.0.0.1:9",  # discard port: nothing listens
            "model_name": "none",
            "request_params": {"max_attempts": 1, "timeout": 0.5},
        }
        write_config(config_path, config_dict)
        assert cli_main(["extract", "--config", str(config_path)]) == 2


class TestConfigParsing:
    def test_defaults_applied(self, tmp_path):
        config = parse_config({
            "run_dir": str(tmp_path / "r"), "seed_corpus": str(tmp_path / "c.jsonl"),
        })
        assert config.thresholds["problem_accept"] == 0.85
        assert config.thresholds["same_band"] == 0.90
        assert config.thresholds["judge_band"] == 0.70
        assert config.graph_params["hub_fraction"] == 0.01
        assert config.graph_params["three_hop_min_weight"] == 2
        assert config.analytics_params["ngram_sizes"] == [8, 10, 13, 15]

    def test_fingerprint_ignores_run_dir_only(self, tmp_path):
        base = {"run_dir": "a", "seed_corpus": "c.jsonl"}
        fp1 = parse_config(dict(base)).fingerprint()
        fp2 = parse_config(dict(base, run_dir="b")).fingerprint()
        fp3 = parse_config(dict(base, random_seed=5)).fingerprint()
        assert fp1 == fp2
        assert fp1 != fp3

    def test_bad_threshold_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            parse_config({"run_dir": "r", "seed_corpus": "c",
                          "thresholds": {"problem_accept": 1.5}})

    def test_inverted_bands_rejected(self):
        with pytest.raises(ConfigurationError, match="judge_band"):
            parse_config({"run_dir": "r", "seed_corpus": "c",
                          "thresholds": {"judge_band": 0.95}})

    def test_unknown_backend_key_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_config({"run_dir": "r", "seed_corpus": "c",
                          "backends": {"wizard": {"endpoint": "mock"}}})
