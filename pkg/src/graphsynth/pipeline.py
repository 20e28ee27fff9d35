"""Stage orchestration: extract -> graph -> synthesize -> analyze.

Expensive per-item work (model calls) runs through a checkpointed runner:
results are appended to a per-stage cache file, the checkpoint is advanced
after every committed chunk, and the stage's final output file is rebuilt
wholesale (atomically) from the cache. Interrupting a run at any point and
resuming therefore lands on the same final bytes as an uninterrupted run,
because every mock-backed computation is a pure function of its inputs.

A run directory is owned exclusively via a pid lock file; stale locks from
dead processes are replaced automatically.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Callable, Sequence

from . import analytics, extraction, evaluation, synthesis
from . import graph as graphmod
from ._util import canonical_json, canonicalize, read_jsonl, write_atomic, write_jsonl_atomic
from .backends import BackendClient, MockServer, run_bounded
from .config import RunConfig
from .errors import CheckpointError, ConfigurationError, ValidationError
from .evaluation import JudgePanel
from .store import (
    KeyConcept,
    SeedExample,
    StageCheckpoint,
    SynthesizedItem,
    concept_id_for,
    load_concepts,
    load_seed_corpus,
    read_checkpoint,
    save_concepts,
    save_seed_corpus,
    select_resumable_work,
    write_checkpoint,
)

logger = logging.getLogger(__name__)

# Fault-injection hook for crash-recovery tests: abort the process (as a
# KeyboardInterrupt) after this many newly committed work items.
FAULT_ABORT_ENV = "GRAPHSYNTH_FAULT_ABORT_AFTER"

FILES = {
    "seeds_enriched": "seeds_enriched.jsonl",
    "concepts_raw": "concepts.raw.jsonl",
    "concepts_filtered": "concepts.filtered.jsonl",
    "clusters": "clusters.jsonl",
    "knowledge_base": "knowledge_base.jsonl",
    "graph_edges": "graph_edges.jsonl",
    "combinations": "combinations.jsonl",
    "items": "items.jsonl",
    "report": "report.json",
    "similarity_histogram": "similarity_histogram.csv",
}

OUTPUT_FILES = tuple(FILES.values())


class Interrupted(KeyboardInterrupt):
    """Raised by the fault-injection hook; handled like an operator ^C."""


class RunPaths:
    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)

    def file(self, key: str) -> Path:
        return self.run_dir / FILES[key]

    def checkpoint(self, stage: str) -> Path:
        return self.run_dir / "checkpoints" / f"{stage}.json"

    def cache(self, stage: str) -> Path:
        return self.run_dir / "cache" / f"{stage}.jsonl"

    def stats(self, stage: str) -> Path:
        return self.run_dir / "stats" / f"{stage}.json"

    def lock(self) -> Path:
        return self.run_dir / ".lock"


class RunLock:
    """Exclusive pid-based lock on a run directory."""

    def __init__(self, path: Path):
        self.path = path
        self._held = False

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                if self._steal_if_stale():
                    continue
                raise ValidationError(
                    f"run directory is locked by another process ({self.path}); "
                    "remove the lock file if that process is gone"
                )
            with os.fdopen(fd, "w") as handle:
                handle.write(str(os.getpid()))
            self._held = True
            return self

    def _steal_if_stale(self) -> bool:
        try:
            pid = int(self.path.read_text().strip() or "0")
        except (OSError, ValueError):
            pid = 0
        if pid > 0:
            try:
                os.kill(pid, 0)
                return False  # holder is alive
            except ProcessLookupError:
                pass
            except PermissionError:
                return False
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return True

    def __exit__(self, *exc_info) -> None:
        if self._held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
            self._held = False


class _AbortBudget:
    """Counts committed work items; trips after the env-configured limit."""

    def __init__(self) -> None:
        raw = os.environ.get(FAULT_ABORT_ENV, "")
        self.limit = int(raw) if raw.isdigit() else None
        self.committed = 0

    def on_commit(self, count: int) -> None:
        if self.limit is None:
            return
        self.committed += count
        if self.committed >= self.limit:
            raise Interrupted(
                f"fault-injection abort after {self.committed} committed items"
            )


class PipelineRun:
    """Shared context for one run: config, client, paths, lock."""

    def __init__(self, config: RunConfig, client: BackendClient | None = None):
        self.config = config
        self.paths = RunPaths(config.run_dir)
        if client is None:
            mock = MockServer(seed=config.mock_seed, behaviors=config.mock_behaviors)
            client = BackendClient(mock=mock)
        self.client = client
        self._abort = _AbortBudget()

    # -- checkpointed per-item execution --------------------------------------

    def _run_checkpointed(
        self,
        stage: str,
        work: Sequence[tuple[str, Any]],
        task_fn: Callable[[Any], dict],
        chunk_size: int | None = None,
    ) -> dict[str, dict]:
        """Run ``task_fn`` per work item with resumable progress.

        Returns one JSON-able result record per work id. Task exceptions are
        captured into {"failed": message} records so one bad item never
        aborts the stage.
        """
        fingerprint = self.config.fingerprint()
        ids = [wid for wid, _ in work]
        checkpoint = read_checkpoint(self.paths.checkpoint(stage))
        pending = select_resumable_work(ids, checkpoint, fingerprint)
        done_ids = set(ids) - set(pending)

        cache_path = self.paths.cache(stage)
        results: dict[str, dict] = {}
        if cache_path.exists():
            for rec in _read_cache_tolerant(cache_path):
                if rec.get("id") in done_ids and rec["id"] not in results:
                    results[rec["id"]] = rec["result"]
        missing = done_ids - set(results)
        if missing:
            raise CheckpointError(
                f"stage {stage!r}: checkpoint lists {len(missing)} completed items "
                "with no cached results; remove the checkpoint to restart the stage"
            )

        payloads = dict(work)
        chunk = chunk_size or max(1, self.config.max_in_flight)
        completed = set(done_ids)
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        for start in range(0, len(pending), chunk):
            batch = pending[start:start + chunk]
            outcomes = run_bounded(
                [self._wrap_task(task_fn, payloads[wid]) for wid in batch],
                self.config.max_in_flight,
            )
            with open(cache_path, "a", encoding="utf-8") as handle:
                for wid, outcome in zip(batch, outcomes):
                    if isinstance(outcome, BaseException):
                        outcome = {"failed": f"{type(outcome).__name__}: {outcome}"}
                    results[wid] = outcome
                    handle.write(canonical_json({"id": wid, "result": outcome}) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            completed.update(batch)
            write_checkpoint(
                StageCheckpoint(
                    stage_name=stage,
                    completed_item_ids=completed,
                    config_fingerprint=fingerprint,
                ),
                self.paths.checkpoint(stage),
            )
            self._abort.on_commit(len(batch))
        return results

    def _wrap_task(self, task_fn: Callable[[Any], dict], payload: Any) -> Callable[[], dict]:
        client = self.client

        def run() -> dict:
            with client.metered() as meter:
                record = task_fn(payload)
            record.setdefault("usage", meter.to_record())
            return record

        return run

    def _write_stats(self, stage: str, stats: dict) -> None:
        write_atomic(self.paths.stats(stage), canonical_json(stats) + "\n")

    # -- stage: extract --------------------------------------------------------

    def cmd_extract(self) -> None:
        """Build the knowledge base: extract, quality-filter, cluster, and
        pick representatives; rewrite seeds with representative concept ids."""
        config = self.config
        config.require_roles("extract")
        seeds = load_seed_corpus(config.seed_corpus)
        extractor = config.backends["extractor"]
        kb_judge = config.backends["kb_judge"]
        embedder = config.backends["embedder"]

        def extract_task(seed: SeedExample) -> dict:
            try:
                phrases = extraction.extract_concepts(seed, extractor, self.client)
            except Exception as exc:
                return {"failed": f"{type(exc).__name__}: {exc}"}
            return {"phrases": phrases}

        extract_results = self._run_checkpointed(
            "extract.concepts", [(s.id, s) for s in seeds], extract_task
        )

        raw_phrases_per_seed: dict[str, list[str]] = {}
        concepts: dict[str, KeyConcept] = {}
        extraction_failures = 0
        for seed in seeds:
            result = extract_results[seed.id]
            if "failed" in result:
                extraction_failures += 1
                continue
            raw_phrases_per_seed[seed.id] = result["phrases"]
            for phrase in result["phrases"]:
                cid = concept_id_for(phrase)
                concept = concepts.get(cid)
                if concept is None:
                    concepts[cid] = KeyConcept(
                        id=cid, text=canonicalize(phrase), status="raw",
                        provenance=[seed.id],
                    )
                elif seed.id not in concept.provenance:
                    concept.provenance.append(seed.id)
        raw_concepts = [concepts[cid] for cid in sorted(concepts)]
        save_concepts(self.paths.file("concepts_raw"), raw_concepts)

        def quality_task(concept: KeyConcept) -> dict:
            verdict = extraction.filter_low_quality([concept], kb_judge, self.client)[0]
            return {
                "kept": verdict.kept,
                "category": verdict.category,
                "review": verdict.review,
            }

        quality_results = self._run_checkpointed(
            "extract.quality", [(c.id, c) for c in raw_concepts], quality_task
        )
        quality: dict[str, extraction.QualityVerdict] = {}
        filtered_records = []
        for concept in raw_concepts:
            rec = quality_results[concept.id]
            if "failed" in rec:
                # Transport-level failure: keep the concept, flag for review.
                verdict = extraction.QualityVerdict(concept.id, True, "ok", review=True)
            else:
                verdict = extraction.QualityVerdict(
                    concept.id, rec["kept"], rec["category"], rec.get("review", False)
                )
            quality[concept.id] = verdict
            filtered_records.append({
                "id": concept.id,
                "text": concept.text,
                "kept": verdict.kept,
                "category": verdict.category,
                "review": verdict.review,
            })
        write_jsonl_atomic(self.paths.file("concepts_filtered"), filtered_records)

        kept = [c for c in raw_concepts if quality[c.id].kept]
        for concept in raw_concepts:
            if not quality[concept.id].kept:
                concept.status = "rejected"

        # Deterministic single-pass tail: similarity banding, synonym checks,
        # clustering, representative selection.
        with self.client.metered() as tail_meter:
            thresholds = config.thresholds
            if len(kept) >= 2:
                verdicts = extraction.pairwise_similarity(
                    kept, embedder, self.client,
                    same_threshold=thresholds["same_band"],
                    judge_threshold=thresholds["judge_band"],
                )
                borderline = [v for v in verdicts if v.band == "judge_checked"]
                confirmed = extraction.confirm_synonyms(
                    borderline, {c.id: c for c in kept}, kb_judge, self.client
                )
                confirmed_by_pair = {v.pair: v for v in confirmed}
                verdicts = [confirmed_by_pair.get(v.pair, v) for v in verdicts]
            else:
                verdicts = []
            clusters = extraction.build_clusters(kept, verdicts)
            clusters, final_concepts = extraction.select_representatives(
                clusters, {c.id: c for c in kept}, kb_judge, self.client
            )

        write_jsonl_atomic(
            self.paths.file("clusters"), [c.to_record() for c in clusters]
        )
        save_concepts(self.paths.file("knowledge_base"), final_concepts)

        enriched = extraction.assign_seed_concept_ids(
            seeds, raw_phrases_per_seed, quality, clusters
        )
        save_seed_corpus(self.paths.file("seeds_enriched"), enriched)

        item_usage = _sum_usage(
            list(extract_results.values()) + list(quality_results.values())
        )
        item_usage = _merge_usage(item_usage, tail_meter.to_record())
        self._write_stats("extract", {
            "seeds": len(seeds),
            "extraction_failures": extraction_failures,
            "raw_concepts": len(raw_concepts),
            "rejected_concepts": sum(1 for v in quality.values() if not v.kept),
            "review_flagged_concepts": sum(1 for v in quality.values() if v.review),
            "clusters": len(clusters),
            "synthetic_representatives": sum(1 for c in final_concepts if c.is_synthetic),
            "knowledge_base_size": len(final_concepts),
            "usage": item_usage,
        })

    # -- stage: graph ----------------------------------------------------------

    def cmd_graph(self) -> None:
        """Build the co-occurrence graph and enumerate all combination kinds."""
        config = self.config
        seeds = load_seed_corpus(self.paths.file("seeds_enriched"))
        concepts = load_concepts(self.paths.file("knowledge_base"))
        rep_ids = {c.id for c in concepts if c.status == "representative"}
        if not rep_ids:
            raise ValidationError("knowledge base is empty; run extract first")

        g = graphmod.build_graph(
            [(s.id, s.concept_ids) for s in seeds], all_concept_ids=rep_ids
        )
        write_jsonl_atomic(
            self.paths.file("graph_edges"),
            [{"a": a, "b": b, "weight": w} for a, b, w in g.edges()],
        )

        params = config.graph_params
        hubs = graphmod.identify_hubs(g, float(params["hub_fraction"]))
        one_hop = graphmod.enumerate_one_hop(g)
        two_hop = graphmod.enumerate_two_hop(g)
        three_hop = graphmod.enumerate_three_hop(
            g, hubs, min_weight=float(params["three_hop_min_weight"])
        )
        cap = params.get("community_cap")
        communities = graphmod.enumerate_communities(
            g, sizes=params.get("community_sizes", (3, 4)),
            cap=int(cap) if cap is not None else None,
        )
        all_combos = one_hop + two_hop + three_hop + communities
        budget = params.get("combination_budget")
        sampled = graphmod.sample_combinations(
            all_combos, None if budget is None else int(budget), config.random_seed
        )
        write_jsonl_atomic(
            self.paths.file("combinations"), [c.to_record() for c in sampled]
        )

        kind_counts: dict[str, int] = {}
        for combo in sampled:
            kind_counts[combo.kind] = kind_counts.get(combo.kind, 0) + 1
        capped = 0
        if cap is not None:
            # Record how many cliques the cap removed (recomputed uncapped).
            uncapped = graphmod.enumerate_communities(
                g, sizes=params.get("community_sizes", (3, 4)), cap=None
            )
            capped = len(uncapped) - len(communities)
        self._write_stats("graph", {
            "nodes": g.node_count(),
            "edges": g.edge_count(),
            "hubs": sorted(hubs.hub_ids),
            "hub_min_degree": hubs.min_degree_achieved,
            "enumerated": {
                "one_hop": len(one_hop),
                "two_hop": len(two_hop),
                "three_hop": len(three_hop),
                "community": len(communities),
            },
            "community_cap_truncated": capped,
            "sampled_total": len(sampled),
            "sampled_by_kind": kind_counts,
            "usage": {"input_tokens": 0, "output_tokens": 0, "calls": 0},
        })

    # -- stage: synthesize -------------------------------------------------------

    def cmd_synthesize(self) -> None:
        """Generate questions, gate them through the judge panel, route
        accepted ones to a solver, and apply the unanimous-vote rule."""
        config = self.config
        config.require_roles("synthesize")
        panel = JudgePanel(judges=config.judges)
        templates = synthesis.load_templates(config.templates_dir)
        concepts = load_concepts(self.paths.file("knowledge_base"))
        concept_texts = {c.id: c.text for c in concepts}
        combos = [
            graphmod.ConceptCombination.from_record(rec)
            for _, rec in read_jsonl(self.paths.file("combinations"))
        ]
        generator = config.backends["generator"]
        rater = config.backends["rater"]
        solvers = {
            "solver_small": config.backends["solver_small"],
            "solver_large": config.backends["solver_large"],
        }
        threshold = float(config.thresholds["problem_accept"])

        def generate_task(combo: graphmod.ConceptCombination) -> dict:
            try:
                question = synthesis.generate_problem(
                    combo, generator, self.client, templates, concept_texts
                )
            except Exception as exc:
                return {"failed": f"{type(exc).__name__}: {exc}"}
            return {"question": question}

        combo_work = [(c.combo_id, c) for c in combos]
        generated = self._run_checkpointed("synthesize.generate", combo_work, generate_task)

        # Serialized dedup reduction in combination order: a question's first
        # occurrence wins, later exact duplicates are dropped.
        deduper = synthesis.QuestionDeduper()
        survivors: list[graphmod.ConceptCombination] = []
        questions: dict[str, str] = {}
        generation_failures = 0
        for combo in combos:
            rec = generated[combo.combo_id]
            if "failed" in rec:
                generation_failures += 1
                continue
            if not deduper.admit(rec["question"]):
                continue
            survivors.append(combo)
            questions[combo.combo_id] = rec["question"]

        def evaluate_task(combo: graphmod.ConceptCombination) -> dict:
            question = questions[combo.combo_id]
            item = SynthesizedItem(
                id="item-" + synthesis.QuestionDeduper.canonical_hash(
                    combo.combo_id + "\x1f" + question
                ),
                combination={
                    "kind": combo.kind,
                    "concept_ids": list(combo.concept_ids),
                    "weight": combo.weight,
                },
                question=question,
            )
            texts = [concept_texts[c] for c in combo.concept_ids]
            scores, review = evaluation.score_problem(
                question, combo, texts, panel, self.client
            )
            item.problem_scores = scores
            item.flags.extend(sorted(f"judge_unparseable:{j}" for j in review))
            weighted, accepted = evaluation.weighted_problem_verdict(
                scores, panel, threshold
            )
            item.weighted_score = weighted
            item.advance_status("problem_accepted" if accepted else "problem_rejected")
            if accepted:
                rating = synthesis.rate_difficulty(question, rater, self.client)
                item.difficulty = rating.level
                solver = synthesis.route_solver(rating.level, solvers)
                try:
                    item.solution = synthesis.generate_solution(
                        question, solver, self.client
                    )
                except Exception as exc:
                    item.flags.append(f"solution_failed: {type(exc).__name__}")
                if item.solution:
                    votes, vote_review = evaluation.vote_solution(
                        question, item.solution, panel, self.client
                    )
                    item.solution_votes = votes
                    item.flags.extend(
                        sorted(f"vote_unparseable:{j}" for j in vote_review)
                    )
                    item.advance_status(
                        "solution_accepted" if evaluation.veto_decision(votes)
                        else "solution_rejected"
                    )
            item.validate()
            return {"item": item.to_record()}

        evaluated = self._run_checkpointed(
            "synthesize.evaluate", [(c.combo_id, c) for c in survivors], evaluate_task
        )
        items = []
        evaluation_failures = 0
        for combo in survivors:
            rec = evaluated[combo.combo_id]
            if "failed" in rec:
                evaluation_failures += 1
                continue
            items.append(rec["item"])
        write_jsonl_atomic(self.paths.file("items"), items)

        status_counts: dict[str, int] = {}
        for item in items:
            status_counts[item["status"]] = status_counts.get(item["status"], 0) + 1
        usage = _sum_usage(list(generated.values()) + list(evaluated.values()))
        self._write_stats("synthesize", {
            "combinations": len(combos),
            "generation_failures": generation_failures,
            "duplicates_dropped": deduper.dropped,
            "evaluation_failures": evaluation_failures,
            "items": len(items),
            "status_counts": status_counts,
            "usage": usage,
        })

    # -- stage: analyze ----------------------------------------------------------

    def cmd_analyze(self) -> None:
        """Compute the run report: scale, novelty, similarity, cost,
        decontamination, adherence, and stage counters."""
        config = self.config
        config.require_roles("analyze")
        seeds = load_seed_corpus(self.paths.file("seeds_enriched"))
        items = [rec for _, rec in read_jsonl(self.paths.file("items"))]
        params = config.analytics_params
        embedder = config.backends["embedder"]
        extractor = config.backends["extractor"]

        accepted = [i for i in items if i["status"] == "solution_accepted"]
        scored = [i for i in items if i.get("weighted_score") is not None]
        problem_accepted = [
            i for i in items
            if i["status"] in ("problem_accepted", "solution_accepted", "solution_rejected")
        ]

        sections: dict[str, Any] = {}
        sections["seed_count"] = len(seeds)
        sections["expansion"] = {
            "seeds": len(seeds),
            "synthesized": len(accepted),
            "ratio": analytics.expansion_ratio(len(accepted), len(seeds)) if seeds else None,
        }

        kind_counts: dict[str, int] = {}
        quality_by_kind: dict[str, dict[str, float]] = {}
        for item in scored:
            kind = item["combination"]["kind"]
            kind_counts[kind] = kind_counts.get(kind, 0) + 1
            bucket = quality_by_kind.setdefault(kind, {"count": 0, "sum": 0.0})
            bucket["count"] += 1
            bucket["sum"] += item["weighted_score"]
        sections["combination_kinds"] = kind_counts
        sections["problem_quality_by_kind"] = {
            kind: {
                "count": int(b["count"]),
                "mean_weighted_score": b["sum"] / b["count"],
            }
            for kind, b in sorted(quality_by_kind.items())
        }
        sections["acceptance_rates"] = {
            "problem": len(problem_accepted) / len(scored) if scored else None,
            "solution": (
                len(accepted) / len(problem_accepted) if problem_accepted else None
            ),
        }

        combos = [
            graphmod.ConceptCombination.from_record(i["combination"]) for i in items
        ]
        seed_sets = [set(s.concept_ids) for s in seeds]
        sections["novelty"] = {
            "rate": analytics.novelty_rate(combos, seed_sets) if combos else None,
            "items_considered": len(combos),
        }

        sim_section = None
        accepted_questions = [i["question"] for i in accepted]
        if accepted_questions and seeds:
            report = analytics.similarity_distribution(
                accepted_questions,
                [s.question for s in seeds],
                embedder,
                self.client,
                bin_width=float(params.get("similarity_bin_width", 0.05)),
            )
            sim_section = {
                "bin_edges": report.bin_edges,
                "histogram": report.histogram,
                "cdf": report.cdf,
                "mean_max_cosine": (
                    sum(report.per_item_max_cosine) / len(report.per_item_max_cosine)
                ),
            }
            _write_histogram_csv(self.paths.file("similarity_histogram"), report)
        sections["similarity"] = sim_section

        cost_cfg = config.cost_params
        if cost_cfg:
            model = analytics.CostModel(**{
                k: v for k, v in cost_cfg.items()
                if k in analytics.CostModel.__dataclass_fields__
            })
            sections["cost"] = {
                "mode": model.mode,
                "per_sample": analytics.cost_report(
                    model,
                    tokens_in_per_sample=float(cost_cfg.get("tokens_in_per_sample", 0)),
                    tokens_out_per_sample=float(cost_cfg.get("tokens_out_per_sample", 0)),
                ),
            }

        reference = params.get("decontamination_reference")
        if reference and accepted_questions:
            reference_texts = _load_reference_texts(Path(reference))
            decon = analytics.ngram_overlap(
                accepted_questions, reference_texts,
                ns=[int(n) for n in params["ngram_sizes"]],
            )
            sections["decontamination"] = decon.to_record()

        sample_size = int(params.get("adherence_sample", 0) or 0)
        if sample_size > 0 and accepted:
            concepts = load_concepts(self.paths.file("knowledge_base"))
            texts_by_id = {c.id: c.text for c in concepts}
            chosen = accepted[:sample_size]
            pairs = [
                (
                    [texts_by_id[c] for c in i["combination"]["concept_ids"]],
                    i["question"],
                )
                for i in chosen
            ]

            def extract_fn(question: str) -> list[str]:
                probe = SeedExample(id="adherence-probe", question=question, solution="")
                return extraction.extract_concepts(probe, extractor, self.client)

            tolerance = params.get("adherence_tolerance")
            embed_fn = None
            if tolerance is not None:
                embed_fn = lambda texts: self.client.embed(embedder, texts)
            adherence = analytics.adherence_report(
                pairs, extract_fn,
                matcher_tolerance=float(tolerance) if tolerance is not None else None,
                embed_fn=embed_fn,
            )
            sections["adherence"] = adherence.to_record()

        sections["stage_counters"] = {
            stage: _load_stats(self.paths.stats(stage))
            for stage in ("extract", "graph", "synthesize")
        }
        sections["backend_usage"] = _merge_usage(*[
            (_load_stats(self.paths.stats(stage)) or {}).get(
                "usage", {"input_tokens": 0, "output_tokens": 0, "calls": 0}
            )
            for stage in ("extract", "graph", "synthesize")
        ])

        report = analytics.run_report(sections)
        write_atomic(
            self.paths.file("report"),
            json.dumps(report, sort_keys=True, indent=2) + "\n",
        )

    # -- all stages ---------------------------------------------------------------

    def cmd_run_all(self) -> None:
        """All four stages in order; a stage failure halts before the next
        stage and leaves its checkpoint in place."""
        self.cmd_extract()
        self.cmd_graph()
        self.cmd_synthesize()
        self.cmd_analyze()


def _read_cache_tolerant(path: Path) -> list[dict]:
    """Read a results cache, skipping torn lines.

    A hard kill can truncate the final append; such a record was never
    checkpointed, so dropping it is exactly the right recovery.
    """
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                logger.warning("skipping torn cache line in %s", path)
    return records


def _sum_usage(records: list[dict]) -> dict:
    total = {"input_tokens": 0, "output_tokens": 0, "calls": 0}
    for rec in records:
        usage = rec.get("usage") or {}
        for key in total:
            total[key] += int(usage.get(key, 0))
    return total


def _merge_usage(*usages: dict) -> dict:
    total = {"input_tokens": 0, "output_tokens": 0, "calls": 0}
    for usage in usages:
        for key in total:
            total[key] += int(usage.get(key, 0))
    return total


def _load_stats(path: Path) -> dict | None:
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _load_reference_texts(path: Path) -> list[str]:
    """Reference corpus for decontamination: JSONL with a question/text
    field, or a plain text file with one document per line."""
    if not path.exists():
        raise ValidationError(f"decontamination reference {path} does not exist")
    texts = []
    if path.suffix == ".jsonl":
        for lineno, rec in read_jsonl(path):
            value = rec.get("question", rec.get("text"))
            if not isinstance(value, str):
                raise ValidationError(
                    f"{path}:{lineno}: reference record needs a 'question' or 'text' field"
                )
            texts.append(value)
    else:
        texts = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    return texts


def _write_histogram_csv(path: Path, report: analytics.SimilarityReport) -> None:
    lines = ["bin_start,bin_end,count,cdf"]
    for i, count in enumerate(report.histogram):
        lines.append(
            f"{report.bin_edges[i]:.2f},{report.bin_edges[i + 1]:.2f},{count},{report.cdf[i]:.6f}"
        )
    write_atomic(path, "\n".join(lines) + "\n")


def run_stage(config: RunConfig, stage: str, client: BackendClient | None = None) -> None:
    """Run one stage (or 'run-all') under the run-directory lock."""
    run = PipelineRun(config, client=client)
    commands = {
        "extract": run.cmd_extract,
        "graph": run.cmd_graph,
        "synthesize": run.cmd_synthesize,
        "analyze": run.cmd_analyze,
        "run-all": run.cmd_run_all,
    }
    if stage not in commands:
        raise ConfigurationError(f"unknown stage {stage!r}")
    run.paths.run_dir.mkdir(parents=True, exist_ok=True)
    with RunLock(run.paths.lock()):
        commands[stage]()
