"""Persistent data model: corpus records, knowledge-base records, synthesized
items, and atomic stage checkpoints.

Everything on disk is line-delimited JSON (one entity per line) so stages can
stream large corpora instead of loading them whole. Records without an id get
a content-addressed one, which keeps deduplication stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._util import (
    canonical_json,
    canonicalize,
    content_hash,
    read_jsonl,
    write_atomic,
    write_jsonl_atomic,
)
from .errors import CheckpointError, CorpusError

MAX_CONCEPTS_PER_SEED = 5

CONCEPT_STATUSES = ("raw", "rejected", "clustered", "representative")
SYNTHETIC_PROVENANCE = "synthetic-summary"

ITEM_STATUSES = (
    "generated",
    "problem_accepted",
    "problem_rejected",
    "solution_accepted",
    "solution_rejected",
)
# Monotone transition map; terminal statuses map to the empty tuple.
_ITEM_NEXT = {
    "generated": ("problem_accepted", "problem_rejected"),
    "problem_accepted": ("solution_accepted", "solution_rejected"),
    "problem_rejected": (),
    "solution_accepted": (),
    "solution_rejected": (),
}

DIFFICULTY_LEVELS = ("low", "medium", "high")


def seed_id_for(question: str, solution: str) -> str:
    """Content-addressed id for a seed lacking an explicit one."""
    return "seed-" + content_hash(canonicalize(question), canonicalize(solution))[:12]


def concept_id_for(text: str) -> str:
    """Content-addressed id for a concept phrase (canonicalized)."""
    return "kc-" + content_hash(canonicalize(text))[:12]


@dataclass
class SeedExample:
    """One seed question/solution pair plus the concept ids extracted for it."""

    id: str
    question: str
    solution: str
    concept_ids: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not self.id:
            raise CorpusError("seed id must be nonempty")
        if not self.question or not self.question.strip():
            raise CorpusError(f"seed {self.id!r}: field 'question' must be nonempty")
        if len(self.concept_ids) > MAX_CONCEPTS_PER_SEED:
            raise CorpusError(
                f"seed {self.id!r}: concept_ids has {len(self.concept_ids)} entries, "
                f"limit is {MAX_CONCEPTS_PER_SEED}"
            )
        if len(set(self.concept_ids)) != len(self.concept_ids):
            raise CorpusError(f"seed {self.id!r}: concept_ids contains duplicates")

    def to_record(self) -> dict:
        rec = {"id": self.id, "question": self.question, "solution": self.solution}
        if self.concept_ids:
            rec["concept_ids"] = list(self.concept_ids)
        return rec

    @classmethod
    def from_record(cls, rec: dict, line: int | None = None) -> "SeedExample":
        _require_fields(rec, {"question": str, "solution": str}, line)
        seed_id = rec.get("id")
        if seed_id is not None and not isinstance(seed_id, str):
            raise CorpusError(f"line {line}: field 'id' must be a string", line)
        if not seed_id:
            seed_id = seed_id_for(rec["question"], rec["solution"])
        concept_ids = rec.get("concept_ids", [])
        if not isinstance(concept_ids, list) or not all(isinstance(c, str) for c in concept_ids):
            raise CorpusError(f"line {line}: field 'concept_ids' must be a list of strings", line)
        seed = cls(id=seed_id, question=rec["question"], solution=rec["solution"],
                   concept_ids=list(concept_ids))
        try:
            seed.validate()
        except CorpusError as exc:
            raise CorpusError(f"line {line}: {exc}", line) from exc
        return seed


@dataclass
class KeyConcept:
    """A canonical concept node with provenance and quality status."""

    id: str
    text: str
    status: str = "raw"
    cluster_id: str | None = None
    provenance: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.status not in CONCEPT_STATUSES:
            raise CorpusError(f"concept {self.id!r}: unknown status {self.status!r}")
        if not self.text or not self.text.strip():
            raise CorpusError(f"concept {self.id!r}: empty text")
        if self.status == "representative" and not self.cluster_id:
            raise CorpusError(f"concept {self.id!r}: representative without cluster_id")

    @property
    def is_synthetic(self) -> bool:
        return self.provenance == [SYNTHETIC_PROVENANCE]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "status": self.status,
            "cluster_id": self.cluster_id,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_record(cls, rec: dict, line: int | None = None) -> "KeyConcept":
        _require_fields(rec, {"id": str, "text": str, "status": str}, line)
        cluster_id = rec.get("cluster_id")
        if cluster_id is not None and not isinstance(cluster_id, str):
            raise CorpusError(f"line {line}: field 'cluster_id' must be a string or null", line)
        provenance = rec.get("provenance", [])
        if not isinstance(provenance, list):
            raise CorpusError(f"line {line}: field 'provenance' must be a list", line)
        concept = cls(id=rec["id"], text=rec["text"], status=rec["status"],
                      cluster_id=cluster_id, provenance=list(provenance))
        try:
            concept.validate()
        except CorpusError as exc:
            raise CorpusError(f"line {line}: {exc}", line) from exc
        return concept


@dataclass
class SynthesizedItem:
    """A generated question with its evaluation trail.

    ``combination`` holds the originating concept combination as a plain
    record ({kind, concept_ids, weight}) so items are self-describing.
    """

    id: str
    combination: dict
    question: str
    status: str = "generated"
    difficulty: str | None = None
    solution: str | None = None
    problem_scores: dict[str, float] = field(default_factory=dict)
    weighted_score: float | None = None
    solution_votes: dict[str, int] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.status not in ITEM_STATUSES:
            raise CorpusError(f"item {self.id!r}: unknown status {self.status!r}")
        if (self.weighted_score is not None) != bool(self.problem_scores):
            raise CorpusError(
                f"item {self.id!r}: weighted_score must be present exactly when "
                "problem_scores is nonempty"
            )
        if self.solution_votes and self.status == "generated":
            raise CorpusError(
                f"item {self.id!r}: solution_votes present before problem acceptance"
            )
        if self.solution_votes and self.status == "problem_rejected":
            raise CorpusError(
                f"item {self.id!r}: solution_votes present on a rejected problem"
            )
        if self.difficulty is not None and self.difficulty not in DIFFICULTY_LEVELS:
            raise CorpusError(f"item {self.id!r}: unknown difficulty {self.difficulty!r}")

    def advance_status(self, new_status: str) -> None:
        """Move to ``new_status``; transitions are monotone and one-way."""
        allowed = _ITEM_NEXT.get(self.status, ())
        if new_status not in allowed:
            raise CorpusError(
                f"item {self.id!r}: illegal status transition "
                f"{self.status!r} -> {new_status!r}"
            )
        self.status = new_status

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "combination": self.combination,
            "question": self.question,
            "status": self.status,
            "difficulty": self.difficulty,
            "solution": self.solution,
            "problem_scores": dict(self.problem_scores),
            "weighted_score": self.weighted_score,
            "solution_votes": dict(self.solution_votes),
            "flags": list(self.flags),
        }

    @classmethod
    def from_record(cls, rec: dict, line: int | None = None) -> "SynthesizedItem":
        _require_fields(rec, {"id": str, "question": str, "status": str}, line)
        combination = rec.get("combination")
        if not isinstance(combination, dict):
            raise CorpusError(f"line {line}: field 'combination' must be an object", line)
        item = cls(
            id=rec["id"],
            combination=combination,
            question=rec["question"],
            status=rec["status"],
            difficulty=rec.get("difficulty"),
            solution=rec.get("solution"),
            problem_scores={k: float(v) for k, v in rec.get("problem_scores", {}).items()},
            weighted_score=rec.get("weighted_score"),
            solution_votes={k: int(v) for k, v in rec.get("solution_votes", {}).items()},
            flags=list(rec.get("flags", [])),
        )
        try:
            item.validate()
        except CorpusError as exc:
            raise CorpusError(f"line {line}: {exc}", line) from exc
        return item


@dataclass
class StageCheckpoint:
    """Progress marker for one pipeline stage, keyed by completed item ids."""

    stage_name: str
    completed_item_ids: set[str] = field(default_factory=set)
    config_fingerprint: str = ""

    def to_record(self) -> dict:
        return {
            "stage_name": self.stage_name,
            "completed_item_ids": sorted(self.completed_item_ids),
            "config_fingerprint": self.config_fingerprint,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "StageCheckpoint":
        if not isinstance(rec.get("stage_name"), str):
            raise CheckpointError("checkpoint missing 'stage_name'")
        ids = rec.get("completed_item_ids", [])
        if not isinstance(ids, list):
            raise CheckpointError("checkpoint 'completed_item_ids' must be a list")
        return cls(
            stage_name=rec["stage_name"],
            completed_item_ids=set(ids),
            config_fingerprint=rec.get("config_fingerprint", ""),
        )


def _require_fields(rec: dict, fields: dict[str, type], line: int | None) -> None:
    if not isinstance(rec, dict):
        raise CorpusError(f"line {line}: record must be a JSON object", line)
    for name, typ in fields.items():
        if name not in rec:
            raise CorpusError(f"line {line}: missing required field {name!r}", line)
        if not isinstance(rec[name], typ):
            raise CorpusError(
                f"line {line}: field {name!r} must be of type {typ.__name__}", line
            )


def load_seed_corpus(path: str | Path) -> list[SeedExample]:
    """Load and validate a seed corpus file (one JSON object per line).

    Records keep file order. Ids default to a content hash when absent;
    duplicate ids are rejected with both line numbers named.
    """
    try:
        rows = read_jsonl(path)
    except ValueError as exc:
        raise CorpusError(str(exc)) from exc
    seeds: list[SeedExample] = []
    seen: dict[str, int] = {}
    for lineno, rec in rows:
        seed = SeedExample.from_record(rec, line=lineno)
        if seed.id in seen:
            raise CorpusError(
                f"duplicate seed id {seed.id!r} on lines {seen[seed.id]} and {lineno}",
                line=lineno,
            )
        seen[seed.id] = lineno
        seeds.append(seed)
    return seeds


def save_seed_corpus(path: str | Path, seeds: Sequence[SeedExample]) -> None:
    write_jsonl_atomic(path, [s.to_record() for s in seeds])


def load_concepts(path: str | Path) -> list[KeyConcept]:
    try:
        rows = read_jsonl(path)
    except ValueError as exc:
        raise CorpusError(str(exc)) from exc
    return [KeyConcept.from_record(rec, line=lineno) for lineno, rec in rows]


def save_concepts(path: str | Path, concepts: Sequence[KeyConcept]) -> None:
    write_jsonl_atomic(path, [c.to_record() for c in concepts])


def load_items(path: str | Path) -> list[SynthesizedItem]:
    try:
        rows = read_jsonl(path)
    except ValueError as exc:
        raise CorpusError(str(exc)) from exc
    return [SynthesizedItem.from_record(rec, line=lineno) for lineno, rec in rows]


def save_items(path: str | Path, items: Sequence[SynthesizedItem]) -> None:
    write_jsonl_atomic(path, [i.to_record() for i in items])


def write_checkpoint(checkpoint: StageCheckpoint, path: str | Path) -> None:
    """Durably persist a checkpoint; the write is atomic (temp then rename)."""
    write_atomic(path, canonical_json(checkpoint.to_record()) + "\n")


def read_checkpoint(path: str | Path) -> StageCheckpoint | None:
    """Read a checkpoint file; returns None when no checkpoint exists."""
    path = Path(path)
    if not path.exists():
        return None
    import json

    try:
        rec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}") from exc
    return StageCheckpoint.from_record(rec)


def select_resumable_work(
    all_ids: Iterable[str],
    checkpoint: StageCheckpoint | None,
    current_fingerprint: str,
) -> list[str]:
    """Work ids still pending under ``checkpoint``, in input order.

    A checkpoint written under a different configuration is refused: stale
    partial results cannot be mixed with new parameters, so the caller must
    restart the stage from scratch (delete the run's checkpoints directory
    or use a fresh run directory).
    """
    ordered = list(all_ids)
    if checkpoint is None:
        return ordered
    if checkpoint.config_fingerprint != current_fingerprint:
        raise CheckpointError(
            f"checkpoint for stage {checkpoint.stage_name!r} was written under a "
            "different configuration; resumption refused. Start a full restart "
            "(remove the stage checkpoint or use a new run directory)."
        )
    done = checkpoint.completed_item_ids
    return [i for i in ordered if i not in done]
