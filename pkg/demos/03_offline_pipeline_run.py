"""Run the whole pipeline offline against the deterministic mock backend.

The mock extractor reads concepts from [bracketed] spans in the seed
questions, the mock judges are configured to score problems by combination
kind, and everything else is a pure function of the run's seed, so this
script prints the same numbers every time it runs.
"""

import json
import tempfile
from pathlib import Path

from graphsynth.config import parse_config
from graphsynth.pipeline import run_stage

SEEDS = [
    {"question": "Link [Triangle area] and [Base times height] in one problem.",
     "solution": "Area formula."},
    {"question": "Link [Base times height] and [Parallelogram area] carefully.",
     "solution": "Shared formula."},
    {"question": "Link [Parallelogram area] and [Vector cross product] at once.",
     "solution": "Geometry meets algebra."},
    {"question": "Use [Triangle area], [Base times height] and [Heron's formula].",
     "solution": "Three routes to one area."},
]

workdir = Path(tempfile.mkdtemp(prefix="graphsynth-demo-"))
corpus = workdir / "seeds.jsonl"
corpus.write_text("".join(json.dumps(s) + "\n" for s in SEEDS))

config = parse_config({
    "run_dir": str(workdir / "run"),
    "seed_corpus": str(corpus),
    "random_seed": 42,
    "graph": {"hub_fraction": 1.0, "three_hop_min_weight": 1},
    "analytics": {"adherence_sample": 10},
    "backends": {role: {"endpoint": "mock"} for role in (
        "extractor", "kb_judge", "generator", "rater",
        "solver_small", "solver_large", "embedder")},
    "judges": [
        {"backend_id": "judge-a", "endpoint": "mock", "judge_weight": 0.5},
        {"backend_id": "judge-b", "endpoint": "mock", "judge_weight": 0.3},
        {"backend_id": "judge-c", "endpoint": "mock", "judge_weight": 0.2},
    ],
    "mock": {"seed": 42, "behaviors": {
        "problem_score_by_kind": {
            "one_hop": 0.94, "two_hop": 0.72, "three_hop": 0.62, "community": 0.88,
        },
    }},
})

run_stage(config, "run-all")

run_dir = config.run_dir
print("run directory:", run_dir)
print("\nknowledge base:")
for line in (run_dir / "knowledge_base.jsonl").read_text().splitlines():
    rec = json.loads(line)
    print(f"  [{rec['status']:>14s}] {rec['text']}")

print("\nitems:")
for line in (run_dir / "items.jsonl").read_text().splitlines():
    rec = json.loads(line)
    print(f"  {rec['combination']['kind']:>9s} score={rec['weighted_score']:.2f}"
          f" -> {rec['status']}")

report = json.loads((run_dir / "report.json").read_text())
print("\nreport highlights:")
print("  expansion:", report["expansion"])
print("  quality by kind:", {
    k: round(v["mean_weighted_score"], 2)
    for k, v in report["problem_quality_by_kind"].items()
})
print("  novelty rate:", report["novelty"]["rate"])
print("  backend calls:", report["backend_usage"]["calls"])
