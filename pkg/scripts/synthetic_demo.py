#!/usr/bin/env python3
"""End-to-end demo on a synthetic asset tree with scripted mock backends.

Builds a small objaverse-style source tree with pre-rendered views, runs
manifest ingestion, render-job planning, the full annotation pipeline, and
the corpus/retention metrics, printing each artifact as it lands. No model
endpoints are needed; everything runs against deterministic mocks.

Usage: python scripts/synthetic_demo.py [--assets N] [--workdir DIR]
"""

from __future__ import annotations

import argparse
import json
import random
import shutil
import tempfile
from pathlib import Path

from levelcap.backends import ScriptedMockBackend
from levelcap.jsonl import iter_jsonl
from levelcap.metrics import corpus_report, retention_report
from levelcap.orchestrator import PipelineConfig, run_pipeline
from levelcap.records import Dataset, LevelSet, build_manifest
from levelcap.renderplan import emit_render_jobs

NOUNS = ("lamp", "chair", "drone", "statue", "teapot", "robot", "castle", "violin")
COLORS = ("red", "blue", "olive", "ivory", "teal", "bronze")
MATERIALS = ("oak", "ceramic", "brushed steel", "woven rattan", "matte plastic")


def build_source_tree(root: Path, n_assets: int, seed: int) -> Path:
    rng = random.Random(seed)
    src = root / "source"
    for i in range(n_assets):
        asset_id = f"demo-{i:03d}"
        (src / f"{asset_id}.glb").parent.mkdir(parents=True, exist_ok=True)
        (src / f"{asset_id}.glb").write_bytes(b"glb")
        if i % 4 != 0:  # every fourth asset ships without metadata
            meta = {
                "name": f"{rng.choice(COLORS)} {rng.choice(NOUNS)}",
                "tags": [rng.choice(NOUNS), rng.choice(MATERIALS)],
                "description": f"a {rng.choice(MATERIALS)} {rng.choice(NOUNS)}",
            }
            meta_path = src / "metadata" / f"{asset_id}.json"
            meta_path.parent.mkdir(parents=True, exist_ok=True)
            meta_path.write_text(json.dumps(meta))
        for tag in ("front", "back", "left", "right"):
            view = root / "renders" / asset_id / f"{tag}.png"
            view.parent.mkdir(parents=True, exist_ok=True)
            view.write_bytes(b"\x89PNG demo")
    return src


def demo_backends(seed: int) -> dict[str, ScriptedMockBackend]:
    rng = random.Random(seed)

    def filter_meta(request):
        lines = [l for l in request.user_prompt.splitlines() if l.startswith("name:")]
        return lines[0].removeprefix("name:").strip() if lines else "NONE"

    def dense(request):
        subject = "object"
        for line in request.user_prompt.splitlines():
            if line and not line.endswith(":") and "Curator notes" not in line:
                subject = line.strip()
                break
        noun = rng.choice(NOUNS)
        return (
            f"Structure: a {subject or noun} with a main body and two components.\n"
            f"Geometry: {rng.choice(('rounded', 'angular', 'slender'))} silhouette with "
            "one vertical symmetry axis and balanced proportions.\n"
            f"Surface: {rng.choice(MATERIALS)} texture, slightly {rng.choice(('rough', 'glossy'))}.\n"
            f"Colors: mostly {rng.choice(COLORS)} with {rng.choice(COLORS)} accents.\n"
            "Environment: presented alone on a neutral backdrop."
        )

    def levels(request):
        words = [w for w in request.user_prompt.split() if w.isalpha()]
        rng.shuffle(words)

        def take(n):
            picked = [words[i % len(words)] for i in range(n)]
            return " ".join(picked)

        return "\n".join(
            f"LEVEL{i}: {take(n)}"
            for i, n in ((1, 170), (2, 120), (3, 75), (4, 28), (5, 14))
        )

    def ethical(request):
        return "\n".join(
            l for l in request.user_prompt.splitlines() if l.startswith("LEVEL")
        )

    return {
        "metadata_filter": ScriptedMockBackend(default=filter_meta),
        "dense_description": ScriptedMockBackend(default=dense),
        "level_elaboration": ScriptedMockBackend(default=levels),
        "ethical_filter": ScriptedMockBackend(default=ethical),
    }


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--assets", type=int, default=24)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args()

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="levelcap-demo-"))
    print(f"workdir: {workdir}")

    src = build_source_tree(workdir, args.assets, args.seed)
    manifest = build_manifest(src, Dataset.OBJAVERSE, views_root=workdir / "renders")
    print(f"manifest: {len(manifest)} assets")

    jobs = emit_render_jobs(manifest, output_root=str(workdir / "renders"))
    print(f"render plan: {len(jobs)} jobs (pre-rendered here, adapter not invoked)")

    config = PipelineConfig(
        state_dir=workdir / "state",
        output_path=workdir / "annotations.jsonl",
        concurrency=4,
    )
    report = run_pipeline(manifest, demo_backends(args.seed), config)
    print(
        f"pipeline: done={report.done} failed={report.failed} "
        f"rejected={report.rejected} wall={report.wall_seconds:.2f}s"
    )

    records = list(iter_jsonl(config.output_path))
    level4 = [r["level4"] for r in records]
    print("\ncorpus metrics over level-4 captions:")
    print(json.dumps(corpus_report(level4).to_dict(), indent=2))

    levelsets = [LevelSet.from_dict(r) for r in records]
    print("\nsemantic retention between adjacent levels (mock embeddings):")
    retention = retention_report(levelsets, ScriptedMockBackend())
    print(json.dumps(retention.to_dict(), indent=2))

    if not args.workdir:
        shutil.rmtree(workdir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
