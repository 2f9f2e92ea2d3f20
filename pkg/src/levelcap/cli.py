"""Command-line entry points for the captioning pipeline and its tooling."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import backends as backends_mod
from .backends import AuditLog, build_backend, CompletionRequest
from .evalsuite import load_tasks, run_accuracy_judging, run_alignment_judging, RatingsStore
from .jsonl import iter_jsonl, write_jsonl
from .metrics import corpus_report, retention_report
from .orchestrator import PipelineConfig, estimate_cost, resume, run_pipeline
from .prompting import load_templates
from .records import Dataset, LevelSet, build_manifest, read_manifest, write_manifest
from .renderplan import emit_render_jobs, write_render_jobs

_TRANSLATE_SYSTEM = (
    "You translate product listing text into English. Answer with the translation only."
)


def _load_config(path: str) -> dict:
    return backends_mod.load_backend_config(path)


def _build_backends(config: dict, audit_path: str | None = None) -> dict:
    audit = AuditLog(audit_path) if audit_path else None
    profiles = backends_mod.load_profiles(config)
    built = {}
    for name, profile in profiles.items():
        script = config["profiles"][name].get("script")
        built[name] = build_backend(profile, script=script, audit_log=audit)
    return built


def _pipeline_config(args, config: dict) -> PipelineConfig:
    return PipelineConfig(
        state_dir=Path(args.state_dir),
        output_path=Path(args.out),
        concurrency=args.concurrency or config.get("concurrency", 4),
        max_attempts=config.get("max_attempts", 3),
        prompt_dir=Path(config["prompt_dir"]) if config.get("prompt_dir") else None,
    )


def cmd_ingest(args) -> int:
    translate = None
    if args.config:
        config = _load_config(args.config)
        built = _build_backends(config)
        if "translation" in built:
            backend = built["translation"]

            def translate(text: str) -> str:
                return backend.complete(
                    CompletionRequest(
                        system_prompt=_TRANSLATE_SYSTEM, user_prompt=text, profile="translation"
                    )
                )

    manifest = build_manifest(
        args.source, Dataset(args.dataset), views_root=args.views_dir, translate=translate
    )
    write_manifest(args.out, manifest)
    print(f"wrote {len(manifest)} records to {args.out}")
    return 0


def cmd_render_plan(args) -> int:
    manifest = read_manifest(args.manifest)
    jobs = emit_render_jobs(manifest, output_root=args.output_root)
    write_render_jobs(args.out, jobs)
    print(f"wrote {len(jobs)} render jobs to {args.out}")
    return 0


def _run_batch(args, runner) -> int:
    config = _load_config(args.config)
    built = _build_backends(config, audit_path=args.audit_log)
    report = runner(read_manifest(args.manifest), built, _pipeline_config(args, config))
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.failed == 0 else 1


def cmd_annotate(args) -> int:
    return _run_batch(args, run_pipeline)


def cmd_resume(args) -> int:
    return _run_batch(args, resume)


def _read_captions(path: Path, fields: str) -> list[str]:
    if path.suffix == ".jsonl":
        wanted = fields.split(",")
        captions = []
        for row in iter_jsonl(path):
            for key in wanted:
                if row.get(key):
                    captions.append(row[key])
        return captions
    return [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def cmd_eval(args) -> int:
    path = Path(args.input)
    captions = _read_captions(path, args.fields)
    report = {"corpus": corpus_report(captions).to_dict()}
    if args.retention:
        if path.suffix != ".jsonl":
            print("retention analysis needs level-structured JSONL input", file=sys.stderr)
            return 2
        config = _load_config(args.config)
        embed_backend = _build_backends(config).get("embedding")
        if embed_backend is None:
            print("config must define an 'embedding' profile", file=sys.stderr)
            return 2
        levelsets = [
            LevelSet.from_dict(row)
            for row in iter_jsonl(path)
            if all(f"level{i}" in row for i in range(1, 6))
        ]
        report["retention"] = retention_report(levelsets, embed_backend).to_dict()
    output = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    print(output)
    return 0


def cmd_judge(args) -> int:
    config = _load_config(args.config)
    built = _build_backends(config, audit_path=args.audit_log)
    backend = built.get("judge")
    if backend is None:
        print("config must define a 'judge' profile", file=sys.stderr)
        return 2
    templates = load_templates(config.get("prompt_dir"))
    tasks = load_tasks(args.tasks)
    if args.mode == "alignment":
        aggregate, detail = run_alignment_judging(
            tasks["alignment"], backend, templates["judge_alignment"]
        )
    else:
        aggregate, detail = run_accuracy_judging(
            tasks["accuracy"], backend, templates["judge_accuracy"]
        )
    result = {"aggregate": aggregate.to_dict(), "tasks": detail}
    output = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    print(output)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = RatingsStore(load_tasks(args.tasks), args.ratings_log, quota=args.quota)
    app = create_app(store, ui_dir=args.ui_dir, assets_dir=args.assets_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_cost(args) -> int:
    estimate = estimate_cost(args.samples, args.throughput, args.price_low, args.price_high)
    print(json.dumps(estimate.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelcap")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a source dataset into a manifest")
    p.add_argument("--source", required=True)
    p.add_argument("--dataset", required=True, choices=[d.value for d in Dataset])
    p.add_argument("--views-dir", default=None)
    p.add_argument("--config", default=None, help="backend config (for listing translation)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("render-plan", help="emit render jobs for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output-root", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_plan)

    for name, help_text in (
        ("annotate", "run the caption pipeline over a manifest"),
        ("resume", "continue an interrupted batch"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True)
        p.add_argument("--config", required=True)
        p.add_argument("--state-dir", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--concurrency", type=int, default=None)
        p.add_argument("--audit-log", default=None)
        p.set_defaults(func=cmd_annotate if name == "annotate" else cmd_resume)

    p = sub.add_parser("eval", help="lexical and retention metrics over captions")
    p.add_argument("--input", required=True, help="JSONL records or one caption per line")
    p.add_argument("--fields", default="level4", help="comma-separated JSONL caption fields")
    p.add_argument("--retention", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("judge", help="automated judging over a task file")
    p.add_argument("--tasks", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("alignment", "accuracy"), default="alignment")
    p.add_argument("--audit-log", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("serve", help="start the human-rating service")
    p.add_argument("--tasks", required=True)
    p.add_argument("--ratings-log", required=True)
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--assets-dir", default=None)
    p.add_argument("--quota", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("cost", help="days and dollars for a batch")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--throughput", type=float, required=True)
    p.add_argument("--price-low", type=float, required=True)
    p.add_argument("--price-high", type=float, default=None)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
