"""Checkpointed batch execution of the caption pipeline over a manifest.

State is an append-only journal of (asset_id, stage, status, output-hash)
events plus an append-only payload log; current state is a fold over the
journal. Completed stages are never re-executed: their payloads are read
back and hash-verified, and a mismatch restarts the asset from its last
consistent stage. The final annotation store is rendered from state in
manifest order, so an interrupted-then-resumed batch produces byte-identical
output to an uninterrupted one (given deterministic backends and clock).
"""

from __future__ import annotations

import concurrent.futures
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .backends import Backend
from .hashing import fnv1a64_hex
from .jsonl import JsonlAppender, dumps, iter_jsonl, write_jsonl
from .prompting import PromptTemplate, load_templates
from .records import AssetRecord, LevelSet, validate_record, extract_metadata
from .stages import (
    BudgetReport,
    DenseDescription,
    FilteredMetadata,
    check_budgets,
    dense_describe,
    elaborate_levels,
    ethical_filter,
    filter_metadata,
)

logger = logging.getLogger(__name__)

STAGE_METADATA = "metadata_filter"
STAGE_DENSE = "dense_description"
STAGE_LEVELS = "level_elaboration"
STAGE_ETHICAL = "ethical_filter"
STAGE_VALIDATE = "validation"

#: Stage order within one asset; each stage consumes its predecessors.
STAGES = (STAGE_METADATA, STAGE_DENSE, STAGE_LEVELS, STAGE_ETHICAL, STAGE_VALIDATE)

#: Stages that require a backend profile.
BACKEND_STAGES = (STAGE_METADATA, STAGE_DENSE, STAGE_LEVELS, STAGE_ETHICAL)

JOURNAL_FILE = "journal.jsonl"
OUTPUTS_FILE = "outputs.jsonl"


class ConfigError(Exception):
    pass


class StoreError(Exception):
    pass


class ZeroThroughput(Exception):
    pass


@dataclass
class CostEstimate:
    days: float
    dollars_low: float
    dollars_high: float

    def to_dict(self) -> dict:
        return {
            "days": self.days,
            "dollars_low": self.dollars_low,
            "dollars_high": self.dollars_high,
        }


def estimate_cost(
    n_samples: int,
    throughput_per_day: float,
    price_per_1k_low: float,
    price_per_1k_high: float | None = None,
) -> CostEstimate:
    """Days at the given throughput and dollars at the given per-1k prices."""
    if throughput_per_day <= 0:
        raise ZeroThroughput("throughput must be positive")
    if price_per_1k_high is None:
        price_per_1k_high = price_per_1k_low
    return CostEstimate(
        days=n_samples / throughput_per_day,
        dollars_low=n_samples / 1000.0 * price_per_1k_low,
        dollars_high=n_samples / 1000.0 * price_per_1k_high,
    )


@dataclass
class PipelineConfig:
    state_dir: Path
    output_path: Path
    concurrency: int = 4
    max_attempts: int = 3
    prompt_dir: Path | None = None
    clock: Callable[[], float] = time.monotonic

    def __post_init__(self):
        self.state_dir = Path(self.state_dir)
        self.output_path = Path(self.output_path)


@dataclass
class StageState:
    status: str  # "done" | "failed"
    attempts: int = 1
    output_hash: str | None = None


@dataclass
class PipelineReport:
    manifest_size: int
    done: int
    failed: int
    pending: int
    rejected: int
    stage_counts: dict[str, dict[str, int]]
    wall_seconds: float
    samples_per_day: float | None
    stage_latency_percentiles: dict[str, dict[str, float]]
    output_path: str

    def to_dict(self) -> dict:
        return {
            "manifest_size": self.manifest_size,
            "done": self.done,
            "failed": self.failed,
            "pending": self.pending,
            "rejected": self.rejected,
            "stage_counts": self.stage_counts,
            "wall_seconds": self.wall_seconds,
            "samples_per_day": self.samples_per_day,
            "stage_latency_percentiles": self.stage_latency_percentiles,
            "output_path": self.output_path,
        }


def payload_hash(payload: dict) -> str:
    return fnv1a64_hex(dumps(payload))


def load_state(
    state_dir: Path,
) -> tuple[dict[str, dict[str, StageState]], dict[tuple[str, str], dict]]:
    """Fold the journal and payload log into current per-asset stage state.

    Done is sticky per (asset, stage). Every done stage must have a payload
    whose hash matches the journal; a mismatch discards that stage and all
    later stages for the asset (they will be recomputed), which is how a
    corrupt store heals.
    """
    state: dict[str, dict[str, StageState]] = {}
    for event in iter_jsonl(state_dir / JOURNAL_FILE):
        per_asset = state.setdefault(event["asset_id"], {})
        existing = per_asset.get(event["stage"])
        if existing is not None and existing.status == "done":
            continue
        per_asset[event["stage"]] = StageState(
            status=event["status"],
            attempts=event.get("attempts", 1),
            output_hash=event.get("output_hash"),
        )
    payloads: dict[tuple[str, str], dict] = {}
    for row in iter_jsonl(state_dir / OUTPUTS_FILE):
        payloads[(row["asset_id"], row["stage"])] = row["payload"]

    for asset_id, per_asset in state.items():
        corrupt_from: int | None = None
        for idx, stage in enumerate(STAGES):
            st = per_asset.get(stage)
            if st is None or st.status != "done":
                continue
            payload = payloads.get((asset_id, stage))
            if payload is None or payload_hash(payload) != st.output_hash:
                corrupt_from = idx
                break
        if corrupt_from is not None:
            logger.warning(
                "state for %s corrupt at %s; restarting from there",
                asset_id,
                STAGES[corrupt_from],
            )
            for stage in STAGES[corrupt_from:]:
                per_asset.pop(stage, None)
                payloads.pop((asset_id, stage), None)
    return state, payloads


class _StateWriter:
    """Serialized writer for the journal and payload log."""

    def __init__(self, state_dir: Path):
        state_dir.mkdir(parents=True, exist_ok=True)
        self._journal = JsonlAppender(state_dir / JOURNAL_FILE)
        self._outputs = JsonlAppender(state_dir / OUTPUTS_FILE)
        self._lock = threading.Lock()

    def record_done(self, asset_id: str, stage: str, payload: dict, attempts: int) -> None:
        with self._lock:
            self._outputs.append({"asset_id": asset_id, "stage": stage, "payload": payload})
            self._journal.append(
                {
                    "asset_id": asset_id,
                    "stage": stage,
                    "status": "done",
                    "attempts": attempts,
                    "output_hash": payload_hash(payload),
                }
            )

    def record_failed(self, asset_id: str, stage: str, attempts: int, error: str) -> None:
        with self._lock:
            self._journal.append(
                {
                    "asset_id": asset_id,
                    "stage": stage,
                    "status": "failed",
                    "attempts": attempts,
                    "error": error,
                }
            )

    def close(self) -> None:
        self._journal.close()
        self._outputs.close()


@dataclass
class _AssetOutcome:
    asset_id: str
    status: str  # "done" | "failed"
    rejected: bool = False
    durations: dict[str, float] = field(default_factory=dict)


class _AssetRunner:
    """Runs one asset's stage chain, skipping stages already done."""

    def __init__(
        self,
        backends: dict[str, Backend],
        templates: dict[str, PromptTemplate],
        writer: _StateWriter,
        config: PipelineConfig,
        state: dict[str, dict[str, StageState]],
        payloads: dict[tuple[str, str], dict],
    ):
        self.backends = backends
        self.templates = templates
        self.writer = writer
        self.config = config
        self.state = state
        self.payloads = payloads

    def _stage_state(self, asset_id: str, stage: str) -> StageState | None:
        return self.state.get(asset_id, {}).get(stage)

    def _run_stage(
        self,
        record: AssetRecord,
        stage: str,
        compute: Callable[[], dict],
        durations: dict[str, float],
    ) -> dict | None:
        """Return the stage payload, from state or by computing with retries."""
        existing = self._stage_state(record.asset_id, stage)
        if existing is not None and existing.status == "done":
            payload = self.payloads[(record.asset_id, stage)]
            durations[stage] = payload.get("duration_s", 0.0)
            return payload
        last_error: Exception | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            started = self.config.clock()
            try:
                payload = compute()
            except Exception as exc:  # noqa: BLE001 - stage failures are data
                last_error = exc
                continue
            payload["duration_s"] = self.config.clock() - started
            self.writer.record_done(record.asset_id, stage, payload, attempts=attempt)
            durations[stage] = payload["duration_s"]
            return payload
        self.writer.record_failed(
            record.asset_id, stage, attempts=self.config.max_attempts, error=str(last_error)
        )
        logger.warning("asset %s failed at %s: %s", record.asset_id, stage, last_error)
        return None

    def process(self, record: AssetRecord) -> _AssetOutcome:
        durations: dict[str, float] = {}
        asset_id = record.asset_id

        # Assets with no renderable views are rejected before any model call.
        if not record.views:
            existing = self._stage_state(asset_id, STAGE_VALIDATE)
            if existing is None or existing.status != "done":
                result = validate_record(record, None)
                payload = {
                    "keep": result.keep,
                    "reasons": [r.value for r in result.reasons],
                    "duration_s": 0.0,
                }
                self.writer.record_done(asset_id, STAGE_VALIDATE, payload, attempts=1)
            return _AssetOutcome(asset_id, "done", rejected=True, durations=durations)

        meta_payload = self._run_stage(
            record, STAGE_METADATA, lambda: self._compute_metadata(record), durations
        )
        if meta_payload is None:
            return _AssetOutcome(asset_id, "failed", durations=durations)

        dense_payload = self._run_stage(
            record,
            STAGE_DENSE,
            lambda: self._compute_dense(record, meta_payload),
            durations,
        )
        if dense_payload is None:
            return _AssetOutcome(asset_id, "failed", durations=durations)

        levels_payload = self._run_stage(
            record,
            STAGE_LEVELS,
            lambda: self._compute_levels(dense_payload),
            durations,
        )
        if levels_payload is None:
            return _AssetOutcome(asset_id, "failed", durations=durations)

        ethical_payload = self._run_stage(
            record,
            STAGE_ETHICAL,
            lambda: self._compute_ethical(levels_payload),
            durations,
        )
        if ethical_payload is None:
            return _AssetOutcome(asset_id, "failed", durations=durations)

        validate_payload = self._run_stage(
            record,
            STAGE_VALIDATE,
            lambda: self._compute_validation(record, ethical_payload),
            durations,
        )
        if validate_payload is None:
            return _AssetOutcome(asset_id, "failed", durations=durations)
        return _AssetOutcome(
            asset_id, "done", rejected=not validate_payload["keep"], durations=durations
        )

    def _compute_metadata(self, record: AssetRecord) -> dict:
        raw = extract_metadata(record)
        if raw is None:
            return {"text": "", "dropped": True, "absent": True}
        filtered = filter_metadata(
            raw, self.backends[STAGE_METADATA], self.templates[STAGE_METADATA]
        )
        return {"text": filtered.text, "dropped": filtered.dropped, "absent": False}

    def _compute_dense(self, record: AssetRecord, meta_payload: dict) -> dict:
        meta = FilteredMetadata(text=meta_payload["text"], dropped=meta_payload["dropped"])
        dense = dense_describe(
            [v.path for v in record.views],
            None if meta_payload["absent"] else meta,
            self.backends[STAGE_DENSE],
            self.templates[STAGE_DENSE],
        )
        return {"text": dense.text, "aspects": dense.aspects_present}

    def _compute_levels(self, dense_payload: dict) -> dict:
        levels = elaborate_levels(
            DenseDescription(text=dense_payload["text"]),
            self.backends[STAGE_LEVELS],
            self.templates[STAGE_LEVELS],
        )
        return levels.to_dict()

    def _compute_ethical(self, levels_payload: dict) -> dict:
        filtered = ethical_filter(
            LevelSet.from_dict(levels_payload),
            self.backends[STAGE_ETHICAL],
            self.templates[STAGE_ETHICAL],
        )
        return filtered.to_dict()

    def _compute_validation(self, record: AssetRecord, ethical_payload: dict) -> dict:
        result = validate_record(record, LevelSet.from_dict(ethical_payload))
        return {"keep": result.keep, "reasons": [r.value for r in result.reasons]}


def render_annotations(
    manifest: list[AssetRecord],
    state: dict[str, dict[str, StageState]],
    payloads: dict[tuple[str, str], dict],
) -> list[dict]:
    """Annotation records for every kept, fully-processed asset, in manifest order."""
    records = []
    for asset in manifest:
        per_asset = state.get(asset.asset_id, {})
        if any(
            per_asset.get(stage) is None or per_asset[stage].status != "done"
            for stage in STAGES
        ):
            continue
        validation = payloads[(asset.asset_id, STAGE_VALIDATE)]
        if not validation["keep"]:
            continue
        ethical = payloads[(asset.asset_id, STAGE_ETHICAL)]
        levels = LevelSet.from_dict(ethical)
        report: BudgetReport = check_budgets(levels)
        timings = {
            stage: payloads[(asset.asset_id, stage)].get("duration_s", 0.0)
            for stage in STAGES
            if (asset.asset_id, stage) in payloads
        }
        record = {"asset_id": asset.asset_id, "dense": payloads[(asset.asset_id, STAGE_DENSE)]["text"]}
        record.update(levels.to_dict())
        record["budget_report"] = report.to_dict()
        record["stage_timings"] = timings
        records.append(record)
    return records


def _percentiles(durations: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    out = {}
    for stage, values in sorted(durations.items()):
        if values:
            out[stage] = {
                "p50": float(np.percentile(values, 50)),
                "p95": float(np.percentile(values, 95)),
            }
    return out


def run_pipeline(
    manifest: list[AssetRecord],
    backends: dict[str, Backend],
    config: PipelineConfig,
) -> PipelineReport:
    """Run (or continue) the pipeline over a manifest until every asset is
    done or failed, then render the annotation store.

    Idempotent over existing state: completed stages never issue another
    backend call. Per-asset failures are recorded and never abort the batch.
    """
    missing = [s for s in BACKEND_STAGES if s not in backends]
    if missing:
        raise ConfigError(f"backends missing for stages: {missing}")
    templates = load_templates(config.prompt_dir)
    state, payloads = load_state(config.state_dir)
    writer = _StateWriter(config.state_dir)
    runner = _AssetRunner(backends, templates, writer, config, state, payloads)

    started = config.clock()
    outcomes: list[_AssetOutcome] = []
    try:
        if config.concurrency <= 1:
            for record in manifest:
                outcomes.append(runner.process(record))
        else:
            with concurrent.futures.ThreadPoolExecutor(config.concurrency) as pool:
                futures = [pool.submit(runner.process, r) for r in manifest]
                outcomes = [f.result() for f in futures]
    finally:
        writer.close()
    wall = config.clock() - started

    # Re-fold from disk: the journal is the source of truth for the report.
    state, payloads = load_state(config.state_dir)
    annotations = render_annotations(manifest, state, payloads)
    write_jsonl(config.output_path, annotations)

    done = failed = rejected = 0
    stage_counts: dict[str, dict[str, int]] = {s: {"done": 0, "failed": 0} for s in STAGES}
    for asset in manifest:
        per_asset = state.get(asset.asset_id, {})
        for stage, st in per_asset.items():
            stage_counts[stage][st.status] += 1
        statuses = [st.status for st in per_asset.values()]
        if "failed" in statuses:
            failed += 1
        elif per_asset.get(STAGE_VALIDATE) is not None:
            done += 1
            if not payloads[(asset.asset_id, STAGE_VALIDATE)]["keep"]:
                rejected += 1
    pending = len(manifest) - done - failed

    durations: dict[str, list[float]] = {}
    completed_this_run = 0
    for outcome in outcomes:
        if outcome.status == "done":
            completed_this_run += 1
        for stage, dur in outcome.durations.items():
            durations.setdefault(stage, []).append(dur)

    wall_days = wall / 86400.0
    samples_per_day = completed_this_run / wall_days if wall_days > 0 else None
    return PipelineReport(
        manifest_size=len(manifest),
        done=done,
        failed=failed,
        pending=pending,
        rejected=rejected,
        stage_counts=stage_counts,
        wall_seconds=wall,
        samples_per_day=samples_per_day,
        stage_latency_percentiles=_percentiles(durations),
        output_path=str(config.output_path),
    )


def resume(
    manifest: list[AssetRecord],
    backends: dict[str, Backend],
    config: PipelineConfig,
) -> PipelineReport:
    """Continue an interrupted batch. The state store must already exist."""
    if not (config.state_dir / JOURNAL_FILE).exists():
        raise StoreError(f"no journal found under {config.state_dir}")
    return run_pipeline(manifest, backends, config)
