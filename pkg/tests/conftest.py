"""Shared fixtures: synthetic asset trees and scripted stage mocks.

The scripted mocks form a deterministic chain: the metadata filter echoes a
"subject <asset-tag>" line, the dense mock folds that tag into a five-section
description, the level mock derives budget-conformant levels from the dense
text, and the ethical mock echoes the levels back. Every downstream prompt
therefore carries the asset tag, which lets tests attribute backend calls
to assets.
"""

from __future__ import annotations

import re
import threading
from pathlib import Path

import pytest

from levelcap.backends import MockRule, ScriptedMockBackend
from levelcap.orchestrator import BACKEND_STAGES
from levelcap.records import AssetRecord, Dataset, RawMetadata, ViewRef

SUBJECT_RE = re.compile(r"subject ([a-z0-9-]+)")

#: Level budgets used to size the mock level texts (all Within).
MOCK_LEVEL_WORDS = {1: 175, 2: 120, 3: 75, 4: 25, 5: 15}


def make_views(tmp_path: Path, asset_id: str, n: int = 4) -> list[ViewRef]:
    tags = ("front", "back", "left", "right")[:n]
    views = []
    for tag in tags:
        path = tmp_path / "views" / asset_id / f"{tag}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b"\x89PNG fake")
        views.append(ViewRef(tag=tag, path=str(path)))
    return views


def make_record(
    tmp_path: Path,
    asset_id: str,
    with_metadata: bool = True,
    n_views: int = 4,
    name_extra: str = "",
) -> AssetRecord:
    meta = None
    if with_metadata:
        meta = RawMetadata(
            name=f"subject {asset_id}{name_extra}",
            tags=["toy", "plastic"],
            description=f"a small model of {asset_id}",
        )
    return AssetRecord(
        asset_id=asset_id,
        dataset=Dataset.OBJAVERSE,
        source_uri=f"/data/{asset_id}.glb",
        raw_metadata=meta,
        views=make_views(tmp_path, asset_id, n_views),
    )


def make_manifest(
    tmp_path: Path, n: int, metadata_free_every: int | None = None
) -> list[AssetRecord]:
    records = []
    for i in range(n):
        with_meta = metadata_free_every is None or (i % metadata_free_every != 0)
        records.append(make_record(tmp_path, f"asset-{i:04d}", with_metadata=with_meta))
    return records


def _subject_tag(text: str) -> str:
    match = SUBJECT_RE.search(text)
    return match.group(1) if match else "unnamed"


def _level_words(tag: str, level: int) -> str:
    count = MOCK_LEVEL_WORDS[level]
    return " ".join(f"{tag}-l{level}w{i}" for i in range(count))


def metadata_mock() -> ScriptedMockBackend:
    """Passes the metadata through, keeping only the subject line."""

    def respond(request) -> str:
        return f"subject {_subject_tag(request.user_prompt)}"

    return ScriptedMockBackend(default=respond)


def dense_mock() -> ScriptedMockBackend:
    """Emits a deterministic five-section description carrying the tag."""

    def respond(request) -> str:
        tag = _subject_tag(request.user_prompt)
        return (
            f"Structure: the subject {tag} object has a body and four components.\n"
            f"Geometry: rounded form with one symmetry axis and squat proportions.\n"
            f"Surface: matte plastic texture with slight roughness.\n"
            f"Colors: primary red shell with blue accents.\n"
            f"Environment: shown isolated against a neutral backdrop."
        )

    return ScriptedMockBackend(default=respond)


def levels_mock() -> ScriptedMockBackend:
    """Derives budget-conformant LEVEL1..LEVEL5 lines from the dense text."""

    def respond(request) -> str:
        tag = _subject_tag(request.user_prompt)
        lines = [f"LEVEL{i}: {_level_words(tag, i)}" for i in range(1, 6)]
        return "\n".join(lines)

    return ScriptedMockBackend(default=respond)


def ethical_mock(empty_level5_tag: str | None = None) -> ScriptedMockBackend:
    """Echoes the level block; optionally empties level 5 for one tag."""

    def respond(request) -> str:
        lines = [
            line for line in request.user_prompt.splitlines() if line.startswith("LEVEL")
        ]
        if empty_level5_tag is not None and empty_level5_tag in request.user_prompt:
            lines = [l if not l.startswith("LEVEL5") else "LEVEL5:" for l in lines]
        return "\n".join(lines)

    return ScriptedMockBackend(default=respond)


def stage_mocks(empty_level5_tag: str | None = None) -> dict[str, ScriptedMockBackend]:
    return {
        "metadata_filter": metadata_mock(),
        "dense_description": dense_mock(),
        "level_elaboration": levels_mock(),
        "ethical_filter": ethical_mock(empty_level5_tag=empty_level5_tag),
    }


class CountingBackend:
    """Wraps a backend, recording (stage, asset-tag) per call.

    Can raise KeyboardInterrupt after a global call budget to simulate an
    abrupt kill mid-batch.
    """

    def __init__(self, inner, stage: str, shared: dict):
        self.inner = inner
        self.stage = stage
        self.shared = shared

    def complete(self, request):
        with self.shared["lock"]:
            self.shared["total"] += 1
            if (
                self.shared.get("kill_after") is not None
                and self.shared["total"] > self.shared["kill_after"]
            ):
                raise KeyboardInterrupt("simulated kill")
            self.shared["calls"].append((self.stage, _subject_tag(request.text)))
        return self.inner.complete(request)

    def embed(self, text):
        return self.inner.embed(text)


def counting_mocks(kill_after: int | None = None):
    shared = {"lock": threading.Lock(), "total": 0, "calls": [], "kill_after": kill_after}
    backends = {
        stage: CountingBackend(mock, stage, shared)
        for stage, mock in stage_mocks().items()
    }
    assert set(backends) == set(BACKEND_STAGES)
    return backends, shared


@pytest.fixture
def simple_rule_mock():
    return ScriptedMockBackend(
        rules=[MockRule(match="describe", response="a red cube")],
        default="fallback",
    )
