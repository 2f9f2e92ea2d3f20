"""The four model stages: metadata filtering, dense description, multi-level
elaboration, and ethical filtering, plus level parsing and budget checks.

Stage order is fixed: metadata -> dense -> levels -> ethical. Budgets are
soft; word counts outside a level's range are warnings, never failures.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from .backends import Backend, CompletionRequest
from .prompting import PromptTemplate
from .records import LEVEL_BUDGETS, LevelSet, RawMetadata
from .tokens import word_count

logger = logging.getLogger(__name__)

#: Sentinel answer the metadata filter returns when nothing useful remains.
DROPPED_SENTINEL = "NONE"

_LEVEL_LINE = re.compile(r"^\s*(?:[-*#>]+\s*)?LEVEL([1-5])\s*:\s*(.*)$", re.IGNORECASE)

_ASPECT_KEYWORDS = {
    "structural": ("structure", "component"),
    "geometric": ("geometry", "geometric", "symmetry"),
    "surface": ("surface", "texture", "material"),
    "chromatic": ("color", "colour", "chromatic"),
    "environmental": ("environment", "context", "surrounding"),
}

_FORMAT_REMINDER = (
    "\n\nYour previous answer could not be parsed. Respond with exactly five "
    "lines, the first starting with LEVEL1: and the last with LEVEL5:."
)


class StageError(Exception):
    """Raised when a stage fails for data (not backend) reasons."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class NoViews(StageError):
    def __init__(self):
        super().__init__("dense_description", "at least one rendered view is required")


class LevelParseError(StageError):
    def __init__(self, stage: str, missing: list[int]):
        super().__init__(stage, f"response missing level markers {missing}")
        self.missing = missing


@dataclass
class FilteredMetadata:
    text: str
    dropped: bool = False


@dataclass
class DenseDescription:
    text: str
    aspects_present: dict[str, bool] = field(default_factory=dict)


class BudgetStatus(str, Enum):
    WITHIN = "within"
    UNDER = "under"
    OVER = "over"


@dataclass
class BudgetReport:
    levels: dict[int, tuple[int, BudgetStatus]]

    def to_dict(self) -> dict:
        return {
            f"level{i}": {"word_count": count, "status": status.value}
            for i, (count, status) in sorted(self.levels.items())
        }


def render_metadata_text(meta: RawMetadata) -> str:
    """Flatten raw metadata into one text blob for the filtering prompt."""
    parts = []
    if meta.name:
        parts.append(f"name: {meta.name}")
    if meta.tags:
        parts.append("tags: " + ", ".join(meta.tags))
    if meta.description:
        parts.append(f"description: {meta.description}")
    if meta.category:
        parts.append(f"category: {meta.category}")
    for key, value in sorted(meta.extra.items()):
        parts.append(f"{key}: {value}")
    return "\n".join(parts)


def filter_metadata(
    raw: RawMetadata, backend: Backend, template: PromptTemplate
) -> FilteredMetadata:
    """Clean raw human metadata into a prompt-safe text blob."""
    request = CompletionRequest(
        system_prompt=template.system,
        user_prompt=template.user.format(metadata=render_metadata_text(raw)),
        profile="metadata_filter",
    )
    answer = backend.complete(request).strip()
    dropped = not answer or answer.upper() == DROPPED_SENTINEL
    return FilteredMetadata(text="" if dropped else answer, dropped=dropped)


def detect_aspects(text: str) -> dict[str, bool]:
    lowered = text.lower()
    return {
        aspect: any(k in lowered for k in keywords)
        for aspect, keywords in _ASPECT_KEYWORDS.items()
    }


def dense_describe(
    views: list[str],
    meta: FilteredMetadata | None,
    backend: Backend,
    template: PromptTemplate,
) -> DenseDescription:
    """Describe an asset from its rendered views, optionally metadata-guided.

    The metadata block is omitted from the prompt entirely when metadata is
    absent or was dropped by the filter; the stage sequence never changes.
    """
    if not views:
        raise NoViews()
    if len(views) < 4:
        logger.warning("dense_description running with %d views (expected 4)", len(views))
    metadata_block = ""
    if meta is not None and not meta.dropped and meta.text:
        metadata_block = (
            "Curator notes from the source library (use for names and domain terms):\n"
            f"{meta.text}\n\n"
        )
    request = CompletionRequest(
        system_prompt=template.system,
        user_prompt=template.user.format(metadata=metadata_block),
        images=list(views[:4]),
        profile="dense_description",
    )
    text = backend.complete(request)
    return DenseDescription(text=text, aspects_present=detect_aspects(text))


def parse_levels(text: str) -> LevelSet:
    """Line-scan LEVEL1:..LEVEL5: markers, tolerant of surrounding prose.

    Lines without a marker extend the most recent level; all five markers
    must appear or the parse fails.
    """
    found: dict[int, list[str]] = {}
    current: int | None = None
    for line in text.splitlines():
        match = _LEVEL_LINE.match(line)
        if match:
            current = int(match.group(1))
            found.setdefault(current, []).append(match.group(2).strip())
        elif current is not None and line.strip():
            found[current].append(line.strip())
    missing = [i for i in range(1, 6) if i not in found]
    if missing:
        raise LevelParseError("level_parse", missing)
    return LevelSet(**{f"level{i}": " ".join(found[i]).strip() for i in range(1, 6)})


def _complete_levels(
    backend: Backend, system: str, user: str, profile: str, stage: str
) -> LevelSet:
    answer = backend.complete(
        CompletionRequest(system_prompt=system, user_prompt=user, profile=profile)
    )
    try:
        return parse_levels(answer)
    except LevelParseError:
        retry = backend.complete(
            CompletionRequest(
                system_prompt=system, user_prompt=user + _FORMAT_REMINDER, profile=profile
            )
        )
        try:
            return parse_levels(retry)
        except LevelParseError as exc:
            raise LevelParseError(stage, exc.missing) from exc


def elaborate_levels(
    dense: DenseDescription, backend: Backend, template: PromptTemplate
) -> LevelSet:
    """Compress a dense description into the five caption levels."""
    if not dense.text.strip():
        raise StageError("level_elaboration", "dense description is empty")
    return _complete_levels(
        backend,
        template.system,
        template.user.format(dense_description=dense.text),
        "level_elaboration",
        "level_elaboration",
    )


def render_levels_block(levels: LevelSet) -> str:
    return "\n".join(f"LEVEL{i}: {text}" for i, text in levels.items())


def ethical_filter(
    levels: LevelSet, backend: Backend, template: PromptTemplate
) -> LevelSet:
    """Final content pass over the level set; structure is preserved.

    Famous, scientific, and cultural terms survive per the prompt contract.
    A level emptied by the filter is legal here; record validation rejects
    the asset downstream.
    """
    return _complete_levels(
        backend,
        template.system,
        template.user.format(levels=render_levels_block(levels)),
        "ethical_filter",
        "ethical_filter",
    )


def check_budgets(levels: LevelSet) -> BudgetReport:
    """Classify each level's word count against its budget. Pure; never edits.

    An empty level is always Under, including level 4 whose nominal minimum
    is zero: a zero-length caption is a removal condition, not a fit.
    """
    report = {}
    for i, text in levels.items():
        count = word_count(text)
        lo, hi = LEVEL_BUDGETS[i]
        if count == 0 or count < lo:
            status = BudgetStatus.UNDER
        elif count > hi:
            status = BudgetStatus.OVER
        else:
            status = BudgetStatus.WITHIN
        report[i] = (count, status)
    return BudgetReport(levels=report)
