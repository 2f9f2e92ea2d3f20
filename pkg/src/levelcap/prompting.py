"""Prompt templates: editable text assets, one file per stage.

Each file has a ``# system`` section and a ``# user`` section. User sections
carry placeholders ({metadata}, {dense_description}, {levels}, {candidates},
{caption}) that the stage code substitutes. Defaults ship with the package;
a directory of overrides can replace any subset.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

STAGE_NAMES = (
    "metadata_filter",
    "dense_description",
    "level_elaboration",
    "ethical_filter",
    "judge_alignment",
    "judge_accuracy",
)


@dataclass(frozen=True)
class PromptTemplate:
    stage: str
    system: str
    user: str


def parse_template(stage: str, text: str) -> PromptTemplate:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        marker = line.strip().lower()
        if marker in ("# system", "# user"):
            current = marker[2:]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    if "system" not in sections or "user" not in sections:
        raise ValueError(f"template {stage!r} must contain '# system' and '# user' sections")
    return PromptTemplate(
        stage=stage,
        system="\n".join(sections["system"]).strip(),
        user="\n".join(sections["user"]).strip(),
    )


def load_templates(template_dir: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Load all stage templates, preferring files from ``template_dir``."""
    templates: dict[str, PromptTemplate] = {}
    package_root = resources.files(__package__) / "prompts"
    for stage in STAGE_NAMES:
        text: str | None = None
        if template_dir is not None:
            override = Path(template_dir) / f"{stage}.txt"
            if override.is_file():
                text = override.read_text(encoding="utf-8")
        if text is None:
            text = (package_root / f"{stage}.txt").read_text(encoding="utf-8")
        templates[stage] = parse_template(stage, text)
    return templates
