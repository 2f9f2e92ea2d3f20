"""Judge protocols and human-rating machinery: alignment picks, accuracy
verdicts, 1-10 asset scores, and their aggregation.

Candidates are always anonymized before a judge or rater sees them: tasks
shuffle their candidates with a recorded seed and serve only letter labels.
Source labels stay server-side until aggregation.
"""

from __future__ import annotations

import random
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import Backend, CompletionRequest
from .jsonl import JsonlAppender, iter_jsonl
from .prompting import PromptTemplate

LETTERS = string.ascii_uppercase

CRITERIA = ("geometric_consistency", "visual_quality", "prompt_fidelity", "overall")

_RETRY_REMINDER = "\n\nYour previous answer could not be parsed. "


class ParseFailure(Exception):
    pass


class EmptyInput(Exception):
    pass


class UnscoredTask(Exception):
    pass


@dataclass(frozen=True)
class Candidate:
    source_label: str
    text: str


@dataclass
class AlignmentTask:
    """Pick-the-best-caption task over one asset's four views."""

    task_id: str
    views: list[str]
    candidates: list[Candidate]
    shuffle_seed: int = 0

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValueError("alignment tasks need at least two candidates")
        if len(self.candidates) > len(LETTERS):
            raise ValueError("too many candidates to letter-label")

    def display_order(self) -> list[int]:
        """Permutation: display position -> original candidate index."""
        order = list(range(len(self.candidates)))
        random.Random(self.shuffle_seed).shuffle(order)
        return order

    def shuffled_candidates(self) -> list[Candidate]:
        return [self.candidates[i] for i in self.display_order()]

    def source_for_choice(self, display_index: int) -> str:
        """Recover the hidden source behind a displayed position."""
        return self.candidates[self.display_order()[display_index]].source_label

    def to_public_dict(self) -> dict:
        """The serialization judges and raters see: no source labels."""
        return {
            "task_id": self.task_id,
            "mode": "alignment",
            "views": list(self.views),
            "candidates": [
                {"label": LETTERS[i], "text": c.text}
                for i, c in enumerate(self.shuffled_candidates())
            ],
        }


@dataclass
class AccuracyTask:
    """Yes/no: does every attribute in the caption hold for the model?"""

    task_id: str
    views: list[str]
    caption: str
    source_label: str | None = None
    verdict: bool | None = None

    def set_verdict(self, verdict: bool) -> None:
        if self.verdict is not None:
            raise ValueError(f"verdict for {self.task_id} already set")
        self.verdict = verdict

    def to_public_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "mode": "accuracy",
            "views": list(self.views),
            "caption": self.caption,
        }


@dataclass
class AssetRatingTask:
    """1-10 scores on four criteria for one generated asset."""

    task_id: str
    prompt_text: str
    rendering: str
    scores: dict[str, int] | None = None

    def validate_scores(self, scores: dict[str, int]) -> None:
        missing = [c for c in CRITERIA if c not in scores]
        if missing:
            raise ValueError(f"missing criteria: {missing}")
        for crit, value in scores.items():
            if not isinstance(value, int) or not (1 <= value <= 10):
                raise ValueError(f"{crit} must be an integer in [1, 10], got {value!r}")

    def to_public_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "mode": "asset",
            "prompt": self.prompt_text,
            "rendering": self.rendering,
            "criteria": list(CRITERIA),
        }


@dataclass
class AggregateResult:
    n: int
    win_rates: dict[str, float] | None = None
    scores: dict[str, tuple[float, float]] | None = None
    percent_yes: dict[str, float] | None = None

    def to_dict(self) -> dict:
        d: dict = {"n": self.n}
        if self.win_rates is not None:
            d["win_rates"] = self.win_rates
        if self.scores is not None:
            d["scores"] = {
                crit: {"mean": mean, "std": std, "display": f"{mean:.2f} ± {std:.2f}"}
                for crit, (mean, std) in self.scores.items()
            }
        if self.percent_yes is not None:
            d["percent_yes"] = self.percent_yes
        return d


def _parse_letter(answer: str, n_candidates: int) -> int | None:
    cleaned = answer.strip().strip(".,:;!\"'()[]").upper()
    if len(cleaned) == 1 and cleaned in LETTERS[:n_candidates]:
        return LETTERS.index(cleaned)
    return None


def _parse_yes_no(answer: str) -> bool | None:
    cleaned = answer.strip().lower().strip(".,:;!\"'()[]")
    if cleaned in ("yes", "y", "true"):
        return True
    if cleaned in ("no", "n", "false"):
        return False
    return None


def _candidates_block(task: AlignmentTask) -> str:
    return "\n".join(
        f"{LETTERS[i]}. {c.text}" for i, c in enumerate(task.shuffled_candidates())
    )


def judge_alignment(
    task: AlignmentTask, backend: Backend, template: PromptTemplate
) -> int:
    """Ask the judge for the best-matching caption; returns the display index."""
    user = template.user.format(candidates=_candidates_block(task))
    n = len(task.candidates)
    for attempt in range(2):
        prompt = user if attempt == 0 else user + _RETRY_REMINDER + "Answer with one letter only."
        answer = backend.complete(
            CompletionRequest(
                system_prompt=template.system,
                user_prompt=prompt,
                images=list(task.views[:4]),
                profile="judge",
            )
        )
        index = _parse_letter(answer, n)
        if index is not None:
            return index
    raise ParseFailure(f"judge answer for {task.task_id} is not a candidate letter")


def judge_accuracy(
    task: AccuracyTask, backend: Backend, template: PromptTemplate
) -> bool:
    """Strict yes/no judgement of a caption against the views."""
    user = template.user.format(caption=task.caption)
    for attempt in range(2):
        prompt = user if attempt == 0 else user + _RETRY_REMINDER + "Answer yes or no only."
        answer = backend.complete(
            CompletionRequest(
                system_prompt=template.system,
                user_prompt=prompt,
                images=list(task.views[:4]),
                profile="judge",
            )
        )
        verdict = _parse_yes_no(answer)
        if verdict is not None:
            return verdict
    raise ParseFailure(f"judge answer for {task.task_id} is not yes/no")


def aggregate_win_rates(selections: list[str]) -> AggregateResult:
    """Percentage of tasks won per source, rounded to two decimals."""
    if not selections:
        raise EmptyInput("no selections to aggregate")
    counts: dict[str, int] = {}
    for label in selections:
        counts[label] = counts.get(label, 0) + 1
    total = len(selections)
    return AggregateResult(
        n=total,
        win_rates={
            label: round(count / total * 100.0, 2) for label, count in sorted(counts.items())
        },
    )


def aggregate_scores(ratings: list[AssetRatingTask]) -> AggregateResult:
    """Per-criterion mean and population standard deviation."""
    if not ratings:
        raise EmptyInput("no ratings to aggregate")
    unscored = [t.task_id for t in ratings if t.scores is None]
    if unscored:
        raise UnscoredTask(f"tasks without scores: {unscored}")
    scores = {}
    for crit in CRITERIA:
        values = [t.scores[crit] for t in ratings]  # type: ignore[index]
        scores[crit] = (float(np.mean(values)), float(np.std(values)))
    return AggregateResult(n=len(ratings), scores=scores)


def aggregate_accuracy(verdicts: list[tuple[str | None, bool]]) -> AggregateResult:
    """Percent-yes per source ("all" bucket when sources are unknown)."""
    if not verdicts:
        raise EmptyInput("no verdicts to aggregate")
    by_source: dict[str, list[bool]] = {}
    for source, verdict in verdicts:
        by_source.setdefault(source or "all", []).append(verdict)
    return AggregateResult(
        n=len(verdicts),
        percent_yes={
            source: round(sum(vs) / len(vs) * 100.0, 2)
            for source, vs in sorted(by_source.items())
        },
    )


# ---------------------------------------------------------------------------
# Task files and the ratings store


def load_tasks(path: str | Path) -> dict[str, list]:
    """Read a task file (JSONL, one task per line) grouped by mode."""
    grouped: dict[str, list] = {"alignment": [], "accuracy": [], "asset": []}
    for row in iter_jsonl(path):
        mode = row["mode"]
        if mode == "alignment":
            grouped[mode].append(
                AlignmentTask(
                    task_id=row["task_id"],
                    views=list(row.get("views", [])),
                    candidates=[
                        Candidate(c["source"], c["text"]) for c in row["candidates"]
                    ],
                    shuffle_seed=row.get("shuffle_seed", 0),
                )
            )
        elif mode == "accuracy":
            grouped[mode].append(
                AccuracyTask(
                    task_id=row["task_id"],
                    views=list(row.get("views", [])),
                    caption=row["caption"],
                    source_label=row.get("source"),
                )
            )
        elif mode == "asset":
            grouped[mode].append(
                AssetRatingTask(
                    task_id=row["task_id"],
                    prompt_text=row.get("prompt", ""),
                    rendering=row.get("rendering", ""),
                )
            )
        else:
            raise ValueError(f"unknown task mode {mode!r}")
    return grouped


class RatingsStore:
    """Append-only ratings log with an index rebuilt at startup.

    One writer behind a lock; reads serve from in-memory state. A rater
    resubmitting a task overwrites their prior rating (last write wins per
    (task, rater)); a duplicate submission id is dropped entirely.
    """

    def __init__(self, tasks: dict[str, list], log_path: str | Path, quota: int | None = None):
        self.tasks = tasks
        self.quota = quota
        self._by_id = {
            task.task_id: (mode, task) for mode, items in tasks.items() for task in items
        }
        self._lock = threading.Lock()
        self._log_path = Path(log_path)
        # (mode, task_id) -> rater who was served the task
        self._assignments: dict[str, str] = {}
        # (task_id, rater) -> payload
        self._ratings: dict[tuple[str, str], dict] = {}
        self._seen_submissions: set[str] = set()
        self._replay()
        self._writer = JsonlAppender(self._log_path)

    def _replay(self) -> None:
        for event in iter_jsonl(self._log_path):
            if event["kind"] == "assignment":
                self._assignments[event["task_id"]] = event["rater"]
            elif event["kind"] == "rating":
                sid = event.get("submission_id")
                if sid:
                    self._seen_submissions.add(sid)
                self._ratings[(event["task_id"], event["rater"])] = event["payload"]

    def close(self) -> None:
        self._writer.close()

    def _completed_by(self, rater: str) -> int:
        return sum(1 for (_, r) in self._ratings if r == rater)

    def next_task(self, rater: str, mode: str):
        """Serve the rater's open assignment or the next unassigned task."""
        with self._lock:
            items = self.tasks.get(mode, [])
            for task in items:
                assignee = self._assignments.get(task.task_id)
                if assignee == rater and (task.task_id, rater) not in self._ratings:
                    return task
            if self.quota is not None and self._completed_by(rater) >= self.quota:
                return None
            for task in items:
                if task.task_id not in self._assignments:
                    self._assignments[task.task_id] = rater
                    self._writer.append(
                        {
                            "kind": "assignment",
                            "task_id": task.task_id,
                            "rater": rater,
                            "ts": time.time(),
                        }
                    )
                    return task
            return None

    def submit(
        self, task_id: str, rater: str, payload: dict, submission_id: str | None = None
    ) -> bool:
        """Record one rating. Returns False for a duplicate submission id."""
        if task_id not in self._by_id:
            raise KeyError(f"unknown task {task_id}")
        mode, task = self._by_id[task_id]
        self._validate_payload(mode, task, payload)
        with self._lock:
            if submission_id and submission_id in self._seen_submissions:
                return False
            if submission_id:
                self._seen_submissions.add(submission_id)
            self._ratings[(task_id, rater)] = payload
            self._writer.append(
                {
                    "kind": "rating",
                    "task_id": task_id,
                    "rater": rater,
                    "mode": mode,
                    "payload": payload,
                    "submission_id": submission_id,
                    "ts": time.time(),
                }
            )
            return True

    @staticmethod
    def _validate_payload(mode: str, task, payload: dict) -> None:
        if mode == "alignment":
            choice = payload.get("choice")
            if not isinstance(choice, int) or not (0 <= choice < len(task.candidates)):
                raise ValueError(f"choice must be an index into {len(task.candidates)} candidates")
        elif mode == "accuracy":
            if not isinstance(payload.get("verdict"), bool):
                raise ValueError("verdict must be a boolean")
        elif mode == "asset":
            task.validate_scores(payload.get("scores", {}))

    def results(self, mode: str) -> AggregateResult:
        with self._lock:
            ratings = {
                (tid, rater): payload
                for (tid, rater), payload in self._ratings.items()
                if self._by_id.get(tid, (None,))[0] == mode
            }
        if mode == "alignment":
            selections = [
                self._by_id[tid][1].source_for_choice(payload["choice"])
                for (tid, _), payload in sorted(ratings.items())
            ]
            return aggregate_win_rates(selections)
        if mode == "accuracy":
            verdicts = [
                (self._by_id[tid][1].source_label, payload["verdict"])
                for (tid, _), payload in sorted(ratings.items())
            ]
            return aggregate_accuracy(verdicts)
        if mode == "asset":
            scored = []
            for (tid, _), payload in sorted(ratings.items()):
                base = self._by_id[tid][1]
                scored.append(
                    AssetRatingTask(
                        task_id=base.task_id,
                        prompt_text=base.prompt_text,
                        rendering=base.rendering,
                        scores=payload["scores"],
                    )
                )
            return aggregate_scores(scored)
        raise ValueError(f"unknown mode {mode!r}")

    def progress(self, rater: str) -> dict:
        with self._lock:
            return {"rater": rater, "completed": self._completed_by(rater), "quota": self.quota}


def run_alignment_judging(
    tasks: list[AlignmentTask], backend: Backend, template: PromptTemplate
) -> tuple[AggregateResult, list[dict]]:
    """Judge every task and aggregate win rates over the hidden sources."""
    selections = []
    detail = []
    for task in tasks:
        choice = judge_alignment(task, backend, template)
        source = task.source_for_choice(choice)
        selections.append(source)
        detail.append({"task_id": task.task_id, "choice": choice, "source": source})
    return aggregate_win_rates(selections), detail


def run_accuracy_judging(
    tasks: list[AccuracyTask], backend: Backend, template: PromptTemplate
) -> tuple[AggregateResult, list[dict]]:
    verdicts = []
    detail = []
    for task in tasks:
        verdict = judge_accuracy(task, backend, template)
        verdicts.append((task.source_label, verdict))
        detail.append({"task_id": task.task_id, "verdict": verdict})
    return aggregate_accuracy(verdicts), detail
