// Session state machine for one rater. All persistent state lives on the
// server; this holds only the open task and the unsubmitted form.

import { ApiClient } from "./api";
import type { Mode, ProgressInfo, RatingPayload, Task } from "./types";

export interface SessionView {
  kind: "loading" | "task" | "empty" | "error";
  task: Task | null;
  choice: number | null;
  verdict: boolean | null;
  scores: Record<string, number>;
  activeCriterion: number;
  errorMessage: string;
  progress: ProgressInfo | null;
}

function randomToken(): string {
  return `${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class RaterSession {
  private view: SessionView = {
    kind: "loading",
    task: null,
    choice: null,
    verdict: null,
    scores: {},
    activeCriterion: 0,
    errorMessage: "",
    progress: null,
  };
  private submissionId = "";
  private submitting = false;

  constructor(
    private api: ApiClient,
    private rater: string,
    private mode: Mode,
    private makeToken: () => string = randomToken,
  ) {}

  snapshot(): SessionView {
    return { ...this.view, scores: { ...this.view.scores } };
  }

  /** Fetch the next task; a failure shows a banner without losing state. */
  async loadNext(): Promise<void> {
    try {
      const task = await this.api.fetchNextTask(this.rater, this.mode);
      if (task === null) {
        this.view = { ...this.view, kind: "empty", task: null };
      } else {
        this.view = {
          kind: "task",
          task,
          choice: null,
          verdict: null,
          scores: {},
          activeCriterion: 0,
          errorMessage: "",
          progress: this.view.progress,
        };
        // one idempotency token per served task: a double submit is one rating
        this.submissionId = this.makeToken();
      }
    } catch (err) {
      this.view = {
        ...this.view,
        kind: "error",
        errorMessage: `Could not reach the rating service (${String(err)})`,
      };
    }
  }

  async refreshProgress(): Promise<void> {
    try {
      const results = await this.api.fetchResults(this.mode, this.rater);
      const progress = results["progress"] as ProgressInfo | undefined;
      if (progress) this.view.progress = progress;
    } catch {
      // keep the cached count when the service is unreachable
    }
  }

  pickChoice(index: number): void {
    const task = this.view.task;
    if (task?.mode !== "alignment") return;
    if (index < 0 || index >= task.candidates.length) return;
    this.view.choice = index;
  }

  pickVerdict(verdict: boolean): void {
    if (this.view.task?.mode !== "accuracy") return;
    this.view.verdict = verdict;
  }

  setScore(criterion: string, value: number): void {
    const task = this.view.task;
    if (task?.mode !== "asset") return;
    if (!task.criteria.includes(criterion)) return;
    if (!Number.isInteger(value) || value < 1 || value > 10) return;
    this.view.scores[criterion] = value;
  }

  /** Keyboard shortcuts: letters pick candidates, y/n verdicts, digits score. */
  handleKey(key: string): void {
    const task = this.view.task;
    if (!task) return;
    if (task.mode === "alignment" && /^[a-z]$/i.test(key)) {
      this.pickChoice(key.toUpperCase().charCodeAt(0) - 65);
    } else if (task.mode === "accuracy") {
      if (key.toLowerCase() === "y") this.pickVerdict(true);
      if (key.toLowerCase() === "n") this.pickVerdict(false);
    } else if (task.mode === "asset" && /^[0-9]$/.test(key)) {
      const value = key === "0" ? 10 : Number(key);
      const criterion = task.criteria[this.view.activeCriterion];
      if (criterion) {
        this.setScore(criterion, value);
        this.view.activeCriterion = Math.min(
          this.view.activeCriterion + 1,
          task.criteria.length - 1,
        );
      }
    }
  }

  /** Submit enabled only when the form is complete for the task's mode. */
  canSubmit(): boolean {
    const task = this.view.task;
    if (!task || this.submitting) return false;
    switch (task.mode) {
      case "alignment":
        return this.view.choice !== null;
      case "accuracy":
        return this.view.verdict !== null;
      case "asset":
        return task.criteria.every((c) => this.view.scores[c] !== undefined);
    }
  }

  buildPayload(): RatingPayload {
    const task = this.view.task;
    if (!task) throw new Error("no open task");
    switch (task.mode) {
      case "alignment":
        return { choice: this.view.choice ?? -1 };
      case "accuracy":
        return { verdict: this.view.verdict ?? false };
      case "asset":
        return { scores: { ...this.view.scores } };
    }
  }

  /**
   * Post the rating and advance only after a 2xx; a rejected payload
   * re-opens the form with values intact.
   */
  async submit(): Promise<boolean> {
    const task = this.view.task;
    if (!task || !this.canSubmit()) return false;
    this.submitting = true;
    try {
      await this.api.submitRating(task.task_id, this.rater, this.buildPayload(), this.submissionId);
    } catch (err) {
      this.view.kind = "task"; // form stays open, values intact
      this.view.errorMessage = `Submission failed (${String(err)})`;
      return false;
    } finally {
      this.submitting = false;
    }
    await this.refreshProgress();
    await this.loadNext();
    return true;
  }

  currentSubmissionId(): string {
    return this.submissionId;
  }
}
