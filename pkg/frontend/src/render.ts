// Pure HTML renderers. Each returns a string for innerHTML; event wiring
// happens in main.ts. Only anonymized labels ever reach the DOM.

import type { AccuracyTask, AlignmentTask, AssetTask, Task } from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function viewsGrid(views: string[]): string {
  if (views.length === 0) return "";
  const cells = views
    .map((v) => `<img class="view" src="${escapeHtml(v)}" alt="rendered view">`)
    .join("");
  return `<div class="views">${cells}</div>`;
}

export function renderAlignment(task: AlignmentTask, selected: number | null): string {
  const cards = task.candidates
    .map((candidate, index) => {
      const cls = selected === index ? "candidate selected" : "candidate";
      return (
        `<button class="${cls}" data-choice="${index}">` +
        `<span class="label">${escapeHtml(candidate.label)}</span>` +
        `<span class="text">${escapeHtml(candidate.text)}</span></button>`
      );
    })
    .join("");
  return (
    viewsGrid(task.views) +
    `<p class="instruction">Pick the caption that best matches the model (keys ` +
    `${task.candidates.map((c) => c.label).join(", ")}).</p>` +
    `<div class="candidates">${cards}</div>`
  );
}

export function renderAccuracy(task: AccuracyTask, verdict: boolean | null): string {
  const yes = verdict === true ? "verdict selected" : "verdict";
  const no = verdict === false ? "verdict selected" : "verdict";
  return (
    viewsGrid(task.views) +
    `<blockquote class="caption">${escapeHtml(task.caption)}</blockquote>` +
    `<p class="instruction">Does every attribute in this caption match the model? (y/n)</p>` +
    `<div class="verdicts">` +
    `<button class="${yes}" data-verdict="true">Yes</button>` +
    `<button class="${no}" data-verdict="false">No</button></div>`
  );
}

export function renderAsset(
  task: AssetTask,
  scores: Record<string, number>,
  activeCriterion: number,
): string {
  const rows = task.criteria
    .map((criterion, index) => {
      const value = scores[criterion];
      const active = index === activeCriterion ? " active" : "";
      return (
        `<div class="criterion${active}" data-criterion="${escapeHtml(criterion)}">` +
        `<label>${escapeHtml(criterion.replace(/_/g, " "))}</label>` +
        `<input type="range" min="1" max="10" step="1" ` +
        `value="${value ?? 5}" data-criterion-input="${escapeHtml(criterion)}">` +
        `<span class="score">${value === undefined ? "-" : value}</span></div>`
      );
    })
    .join("");
  const rendering = task.rendering
    ? `<video class="rendering" src="${escapeHtml(task.rendering)}" controls autoplay loop muted></video>`
    : "";
  return (
    `<p class="prompt">Prompt: ${escapeHtml(task.prompt)}</p>` +
    rendering +
    `<p class="instruction">Score each criterion from 1 to 10 (digit keys set the highlighted row; 0 means 10).</p>` +
    `<div class="criteria">${rows}</div>`
  );
}

export function renderTask(
  task: Task,
  state: {
    choice: number | null;
    verdict: boolean | null;
    scores: Record<string, number>;
    activeCriterion: number;
  },
): string {
  switch (task.mode) {
    case "alignment":
      return renderAlignment(task, state.choice);
    case "accuracy":
      return renderAccuracy(task, state.verdict);
    case "asset":
      return renderAsset(task, state.scores, state.activeCriterion);
  }
}

export function renderEmptyQueue(): string {
  return `<div class="empty">Queue empty — nothing left to rate. Thank you!</div>`;
}

export function renderError(message: string): string {
  return (
    `<div class="banner error">${escapeHtml(message)} ` +
    `<button data-action="retry">Retry</button></div>`
  );
}

export function renderProgress(completed: number, quota: number | null): string {
  const total = quota === null ? "∞" : String(quota);
  const done = quota !== null && completed >= quota ? " done" : "";
  return `<div class="progress${done}">${completed}/${total} rated</div>`;
}

export function renderSubmitBar(canSubmit: boolean): string {
  const disabled = canSubmit ? "" : " disabled";
  return `<button class="submit" data-action="submit"${disabled}>Submit &amp; next</button>`;
}
