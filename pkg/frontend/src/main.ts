// Browser entry point: binds the session to the DOM. Rater id persists in
// local storage; everything else lives server-side.

import { ApiClient } from "./api";
import { RaterSession } from "./controller";
import {
  renderEmptyQueue,
  renderError,
  renderProgress,
  renderSubmitBar,
  renderTask,
} from "./render";
import type { Mode } from "./types";

const RATER_KEY = "levelcap.rater";

function raterId(): string {
  let id = localStorage.getItem(RATER_KEY);
  if (!id) {
    id = prompt("Rater id:")?.trim() || `rater-${Math.random().toString(36).slice(2, 8)}`;
    localStorage.setItem(RATER_KEY, id);
  }
  return id;
}

function currentMode(): Mode {
  const param = new URLSearchParams(location.search).get("mode");
  return param === "accuracy" || param === "asset" ? param : "alignment";
}

function redraw(session: RaterSession, root: HTMLElement): void {
  const view = session.snapshot();
  let body: string;
  switch (view.kind) {
    case "loading":
      body = `<div class="loading">Loading…</div>`;
      break;
    case "empty":
      body = renderEmptyQueue();
      break;
    case "error":
      body = renderError(view.errorMessage);
      break;
    case "task":
      body =
        (view.errorMessage ? renderError(view.errorMessage) : "") +
        renderTask(view.task!, view) +
        renderSubmitBar(session.canSubmit());
      break;
  }
  const progress = view.progress
    ? renderProgress(view.progress.completed, view.progress.quota)
    : "";
  root.innerHTML = `<header>${progress}</header><main>${body}</main>`;
}

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const session = new RaterSession(new ApiClient(""), raterId(), currentMode());
  const rerender = () => redraw(session, root);

  root.addEventListener("click", async (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-choice],[data-verdict],[data-action]");
    if (!target) return;
    if (target.dataset.choice !== undefined) {
      session.pickChoice(Number(target.dataset.choice));
    } else if (target.dataset.verdict !== undefined) {
      session.pickVerdict(target.dataset.verdict === "true");
    } else if (target.dataset.action === "submit") {
      await session.submit();
    } else if (target.dataset.action === "retry") {
      await session.loadNext();
    }
    rerender();
  });

  root.addEventListener("input", (event) => {
    const input = event.target as HTMLInputElement;
    const criterion = input.dataset.criterionInput;
    if (criterion) {
      session.setScore(criterion, Number(input.value));
      rerender();
    }
  });

  document.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      void session.submit().then(rerender);
    } else {
      session.handleKey(event.key);
      rerender();
    }
  });

  await session.refreshProgress();
  await session.loadNext();
  rerender();
}

void start();
