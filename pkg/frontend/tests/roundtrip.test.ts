// Integration round trip against the real rating service: serve the built
// bundle, fetch tasks, submit an alignment choice and a four-criterion
// score, and check both land in /api/results. Requires the python package
// (installed in this workspace) and the compiled dist/.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync, readFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { renderAlignment } from "../src/render";
import type { AlignmentTask } from "../src/types";

const PORT = 18000 + Math.floor(Math.random() * 10000);
const BASE = `http://127.0.0.1:${PORT}`;
const FRONTEND_ROOT = resolve(__dirname, "..");

let server: ChildProcess;
let workdir: string;

const tasks = [
  {
    task_id: "al-1",
    mode: "alignment",
    views: [],
    candidates: [
      { source: "hiddenSystemA", text: "a carved oak armchair" },
      { source: "hiddenSystemB", text: "a chair" },
    ],
    shuffle_seed: 21,
  },
  {
    task_id: "as-1",
    mode: "asset",
    prompt: "a chair",
    rendering: "",
  },
];

async function waitForServer(timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/api/results?mode=alignment`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("rating service did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const tasksPath = join(workdir, "tasks.jsonl");
  writeFileSync(tasksPath, tasks.map((t) => JSON.stringify(t)).join("\n") + "\n");
  server = spawn(
    "python3",
    [
      "-m",
      "levelcap.cli",
      "serve",
      "--tasks",
      tasksPath,
      "--ratings-log",
      join(workdir, "ratings.jsonl"),
      "--ui-dir",
      FRONTEND_ROOT,
      "--port",
      String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 30000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("served bundle", () => {
  it("serves index.html at the root", async () => {
    const resp = await fetch(`${BASE}/`);
    expect(resp.status).toBe(200);
    expect(await resp.text()).toContain('<div id="app">');
  });

  it("serves the compiled module bundle", async () => {
    expect(existsSync(join(FRONTEND_ROOT, "dist", "main.js"))).toBe(true);
    const resp = await fetch(`${BASE}/dist/main.js`);
    expect(resp.status).toBe(200);
  });
});

describe("rating round trip", () => {
  const api = new ApiClient(BASE);

  it("fetches a task, renders it without source labels, submits a choice", async () => {
    const task = (await api.fetchNextTask("rater-1", "alignment")) as AlignmentTask;
    expect(task.task_id).toBe("al-1");

    const html = renderAlignment(task, null);
    expect(html).not.toContain("hiddenSystemA");
    expect(html).not.toContain("hiddenSystemB");

    const resp = await api.submitRating(task.task_id, "rater-1", { choice: 0 }, "rt-tok-1");
    expect(resp).toEqual({ ok: true, duplicate: false });

    const results = await api.fetchResults("alignment", "rater-1");
    expect(results["n"]).toBe(1);
    const winRates = results["win_rates"] as Record<string, number>;
    expect(Object.values(winRates).reduce((a, b) => a + b, 0)).toBeCloseTo(100, 1);
    const progress = results["progress"] as { completed: number };
    expect(progress.completed).toBe(1);
  });

  it("submits a four-criterion score and reads it back", async () => {
    const scores = {
      geometric_consistency: 8,
      visual_quality: 7,
      prompt_fidelity: 9,
      overall: 8,
    };
    const resp = await api.submitRating("as-1", "rater-1", { scores }, "rt-tok-2");
    expect(resp.ok).toBe(true);

    const results = await api.fetchResults("asset");
    const scored = results["scores"] as Record<string, { display: string }>;
    expect(scored["overall"].display).toBe("8.00 ± 0.00");
    expect(scored["visual_quality"].display).toBe("7.00 ± 0.00");
  });

  it("double-submit with one idempotency token logs a single rating", async () => {
    const before = readFileSync(join(workdir, "ratings.jsonl"), "utf-8")
      .split("\n")
      .filter((l) => l.includes('"rating"')).length;
    const first = await api.submitRating("al-1", "rater-9", { choice: 1 }, "dup-tok");
    const second = await api.submitRating("al-1", "rater-9", { choice: 1 }, "dup-tok");
    expect(first.duplicate).toBe(false);
    expect(second.duplicate).toBe(true);
    const after = readFileSync(join(workdir, "ratings.jsonl"), "utf-8")
      .split("\n")
      .filter((l) => l.includes('"rating"')).length;
    expect(after - before).toBe(1);
  });

  it("empty queue maps to null", async () => {
    // rater-1 holds al-1; rater-2 exhausts the remaining alignment queue
    expect(await api.fetchNextTask("rater-2", "alignment")).toBeNull();
  });
});
