import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderAccuracy,
  renderAlignment,
  renderAsset,
  renderEmptyQueue,
  renderError,
  renderProgress,
  renderSubmitBar,
} from "../src/render";
import type { AccuracyTask, AlignmentTask, AssetTask } from "../src/types";

const alignmentTask: AlignmentTask = {
  task_id: "t1",
  mode: "alignment",
  views: ["/assets/a/front.png", "/assets/a/back.png", "/assets/a/left.png", "/assets/a/right.png"],
  candidates: [
    { label: "A", text: "a wooden chair" },
    { label: "B", text: "a chair" },
  ],
};

const accuracyTask: AccuracyTask = {
  task_id: "t2",
  mode: "accuracy",
  views: ["/assets/a/front.png"],
  caption: "a red <script>cube</script>",
};

const assetTask: AssetTask = {
  task_id: "t3",
  mode: "asset",
  prompt: "a chair",
  rendering: "/assets/a.mp4",
  criteria: ["geometric_consistency", "visual_quality", "prompt_fidelity", "overall"],
};

describe("renderAlignment", () => {
  it("renders four views and one card per candidate", () => {
    const html = renderAlignment(alignmentTask, null);
    expect(html.match(/<img/g)).toHaveLength(4);
    expect(html.match(/data-choice=/g)).toHaveLength(2);
  });

  it("shows only anonymized labels, never source systems", () => {
    const html = renderAlignment(alignmentTask, null);
    // labels as served are the only identifiers rendered
    expect(html).toContain(">A</span>");
    expect(html).toContain(">B</span>");
    expect(html.toLowerCase()).not.toContain("source");
    expect(html.toLowerCase()).not.toContain("hidden");
    expect(html).not.toContain("task_id");
  });

  it("keeps candidate order exactly as served", () => {
    const html = renderAlignment(alignmentTask, null);
    expect(html.indexOf("a wooden chair")).toBeLessThan(html.indexOf("a chair<"));
  });

  it("marks the selected candidate", () => {
    const html = renderAlignment(alignmentTask, 1);
    expect(html).toContain('class="candidate selected" data-choice="1"');
  });
});

describe("renderAccuracy", () => {
  it("escapes caption text", () => {
    const html = renderAccuracy(accuracyTask, null);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });

  it("marks the chosen verdict", () => {
    expect(renderAccuracy(accuracyTask, false)).toContain(
      'class="verdict selected" data-verdict="false"',
    );
  });
});

describe("renderAsset", () => {
  it("renders one slider per criterion", () => {
    const html = renderAsset(assetTask, {}, 0);
    expect(html.match(/type="range"/g)).toHaveLength(4);
    expect(html).toContain('min="1"');
    expect(html).toContain('max="10"');
  });

  it("shows set scores and dashes for unset ones", () => {
    const html = renderAsset(assetTask, { visual_quality: 7 }, 0);
    expect(html).toContain('<span class="score">7</span>');
    expect(html).toContain('<span class="score">-</span>');
  });
});

describe("chrome", () => {
  it("empty queue screen", () => {
    expect(renderEmptyQueue()).toContain("Queue empty");
  });

  it("error banner offers retry", () => {
    const html = renderError("boom & gloom");
    expect(html).toContain('data-action="retry"');
    expect(html).toContain("boom &amp; gloom");
  });

  it("progress shows completed over quota", () => {
    expect(renderProgress(0, 200)).toContain("0/200");
    expect(renderProgress(200, 200)).toContain('class="progress done"');
    expect(renderProgress(3, null)).toContain("3/∞");
  });

  it("submit bar disabled until complete", () => {
    expect(renderSubmitBar(false)).toContain("disabled");
    expect(renderSubmitBar(true)).not.toContain("disabled");
  });
});

describe("escapeHtml", () => {
  it("handles all special characters", () => {
    expect(escapeHtml(`<a href="x">&'</a>`)).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&#39;&lt;/a&gt;",
    );
  });
});
