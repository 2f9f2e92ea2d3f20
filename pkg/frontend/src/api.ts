// Thin fetch wrapper around the evaluation service API.

import type { Mode, RatingPayload, SubmitResponse, Task } from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  /** Next task for the rater, or null when the queue is empty (204). */
  async fetchNextTask(rater: string, mode: Mode): Promise<Task | null> {
    const params = new URLSearchParams({ rater, mode });
    const resp = await fetch(this.url(`/api/tasks/next?${params}`));
    if (resp.status === 204) return null;
    if (!resp.ok) throw new ApiError(resp.status, `task fetch failed: ${resp.status}`);
    return (await resp.json()) as Task;
  }

  async submitRating(
    taskId: string,
    rater: string,
    payload: RatingPayload,
    submissionId: string,
  ): Promise<SubmitResponse> {
    const resp = await fetch(this.url("/api/ratings"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        task_id: taskId,
        rater,
        payload,
        submission_id: submissionId,
      }),
    });
    if (!resp.ok) throw new ApiError(resp.status, `rating rejected: ${resp.status}`);
    return (await resp.json()) as SubmitResponse;
  }

  async fetchResults(mode: Mode, rater?: string): Promise<Record<string, unknown>> {
    const params = new URLSearchParams({ mode });
    if (rater) params.set("rater", rater);
    const resp = await fetch(this.url(`/api/results?${params}`));
    if (!resp.ok) throw new ApiError(resp.status, `results fetch failed: ${resp.status}`);
    return (await resp.json()) as Record<string, unknown>;
  }
}
