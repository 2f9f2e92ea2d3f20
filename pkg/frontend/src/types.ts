// Task shapes as served by the evaluation service. Candidates arrive
// shuffled and letter-labeled; the client never sees source systems and
// never re-sorts.

export type Mode = "alignment" | "accuracy" | "asset";

export interface AlignmentCandidate {
  label: string;
  text: string;
}

export interface AlignmentTask {
  task_id: string;
  mode: "alignment";
  views: string[];
  candidates: AlignmentCandidate[];
}

export interface AccuracyTask {
  task_id: string;
  mode: "accuracy";
  views: string[];
  caption: string;
}

export interface AssetTask {
  task_id: string;
  mode: "asset";
  prompt: string;
  rendering: string;
  criteria: string[];
}

export type Task = AlignmentTask | AccuracyTask | AssetTask;

export interface RatingPayload {
  choice?: number;
  verdict?: boolean;
  scores?: Record<string, number>;
}

export interface SubmitResponse {
  ok: boolean;
  duplicate: boolean;
}

export interface ProgressInfo {
  rater: string;
  completed: number;
  quota: number | null;
}
