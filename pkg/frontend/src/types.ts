// Wire types mirroring the service's canonical documents.

export type StageName = "exploratory" | "fine_grained";

export interface ScoreRecord {
  criteria: Record<string, number>;
  average: number;
}

export interface NodeRecord {
  id: string;
  parent: string | null;
  stage: StageName;
  text: string;
  step_index: number;
  inspiration_used: string | null;
  abstraction_level: number | null;
  scores: ScoreRecord | null;
  created_by_event: string;
}

export interface TreeDocument {
  root: string;
  active: string;
  nodes: NodeRecord[];
}

export interface SessionSummary {
  session_id: string;
  question: string;
  node_count: number;
  active: string;
  stage_of_active: StageName;
  created_at: number;
  updated_at: number;
}

export interface RankingRow {
  node: string;
  scores: ScoreRecord | null;
}

export interface RankingResponse {
  scope: "leaves" | "all";
  tree_revision: string;
  ranking: RankingRow[];
}

export interface ProgressEvent {
  session_id: string;
  seq: number;
  kind: "GenerationStarted" | "NodeAdded" | "ScoreReady" | "RunCompleted" | "Error";
  payload: Record<string, unknown>;
}

export interface ActPayload {
  node: string;
  feedback?: string;
  next: "explore" | "refine";
}

export interface CreateSessionPayload {
  question: string;
  survey?: string;
  blueprint?: string;
  corpus_id: string;
  llm_config?: {
    mode: "live" | "scripted";
    api_key?: string;
    base_url?: string;
    model?: string;
    script?: Array<{ match: string; text: string }>;
  };
}
