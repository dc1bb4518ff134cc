// HTTP client limited to the documented service endpoints. Every request
// is validated against the allow-list below, so a path outside the
// contract fails loudly in development and in the contract tests.

import type {
  ActPayload,
  CreateSessionPayload,
  RankingResponse,
  SessionSummary,
  TreeDocument,
} from "./types";

const ALLOWED_ENDPOINTS: Array<[string, RegExp]> = [
  ["POST", /^\/corpora$/],
  ["POST", /^\/sessions$/],
  ["GET", /^\/sessions$/],
  ["GET", /^\/sessions\/[^/]+\/tree$/],
  ["GET", /^\/sessions\/[^/]+\/ranking(\?.*)?$/],
  ["POST", /^\/sessions\/[^/]+\/act$/],
  ["GET", /^\/sessions\/[^/]+\/events(\?.*)?$/],
  ["GET", /^\/sessions\/[^/]+\/export$/],
];

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function assertAllowed(method: string, path: string): void {
  const ok = ALLOWED_ENDPOINTS.some(
    ([m, pattern]) => m === method && pattern.test(path),
  );
  if (!ok) {
    throw new Error(`endpoint not in the documented contract: ${method} ${path}`);
  }
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    readonly baseUrl: string = "",
  ) {}

  private async request<T>(method: string, path: string, body?: BodyInit,
                           contentType?: string): Promise<T> {
    assertAllowed(method, path);
    const headers: Record<string, string> = {};
    if (contentType) headers["Content-Type"] = contentType;
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  uploadCorpus(text: string): Promise<{ corpus_id: string; entries: number }> {
    return this.request("POST", "/corpora", text, "application/octet-stream");
  }

  createSession(payload: CreateSessionPayload): Promise<SessionSummary> {
    return this.request("POST", "/sessions", JSON.stringify(payload),
                        "application/json");
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/sessions");
  }

  fetchTree(sessionId: string): Promise<TreeDocument> {
    return this.request("GET", `/sessions/${sessionId}/tree`);
  }

  fetchRanking(sessionId: string,
               scope: "leaves" | "all"): Promise<RankingResponse> {
    return this.request("GET", `/sessions/${sessionId}/ranking?scope=${scope}`);
  }

  act(sessionId: string, payload: ActPayload): Promise<{ job_id: string }> {
    return this.request("POST", `/sessions/${sessionId}/act`,
                        JSON.stringify(payload), "application/json");
  }

  eventsUrl(sessionId: string, after: number): string {
    const path = `/sessions/${sessionId}/events?after=${after}&follow=true`;
    assertAllowed("GET", path);
    return this.baseUrl + path;
  }
}
