// Typed client for the session service JSON API.

export interface QuestionPayload {
  token: string;
  target: string;
  key: string;
  input_id: string;
  render: Record<string, unknown>;
  choices: unknown[] | null;
}

export interface SessionState {
  session_id: string;
  status: "awaiting_answer" | "selecting" | "converged" | "failed";
  hs_count: number;
  rounds: number;
  progress: { stage: string; scored: number; total: number };
  examples: string[];
  question?: QuestionPayload;
  program?: string | null;
  survivors?: string[];
  hs_delta?: { before: number; after: number };
}

export interface TranscriptRound {
  round: number;
  question: { target: string; key: string; input_id: string; qid: number };
  answer: string;
  hs_before: number;
  hs_after: number;
}

export interface Transcript {
  status: string;
  program: string | null;
  survivors: string[];
  rounds: TranscriptRound[];
}

export interface CreateSessionOptions {
  domain: string;
  benchmark?: string;
  seed?: number;
  strategy?: string;
  forced_coverage?: boolean;
  input_count?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class SessionApi {
  constructor(private base: string, private fetchImpl: FetchLike = fetch) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.base}${path}`, init);
    const body = await res.text();
    if (!res.ok) {
      let detail = body;
      try {
        detail = JSON.parse(body).detail ?? body;
      } catch {
        /* plain text error */
      }
      throw new ApiError(res.status, String(detail));
    }
    return JSON.parse(body) as T;
  }

  createSession(opts: CreateSessionOptions): Promise<SessionState> {
    return this.request<SessionState>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(opts),
    });
  }

  getSession(id: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${id}`);
  }

  getQuestion(id: string): Promise<QuestionPayload | { status: string }> {
    return this.request(`/sessions/${id}/question`);
  }

  postAnswer(id: string, token: string, answer: unknown): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${id}/answer`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ token, answer }),
    });
  }

  getTranscript(id: string): Promise<Transcript> {
    return this.request<Transcript>(`/sessions/${id}/transcript`);
  }

  getHypotheses(id: string, offset = 0, limit = 20): Promise<{ count: number; items: string[] }> {
    return this.request(`/sessions/${id}/hypotheses?offset=${offset}&limit=${limit}`);
  }
}
