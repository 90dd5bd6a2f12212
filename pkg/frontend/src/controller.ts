// Session state machine driving one active-learning session.
//
// The controller never invents answer choices: perception answers must be a
// member of the served choice set, IO answers are free-form values checked
// against the payload's answer schema. Every state change round-trips through
// the API (no optimistic updates), and history is append-only.

import { ApiError, CreateSessionOptions, QuestionPayload, SessionApi, SessionState } from "./api.js";

export interface HistoryEntry {
  round: number;
  target: string;
  key: string;
  answer: unknown;
  hsBefore: number;
  hsAfter: number;
}

export interface ControllerView {
  status: SessionState["status"] | "idle" | "error";
  hsCount: number;
  question: QuestionPayload | null;
  program: string | null;
  sampledPrograms: string[];
  history: HistoryEntry[];
  progress: { stage: string; scored: number; total: number } | null;
  error: string | null;
}

const POLL_MS = 150;

export class SessionController {
  private sessionId: string | null = null;
  private state: SessionState | null = null;
  private history: HistoryEntry[] = [];
  private lastError: string | null = null;
  private submitting = false;

  constructor(private api: SessionApi,
              private sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms))) {}

  get id(): string | null {
    return this.sessionId;
  }

  view(): ControllerView {
    return {
      status: this.lastError ? "error" : this.state?.status ?? "idle",
      hsCount: this.state?.hs_count ?? 0,
      question: this.state?.question ?? null,
      program: this.state?.program ?? null,
      sampledPrograms: this.state?.examples ?? [],
      history: [...this.history],
      progress: this.state?.progress ?? null,
      error: this.lastError,
    };
  }

  async start(opts: CreateSessionOptions): Promise<ControllerView> {
    this.state = await this.api.createSession(opts);
    this.sessionId = this.state.session_id;
    this.history = [];
    this.lastError = null;
    await this.waitWhileSelecting();
    return this.view();
  }

  private async waitWhileSelecting(): Promise<void> {
    while (this.state && this.state.status === "selecting") {
      await this.sleep(POLL_MS);
      this.state = await this.api.getSession(this.sessionId!);
    }
  }

  choices(): unknown[] | null {
    return this.state?.question?.choices ?? null;
  }

  /** Submit the answer for the pending question. Rejects answers outside the
   * served choice set before any network traffic. */
  async submit(answer: unknown): Promise<ControllerView> {
    const q = this.state?.question;
    if (!q) {
      this.lastError = "no pending question";
      return this.view();
    }
    if (q.choices !== null && !q.choices.some((c) => deepEqual(c, answer))) {
      this.lastError = `answer ${JSON.stringify(answer)} is not among the offered choices`;
      return this.view();
    }
    if (this.submitting) {
      // double-submit guard on the client side; the server's question token
      // rejects whichever copy arrives second anyway
      this.lastError = "an answer is already in flight";
      return this.view();
    }
    this.submitting = true;
    const token = q.token;
    try {
      const next = await this.api.postAnswer(this.sessionId!, token, answer);
      this.recordRound(q, answer, next);
      this.state = next;
      this.lastError = null;
      await this.waitWhileSelecting();
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
        // surface inline and re-sync without losing the session
        this.lastError = err.detail;
        this.state = await this.api.getSession(this.sessionId!);
      } else if (err instanceof TypeError) {
        // network failure: the question token is preserved, so a retry of the
        // same answer is safe
        this.lastError = "network failure; retry will reuse the same question";
      } else {
        throw err;
      }
    } finally {
      this.submitting = false;
    }
    return this.view();
  }

  /** Retry the last failed submission with the same question token. */
  async retry(answer: unknown): Promise<ControllerView> {
    this.lastError = null;
    return this.submit(answer);
  }

  private recordRound(q: QuestionPayload, answer: unknown, next: SessionState): void {
    this.history.push({
      round: this.history.length,
      target: q.target,
      key: q.key,
      answer,
      hsBefore: next.hs_delta?.before ?? this.state?.hs_count ?? 0,
      hsAfter: next.hs_delta?.after ?? next.hs_count,
    });
  }

  async refresh(): Promise<ControllerView> {
    if (this.sessionId) {
      this.state = await this.api.getSession(this.sessionId);
    }
    return this.view();
  }
}

function deepEqual(a: unknown, b: unknown): boolean {
  if (Object.is(a, b)) return true;
  if (Array.isArray(a) && Array.isArray(b)) {
    return a.length === b.length && a.every((x, i) => deepEqual(x, b[i]));
  }
  return false;
}
