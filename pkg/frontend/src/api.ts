/**
 * Typed client for the annotation service.
 *
 * Every number shown anywhere in the console comes out of these responses
 * untouched; the client never recomputes scores, probabilities, or accuracy.
 */

export interface BatchCard {
  id: number;
  payload: string | null;
  score: number;
  probs: number[];
}

export interface BatchResponse {
  session_id: string;
  round: number;
  phase: string;
  class_names: string[];
  batch: BatchCard[];
}

export interface RoundRecord {
  round: number;
  labeled: number;
  accuracy: number | null;
  mean_loss: number | null;
  selected_ids: number[];
  wall_time: number | null;
}

export interface MetricsResponse {
  session_id: string;
  phase: string;
  labeled: number;
  unlabeled: number;
  class_names: string[];
  rounds: RoundRecord[];
}

export interface SubmitResponse {
  session_id: string;
  phase: string;
  record: RoundRecord;
  labeled: number;
  unlabeled: number;
}

export interface CreateResponse {
  session_id: string;
  phase: string;
  labeled: number;
  unlabeled: number;
  class_names: string[];
}

/** Error body shape the service guarantees: {"error": code, "detail": text}. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code} (${status}): ${detail}`);
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = "UnknownError";
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (body.error) code = body.error;
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body; keep the status text */
  }
  throw new ApiError(response.status, code, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async createSession(body: Record<string, unknown> = {}): Promise<CreateResponse> {
    const response = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parse<CreateResponse>(response);
  }

  /** POST next-batch: trains if needed and stages the next top-K. */
  async nextBatch(sessionId: string): Promise<BatchResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/batch`), {
      method: "POST",
    });
    return parse<BatchResponse>(response);
  }

  /** GET the currently staged batch without touching training. */
  async stagedBatch(sessionId: string): Promise<BatchResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/batch`));
    return parse<BatchResponse>(response);
  }

  async submitLabels(
    sessionId: string,
    labels: Record<string, number>,
  ): Promise<SubmitResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/labels`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, labels }),
    });
    return parse<SubmitResponse>(response);
  }

  async metrics(sessionId: string): Promise<MetricsResponse> {
    const response = await this.fetchImpl(this.url(`/sessions/${sessionId}/metrics`));
    return parse<MetricsResponse>(response);
  }
}
