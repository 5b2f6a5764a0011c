/** Typed client for the questionnaire service API.
 *
 * The fetch implementation is injected so tests can run the flows
 * against a recording fake without a browser or a live server. The
 * client does no interpretation of its own: every payload is returned
 * exactly as the service produced it.
 */

export interface QuestionnaireSummary {
  id: string;
  condition: string;
  k: number;
  auc: number;
  n_questions: number;
  n_paths: number;
}

export interface PathStep {
  question: string;
  answer: string;
}

export interface SessionState {
  session_id: string;
  questionnaire_id: string;
  step: number;
  terminal: boolean;
  path: PathStep[];
  question?: { id: string; text: string };
  leaf_id?: string;
  probability?: number;
}

export interface SheetItem {
  item_id: string;
  path_id: string;
  steps: PathStep[];
}

export interface Sheet {
  questionnaire_id: string;
  condition: string;
  rater: string;
  seed: number;
  items: SheetItem[];
}

/** A 1-5 plausibility score or the not-enough-information literal. */
export type Score = number | "NEI";

export interface RaterRow {
  rater: string;
  n_scored: number;
  n_not_enough_info: number;
  correlation: number | null;
  reliability: number | null;
}

export interface ValidationReport {
  condition: string;
  raters: RaterRow[];
  average_correlation: number | null;
  average_reliability: number | null;
  pooled_correlation: number | null;
  conflicts: string[][];
}

export interface ReportPayload {
  questionnaire_id: string;
  seed: number;
  report: ValidationReport;
  tsv: string;
}

/** The slice of the fetch response the client actually uses. */
export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<HttpResponse>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function detailOf(response: HttpResponse): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return `request failed with status ${response.status}`;
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchImpl: FetchLike,
    public raterToken: string | null = null,
  ) {}

  private async request(method: string, path: string, body?: unknown, withToken = false): Promise<unknown> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (withToken && this.raterToken) headers["X-Rater-Token"] = this.raterToken;
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return response.json();
  }

  listQuestionnaires(): Promise<QuestionnaireSummary[]> {
    return this.request("GET", "/api/questionnaires") as Promise<QuestionnaireSummary[]>;
  }

  startSession(questionnaireId: string): Promise<SessionState> {
    return this.request("POST", "/api/sessions", {
      questionnaire_id: questionnaireId,
    }) as Promise<SessionState>;
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/api/sessions/${sessionId}`) as Promise<SessionState>;
  }

  /** Post one answer; `step` is the step the client is answering, so a
   * stale tab gets a 409 instead of silently double-answering. */
  answer(sessionId: string, answer: "yes" | "no", step: number): Promise<SessionState> {
    return this.request("POST", `/api/sessions/${sessionId}/answers`, {
      answer,
      step,
    }) as Promise<SessionState>;
  }

  getSheet(questionnaireId: string, rater: string, seed: number): Promise<Sheet> {
    const query = `rater=${encodeURIComponent(rater)}&seed=${seed}`;
    return this.request(
      "GET", `/api/validation/${questionnaireId}/sheet?${query}`, undefined, true,
    ) as Promise<Sheet>;
  }

  submitScores(
    questionnaireId: string,
    rater: string,
    seed: number,
    scores: { item_id: string; score: Score }[],
  ): Promise<{ accepted: number }> {
    return this.request(
      "POST", `/api/validation/${questionnaireId}/scores`,
      { rater, seed, scores }, true,
    ) as Promise<{ accepted: number }>;
  }

  getReport(questionnaireId: string, seed?: number): Promise<ReportPayload> {
    const query = seed === undefined ? "" : `?seed=${seed}`;
    return this.request(
      "GET", `/api/validation/${questionnaireId}/report${query}`, undefined, true,
    ) as Promise<ReportPayload>;
  }
}
