/** Thin typed client over the /v1 JSON API.
 *
 * Every failure becomes an ApiError: HTTP errors keep the service's
 * machine code, transport failures get code "network_error" so views can
 * offer a retry without losing local state.
 */

import type {
  ApiErrorBody,
  CaseSummary,
  DecisionDraft,
  DecisionRecord,
  ExclusionMode,
  FusionMode,
  InterpretResponse,
  PromptBundle,
  ReportPayload,
  SimilarResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details?: Record<string, unknown>;

  constructor(code: string, message: string, status: number, details?: Record<string, unknown>) {
    super(message);
    this.code = code;
    this.status = status;
    this.details = details;
  }
}

export interface SimilarParams {
  caseId: string;
  encoder: string;
  k: number;
  exclude: ExclusionMode;
  fusion: FusionMode;
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly token: string | null = null,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = { ...((init?.headers as Record<string, string>) ?? {}) };
    if (init?.body) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, { ...init, headers });
    } catch (err) {
      throw new ApiError("network_error", err instanceof Error ? err.message : String(err), 0);
    }
    if (!response.ok) {
      let body: ApiErrorBody = { code: `http_${response.status}`, message: response.statusText };
      try {
        const parsed = (await response.json()) as { error?: ApiErrorBody };
        if (parsed.error) body = parsed.error;
      } catch {
        // non-JSON error body: keep the status-based code
      }
      throw new ApiError(body.code, body.message, response.status, body.details);
    }
    return (await response.json()) as T;
  }

  private async requestText(path: string): Promise<string> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, { headers });
    } catch (err) {
      throw new ApiError("network_error", err instanceof Error ? err.message : String(err), 0);
    }
    if (!response.ok) {
      throw new ApiError(`http_${response.status}`, response.statusText, response.status);
    }
    return response.text();
  }

  health(): Promise<{ status: string; store_version: number; n_cases: number }> {
    return this.request("/v1/health");
  }

  encoders(): Promise<{ encoders: Record<string, number> }> {
    return this.request("/v1/encoders");
  }

  listCases(limit = 1000): Promise<{ total: number; cases: CaseSummary[] }> {
    return this.request(`/v1/cases?limit=${limit}`);
  }

  getCase(caseId: string): Promise<CaseSummary> {
    return this.request(`/v1/cases/${encodeURIComponent(caseId)}`);
  }

  similar(params: SimilarParams): Promise<SimilarResponse> {
    const query = new URLSearchParams({
      encoder: params.encoder,
      k: String(params.k),
      exclude: params.exclude,
      fusion: params.fusion,
    });
    return this.request(`/v1/cases/${encodeURIComponent(params.caseId)}/similar?${query}`);
  }

  prompt(params: SimilarParams & { templateId?: string }): Promise<PromptBundle> {
    return this.request("/v1/prompt", {
      method: "POST",
      body: JSON.stringify({
        case_id: params.caseId,
        k: params.k,
        model: params.encoder,
        fusion: params.fusion,
        exclude: params.exclude,
        template_id: params.templateId ?? null,
      }),
    });
  }

  interpret(bundle: PromptBundle): Promise<InterpretResponse> {
    return this.request("/v1/interpret", {
      method: "POST",
      body: JSON.stringify({ bundle }),
    });
  }

  postDecision(draft: DecisionDraft): Promise<DecisionRecord> {
    return this.request("/v1/decisions", { method: "POST", body: JSON.stringify(draft) });
  }

  decisions(caseId: string): Promise<{ decisions: DecisionRecord[] }> {
    return this.request(`/v1/decisions?case_id=${encodeURIComponent(caseId)}`);
  }

  runEval(): Promise<{ report_id: string; content_hash: string }> {
    return this.request("/v1/eval/run", { method: "POST", body: JSON.stringify({}) });
  }

  report(reportId: string): Promise<ReportPayload> {
    return this.request(`/v1/eval/reports/${encodeURIComponent(reportId)}`);
  }

  reportRocCsv(reportId: string): Promise<string> {
    return this.requestText(`/v1/eval/reports/${encodeURIComponent(reportId)}/roc.csv`);
  }
}
