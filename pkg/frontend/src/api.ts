/**
 * Typed client for the risknexus HTTP API.
 *
 * Every piece of risk logic lives on the server; this module only shapes
 * requests and responses. The fetch implementation is injectable so the
 * whole client is testable against an in-memory fake service.
 */

export interface Risk {
  id: string;
  tag: string;
  name: string;
  description: string;
  concern: string;
  category: string;
  descriptor: string | null;
  dimension: string | null;
  taxonomy: string;
  uri: string | null;
}

export interface QuestionOption {
  value: string;
  label: string;
}

export interface Question {
  id: string;
  text: string;
  kind: "boolean" | "single-choice" | "multi-choice" | "free-text";
  options: QuestionOption[];
  tags: string[];
}

export type AnswerValue = string | string[];
export type AnswerMap = Record<string, AnswerValue>;

export interface QuestionnaireSummary {
  id: string;
  name: string;
  version: string;
  questions: number;
  rules: number;
}

export interface QuestionnaireDetail {
  id: string;
  name: string;
  version: string;
  questions: Question[];
}

export interface Profile {
  statuses: Record<string, string>;
  triggering_rules: Record<string, string[]>;
  tier: string;
  tier_rule_ids: string[];
  questionnaire_id: string;
  questionnaire_version: string;
  generated_at: string;
  partial: boolean;
  conflicts: Record<string, string[]>;
}

export interface AssessmentRecord {
  id: string;
  created_at: string;
  updated_at: string;
  use_case_text: string;
  attrs: Record<string, string>;
  questionnaire_id: string;
  questionnaire_version: string;
  answers: AnswerMap;
  profile: Profile | null;
  revision: number;
  next_questions?: Question[];
}

export interface RankedRisk {
  risk_id: string;
  score: number;
  method: string;
  rationale: string;
}

export interface RankResult {
  ranked: RankedRisk[];
  warnings: string[];
}

export interface RelatedEntry {
  risk: Risk;
  predicate: string;
  strength: number;
  confidence: number;
  path: Array<{
    subject: string;
    predicate: string;
    object: string;
    source: string;
    line: number;
  }>;
}

export interface LinkedDetector {
  id: string;
  name: string;
  detector_dimension: string | null;
  via: string | null;
}

export interface LinkedAction {
  id: string;
  name: string;
  description: string;
  source: string | null;
  via: string | null;
}

export interface Mitigations {
  detectors: LinkedDetector[];
  actions: LinkedAction[];
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  details: unknown[];
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: unknown[];

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.details = envelope.details ?? [];
  }

  get isRevisionConflict(): boolean {
    return this.status === 409 && this.code === "revision_conflict";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface PrioritizeScope {
  taxonomy?: string;
  category?: string;
  dimension?: string;
  descriptor?: string;
  text?: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    options: { body?: unknown; ifMatch?: number } = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    let body: string | undefined;
    if (options.body !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.body);
    }
    if (options.ifMatch !== undefined) {
      headers["If-Match"] = String(options.ifMatch);
    }
    const response = await this.fetchImpl(this.baseUrl + path, { method, headers, body });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, payload as ErrorEnvelope);
    }
    return payload as T;
  }

  health(): Promise<{ status: string; risks: number }> {
    return this.request("GET", "/health");
  }

  listRisks(filters: PrioritizeScope = {}): Promise<{ risks: Risk[] }> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value) params.set(key, value);
    }
    const query = params.toString();
    return this.request("GET", query ? `/risks?${query}` : "/risks");
  }

  getRisk(key: string): Promise<Risk> {
    return this.request("GET", `/risks/${encodeURIComponent(key)}`);
  }

  related(key: string, hops = 2, minStrength = 1): Promise<{ related: RelatedEntry[] }> {
    return this.request(
      "GET",
      `/risks/${encodeURIComponent(key)}/related?hops=${hops}&min_strength=${minStrength}`,
    );
  }

  mitigations(key: string, includeRelated = false): Promise<Mitigations> {
    return this.request(
      "GET",
      `/risks/${encodeURIComponent(key)}/mitigations?include_related=${includeRelated}`,
    );
  }

  prioritize(useCase: string, topK: number, scope: PrioritizeScope = {}): Promise<RankResult> {
    return this.request("POST", "/prioritize", {
      body: { use_case: useCase, top_k: topK, scope },
    });
  }

  listQuestionnaires(): Promise<{ questionnaires: QuestionnaireSummary[] }> {
    return this.request("GET", "/questionnaires");
  }

  getQuestionnaire(id: string): Promise<QuestionnaireDetail> {
    return this.request("GET", `/questionnaires/${encodeURIComponent(id)}`);
  }

  createAssessment(
    useCaseText: string,
    attrs: Record<string, string>,
    questionnaireId?: string,
  ): Promise<AssessmentRecord> {
    const body: Record<string, unknown> = { use_case_text: useCaseText, attrs };
    if (questionnaireId) body.questionnaire_id = questionnaireId;
    return this.request("POST", "/assessments", { body });
  }

  getAssessment(id: string): Promise<AssessmentRecord> {
    return this.request("GET", `/assessments/${encodeURIComponent(id)}`);
  }

  submitAnswers(id: string, answers: AnswerMap, revision: number): Promise<AssessmentRecord> {
    return this.request("POST", `/assessments/${encodeURIComponent(id)}/answers`, {
      body: { answers },
      ifMatch: revision,
    });
  }

  evaluate(id: string, revision: number): Promise<AssessmentRecord> {
    return this.request("POST", `/assessments/${encodeURIComponent(id)}/evaluate`, {
      ifMatch: revision,
    });
  }

  getProfile(id: string): Promise<Profile> {
    return this.request("GET", `/assessments/${encodeURIComponent(id)}/profile`);
  }

  exportUrl(format: "json-graph" | "ntriples"): string {
    return `${this.baseUrl}/export?format=${format}`;
  }
}
