/** Payload shapes of the /v1 API. */

export interface CaseMetadata {
  cytology_diagnosis: string;
  surgical_diagnosis: string;
  bethesda: string;
  malignancy: string;
  interpretation: string;
  stain: string;
  magnification: number;
}

export interface CaseSummary {
  case_id: string;
  patient_id: string;
  slide_id: string;
  roi_id: string;
  metadata: CaseMetadata;
  encoders: string[];
}

export interface ContributingHit {
  encoder: string;
  score: number;
  rank: number;
}

export interface NeighborPayload {
  case_id: string;
  rank: number;
  score: number;
  metadata: CaseMetadata;
  encoder?: string;
  contributing?: ContributingHit[];
}

export interface SimilarResponse {
  case_id: string;
  encoder: string;
  k: number;
  exclude: string;
  fusion: string | null;
  neighbors: NeighborPayload[];
}

export interface PromptBundle {
  rendered_text: string;
  template_hash: string;
  example_count: number;
  query_case_id: string;
}

export interface InterpretResponse {
  text: string;
  latency_s: number;
  status: number;
  attempts: number;
  bundle: PromptBundle;
}

export interface DecisionRecord {
  decision_id: string;
  timestamp: string;
  case_id: string;
  reviewer_id: string;
  chosen_diagnosis: string;
  chosen_bethesda: string;
  neighbors_shown: string[];
  llm_response_digest: string;
}

export type DecisionDraft = Omit<DecisionRecord, "decision_id" | "timestamp">;

export interface RocEntry {
  auc: number;
  n_cases: number;
  fpr: number[];
  tpr: number[];
  thresholds: number[];
}

export interface ReportPayload {
  schema_version: number;
  content_hash: string;
  n_cases: number;
  models: string[];
  config: { ks: number[]; tasks: string[]; exclusion_mode: string };
  accuracy: Record<string, Record<string, Record<string, number>>>;
  evaluated_cases: Record<string, Record<string, number>>;
  roc: Record<string, Record<string, RocEntry>>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}

export type ExclusionMode = "none" | "same_case" | "same_patient";
export type FusionMode = "raw" | "rrf";
