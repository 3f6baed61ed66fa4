/** Single mutable view state with change notification.
 *
 * The displayed neighbor list always corresponds to the most recent
 * (case, model, k, exclusion) selection: fetches are tokenized through a
 * latest-request-wins gate and stale responses are discarded by the app.
 */

import type {
  CaseSummary,
  DecisionRecord,
  ExclusionMode,
  FusionMode,
  InterpretResponse,
  NeighborPayload,
  PromptBundle,
  ReportPayload,
} from "./types.js";

export interface ErrorView {
  code: string;
  message: string;
  /** which action to re-run from the error banner */
  retry: "neighbors" | "decision" | "report" | "prompt" | null;
}

export interface DraftDecision {
  reviewerId: string;
  chosenDiagnosis: string;
  chosenBethesda: string;
}

export interface ViewState {
  cases: CaseSummary[];
  encoders: string[];
  selectedCaseId: string | null;
  model: string; // encoder id or "ensemble"
  fusion: FusionMode;
  k: number;
  exclusion: ExclusionMode;
  loadingNeighbors: boolean;
  neighbors: NeighborPayload[] | null;
  bundle: PromptBundle | null;
  llmResponse: InterpretResponse | null;
  draft: DraftDecision;
  decisions: DecisionRecord[];
  submittingDecision: boolean;
  lastSubmittedKey: string | null;
  report: ReportPayload | null;
  rocCsv: string | null;
  error: ErrorView | null;
}

export function initialState(): ViewState {
  return {
    cases: [],
    encoders: [],
    selectedCaseId: null,
    model: "ensemble",
    fusion: "raw",
    k: 5,
    exclusion: "same_case",
    loadingNeighbors: false,
    neighbors: null,
    bundle: null,
    llmResponse: null,
    draft: { reviewerId: "", chosenDiagnosis: "", chosenBethesda: "III" },
    decisions: [],
    submittingDecision: false,
    lastSubmittedKey: null,
    report: null,
    rocCsv: null,
    error: null,
  };
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState;
  private listeners: Listener[] = [];

  constructor(state: ViewState = initialState()) {
    this.state = state;
  }

  get(): ViewState {
    return this.state;
  }

  set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
