/** Composition root: wires the API client, view state, and sections.
 *
 * Sections re-render only when their state slice changes; neighbor
 * fetches run through a latest-request-wins gate so switching case,
 * model, k, or exclusion mid-flight can never show a stale list. All
 * metrics and scores are server-computed; the UI only formats them.
 */

import { ApiClient, ApiError } from "./api.js";
import { createLatestRequestGate } from "./gate.js";
import { el } from "./render.js";
import { Store } from "./state.js";
import type { DraftDecision, ViewState } from "./state.js";
import type { ExclusionMode, FusionMode } from "./types.js";
import { renderCaseBrowser } from "./views/caseBrowser.js";
import { renderDashboard } from "./views/dashboard.js";
import { renderDecisionForm } from "./views/decisionForm.js";
import { renderPromptPanel } from "./views/promptPanel.js";
import { renderSimilarityPanel } from "./views/similarityPanel.js";

export interface App {
  store: Store;
  actions: Actions;
}

export interface Actions {
  boot: () => Promise<void>;
  selectCase: (caseId: string) => Promise<void>;
  setModel: (model: string) => Promise<void>;
  setFusion: (fusion: FusionMode) => Promise<void>;
  setK: (k: number) => Promise<void>;
  setExclusion: (mode: ExclusionMode) => Promise<void>;
  refreshNeighbors: () => Promise<void>;
  assemblePrompt: () => Promise<void>;
  interpret: () => Promise<void>;
  updateDraft: (patch: Partial<DraftDecision>) => void;
  submitDecision: () => Promise<void>;
  loadReport: () => Promise<void>;
}

function errorView(err: unknown, retry: "neighbors" | "decision" | "report" | "prompt" | null) {
  if (err instanceof ApiError) {
    return { code: err.code, message: err.message, retry };
  }
  return { code: "internal_error", message: String(err), retry };
}

export function createApp(api: ApiClient, root: HTMLElement): App {
  const store = new Store();
  const gate = createLatestRequestGate();

  const sections = {
    browser: el("section", { id: "case-browser" }),
    similarity: el("section", { id: "similarity-panel" }),
    prompt: el("section", { id: "prompt-panel" }),
    decision: el("section", { id: "decision-form" }),
    dashboard: el("section", { id: "dashboard" }),
  };
  root.append(
    sections.browser,
    sections.similarity,
    sections.prompt,
    sections.decision,
    sections.dashboard,
  );

  const actions: Actions = {
    async boot() {
      const [encoders, cases] = await Promise.all([api.encoders(), api.listCases()]);
      store.set({ encoders: Object.keys(encoders.encoders).sort(), cases: cases.cases });
    },

    async selectCase(caseId: string) {
      store.set({
        selectedCaseId: caseId,
        neighbors: null,
        bundle: null,
        llmResponse: null,
        decisions: [],
        lastSubmittedKey: null,
        error: null,
      });
      await Promise.all([actions.refreshNeighbors(), refreshDecisions()]);
    },

    async setModel(model: string) {
      store.set({ model, neighbors: null, bundle: null, llmResponse: null });
      await actions.refreshNeighbors();
    },

    async setFusion(fusion: FusionMode) {
      store.set({ fusion, neighbors: null });
      await actions.refreshNeighbors();
    },

    async setK(k: number) {
      store.set({ k, neighbors: null });
      await actions.refreshNeighbors();
    },

    async setExclusion(exclusion: ExclusionMode) {
      store.set({ exclusion, neighbors: null });
      await actions.refreshNeighbors();
    },

    async refreshNeighbors() {
      const state = store.get();
      if (!state.selectedCaseId) return;
      const token = gate.next();
      store.set({ loadingNeighbors: true, error: null });
      try {
        const response = await api.similar({
          caseId: state.selectedCaseId,
          encoder: state.model,
          k: state.k,
          exclude: state.exclusion,
          fusion: state.fusion,
        });
        if (!gate.isLatest(token)) return; // stale response: drop it
        store.set({ neighbors: response.neighbors, loadingNeighbors: false });
      } catch (err) {
        if (!gate.isLatest(token)) return;
        store.set({ loadingNeighbors: false, error: errorView(err, "neighbors") });
      }
    },

    async assemblePrompt() {
      const state = store.get();
      if (!state.selectedCaseId) return;
      try {
        const bundle = await api.prompt({
          caseId: state.selectedCaseId,
          encoder: state.model,
          k: state.k,
          exclude: state.exclusion,
          fusion: state.fusion,
        });
        store.set({ bundle, llmResponse: null, error: null });
      } catch (err) {
        store.set({ error: errorView(err, "prompt") });
      }
    },

    async interpret() {
      const state = store.get();
      if (!state.bundle) return;
      try {
        const llmResponse = await api.interpret(state.bundle);
        store.set({ llmResponse, error: null });
      } catch (err) {
        store.set({ error: errorView(err, "prompt") });
      }
    },

    updateDraft(patch: Partial<DraftDecision>) {
      store.set({ draft: { ...store.get().draft, ...patch } });
    },

    async submitDecision() {
      const state = store.get();
      if (!state.selectedCaseId || state.submittingDecision) return;
      const neighborsShown = (state.neighbors ?? []).map((n) => n.case_id);
      const draftKey = JSON.stringify([state.selectedCaseId, state.draft, neighborsShown]);
      if (draftKey === state.lastSubmittedKey) return; // already persisted this draft
      store.set({ submittingDecision: true, error: null });
      try {
        await api.postDecision({
          case_id: state.selectedCaseId,
          reviewer_id: state.draft.reviewerId,
          chosen_diagnosis: state.draft.chosenDiagnosis,
          chosen_bethesda: state.draft.chosenBethesda,
          neighbors_shown: neighborsShown,
          llm_response_digest: state.llmResponse
            ? state.llmResponse.text.slice(-16)
            : "",
        });
        store.set({ submittingDecision: false, lastSubmittedKey: draftKey });
        await refreshDecisions();
      } catch (err) {
        // Draft stays in state so nothing typed is lost.
        store.set({ submittingDecision: false, error: errorView(err, "decision") });
      }
    },

    async loadReport() {
      try {
        const run = await api.runEval();
        const [report, rocCsv] = await Promise.all([
          api.report(run.report_id),
          api.reportRocCsv(run.report_id),
        ]);
        store.set({ report, rocCsv, error: null });
      } catch (err) {
        store.set({ error: errorView(err, "report") });
      }
    },
  };

  async function refreshDecisions() {
    const caseId = store.get().selectedCaseId;
    if (!caseId) return;
    const response = await api.decisions(caseId);
    if (store.get().selectedCaseId === caseId) {
      store.set({ decisions: response.decisions });
    }
  }

  // Section-level rendering keyed on the slice each section displays.
  // The decision form's slice excludes the draft, so typing never
  // rebuilds the inputs under the reviewer's cursor.
  const slices: Record<keyof typeof sections, (s: ViewState) => unknown[]> = {
    browser: (s) => [s.cases, s.selectedCaseId],
    similarity: (s) => [
      s.encoders, s.model, s.fusion, s.k, s.exclusion, s.neighbors,
      s.loadingNeighbors, s.selectedCaseId, s.error?.retry === "neighbors" ? s.error : null,
    ],
    prompt: (s) => [
      s.bundle, s.llmResponse, s.selectedCaseId,
      s.error?.retry === "prompt" ? s.error : null,
    ],
    decision: (s) => [
      s.selectedCaseId, s.decisions, s.submittingDecision, s.lastSubmittedKey,
      s.error?.retry === "decision" ? s.error : null,
    ],
    dashboard: (s) => [s.report, s.rocCsv, s.error?.retry === "report" ? s.error : null],
  };
  const previous: Partial<Record<keyof typeof sections, unknown[]>> = {};

  function renderSection(name: keyof typeof sections, state: ViewState) {
    const slice = slices[name](state);
    const before = previous[name];
    if (before && before.length === slice.length && before.every((v, i) => v === slice[i])) {
      return;
    }
    previous[name] = slice;
    switch (name) {
      case "browser":
        renderCaseBrowser(sections.browser, state, { selectCase: actions.selectCase });
        break;
      case "similarity":
        renderSimilarityPanel(sections.similarity, state, {
          setModel: actions.setModel,
          setFusion: actions.setFusion,
          setK: actions.setK,
          setExclusion: actions.setExclusion,
          retryNeighbors: actions.refreshNeighbors,
        });
        break;
      case "prompt":
        renderPromptPanel(sections.prompt, state, {
          assemblePrompt: actions.assemblePrompt,
          interpret: actions.interpret,
        });
        break;
      case "decision":
        renderDecisionForm(sections.decision, state, {
          updateDraft: actions.updateDraft,
          submitDecision: actions.submitDecision,
        });
        break;
      case "dashboard":
        renderDashboard(sections.dashboard, state, { loadReport: actions.loadReport });
        break;
    }
  }

  store.subscribe((state) => {
    for (const name of Object.keys(sections) as Array<keyof typeof sections>) {
      renderSection(name, state);
    }
  });
  for (const name of Object.keys(sections) as Array<keyof typeof sections>) {
    renderSection(name, store.get());
  }

  return { store, actions };
}
