/** Similarity panel: per-encoder tabs plus an ensemble tab.
 *
 * Every number shown is a service value: raw scores land in data-score
 * attributes and are only formatted (4 decimals) for display.
 */

import { clear, el, formatScore } from "../render.js";
import type { ViewState } from "../state.js";
import type { ExclusionMode, FusionMode } from "../types.js";

export interface SimilarityHandlers {
  setModel: (model: string) => void;
  setFusion: (fusion: FusionMode) => void;
  setK: (k: number) => void;
  setExclusion: (mode: ExclusionMode) => void;
  retryNeighbors: () => void;
}

export function renderSimilarityPanel(
  container: HTMLElement,
  state: ViewState,
  handlers: SimilarityHandlers,
): void {
  clear(container);
  container.append(el("h2", {}, "Similar cases"));

  const tabs = el("div", { class: "tabs", role: "tablist" });
  for (const model of [...state.encoders, "ensemble"]) {
    const active = model === state.model;
    const tab = el(
      "button",
      { class: active ? "tab active" : "tab", "data-model": model, role: "tab" },
      model,
    );
    tab.addEventListener("click", () => handlers.setModel(model));
    tabs.append(tab);
  }
  container.append(tabs);

  const controls = el("div", { class: "controls" });
  const kSelect = el("select", { class: "k-select", "aria-label": "neighbors" });
  for (const k of [1, 3, 5, 10]) {
    const option = el("option", { value: String(k) }, `k=${k}`) as HTMLOptionElement;
    option.selected = k === state.k;
    kSelect.append(option);
  }
  kSelect.addEventListener("change", () => handlers.setK(Number(kSelect.value)));
  controls.append(kSelect);

  const exclusionSelect = el("select", { class: "exclusion-select", "aria-label": "exclusion" });
  for (const mode of ["none", "same_case", "same_patient"] as const) {
    const option = el("option", { value: mode }, `exclude ${mode}`) as HTMLOptionElement;
    option.selected = mode === state.exclusion;
    exclusionSelect.append(option);
  }
  exclusionSelect.addEventListener("change", () =>
    handlers.setExclusion(exclusionSelect.value as ExclusionMode),
  );
  controls.append(exclusionSelect);

  if (state.model === "ensemble") {
    const fusionSelect = el("select", { class: "fusion-select", "aria-label": "fusion" });
    for (const fusion of ["raw", "rrf"] as const) {
      const option = el("option", { value: fusion }, `fusion ${fusion}`) as HTMLOptionElement;
      option.selected = fusion === state.fusion;
      fusionSelect.append(option);
    }
    fusionSelect.addEventListener("change", () =>
      handlers.setFusion(fusionSelect.value as FusionMode),
    );
    controls.append(fusionSelect);
  }
  container.append(controls);

  if (state.error && state.error.retry === "neighbors") {
    const banner = el(
      "div",
      { class: "error-banner" },
      el("code", { class: "error-code" }, state.error.code),
      ` ${state.error.message} `,
    );
    const retry = el("button", { class: "retry" }, "Retry");
    retry.addEventListener("click", () => handlers.retryNeighbors());
    banner.append(retry);
    container.append(banner);
    return;
  }

  if (!state.selectedCaseId) {
    container.append(el("p", { class: "hint" }, "Select a case to retrieve neighbors."));
    return;
  }
  if (state.loadingNeighbors || state.neighbors === null) {
    container.append(el("p", { class: "hint" }, "Loading neighbors..."));
    return;
  }

  const cards = el("div", { class: "neighbor-cards" });
  for (const neighbor of state.neighbors) {
    const card = el(
      "div",
      {
        class: "neighbor-card",
        "data-case-id": neighbor.case_id,
        "data-rank": String(neighbor.rank),
        "data-score": String(neighbor.score),
      },
      el("div", { class: "neighbor-head" },
        el("span", { class: "neighbor-rank" }, `#${neighbor.rank}`),
        el("span", { class: "neighbor-id" }, neighbor.case_id),
        el("span", { class: "neighbor-score" }, formatScore(neighbor.score)),
      ),
      el("div", { class: "neighbor-dx" }, `Diagnosis: ${neighbor.metadata.cytology_diagnosis}`),
      el("div", { class: "neighbor-surgical" }, `Surgical: ${neighbor.metadata.surgical_diagnosis}`),
      el("div", { class: "neighbor-bethesda" }, `Bethesda: ${neighbor.metadata.bethesda}`),
      el("div", { class: "neighbor-note" }, neighbor.metadata.interpretation),
    );
    if (neighbor.contributing) {
      const parts = neighbor.contributing
        .map((hit) => `${hit.encoder} #${hit.rank} ${formatScore(hit.score)}`)
        .join(" | ");
      card.append(el("div", { class: "neighbor-contributing" }, parts));
    }
    cards.append(card);
  }
  container.append(cards);
}
