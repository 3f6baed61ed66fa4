/** Case browser: pick the query case. */

import { clear, el } from "../render.js";
import type { ViewState } from "../state.js";

export interface CaseBrowserHandlers {
  selectCase: (caseId: string) => void;
}

export function renderCaseBrowser(
  container: HTMLElement,
  state: ViewState,
  handlers: CaseBrowserHandlers,
): void {
  clear(container);
  container.append(el("h2", {}, `Cases (${state.cases.length})`));
  const list = el("ul", { class: "case-list" });
  for (const item of state.cases) {
    const selected = item.case_id === state.selectedCaseId;
    const row = el(
      "li",
      {
        class: selected ? "case-row selected" : "case-row",
        "data-case-id": item.case_id,
      },
      el("span", { class: "case-id" }, item.case_id),
      el("span", { class: "case-patient" }, item.patient_id),
      el("span", { class: "case-bethesda" }, `Bethesda ${item.metadata.bethesda}`),
      el("span", { class: "case-dx" }, item.metadata.surgical_diagnosis),
    );
    row.addEventListener("click", () => handlers.selectCase(item.case_id));
    list.append(row);
  }
  container.append(list);
}
