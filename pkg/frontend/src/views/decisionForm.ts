/** Decision form: records the reviewer's diagnosis for the selected case.
 *
 * Draft values live in the store (typing does not re-render the form),
 * so a failed submit keeps everything the reviewer entered. Submission
 * is idempotent per draft: double-clicks and repeats of an already
 * persisted draft do not POST again.
 */

import { clear, el } from "../render.js";
import type { ViewState } from "../state.js";
import type { DraftDecision } from "../state.js";

const BETHESDA = ["I", "II", "III", "IV", "V", "VI"];

export interface DecisionHandlers {
  updateDraft: (patch: Partial<DraftDecision>) => void;
  submitDecision: () => void;
}

export function renderDecisionForm(
  container: HTMLElement,
  state: ViewState,
  handlers: DecisionHandlers,
): void {
  clear(container);
  container.append(el("h2", {}, "Decision"));
  if (!state.selectedCaseId) {
    container.append(el("p", { class: "hint" }, "Select a case to record a decision."));
    return;
  }

  const form = el("form", { class: "decision-form" });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.submitDecision();
  });

  const reviewer = el("input", {
    class: "reviewer-id",
    placeholder: "reviewer id",
    value: state.draft.reviewerId,
  }) as HTMLInputElement;
  reviewer.addEventListener("input", () => handlers.updateDraft({ reviewerId: reviewer.value }));

  const diagnosis = el("input", {
    class: "chosen-diagnosis",
    placeholder: "diagnosis",
    value: state.draft.chosenDiagnosis,
  }) as HTMLInputElement;
  diagnosis.addEventListener("input", () =>
    handlers.updateDraft({ chosenDiagnosis: diagnosis.value }),
  );

  const bethesda = el("select", { class: "chosen-bethesda" }) as HTMLSelectElement;
  for (const category of BETHESDA) {
    const option = el("option", { value: category }, category) as HTMLOptionElement;
    option.selected = category === state.draft.chosenBethesda;
    bethesda.append(option);
  }
  bethesda.addEventListener("change", () =>
    handlers.updateDraft({ chosenBethesda: bethesda.value }),
  );

  const submit = el("button", { class: "submit-decision", type: "submit" }, "Record decision");
  (submit as HTMLButtonElement).disabled = state.submittingDecision;

  form.append(reviewer, diagnosis, bethesda, submit);
  container.append(form);

  if (state.error && state.error.retry === "decision") {
    const banner = el(
      "div",
      { class: "error-banner" },
      el("code", { class: "error-code" }, state.error.code),
      ` ${state.error.message} `,
    );
    const retry = el("button", { class: "retry" }, "Retry");
    retry.addEventListener("click", () => handlers.submitDecision());
    banner.append(retry);
    container.append(banner);
  }

  if (state.decisions.length > 0) {
    const list = el("ul", { class: "decision-list" });
    for (const decision of state.decisions) {
      list.append(
        el(
          "li",
          { class: "decision-row", "data-decision-id": decision.decision_id },
          `${decision.timestamp} ${decision.reviewer_id}: ${decision.chosen_diagnosis} ` +
            `(Bethesda ${decision.chosen_bethesda})`,
        ),
      );
    }
    container.append(el("h3", {}, "Recorded decisions"), list);
  }
}
