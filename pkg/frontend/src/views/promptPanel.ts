/** Prompt assembly and LLM interpretation view. */

import { clear, el } from "../render.js";
import type { ViewState } from "../state.js";

export interface PromptHandlers {
  assemblePrompt: () => void;
  interpret: () => void;
}

export function renderPromptPanel(
  container: HTMLElement,
  state: ViewState,
  handlers: PromptHandlers,
): void {
  clear(container);
  container.append(el("h2", {}, "Prompt & interpretation"));

  const assemble = el("button", { class: "assemble-prompt" }, "Assemble prompt");
  (assemble as HTMLButtonElement).disabled = !state.selectedCaseId;
  assemble.addEventListener("click", () => handlers.assemblePrompt());
  container.append(assemble);

  if (state.error && state.error.retry === "prompt") {
    container.append(
      el(
        "div",
        { class: "error-banner" },
        el("code", { class: "error-code" }, state.error.code),
        ` ${state.error.message}`,
      ),
    );
  }

  if (state.bundle) {
    container.append(
      el(
        "div",
        { class: "bundle-meta" },
        `${state.bundle.example_count} examples, template ${state.bundle.template_hash.slice(0, 12)}`,
      ),
      el("pre", { class: "bundle-text" }, state.bundle.rendered_text),
    );
    const interpret = el("button", { class: "interpret" }, "Interpret");
    interpret.addEventListener("click", () => handlers.interpret());
    container.append(interpret);
  }

  if (state.llmResponse) {
    container.append(
      el(
        "div",
        { class: "llm-meta" },
        `status ${state.llmResponse.status}, attempts ${state.llmResponse.attempts}`,
      ),
      el("pre", { class: "llm-text" }, state.llmResponse.text),
    );
  }
}
