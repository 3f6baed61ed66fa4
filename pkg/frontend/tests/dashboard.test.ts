// @vitest-environment jsdom
import { afterEach, describe, expect, it } from "vitest";

import { ROC_DASH_BY_K } from "../src/views/dashboard.js";
import { fixtureReport } from "./fakeService.js";
import { click, mountApp, settle } from "./helpers.js";

afterEach(() => {
  document.body.innerHTML = "";
});

async function loadDashboard() {
  const harness = await mountApp();
  click(harness.root.querySelector(".load-report"));
  await settle();
  return harness;
}

describe("evaluation dashboard", () => {
  it("renders 1.00 in every accuracy cell of the separable-fixture report", async () => {
    const { root } = await loadDashboard();
    const tables = root.querySelectorAll(".accuracy-table");
    expect(tables).toHaveLength(2); // one per task
    for (const table of tables) {
      const cells = table.querySelectorAll(".accuracy-cell");
      expect(cells).toHaveLength(4 * 3); // models x ks
      for (const cell of cells) {
        expect(cell.textContent).toBe("1.00");
        expect(cell.getAttribute("data-value")).toBe("1");
      }
    }
  });

  it("table rows and values come from the report payload", async () => {
    const { root } = await loadDashboard();
    const report = fixtureReport();
    const table = root.querySelector('.accuracy-table[data-task="surgical_diagnosis"]')!;
    const rows = [...table.querySelectorAll("tr[data-model]")];
    expect(rows.map((r) => r.getAttribute("data-model"))).toEqual(report.models);
    for (const row of rows) {
      const model = row.getAttribute("data-model")!;
      const values = [...row.querySelectorAll(".accuracy-cell")].map((c) =>
        Number(c.getAttribute("data-value")),
      );
      expect(values).toEqual([1, 3, 5].map((k) => report.accuracy.surgical_diagnosis[model][String(k)]));
    }
  });

  it("draws one ROC plot per model with solid/dashed/dotted lines for k=1/3/5", async () => {
    const { root } = await loadDashboard();
    const report = fixtureReport();
    const plots = root.querySelectorAll(".roc-plot");
    expect(plots).toHaveLength(report.models.length);
    for (const plot of plots) {
      const lines = [...plot.querySelectorAll(".roc-line")];
      expect(lines.map((l) => l.getAttribute("data-k"))).toEqual(["1", "3", "5"]);
      for (const line of lines) {
        const k = Number(line.getAttribute("data-k"));
        const dash = line.getAttribute("stroke-dasharray");
        expect(dash ?? "").toBe(ROC_DASH_BY_K[k]);
        expect(line.getAttribute("points")).toBeTruthy();
      }
    }
  });

  it("captions carry the report's AUC values", async () => {
    const { root } = await loadDashboard();
    const captions = [...root.querySelectorAll(".roc-caption")].map((c) => c.textContent);
    expect(captions).toHaveLength(4);
    for (const caption of captions) {
      expect(caption).toContain("k=1: 1.00");
      expect(caption).toContain("k=5: 1.00");
    }
  });

  it("renders the error code when the eval run fails", async () => {
    const harness = await mountApp();
    harness.service.failNext.set("/v1/eval/run", { status: 422, code: "empty_evaluation_set" });
    click(harness.root.querySelector(".load-report"));
    await settle();
    expect(harness.root.querySelector("#dashboard .error-code")?.textContent).toBe(
      "empty_evaluation_set",
    );
  });
});
