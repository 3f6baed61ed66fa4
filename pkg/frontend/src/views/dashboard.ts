/** Evaluation dashboard: top-k tables and ROC curves from report data.
 *
 * Accuracy cells and AUC values come straight out of the report JSON;
 * ROC polylines are drawn from the emitted CSV points. Line style per
 * cutoff follows the reporting convention: k=1 solid, k=3 dashed,
 * k=5 dotted.
 */

import { clear, el, formatMetric, svgEl } from "../render.js";
import { parseRocCsv } from "../rocData.js";
import type { ViewState } from "../state.js";

export const ROC_DASH_BY_K: Record<number, string> = {
  1: "",
  3: "8 4",
  5: "2 4",
};

const PLOT_SIZE = 220;
const PLOT_PAD = 10;

export interface DashboardHandlers {
  loadReport: () => void;
}

function accuracyTable(
  task: string,
  models: string[],
  ks: number[],
  byModel: Record<string, Record<string, number>>,
): HTMLElement {
  const table = el("table", { class: "accuracy-table", "data-task": task });
  const head = el("tr", {}, el("th", {}, "model"));
  for (const k of ks) head.append(el("th", {}, `top${k}`));
  table.append(head);
  for (const model of models) {
    const row = el("tr", { "data-model": model }, el("td", {}, model));
    for (const k of ks) {
      const value = byModel[model][String(k)];
      row.append(
        el("td", { class: "accuracy-cell", "data-value": String(value) }, formatMetric(value)),
      );
    }
    table.append(row);
  }
  return table;
}

function rocPlot(model: string, series: ReturnType<typeof parseRocCsv>): SVGElement {
  const svg = svgEl("svg", {
    class: "roc-plot",
    "data-model": model,
    viewBox: `0 0 ${PLOT_SIZE} ${PLOT_SIZE}`,
    width: String(PLOT_SIZE),
    height: String(PLOT_SIZE),
  });
  const scale = PLOT_SIZE - 2 * PLOT_PAD;
  const toX = (fpr: number) => PLOT_PAD + fpr * scale;
  const toY = (tpr: number) => PLOT_SIZE - PLOT_PAD - tpr * scale;
  svg.append(
    svgEl("line", {
      class: "roc-diagonal",
      x1: String(toX(0)), y1: String(toY(0)), x2: String(toX(1)), y2: String(toY(1)),
    }),
  );
  for (const entry of series.filter((s) => s.model === model)) {
    const points = entry.points.map((p) => `${toX(p.fpr)},${toY(p.tpr)}`).join(" ");
    const line = svgEl("polyline", {
      class: "roc-line",
      "data-k": String(entry.k),
      points,
      fill: "none",
    });
    const dash = ROC_DASH_BY_K[entry.k];
    if (dash) line.setAttribute("stroke-dasharray", dash);
    svg.append(line);
  }
  return svg;
}

export function renderDashboard(
  container: HTMLElement,
  state: ViewState,
  handlers: DashboardHandlers,
): void {
  clear(container);
  container.append(el("h2", {}, "Evaluation dashboard"));

  const load = el("button", { class: "load-report" }, "Run evaluation");
  load.addEventListener("click", () => handlers.loadReport());
  container.append(load);

  if (state.error && state.error.retry === "report") {
    container.append(
      el(
        "div",
        { class: "error-banner" },
        el("code", { class: "error-code" }, state.error.code),
        ` ${state.error.message}`,
      ),
    );
    return;
  }
  if (!state.report) {
    container.append(el("p", { class: "hint" }, "No report loaded yet."));
    return;
  }

  const report = state.report;
  const ks = report.config.ks;
  for (const [task, byModel] of Object.entries(report.accuracy)) {
    container.append(el("h3", {}, `Accuracy: ${task}`));
    container.append(accuracyTable(task, report.models, ks, byModel));
  }

  if (state.rocCsv) {
    const series = parseRocCsv(state.rocCsv);
    container.append(el("h3", {}, "ROC (k=1 solid, k=3 dashed, k=5 dotted)"));
    const grid = el("div", { class: "roc-grid" });
    for (const model of report.models) {
      const cell = el("figure", { class: "roc-cell" });
      cell.append(rocPlot(model, series));
      const aucBits = ks
        .map((k) => {
          const entry = report.roc[model][String(k)];
          return `k=${k}: ${formatMetric(entry.auc)}`;
        })
        .join(", ");
      cell.append(el("figcaption", { class: "roc-caption" }, `${model} AUC ${aucBits}`));
      grid.append(cell);
    }
    container.append(grid);
  }

  container.append(
    el("p", { class: "report-hash" }, `report ${report.content_hash.slice(0, 16)}`),
  );
}
