// SHAP bars, univariate scatter panels, and the model metrics table.
//
// Everything renders from report sections only; panels whose section is
// absent from the report are skipped rather than failing.

import type { ReportDocument, ShapSection } from "./types.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderShapBars(shap: ShapSection, width = 520, rowHeight = 26): string {
  const contributions = shap.contributions;
  if (!contributions.length) return "";
  const maxAbs = Math.max(...contributions.map((c) => Math.abs(c.phi)), 1e-12);
  const mid = width / 2;
  const height = contributions.length * rowHeight + 30;
  const rows = contributions.map((c, i) => {
    const y = 20 + i * rowHeight;
    const len = (Math.abs(c.phi) / maxAbs) * (width / 2 - 130);
    const x = c.phi >= 0 ? mid : mid - len;
    const fill = c.phi >= 0 ? "#c2554f" : "#1565c0";
    return (
      `<g class="shap-row" data-feature="${esc(c.feature)}">` +
      `<text x="4" y="${y + 13}" class="shap-label">${esc(c.feature)}</text>` +
      `<rect x="${x.toFixed(1)}" y="${y}" width="${Math.max(len, 0.5).toFixed(1)}" height="${rowHeight - 8}" fill="${fill}"/>` +
      `<text x="${(c.phi >= 0 ? x + len + 4 : x - 4).toFixed(1)}" y="${y + 13}" ` +
      `class="shap-value"${c.phi >= 0 ? "" : ' text-anchor="end"'}>${c.phi.toFixed(2)}</text>` +
      `</g>`
    );
  });
  return (
    `<svg class="shap-plot" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">` +
    `<line x1="${mid}" y1="10" x2="${mid}" y2="${height - 10}" stroke="#b0bec5"/>` +
    rows.join("") +
    `</svg>`
  );
}

export function renderScatter(
  feature: string,
  xs: number[],
  ys: number[],
  fit: { slope: number; intercept: number },
  outcomeName: string,
  size = 260,
): string {
  const xmin = Math.min(...xs);
  const xmax = Math.max(...xs);
  const ymin = Math.min(...ys);
  const ymax = Math.max(...ys);
  const pad = 28;
  const sx = (v: number) => pad + ((v - xmin) / (xmax - xmin || 1)) * (size - 2 * pad);
  const sy = (v: number) => size - pad - ((v - ymin) / (ymax - ymin || 1)) * (size - 2 * pad);
  const dots = xs
    .map((x, i) => `<circle cx="${sx(x).toFixed(1)}" cy="${sy(ys[i]).toFixed(1)}" r="2.2" class="dot"/>`)
    .join("");
  const lineY1 = fit.intercept + fit.slope * xmin;
  const lineY2 = fit.intercept + fit.slope * xmax;
  return (
    `<svg class="scatter" data-feature="${esc(feature)}" viewBox="0 0 ${size} ${size}" ` +
    `xmlns="http://www.w3.org/2000/svg">` +
    `<text x="${size / 2}" y="12" class="plot-title" text-anchor="middle">` +
    `${esc(outcomeName)} vs ${esc(feature)}</text>` +
    dots +
    `<line class="fit" x1="${sx(xmin).toFixed(1)}" y1="${sy(lineY1).toFixed(1)}" ` +
    `x2="${sx(xmax).toFixed(1)}" y2="${sy(lineY2).toFixed(1)}" stroke="#c2554f" stroke-width="1.6"/>` +
    `</svg>`
  );
}

export function renderMetricsTable(report: ReportDocument): string {
  const model = report.model;
  const importance = Object.entries(model.importance).sort((a, b) => b[1] - a[1]);
  const rows = importance
    .map(
      ([name, score]) =>
        `<tr><td>${esc(name)}</td><td>${score.toFixed(2)}</td>` +
        `<td>${(report.correlation.rho[name] ?? NaN).toFixed(2)}</td>` +
        `<td>${(report.vif.vif[name] ?? NaN).toFixed(2)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="metrics">` +
    `<thead><tr><th>feature</th><th>importance</th><th>rank corr</th><th>VIF</th></tr></thead>` +
    `<tbody>${rows}</tbody>` +
    `<tfoot><tr><td colspan="4">` +
    `train RMSE ${model.train.rmse.toFixed(3)}, R&#178; ${model.train.r2.toFixed(3)} &#183; ` +
    `test RMSE ${model.test.rmse.toFixed(3)}, R&#178; ${model.test.r2.toFixed(3)} &#183; ` +
    `C=${model.hyper.C}, &#949;=${model.hyper.epsilon}</td></tr></tfoot>` +
    `</table>`
  );
}

export interface PlotPanels {
  regression: string | null;
  shap: string | null;
  model: string;
}

// Researcher role sees every panel; panels absent from the report are null.
export function renderPlots(report: ReportDocument, role: string): PlotPanels | null {
  if (role !== "researcher") {
    return null;
  }
  let regression: string | null = null;
  if (report.plots) {
    const outcome = report.plots.outcome;
    const panels = Object.entries(report.plots.features).map(([feature, xs]) =>
      renderScatter(feature, xs, outcome.values, report.plots!.fit[feature], outcome.column),
    );
    regression = `<div class="scatter-grid">${panels.join("")}</div>`;
  }
  const shap = report.shap ? renderShapBars(report.shap) : null;
  return { regression, shap, model: renderMetricsTable(report) };
}
