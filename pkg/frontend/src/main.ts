// Browser shell: wires the selection form, graph view, plots, and
// recommendation pane to the gateway API. All statistics come from the
// API; this file only renders responses.

import { GatewayClient } from "./api.js";
import { renderGraphOrBanner } from "./graphView.js";
import { renderPlots } from "./plots.js";
import { buildRequest, exploreEnabled, validateSelections } from "./selection.js";
import { TooltipController } from "./tooltip.js";
import type { Aim, Granularity, Level, ReportDocument, Role, ViewState } from "./types.js";
import { initialViewState } from "./types.js";

const client = new GatewayClient("");
const state: ViewState = initialViewState();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function refreshExploreButton(): void {
  const button = el<HTMLButtonElement>("explore");
  button.disabled = !exploreEnabled(state);
  const messages = validateSelections(state)
    .map((e) => e.message)
    .join(" ");
  el("form-errors").textContent = button.disabled ? messages : "";
}

function readForm(): void {
  state.role = el<HTMLSelectElement>("role").value as Role;
  state.outcome = el<HTMLSelectElement>("outcome").value || null;
  state.aim = (el<HTMLSelectElement>("aim").value || null) as Aim | null;
  state.level = (el<HTMLSelectElement>("level").value || null) as Level | null;
  state.location = el<HTMLInputElement>("location").value;
  state.granularity = (el<HTMLSelectElement>("granularity").value || null) as Granularity | null;
  state.sdohFilters = Array.from(
    el<HTMLSelectElement>("sdoh").selectedOptions,
  ).map((option) => option.value);
  state.seed = Number(el<HTMLInputElement>("seed").value) || 0;
}

async function explore(): Promise<void> {
  readForm();
  if (!exploreEnabled(state)) return;
  el("status").textContent = "Running analysis...";
  try {
    const { id } = await client.createAnalysis(buildRequest(state));
    state.activeAnalysisId = id;
    const report = await client.report(id);
    renderReport(report);
    el("status").textContent = `Analysis ${id.slice(0, 12)}`;
  } catch (err) {
    el("status").textContent = String(err);
  }
}

function renderReport(report: ReportDocument): void {
  const pathway =
    state.highlightedPathway !== null ? report.pathways[state.highlightedPathway] : report.pathways[0];
  el("graph-pane").innerHTML = renderGraphOrBanner(report.graph, {
    highlightPathway: pathway ?? null,
  });
  attachGraphHandlers();

  const pathwayList = report.pathways
    .map(
      (p, i) =>
        `<li data-pathway="${i}" class="${i === (state.highlightedPathway ?? 0) ? "active" : ""}">` +
        `${p.kind} (score ${p.score.toFixed(2)})</li>`,
    )
    .join("");
  el("pathways").innerHTML = `<ol>${pathwayList}</ol>`;
  for (const item of el("pathways").querySelectorAll("li")) {
    item.addEventListener("click", () => {
      state.highlightedPathway = Number(item.getAttribute("data-pathway"));
      renderReport(report);
    });
  }

  const panels = renderPlots(report, state.role);
  el("plots-pane").hidden = panels === null;
  if (panels) {
    const tab = state.plotTab;
    const body =
      tab === "shap" ? panels.shap : tab === "model" ? panels.model : panels.regression;
    el("plot-tabs").innerHTML = (["regression", "shap", "model"] as const)
      .filter((name) => panels[name] !== null)
      .map(
        (name) =>
          `<button data-tab="${name}" class="${name === tab ? "active" : ""}">${name}</button>`,
      )
      .join("");
    for (const button of el("plot-tabs").querySelectorAll("button")) {
      button.addEventListener("click", () => {
        state.plotTab = button.getAttribute("data-tab") as ViewState["plotTab"];
        renderReport(report);
      });
    }
    el("plot-body").innerHTML = body ?? "<p>No data for this tab.</p>";
  }

  el("summary-pane").innerHTML =
    `<h3>Recommendations</h3>` +
    (report.recommendations.length
      ? `<ul>${report.recommendations
          .map((r) => `<li>${r.text} <span class="sources">[${r.sources.join(", ")}]</span></li>`)
          .join("")}</ul>`
      : "<p>No derived recommendations for this subject.</p>") +
    `<h3>Risk levels</h3><p>` +
    (["low", "medium", "high"] as const)
      .map(
        (band) =>
          `${band}: ${report.risk_levels.filter((r) => r.band === band).length} tracts`,
      )
      .join(" &#183; ") +
    `</p>`;
}

function attachGraphHandlers(): void {
  if (!state.activeAnalysisId) return;
  const tooltipBox = el("tooltip");
  const tooltips = new TooltipController(
    client,
    state.activeAnalysisId,
    (text) => {
      tooltipBox.textContent = text;
      tooltipBox.hidden = false;
    },
    () => {
      tooltipBox.hidden = true;
    },
  );
  for (const group of el("graph-pane").querySelectorAll<SVGGElement>("[data-edge-id]")) {
    group.addEventListener("mouseenter", () =>
      tooltips.hover("edge", group.getAttribute("data-edge-id")!),
    );
    group.addEventListener("mouseleave", () => tooltips.leave());
  }
  for (const group of el("graph-pane").querySelectorAll<SVGGElement>("[data-node-id]")) {
    group.addEventListener("mouseenter", () =>
      tooltips.hover("node", group.getAttribute("data-node-id")!),
    );
    group.addEventListener("mouseleave", () => tooltips.leave());
  }
  el("graph-pane").addEventListener("mousemove", (event) => {
    tooltipBox.style.left = `${event.pageX + 14}px`;
    tooltipBox.style.top = `${event.pageY + 10}px`;
  });
}

function init(): void {
  for (const id of ["role", "outcome", "aim", "level", "granularity", "sdoh"]) {
    el(id).addEventListener("change", () => {
      readForm();
      refreshExploreButton();
    });
  }
  for (const id of ["location", "seed"]) {
    el(id).addEventListener("input", () => {
      readForm();
      refreshExploreButton();
    });
  }
  el("explore").addEventListener("click", () => void explore());
  client
    .health()
    .then((h) => (el("status").textContent = `Connected (engine ${h.version})`))
    .catch(() => (el("status").textContent = "Gateway unreachable"));
  readForm();
  refreshExploreButton();
}

window.addEventListener("load", init);
