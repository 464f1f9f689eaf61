// Knowledge-graph SVG renderer.
//
// Pure: graph document in, SVG markup out. The browser shell injects the
// markup and attaches hover/click handlers through the data-* attributes,
// which keeps this module testable without a DOM.

import { layoutGraph } from "./layout.js";
import type { GraphDocument, Pathway } from "./types.js";

export const NAMESPACE_COLORS: Record<string, string> = {
  DO: "#c2554f",
  COPE: "#2e7d32",
  GISO: "#1565c0",
  HIO: "#6a4fb3",
  ACESO: "#b26a00",
  local: "#546e7a",
};

const PATH_COLOR = "#d32f2f";

export interface RenderOptions {
  width?: number;
  height?: number;
  highlightPathway?: Pathway | null;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function edgeClass(origin: string, onPath: boolean): string {
  const classes = ["edge", `edge-${origin}`];
  if (onPath) classes.push("on-path");
  return classes.join(" ");
}

function edgeStyle(origin: string, onPath: boolean): string {
  if (onPath) return `stroke="${PATH_COLOR}" stroke-width="2.5"`;
  if (origin === "inferred") return 'stroke="#7b1fa2" stroke-width="1.5" stroke-dasharray="6 3"';
  if (origin === "ml_derived") return 'stroke="#00796b" stroke-width="1.5" stroke-dasharray="2 3"';
  return 'stroke="#90a4ae" stroke-width="1.2"';
}

export function renderGraphSvg(doc: GraphDocument, options: RenderOptions = {}): string {
  const width = options.width ?? 960;
  const height = options.height ?? 600;
  const positions = layoutGraph(doc, width, height);
  const onPath = new Set(options.highlightPathway?.edges ?? []);

  const parts: string[] = [];
  parts.push(
    `<svg class="graph" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">`,
  );
  parts.push(
    '<defs><marker id="arrow" viewBox="0 0 10 10" refX="22" refY="5" ' +
      'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
      '<path d="M 0 0 L 10 5 L 0 10 z" fill="#90a4ae"/></marker></defs>',
  );

  for (const edge of doc.edges) {
    const a = positions.get(edge.src);
    const b = positions.get(edge.dst);
    if (!a || !b) continue;
    const mx = (a.x + b.x) / 2;
    const my = (a.y + b.y) / 2;
    parts.push(
      `<g class="${edgeClass(edge.origin, onPath.has(edge.id))}" ` +
        `data-edge-id="${esc(edge.id)}" data-rel="${esc(edge.rel)}">` +
        `<line x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
        `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" ` +
        `${edgeStyle(edge.origin, onPath.has(edge.id))} marker-end="url(#arrow)"/>` +
        `<text x="${mx.toFixed(1)}" y="${(my - 4).toFixed(1)}" class="edge-label">` +
        `${esc(edge.rel)}</text></g>`,
    );
  }

  for (const node of doc.nodes) {
    const p = positions.get(node.id)!;
    const color = NAMESPACE_COLORS[node.ns] ?? NAMESPACE_COLORS.local;
    const radius = node.kind === "concept" ? 14 : 11;
    const ring = node.highlighted
      ? `<circle r="${radius + 4}" fill="none" stroke="#fbc02d" stroke-width="3" class="highlight-ring"/>`
      : "";
    const shape =
      node.kind === "metric"
        ? `<rect x="${-radius}" y="${-radius * 0.7}" width="${radius * 2}" height="${radius * 1.4}" rx="3" fill="${color}"/>`
        : `<circle r="${radius}" fill="${color}"${node.kind === "concept" ? "" : ' fill-opacity="0.75"'}/>`;
    parts.push(
      `<g class="node node-${node.kind}${node.highlighted ? " highlighted" : ""}" ` +
        `data-node-id="${esc(node.id)}" data-ns="${esc(node.ns)}" ` +
        `transform="translate(${p.x.toFixed(1)},${p.y.toFixed(1)})">` +
        ring +
        shape +
        `<text y="${radius + 12}" class="node-label">${esc(node.label)}</text>` +
        `<title>${esc(node.ns)}</title></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

// A schema problem should show a banner, never a blank screen.
export function renderGraphOrBanner(doc: unknown, options: RenderOptions = {}): string {
  const valid =
    typeof doc === "object" &&
    doc !== null &&
    Array.isArray((doc as GraphDocument).nodes) &&
    Array.isArray((doc as GraphDocument).edges) &&
    (doc as GraphDocument).nodes.every(
      (n) => typeof n?.id === "string" && typeof n?.kind === "string",
    );
  if (!valid) {
    return '<div class="banner error">The graph document did not match the expected schema.</div>';
  }
  return renderGraphSvg(doc as GraphDocument, options);
}
