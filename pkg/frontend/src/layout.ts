// Deterministic force-directed layout.
//
// Positions are seeded from a hash of each node id and relaxed with a
// fixed number of spring/repulsion iterations, so the same graph document
// always lays out identically (reproducible screenshots, stable tests).

import type { GraphDocument } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

function hash32(text: string): number {
  // FNV-1a
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export function seededPosition(id: string, width: number, height: number): Point {
  const h = hash32(id);
  const x = ((h & 0xffff) / 0xffff) * (width * 0.8) + width * 0.1;
  const y = (((h >>> 16) & 0xffff) / 0xffff) * (height * 0.8) + height * 0.1;
  return { x, y };
}

export function layoutGraph(
  doc: GraphDocument,
  width = 960,
  height = 600,
  iterations = 120,
): Map<string, Point> {
  const positions = new Map<string, Point>();
  for (const node of doc.nodes) {
    positions.set(node.id, seededPosition(node.id, width, height));
  }
  const ids = doc.nodes.map((n) => n.id);
  const springLength = Math.min(width, height) / 4;

  for (let step = 0; step < iterations; step++) {
    const cool = 1 - step / iterations;
    const forces = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));

    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = positions.get(ids[i])!;
        const b = positions.get(ids[j])!;
        const dx = a.x - b.x;
        const dy = a.y - b.y;
        const dist2 = Math.max(dx * dx + dy * dy, 1);
        const push = (springLength * springLength) / dist2;
        const dist = Math.sqrt(dist2);
        const fx = (dx / dist) * push;
        const fy = (dy / dist) * push;
        const fa = forces.get(ids[i])!;
        const fb = forces.get(ids[j])!;
        fa.x += fx;
        fa.y += fy;
        fb.x -= fx;
        fb.y -= fy;
      }
    }
    for (const edge of doc.edges) {
      const a = positions.get(edge.src);
      const b = positions.get(edge.dst);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = (dist - springLength) / dist / 8;
      const fa = forces.get(edge.src)!;
      const fb = forces.get(edge.dst)!;
      fa.x += dx * pull;
      fa.y += dy * pull;
      fb.x -= dx * pull;
      fb.y -= dy * pull;
    }
    for (const id of ids) {
      const p = positions.get(id)!;
      const f = forces.get(id)!;
      p.x = Math.min(width - 30, Math.max(30, p.x + f.x * cool));
      p.y = Math.min(height - 24, Math.max(24, p.y + f.y * cool));
    }
  }
  return positions;
}
