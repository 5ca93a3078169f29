/** Deterministic force-directed layout for the relationship graph.
 *
 * The layout must be reproducible (same edges, same picture), so the
 * initial placement comes from a seeded generator and the solver runs a
 * fixed number of synchronous steps. Output is an SVG string.
 */

import type { RelationEdge } from "./types.js";

export const VIEW_SIZE = 600;
const MARGIN = 40;
const ITERATIONS = 120;
const SPRING_LENGTH = 140;
const SPRING_K = 0.02;
const REPULSION = 12000;
const STEP = 0.85;

/** Small fast PRNG with full 32-bit state; good enough for layout jitter. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface NodePosition {
  ref: string;
  x: number;
  y: number;
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.max(lo, Math.min(hi, value));
}

export function layoutGraph(
  edges: readonly RelationEdge[],
  seed = 1,
): NodePosition[] {
  const refs = new Set<string>();
  for (const edge of edges) {
    refs.add(edge.a_ref);
    refs.add(edge.b_ref);
  }
  const ordered = [...refs].sort();
  const rand = mulberry32(seed);
  const xs = new Map<string, number>();
  const ys = new Map<string, number>();
  for (const ref of ordered) {
    xs.set(ref, MARGIN + rand() * (VIEW_SIZE - 2 * MARGIN));
    ys.set(ref, MARGIN + rand() * (VIEW_SIZE - 2 * MARGIN));
  }
  for (let step = 0; step < ITERATIONS; step += 1) {
    const fx = new Map<string, number>();
    const fy = new Map<string, number>();
    for (const ref of ordered) {
      fx.set(ref, 0);
      fy.set(ref, 0);
    }
    for (let i = 0; i < ordered.length; i += 1) {
      for (let j = i + 1; j < ordered.length; j += 1) {
        const a = ordered[i]!;
        const b = ordered[j]!;
        const dx = xs.get(a)! - xs.get(b)!;
        const dy = ys.get(a)! - ys.get(b)!;
        const distSq = Math.max(dx * dx + dy * dy, 1);
        const dist = Math.sqrt(distSq);
        const push = REPULSION / distSq;
        fx.set(a, fx.get(a)! + (dx / dist) * push);
        fy.set(a, fy.get(a)! + (dy / dist) * push);
        fx.set(b, fx.get(b)! - (dx / dist) * push);
        fy.set(b, fy.get(b)! - (dy / dist) * push);
      }
    }
    for (const edge of edges) {
      const dx = xs.get(edge.a_ref)! - xs.get(edge.b_ref)!;
      const dy = ys.get(edge.a_ref)! - ys.get(edge.b_ref)!;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = SPRING_K * (dist - SPRING_LENGTH);
      fx.set(edge.a_ref, fx.get(edge.a_ref)! - (dx / dist) * pull);
      fy.set(edge.a_ref, fy.get(edge.a_ref)! - (dy / dist) * pull);
      fx.set(edge.b_ref, fx.get(edge.b_ref)! + (dx / dist) * pull);
      fy.set(edge.b_ref, fy.get(edge.b_ref)! + (dy / dist) * pull);
    }
    for (const ref of ordered) {
      const x = clamp(xs.get(ref)! + STEP * fx.get(ref)!, MARGIN,
        VIEW_SIZE - MARGIN);
      const y = clamp(ys.get(ref)! + STEP * fy.get(ref)!, MARGIN,
        VIEW_SIZE - MARGIN);
      xs.set(ref, x);
      ys.set(ref, y);
    }
  }
  return ordered.map((ref) => ({ ref, x: xs.get(ref)!, y: ys.get(ref)! }));
}

function escapeAttr(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** Stroke width grows linearly with edge weight, floored at 1. */
export function edgeThickness(weight: number, maxWeight: number): number {
  if (maxWeight <= 0) {
    return 1;
  }
  return 1 + 5 * (weight / maxWeight);
}

export function renderGraphSvg(
  edges: readonly RelationEdge[],
  seed = 1,
): string {
  const positions = layoutGraph(edges, seed);
  const byRef = new Map(positions.map((p) => [p.ref, p]));
  const maxWeight = edges.reduce((acc, e) => Math.max(acc, e.weight), 0);
  const lines = edges
    .map((edge) => {
      const a = byRef.get(edge.a_ref)!;
      const b = byRef.get(edge.b_ref)!;
      const width = edgeThickness(edge.weight, maxWeight);
      return (
        `<line x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
        `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" ` +
        `stroke="#8a8a9a" stroke-width="${width.toFixed(2)}">` +
        `<title>${escapeAttr(edge.a_ref)} - ${escapeAttr(edge.b_ref)}: ${edge.weight}</title></line>`
      );
    })
    .join("");
  const dots = positions
    .map(
      (p) =>
        `<g transform="translate(${p.x.toFixed(1)},${p.y.toFixed(1)})">` +
        `<circle r="6" fill="#3b5bdb"></circle>` +
        `<text x="9" y="4" font-size="11">${escapeAttr(p.ref)}</text></g>`,
    )
    .join("");
  return (
    `<svg viewBox="0 0 ${VIEW_SIZE} ${VIEW_SIZE}" xmlns="http://www.w3.org/2000/svg" class="relgraph">` +
    lines +
    dots +
    `</svg>`
  );
}
