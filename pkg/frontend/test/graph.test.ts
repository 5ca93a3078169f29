import { describe, expect, it } from "vitest";

import {
  edgeThickness,
  layoutGraph,
  mulberry32,
  renderGraphSvg,
  VIEW_SIZE,
} from "../src/graph.js";
import type { RelationEdge } from "../src/types.js";

function edge(a: string, b: string, weight: number): RelationEdge {
  return { kind: "user_doc", a_ref: a, b_ref: b, weight };
}

const EDGES = [
  edge("u1", "d1", 3),
  edge("u1", "d2", 1),
  edge("u2", "d1", 2),
  edge("u3", "d3", 1),
];

describe("mulberry32", () => {
  it("is reproducible for a seed and uniform-ish in [0, 1)", () => {
    const a = mulberry32(42);
    const b = mulberry32(42);
    for (let i = 0; i < 100; i += 1) {
      const value = a();
      expect(b()).toBe(value);
      expect(value).toBeGreaterThanOrEqual(0);
      expect(value).toBeLessThan(1);
    }
    expect(mulberry32(43)()).not.toBe(mulberry32(42)());
  });
});

describe("layoutGraph", () => {
  it("is deterministic for the same edges and seed", () => {
    expect(layoutGraph(EDGES, 7)).toEqual(layoutGraph(EDGES, 7));
  });

  it("positions every endpoint once, inside the viewBox", () => {
    const positions = layoutGraph(EDGES, 7);
    const refs = positions.map((p) => p.ref).sort();
    expect(refs).toEqual(["d1", "d2", "d3", "u1", "u2", "u3"]);
    for (const p of positions) {
      expect(Number.isFinite(p.x)).toBe(true);
      expect(Number.isFinite(p.y)).toBe(true);
      expect(p.x).toBeGreaterThanOrEqual(0);
      expect(p.x).toBeLessThanOrEqual(VIEW_SIZE);
      expect(p.y).toBeGreaterThanOrEqual(0);
      expect(p.y).toBeLessThanOrEqual(VIEW_SIZE);
    }
  });

  it("copes with an empty graph", () => {
    expect(layoutGraph([], 7)).toEqual([]);
  });
});

describe("edgeThickness", () => {
  it("grows with weight and never collapses to zero", () => {
    const max = 5;
    let previous = 0;
    for (let w = 1; w <= max; w += 1) {
      const width = edgeThickness(w, max);
      expect(width).toBeGreaterThan(previous);
      expect(width).toBeGreaterThanOrEqual(1);
      previous = width;
    }
  });

  it("survives a zero max weight", () => {
    expect(edgeThickness(0, 0)).toBe(1);
  });
});

describe("renderGraphSvg", () => {
  it("emits one line per edge and labels every node", () => {
    const svg = renderGraphSvg(EDGES, 7);
    expect(svg.match(/<line /g)).toHaveLength(EDGES.length);
    for (const ref of ["u1", "u2", "u3", "d1", "d2", "d3"]) {
      expect(svg).toContain(`>${ref}</text>`);
    }
    expect(svg).toContain(`viewBox="0 0 ${VIEW_SIZE} ${VIEW_SIZE}"`);
  });

  it("strokes heavier edges wider", () => {
    const svg = renderGraphSvg(EDGES, 7);
    const widths = [...svg.matchAll(/stroke-width="([0-9.]+)"/g)].map((m) =>
      Number(m[1]),
    );
    expect(widths).toHaveLength(4);
    const byWeight = EDGES.map((e, i) => ({ w: e.weight, width: widths[i]! }));
    byWeight.sort((x, y) => x.w - y.w);
    for (let i = 1; i < byWeight.length; i += 1) {
      expect(byWeight[i]!.width).toBeGreaterThanOrEqual(
        byWeight[i - 1]!.width,
      );
    }
  });

  it("is stable across calls", () => {
    expect(renderGraphSvg(EDGES, 7)).toBe(renderGraphSvg(EDGES, 7));
  });
});
