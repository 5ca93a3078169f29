import { describe, expect, it } from "vitest";

import { AnnotationList, gateDraft } from "../src/state.js";
import type { AnnotationRecord } from "../src/types.js";

const BODY = "a quiet page of accounting notes";

function record(ref: string, createdAt: number): AnnotationRecord {
  return {
    context_ref: ref,
    origin_system: "local",
    annotator_ref: "u1",
    anchor: {
      document_ref: "d1",
      start_offset: 2,
      end_offset: 7,
      quoted_text: BODY.slice(2, 7),
      placement: "in_margin",
    },
    ann_type: "text",
    objective: "evaluation",
    body_text: `note ${ref}`,
    approach: "new",
    session_ref: "s1",
    created_at: createdAt,
    visibility: "server_shared",
  };
}

describe("gateDraft", () => {
  it("stays closed without a document", () => {
    const gate = gateDraft(null, null, { start: 1, end: 4 }, false);
    expect(gate.enabled).toBe(false);
    expect(gate.anchor).toBeNull();
  });

  it("stays closed with no selection and no whole-document toggle", () => {
    expect(gateDraft("d1", BODY, null, false).enabled).toBe(false);
  });

  it("stays closed on a collapsed selection", () => {
    expect(gateDraft("d1", BODY, { start: 5, end: 5 }, false).enabled).toBe(
      false,
    );
  });

  it("opens on a live selection and mirrors it as the quote", () => {
    const gate = gateDraft("d1", BODY, { start: 2, end: 7 }, false);
    expect(gate.enabled).toBe(true);
    expect(gate.quotedText).toBe(BODY.slice(2, 7));
    expect(gate.anchor?.quoted_text).toBe(BODY.slice(2, 7));
  });

  it("opens on the whole-document toggle with an empty quote", () => {
    const gate = gateDraft("d1", BODY, null, true);
    expect(gate.enabled).toBe(true);
    expect(gate.quotedText).toBe("");
    expect(gate.anchor?.placement).toBe("whole_document");
  });

  it("whole-document wins over a selection when toggled", () => {
    const gate = gateDraft("d1", BODY, { start: 2, end: 7 }, true);
    expect(gate.anchor?.placement).toBe("whole_document");
  });
});

describe("AnnotationList", () => {
  it("keeps server ordering verbatim", () => {
    const list = new AnnotationList();
    const rows = [record("a3", 30), record("a1", 10), record("a2", 20)];
    list.setFromServer(rows);
    expect(list.items.map((r) => r.context_ref)).toEqual(["a3", "a1", "a2"]);
  });

  it("commit swaps the provisional row for the server record", () => {
    const list = new AnnotationList();
    list.setFromServer([record("a1", 10)]);
    const token = list.beginOptimistic(record("(saving)", 99));
    expect(list.items.map((r) => r.context_ref)).toEqual(["a1", "(saving)"]);
    const saved = record("a2", 99);
    list.commit(token, saved);
    expect(list.items.map((r) => r.context_ref)).toEqual(["a1", "a2"]);
    expect(list.items[1]).toEqual(saved);
  });

  it("rollback restores the exact prior list", () => {
    const list = new AnnotationList();
    const before = [record("a1", 10), record("a2", 20)];
    list.setFromServer(before);
    const snapshot = list.items.slice();
    const token = list.beginOptimistic(record("(saving)", 99));
    list.rollback(token);
    expect(list.items).toEqual(snapshot);
  });

  it("allows one in-flight create at a time", () => {
    const list = new AnnotationList();
    list.beginOptimistic(record("(saving)", 1));
    expect(() => list.beginOptimistic(record("(again)", 2))).toThrow(
      /in flight/,
    );
  });

  it("rejects a stale token", () => {
    const list = new AnnotationList();
    const token = list.beginOptimistic(record("(saving)", 1));
    list.rollback(token);
    expect(() => list.commit(token, record("a9", 9))).toThrow(/token/);
  });
});
