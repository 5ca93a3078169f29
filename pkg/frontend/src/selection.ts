/** Turn a text selection in the reader into an annotation anchor.
 *
 * Offsets come from the DOM and can arrive reversed or out of range, so
 * this normalizes first. The invariant worth stating outright: the
 * quoted_text is always exactly body.slice(start, end) of the normalized
 * pair, never a cached copy of what the user appeared to select.
 */

import type { Anchor, Placement } from "./types.js";

export interface NormalizedSpan {
  start: number;
  end: number;
}

export function normalizeSpan(
  bodyLength: number,
  a: number,
  b: number,
): NormalizedSpan {
  let start = Math.min(a, b);
  let end = Math.max(a, b);
  start = Math.max(0, Math.min(start, bodyLength));
  end = Math.max(0, Math.min(end, bodyLength));
  return { start, end };
}

export function selectionToAnchor(
  documentRef: string,
  body: string,
  a: number,
  b: number,
  placement: Placement = "in_margin",
): Anchor {
  const span = normalizeSpan(body.length, a, b);
  return {
    document_ref: documentRef,
    start_offset: span.start,
    end_offset: span.end,
    quoted_text: body.slice(span.start, span.end),
    placement,
  };
}

/** Anchor for remarks about the document as a whole. */
export function wholeDocumentAnchor(documentRef: string): Anchor {
  return {
    document_ref: documentRef,
    start_offset: 0,
    end_offset: 0,
    quoted_text: "",
    placement: "whole_document",
  };
}
