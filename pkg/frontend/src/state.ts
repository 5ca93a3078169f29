/** Client-side state for the reader view.
 *
 * Two rules the UI tests hold this module to:
 *   - the annotation form opens only with a live selection or the
 *     whole-document toggle, and its quote display mirrors the selection;
 *   - the annotation list shows server results verbatim. An optimistic
 *     entry appears while a create is in flight, but commit replaces it
 *     with the server's record and rollback restores the exact prior list.
 */

import type { Anchor, AnnotationRecord } from "./types.js";
import { selectionToAnchor, wholeDocumentAnchor } from "./selection.js";

export interface SelectionState {
  start: number;
  end: number;
}

export interface DraftGate {
  enabled: boolean;
  quotedText: string;
  anchor: Anchor | null;
}

/** Decide whether the draft form is usable and what quote it shows. */
export function gateDraft(
  documentRef: string | null,
  body: string | null,
  selection: SelectionState | null,
  wholeDocument: boolean,
): DraftGate {
  if (documentRef === null || body === null) {
    return { enabled: false, quotedText: "", anchor: null };
  }
  if (wholeDocument) {
    return {
      enabled: true,
      quotedText: "",
      anchor: wholeDocumentAnchor(documentRef),
    };
  }
  if (selection === null || selection.start === selection.end) {
    return { enabled: false, quotedText: "", anchor: null };
  }
  const anchor = selectionToAnchor(
    documentRef,
    body,
    selection.start,
    selection.end,
  );
  return { enabled: true, quotedText: anchor.quoted_text, anchor };
}

interface PendingEntry {
  token: number;
  /** The list exactly as it stood before the optimistic insert. */
  before: AnnotationRecord[];
}

/** Annotation list with one-in-flight optimistic create. */
export class AnnotationList {
  private rows: AnnotationRecord[] = [];
  private pending: PendingEntry | null = null;
  private nextToken = 1;

  /** Replace contents with a server listing, order untouched. */
  setFromServer(rows: AnnotationRecord[]): void {
    this.rows = rows.slice();
    this.pending = null;
  }

  get items(): readonly AnnotationRecord[] {
    return this.rows;
  }

  /** Show a provisional record; returns a token for commit or rollback. */
  beginOptimistic(provisional: AnnotationRecord): number {
    if (this.pending !== null) {
      throw new Error("an optimistic create is already in flight");
    }
    const token = this.nextToken;
    this.nextToken += 1;
    this.pending = { token, before: this.rows.slice() };
    this.rows = [...this.rows, provisional];
    return token;
  }

  /** Swap the provisional row for the record the server returned. */
  commit(token: number, serverRecord: AnnotationRecord): void {
    const pending = this.takePending(token);
    this.rows = [...pending.before, serverRecord];
  }

  /** Put the list back exactly as it was before the optimistic insert. */
  rollback(token: number): void {
    const pending = this.takePending(token);
    this.rows = pending.before;
  }

  private takePending(token: number): PendingEntry {
    if (this.pending === null || this.pending.token !== token) {
      throw new Error(`no optimistic create with token ${token}`);
    }
    const pending = this.pending;
    this.pending = null;
    return pending;
  }
}
