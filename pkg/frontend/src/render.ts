/** Pure HTML-string renderers.
 *
 * Nothing here touches the DOM; every function maps data to a string so
 * the views are testable without a browser. All interpolated text runs
 * through escapeHtml, including values that "should" be safe refs.
 */

import type {
  AnnotationRecord,
  DocumentRecord,
  GroupTimeMatrix,
  ProfileResponse,
  SearchHit,
  WireApproach,
  WireType,
  WireVisibility,
} from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

function typeLabel(t: WireType): string {
  return typeof t === "string" ? t : `${t.kind} (${t.subtype})`;
}

function approachLabel(a: WireApproach): string {
  return typeof a === "string" ? a : `follow-up of ${a.parent_context_ref}`;
}

function visibilityLabel(v: WireVisibility): string {
  return typeof v === "string" ? v : `group ${v.group_id}`;
}

/** Reader body with anchored spans wrapped in <mark> tags.
 *
 * Overlapping anchors are rendered at segment granularity: the body is cut
 * at every anchor boundary and a segment is highlighted when any anchor
 * covers it.
 */
export function renderReader(
  doc: DocumentRecord,
  annotations: readonly AnnotationRecord[],
): string {
  const body = doc.body;
  const spans = annotations
    .map((a) => a.anchor)
    .filter((anchor) => anchor.placement !== "whole_document")
    .map((anchor) => ({
      start: Math.max(0, Math.min(anchor.start_offset, body.length)),
      end: Math.max(0, Math.min(anchor.end_offset, body.length)),
    }))
    .filter((s) => s.start < s.end);
  const cuts = new Set<number>([0, body.length]);
  for (const s of spans) {
    cuts.add(s.start);
    cuts.add(s.end);
  }
  const bounds = [...cuts].sort((x, y) => x - y);
  const parts: string[] = [];
  for (let i = 0; i + 1 < bounds.length; i += 1) {
    const from = bounds[i]!;
    const to = bounds[i + 1]!;
    const piece = escapeHtml(body.slice(from, to));
    const covered = spans.some((s) => s.start <= from && to <= s.end);
    parts.push(covered ? `<mark>${piece}</mark>` : piece);
  }
  return `<article class="reader"><h2>${escapeHtml(doc.title)}</h2><p class="abstract">${escapeHtml(doc.abstract)}</p><div class="body">${parts.join("")}</div></article>`;
}

/** Margin card for one annotation. */
export function renderAnnotationCard(ann: AnnotationRecord): string {
  const quote =
    ann.anchor.placement === "whole_document"
      ? "(whole document)"
      : ann.anchor.quoted_text;
  return (
    `<div class="card" data-ref="${escapeHtml(ann.context_ref)}">` +
    `<blockquote>${escapeHtml(quote)}</blockquote>` +
    `<p class="note">${escapeHtml(ann.body_text)}</p>` +
    `<p class="meta">${escapeHtml(ann.annotator_ref)} @ ${escapeHtml(ann.origin_system)}` +
    ` &middot; ${escapeHtml(typeLabel(ann.ann_type))}` +
    ` &middot; ${escapeHtml(ann.objective)}` +
    ` &middot; ${escapeHtml(approachLabel(ann.approach))}` +
    ` &middot; ${escapeHtml(visibilityLabel(ann.visibility))}</p>` +
    `</div>`
  );
}

export function renderAnnotationList(
  annotations: readonly AnnotationRecord[],
): string {
  if (annotations.length === 0) {
    return `<p class="empty">No annotations visible on this document.</p>`;
  }
  return annotations.map(renderAnnotationCard).join("");
}

/** One search hit row. Hits found through annotation text carry a badge
 * and a details panel naming every contributing annotation. */
export function renderHit(hit: SearchHit): string {
  const viaAnnotations =
    hit.source === "annotation_extended" || hit.source === "both";
  const badge = viaAnnotations
    ? `<span class="badge">via annotations</span>`
    : "";
  let why = "";
  if (viaAnnotations && hit.contributing_annotations.length > 0) {
    const rows = hit.contributing_annotations
      .map(
        (c) =>
          `<li>${escapeHtml(c.context_ref)} from ${escapeHtml(c.origin_system)}</li>`,
      )
      .join("");
    why = `<details class="why"><summary>why this matched</summary><ul>${rows}</ul></details>`;
  }
  return (
    `<li class="hit" data-ref="${escapeHtml(hit.document_ref)}">` +
    `<a href="#" class="open-doc" data-ref="${escapeHtml(hit.document_ref)}">${escapeHtml(hit.document_ref)}</a>` +
    ` <span class="score">${hit.score.toFixed(3)}</span>${badge}${why}</li>`
  );
}

export function renderHitList(hits: readonly SearchHit[]): string {
  if (hits.length === 0) {
    return `<p class="empty">No documents matched.</p>`;
  }
  return `<ol class="hits">${hits.map(renderHit).join("")}</ol>`;
}

export function renderProfile(profile: ProfileResponse): string {
  const ex = profile.explicit;
  const im = profile.implicit;
  const docs = Object.entries(im.documents_consulted)
    .map(
      ([ref, count]) =>
        `<li>${escapeHtml(ref)}: ${count} consultation${count === 1 ? "" : "s"}</li>`,
    )
    .join("");
  const queries = im.queries_issued
    .map((q) => `<li>${escapeHtml(q.terms.join(" "))}</li>`)
    .join("");
  return (
    `<div class="profile">` +
    `<h3>${escapeHtml(ex.first_name)} ${escapeHtml(ex.last_name)} <small>${escapeHtml(ex.role)}</small></h3>` +
    `<p>${escapeHtml(ex.activity_area)} &middot; ${escapeHtml(ex.region)}, ${escapeHtml(ex.country)}</p>` +
    `<p>${im.sessions_count} session${im.sessions_count === 1 ? "" : "s"}, ` +
    `${im.total_time_on_system}s on system</p>` +
    `<h4>Documents consulted</h4><ul>${docs || "<li>none</li>"}</ul>` +
    `<h4>Queries issued</h4><ul>${queries || "<li>none</li>"}</ul>` +
    `</div>`
  );
}

export function renderMatrix(matrix: GroupTimeMatrix): string {
  const rows = matrix.cells
    .map(
      (cell) =>
        `<tr><td>${escapeHtml(cell.group)}</td>` +
        `<td>${new Date(cell.bucket_start * 1000).toISOString().slice(0, 10)}</td>` +
        `<td>${cell.count}</td></tr>`,
    )
    .join("");
  return (
    `<table class="matrix"><thead><tr>` +
    `<th>${escapeHtml(matrix.grouping)}</th><th>${escapeHtml(matrix.bucket)}</th><th>count</th>` +
    `</tr></thead><tbody>${rows}</tbody>` +
    `<tfoot><tr><td colspan="2">total</td><td>${matrix.total}</td></tr></tfoot></table>`
  );
}

export function renderError(code: string, message: string): string {
  return `<div class="error" role="alert"><strong>${escapeHtml(code)}</strong> ${escapeHtml(message)}</div>`;
}
