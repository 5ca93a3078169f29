/** Wire shapes and closed vocabularies of the annotation portal.
 *
 * The arrays below drive the form controls; they must stay in step with
 * the server's enums, and the test suite pins their size and spelling.
 */

export const OBJECTIVES = [
  "recapitulation",
  "evaluation",
  "summary",
  "raise_a_point",
  "classification",
  "structuring",
  "differentiating",
  "for_information",
  "answer_to_question",
  "illustration",
  "extension_of_document",
  "clarify_ambiguity",
] as const;

export const TYPE_KINDS = [
  "marking",
  "typographic",
  "reformatting",
  "passage_numbering",
  "text",
  "icon",
  "symbol_relation",
] as const;

export const TYPOGRAPHIC_STYLES = ["italics", "underlining", "other"] as const;

export const ICON_SYMBOLS = [
  "star",
  "question_mark",
  "exclamation_mark",
  "other",
] as const;

/** Kinds that must be sent as {kind, subtype} objects. */
export const SUBTYPED_KINDS = ["typographic", "icon"] as const;

export const PLACEMENTS = [
  "in_margin",
  "footnote",
  "endnote",
  "gutter",
  "inline",
  "whole_document",
] as const;

export type Objective = (typeof OBJECTIVES)[number];
export type TypeKind = (typeof TYPE_KINDS)[number];
export type Placement = (typeof PLACEMENTS)[number];

export interface SessionInfo {
  session_ref: string;
  annotator_ref: string;
  opened_at: number;
}

export interface Author {
  first_name: string;
  last_name: string;
}

export interface DocumentRecord {
  document_ref: string;
  title: string;
  descriptors: string[];
  authors: Author[];
  published_at: number;
  format: string | { kind: string; label: string };
  abstract: string;
  body: string;
  available_at: number;
}

export interface Anchor {
  document_ref: string;
  start_offset: number;
  end_offset: number;
  quoted_text: string;
  placement: Placement;
}

export type WireType = TypeKind | { kind: TypeKind; subtype: string };

/** Build the wire form of a type: bare string, or {kind, subtype} for the
 * two kinds that carry one. */
export function composeType(kind: TypeKind, subtype?: string): WireType {
  if (kind === "typographic" || kind === "icon") {
    return { kind, subtype: subtype ?? "other" };
  }
  return kind;
}
export type WireApproach =
  | "new"
  | { kind: "follow_up"; parent_context_ref: string };
export type WireVisibility =
  | "server_shared"
  | "local_private"
  | { kind: "proxy_group"; group_id: string };

export interface AnnotationRecord {
  context_ref: string;
  origin_system: string;
  annotator_ref: string;
  anchor: Anchor;
  ann_type: WireType;
  objective: Objective;
  body_text: string;
  approach: WireApproach;
  session_ref: string;
  created_at: number;
  visibility: WireVisibility;
}

/** What the client sends; the server assigns identity and authorship. */
export interface AnnotationDraft {
  anchor: Anchor;
  ann_type: WireType;
  objective: Objective;
  body_text: string;
  approach: WireApproach;
  visibility: WireVisibility;
}

export interface ContributingAnnotation {
  origin_system: string;
  context_ref: string;
}

export type HitSource = "document_match" | "annotation_extended" | "both";

export interface SearchHit {
  document_ref: string;
  score: number;
  source: HitSource;
  contributing_annotations: ContributingAnnotation[];
}

export interface SearchResponse {
  query: string;
  hits: SearchHit[];
}

export interface ExplicitProfile {
  annotator_ref: string;
  role: string;
  first_name: string;
  last_name: string;
  email: string;
  postal_address: string;
  region: string;
  country: string;
  activity_area: string;
  created_at: number;
}

export interface ImplicitProfile {
  annotator_ref: string;
  total_time_on_system: number;
  documents_consulted: Record<string, number>;
  queries_issued: { terms: string[]; at: number }[];
  sessions_count: number;
}

export interface ProfileResponse {
  explicit: ExplicitProfile;
  implicit: ImplicitProfile;
}

export interface MatrixCell {
  group: string;
  bucket_start: number;
  count: number;
}

export interface GroupTimeMatrix {
  grouping: string;
  bucket: string;
  cells: MatrixCell[];
  total: number;
}

export interface RelationEdge {
  kind: "user_doc" | "doc_doc" | "user_user";
  a_ref: string;
  b_ref: string;
  weight: number;
}

export interface DocumentStub {
  document_ref: string;
  title: string;
  descriptors: string[];
  available_at: number;
}

export interface FederatedItem {
  annotation: AnnotationRecord;
  stub: DocumentStub;
}
