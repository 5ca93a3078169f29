/** Thin typed client for the annotation portal's HTTP surface.
 *
 * Every response body is passed through untouched; this module adds the
 * bearer header and turns error envelopes into ApiError, nothing more.
 */

import type {
  AnnotationDraft,
  AnnotationRecord,
  DocumentRecord,
  FederatedItem,
  GroupTimeMatrix,
  ProfileResponse,
  RelationEdge,
  SearchResponse,
  SessionInfo,
} from "./types.js";

/** A portal error body, {"code": ..., "message": ...}, plus HTTP status. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface AnnotationFilters {
  document_ref?: string;
  annotator_ref?: string;
  created_from?: number;
  created_to?: number;
  objective?: string;
  kind?: string;
  approach?: string;
}

export class ApiClient {
  readonly baseUrl: string;
  sessionRef: string | null = null;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    withAuth = true,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (withAuth && this.sessionRef !== null) {
      headers["Authorization"] = `Bearer ${this.sessionRef}`;
    }
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    let payload: unknown = null;
    if (text !== "") {
      try {
        payload = JSON.parse(text);
      } catch {
        payload = null;
      }
    }
    if (!response.ok) {
      const envelope = (payload ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        envelope.code ?? "unknown_error",
        envelope.message ?? `request failed with status ${response.status}`,
        response.status,
      );
    }
    return payload as T;
  }

  async login(annotatorRef: string, password: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>("POST", "/login", {
      annotator_ref: annotatorRef,
      password,
    });
    this.sessionRef = session.session_ref;
    return session;
  }

  async logout(): Promise<void> {
    await this.request<unknown>("POST", "/logout", {});
    this.sessionRef = null;
  }

  /** The one read that leaves a trace: it counts as consulting the document. */
  document(documentRef: string): Promise<DocumentRecord> {
    return this.request<DocumentRecord>(
      "GET",
      `/documents/${encodeURIComponent(documentRef)}`,
    );
  }

  searchBase(query: string): Promise<SearchResponse> {
    return this.request<SearchResponse>(
      "GET",
      `/search?q=${encodeURIComponent(query)}`,
    );
  }

  searchExtended(query: string): Promise<SearchResponse> {
    return this.request<SearchResponse>(
      "GET",
      `/search-extended?q=${encodeURIComponent(query)}`,
    );
  }

  createAnnotation(draft: AnnotationDraft): Promise<AnnotationRecord> {
    return this.request<AnnotationRecord>("POST", "/annotations", draft);
  }

  async annotations(
    filters: AnnotationFilters = {},
  ): Promise<AnnotationRecord[]> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined) {
        params.set(key, String(value));
      }
    }
    const query = params.toString();
    const out = await this.request<{ annotations: AnnotationRecord[] }>(
      "GET",
      query === "" ? "/annotations" : `/annotations?${query}`,
    );
    return out.annotations;
  }

  profile(annotatorRef: string): Promise<ProfileResponse> {
    return this.request<ProfileResponse>(
      "GET",
      `/profile/${encodeURIComponent(annotatorRef)}`,
    );
  }

  groupTime(grouping: string, bucket: string): Promise<GroupTimeMatrix> {
    const params = new URLSearchParams({ grouping, bucket });
    return this.request<GroupTimeMatrix>(
      "GET",
      `/analytics/group-time?${params.toString()}`,
    );
  }

  async graph(kind: string): Promise<RelationEdge[]> {
    const params = new URLSearchParams({ kind });
    const out = await this.request<{ kind: string; edges: RelationEdge[] }>(
      "GET",
      `/analytics/graph?${params.toString()}`,
    );
    return out.edges;
  }

  /** Anonymous on purpose: a bearer on this route means "registered peer",
   * and a session token is not one. */
  async fedAnnotations(query = ""): Promise<FederatedItem[]> {
    const out = await this.request<{ items: FederatedItem[] }>(
      "GET",
      `/fed/annotations?q=${encodeURIComponent(query)}`,
      undefined,
      false,
    );
    return out.items;
  }
}
