import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | null;
}

/** fetch stand-in that records calls and replays canned responses. */
function fakeFetch(responses: { status: number; body: unknown }[]) {
  const calls: Call[] = [];
  let cursor = 0;
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      headers: { ...((init?.headers ?? {}) as Record<string, string>) },
      body: typeof init?.body === "string" ? init.body : null,
    });
    const canned = responses[Math.min(cursor, responses.length - 1)]!;
    cursor += 1;
    return new Response(JSON.stringify(canned.body), {
      status: canned.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

const SESSION = { session_ref: "s-1", annotator_ref: "u1", opened_at: 100 };

describe("ApiClient auth plumbing", () => {
  it("sends no bearer before login and the session token after", async () => {
    const fake = fakeFetch([
      { status: 200, body: SESSION },
      { status: 200, body: { query: "x", hits: [] } },
    ]);
    const client = new ApiClient("http://portal:1", fake.impl);
    await client.login("u1", "pw");
    await client.searchBase("x");
    expect(fake.calls[0]!.headers["Authorization"]).toBeUndefined();
    expect(fake.calls[1]!.headers["Authorization"]).toBe("Bearer s-1");
  });

  it("posts login credentials as JSON", async () => {
    const fake = fakeFetch([{ status: 200, body: SESSION }]);
    const client = new ApiClient("http://portal:1/", fake.impl);
    await client.login("u1", "pw");
    expect(fake.calls[0]!.url).toBe("http://portal:1/login");
    expect(fake.calls[0]!.method).toBe("POST");
    expect(JSON.parse(fake.calls[0]!.body!)).toEqual({
      annotator_ref: "u1",
      password: "pw",
    });
  });

  it("drops the token after logout", async () => {
    const fake = fakeFetch([
      { status: 200, body: SESSION },
      { status: 200, body: { session_ref: "s-1", closed_at: 200 } },
    ]);
    const client = new ApiClient("http://portal:1", fake.impl);
    await client.login("u1", "pw");
    await client.logout();
    expect(client.sessionRef).toBeNull();
  });

  it("leaves the federation listing anonymous even when signed in", async () => {
    const fake = fakeFetch([
      { status: 200, body: SESSION },
      { status: 200, body: { items: [] } },
    ]);
    const client = new ApiClient("http://portal:1", fake.impl);
    await client.login("u1", "pw");
    await client.fedAnnotations("ledger");
    expect(fake.calls[1]!.url).toBe(
      "http://portal:1/fed/annotations?q=ledger",
    );
    expect(fake.calls[1]!.headers["Authorization"]).toBeUndefined();
  });
});

describe("ApiClient error mapping", () => {
  it("turns an error envelope into ApiError with code and status", async () => {
    const fake = fakeFetch([
      {
        status: 401,
        body: { code: "unauthorized", message: "no live session" },
      },
    ]);
    const client = new ApiClient("http://portal:1", fake.impl);
    const failure = await client.searchBase("x").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.code).toBe("unauthorized");
    expect(failure.status).toBe(401);
    expect(failure.message).toBe("no live session");
  });

  it("synthesizes a code when the body is not an envelope", async () => {
    const fake = fakeFetch([{ status: 502, body: null }]);
    const client = new ApiClient("http://portal:1", fake.impl);
    const failure = await client.document("d1").catch((e) => e);
    expect(failure.code).toBe("unknown_error");
    expect(failure.status).toBe(502);
  });
});

describe("ApiClient pass-through", () => {
  it("returns hits exactly as sent, order and scores untouched", async () => {
    const hits = [
      {
        document_ref: "d2",
        score: 3.5,
        source: "both",
        contributing_annotations: [
          { origin_system: "sys-b", context_ref: "a9" },
        ],
      },
      {
        document_ref: "d1",
        score: 3.5,
        source: "document_match",
        contributing_annotations: [],
      },
    ];
    const fake = fakeFetch([{ status: 200, body: { query: "q", hits } }]);
    const client = new ApiClient("http://portal:1", fake.impl);
    const out = await client.searchExtended("q");
    expect(out.hits).toEqual(hits);
    expect(fake.calls[0]!.url).toBe("http://portal:1/search-extended?q=q");
  });

  it("URL-encodes queries", async () => {
    const fake = fakeFetch([{ status: 200, body: { query: "", hits: [] } }]);
    const client = new ApiClient("http://portal:1", fake.impl);
    await client.searchBase("a b&c");
    expect(fake.calls[0]!.url).toBe("http://portal:1/search?q=a%20b%26c");
  });

  it("unwraps the annotations envelope and forwards filters", async () => {
    const rows = [{ context_ref: "a1" }];
    const fake = fakeFetch([{ status: 200, body: { annotations: rows } }]);
    const client = new ApiClient("http://portal:1", fake.impl);
    const out = await client.annotations({
      document_ref: "d1",
      objective: "evaluation",
    });
    expect(out).toEqual(rows);
    expect(fake.calls[0]!.url).toBe(
      "http://portal:1/annotations?document_ref=d1&objective=evaluation",
    );
  });

  it("unwraps graph edges", async () => {
    const edges = [{ kind: "user_doc", a_ref: "u1", b_ref: "d1", weight: 2 }];
    const fake = fakeFetch([
      { status: 200, body: { kind: "user_doc", edges } },
    ]);
    const client = new ApiClient("http://portal:1", fake.impl);
    expect(await client.graph("user_doc")).toEqual(edges);
  });

  it("sends annotation drafts verbatim", async () => {
    const draft = {
      anchor: {
        document_ref: "d1",
        start_offset: 0,
        end_offset: 3,
        quoted_text: "the",
        placement: "in_margin" as const,
      },
      ann_type: "text" as const,
      objective: "evaluation" as const,
      body_text: "note",
      approach: "new" as const,
      visibility: "server_shared" as const,
    };
    const fake = fakeFetch([{ status: 201, body: { context_ref: "a1" } }]);
    const client = new ApiClient("http://portal:1", fake.impl);
    await client.createAnnotation(draft);
    expect(JSON.parse(fake.calls[0]!.body!)).toEqual(draft);
  });
});
