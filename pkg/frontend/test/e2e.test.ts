/** End-to-end: the real server process behind the real client.
 *
 * Spawns the portal CLI against a throwaway data directory, seeds it with
 * the same CLI commands an operator would use, then drives the whole
 * annotate-and-search loop through ApiClient. Requires the Python package
 * to be installed in the environment (it is, in CI and the dev sandbox).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { renderHit } from "../src/render.js";
import { selectionToAnchor } from "../src/selection.js";
import { OBJECTIVES, composeType, type Objective } from "../src/types.js";

const PORT = 8900 + (process.pid % 600);
const BASE = `http://127.0.0.1:${PORT}`;
const BODY =
  "careful accounting rests on the ledger; the ledger rests on patience";

let dataDir: string;
let server: ChildProcess | null = null;

function cli(...argv: string[]): void {
  const done = spawnSync("python3", ["-m", "annex.cli", ...argv], {
    encoding: "utf-8",
  });
  if (done.status !== 0) {
    throw new Error(
      `annex ${argv[0]} failed (${done.status}): ${done.stderr || done.stdout}`,
    );
  }
}

async function waitForPortal(): Promise<void> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/fed/annotations?q=ready`);
      if (response.status === 200) {
        return;
      }
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`portal did not come up on ${BASE}`);
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "annex-e2e-"));
  const corpus = join(dataDir, "corpus");
  mkdirSync(corpus);
  writeFileSync(
    join(corpus, "d1.json"),
    JSON.stringify({
      document_ref: "d1",
      title: "The Patient Ledger",
      descriptors: ["accounting", "method"],
      authors: [{ first_name: "Ada", last_name: "Quill" }],
      published_at: 1_700_000_000,
      format: "text",
      abstract: "Notes on keeping books without haste.",
      body: BODY,
      available_at: 1_700_000_000,
    }),
  );
  writeFileSync(
    join(corpus, "d2.json"),
    JSON.stringify({
      document_ref: "d2",
      title: "Birdwatching Weekends",
      descriptors: ["leisure"],
      authors: [{ first_name: "Tom", last_name: "Reed" }],
      published_at: 1_700_000_000,
      format: "text",
      abstract: "Field notes from the estuary.",
      body: "herons stand still for hours and then strike",
      available_at: 1_700_000_000,
    }),
  );
  cli("ingest", "--data-dir", dataDir, corpus);
  cli(
    "user", "add", "--data-dir", dataDir,
    "--ref", "u1", "--role", "watcher",
    "--first-name", "Ada", "--last-name", "Quill",
    "--email", "ada@example.org", "--country", "UK",
    "--activity-area", "audit", "--password", "pw-u1",
  );
  server = spawn(
    "python3",
    [
      "-m", "annex.cli", "serve",
      "--data-dir", dataDir,
      "--listen", `127.0.0.1:${PORT}`,
      "--system-id", "e2e",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForPortal();
}, 40_000);

afterAll(() => {
  if (server !== null) {
    server.kill("SIGTERM");
  }
  rmSync(dataDir, { recursive: true, force: true });
});

describe("annotate-and-search loop against the live portal", () => {
  const client = new ApiClient(BASE);

  it("signs in and reads the ingested document back", async () => {
    const session = await client.login("u1", "pw-u1");
    expect(session.annotator_ref).toBe("u1");
    const doc = await client.document("d1");
    expect(doc.body).toBe(BODY);
    expect(doc.title).toBe("The Patient Ledger");
  });

  it("rejects a bad password with the portal error envelope", async () => {
    const other = new ApiClient(BASE);
    const failure = await other.login("u1", "wrong").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(401);
    expect(failure.code).toBe("unauthorized");
  });

  it("creates an annotation from a selection and finds the doc through it", async () => {
    const start = BODY.indexOf("ledger");
    const anchor = selectionToAnchor("d1", BODY, start, start + 6);
    expect(anchor.quoted_text).toBe("ledger");
    const saved = await client.createAnnotation({
      anchor,
      ann_type: composeType("text"),
      objective: "classification",
      body_text: "reads like a birdwatcher pacing an estuary",
      approach: "new",
      visibility: "server_shared",
    });
    expect(saved.origin_system).toBe("e2e");
    expect(saved.annotator_ref).toBe("u1");
    expect(saved.context_ref).not.toBe("");

    // "estuary" appears only in the note, so base search misses and the
    // extended search reaches d1 through the annotation.
    const base = await client.searchBase("estuary pacing");
    expect(base.hits.map((h) => h.document_ref)).not.toContain("d1");
    const extended = await client.searchExtended("estuary pacing");
    const hit = extended.hits.find((h) => h.document_ref === "d1");
    expect(hit).toBeDefined();
    expect(hit!.source).toBe("annotation_extended");
    expect(hit!.contributing_annotations).toEqual([
      { origin_system: "e2e", context_ref: saved.context_ref },
    ]);
    const html = renderHit(hit!);
    expect(html).toContain("via annotations");
    expect(html).toContain(`${saved.context_ref} from e2e`);
  });

  it("round-trips every objective the form offers", async () => {
    const anchor = selectionToAnchor("d1", BODY, 0, 7);
    const sent = new Map<string, Objective>();
    for (const objective of OBJECTIVES) {
      const saved = await client.createAnnotation({
        anchor,
        ann_type: composeType("text"),
        objective,
        body_text: `filed under ${objective}`,
        approach: "new",
        visibility: "server_shared",
      });
      expect(saved.objective).toBe(objective);
      sent.set(saved.context_ref, objective);
    }
    const listed = await client.annotations({ document_ref: "d1" });
    for (const [ref, objective] of sent) {
      const row = listed.find((a) => a.context_ref === ref);
      expect(row, `annotation for ${objective}`).toBeDefined();
      expect(row!.objective).toBe(objective);
      expect(row!.body_text).toBe(`filed under ${objective}`);
    }
  });

  it("reflects the consultation in the implicit profile", async () => {
    const profile = await client.profile("u1");
    expect(profile.implicit.documents_consulted["d1"]).toBeGreaterThanOrEqual(
      1,
    );
    expect(profile.implicit.sessions_count).toBeGreaterThanOrEqual(1);
    expect(profile.explicit.first_name).toBe("Ada");
  });

  it("serves analytics for the session user", async () => {
    const matrix = await client.groupTime("by_role", "day");
    expect(matrix.total).toBeGreaterThanOrEqual(13);
    expect(matrix.cells.some((c) => c.group === "watcher")).toBe(true);
    const edges = await client.graph("user_doc");
    expect(
      edges.some((e) => e.a_ref === "u1" && e.b_ref === "d1"),
    ).toBe(true);
  });

  it("signs out and loses access", async () => {
    await client.logout();
    const failure = await client.document("d1").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(401);
  });
});
