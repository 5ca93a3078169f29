/** Browser entry point: wires the pure modules to the page.
 *
 * The portal base URL comes from the ?api= query parameter so the same
 * static bundle can point at any node; default is the local dev address.
 */

import { ApiClient, ApiError } from "./api.js";
import { gateDraft, AnnotationList, type SelectionState } from "./state.js";
import {
  renderAnnotationList,
  renderError,
  renderHitList,
  renderMatrix,
  renderProfile,
  renderReader,
} from "./render.js";
import { renderGraphSvg } from "./graph.js";
import {
  composeType,
  ICON_SYMBOLS,
  OBJECTIVES,
  SUBTYPED_KINDS,
  TYPE_KINDS,
  TYPOGRAPHIC_STYLES,
  type AnnotationRecord,
  type DocumentRecord,
  type TypeKind,
  type Objective,
  type WireApproach,
  type WireVisibility,
} from "./types.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://127.0.0.1:8797";
}

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const api = new ApiClient(apiBase());
const list = new AnnotationList();

let currentDoc: DocumentRecord | null = null;
let currentUser: string | null = null;
let selection: SelectionState | null = null;
let wholeDocument = false;

function showError(err: unknown): void {
  const box = el<HTMLDivElement>("messages");
  if (err instanceof ApiError) {
    box.innerHTML = renderError(err.code, err.message);
  } else {
    box.innerHTML = renderError("client_error", String(err));
  }
}

function clearError(): void {
  el<HTMLDivElement>("messages").innerHTML = "";
}

function fillSelect(
  select: HTMLSelectElement,
  values: readonly string[],
): void {
  select.innerHTML = "";
  for (const value of values) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value.replaceAll("_", " ");
    select.append(option);
  }
}

function refreshDraftGate(): void {
  const gate = gateDraft(
    currentDoc?.document_ref ?? null,
    currentDoc?.body ?? null,
    selection,
    wholeDocument,
  );
  el<HTMLFieldSetElement>("draft-fields").disabled = !gate.enabled;
  el<HTMLElement>("draft-quote").textContent = gate.enabled
    ? gate.quotedText === ""
      ? "(whole document)"
      : gate.quotedText
    : "select a passage first";
}

/** Map the live DOM selection to offsets in the rendered body text.
 *
 * The reader only ever contains text nodes and <mark> wrappers, so
 * walking text nodes in order recovers plain-body offsets exactly.
 */
function readSelection(): SelectionState | null {
  const container = el<HTMLDivElement>("reader");
  const bodyHost = container.querySelector(".body");
  const sel = window.getSelection();
  if (bodyHost === null || sel === null || sel.rangeCount === 0) {
    return null;
  }
  const range = sel.getRangeAt(0);
  if (!bodyHost.contains(range.startContainer) ||
      !bodyHost.contains(range.endContainer)) {
    return null;
  }
  let offset = 0;
  let start = -1;
  let end = -1;
  const walker = document.createTreeWalker(bodyHost, NodeFilter.SHOW_TEXT);
  while (walker.nextNode()) {
    const node = walker.currentNode as Text;
    if (node === range.startContainer) {
      start = offset + range.startOffset;
    }
    if (node === range.endContainer) {
      end = offset + range.endOffset;
    }
    offset += node.data.length;
  }
  if (start < 0 || end < 0 || start === end) {
    return null;
  }
  return { start: Math.min(start, end), end: Math.max(start, end) };
}

async function openDocument(ref: string): Promise<void> {
  clearError();
  try {
    const doc = await api.document(ref);
    currentDoc = doc;
    selection = null;
    wholeDocument = false;
    el<HTMLInputElement>("whole-doc").checked = false;
    await refreshAnnotations();
    refreshDraftGate();
  } catch (err) {
    showError(err);
  }
}

async function refreshAnnotations(): Promise<void> {
  if (currentDoc === null) {
    return;
  }
  const rows = await api.annotations({ document_ref: currentDoc.document_ref });
  list.setFromServer(rows);
  renderDocumentView();
}

function renderDocumentView(): void {
  if (currentDoc === null) {
    return;
  }
  el<HTMLDivElement>("reader").innerHTML = renderReader(
    currentDoc,
    list.items,
  );
  el<HTMLDivElement>("cards").innerHTML = renderAnnotationList(list.items);
}

async function submitDraft(): Promise<void> {
  if (currentDoc === null || currentUser === null) {
    return;
  }
  const gate = gateDraft(
    currentDoc.document_ref,
    currentDoc.body,
    selection,
    wholeDocument,
  );
  if (!gate.enabled || gate.anchor === null) {
    return;
  }
  const kind = el<HTMLSelectElement>("draft-kind").value as TypeKind;
  const subtype = el<HTMLSelectElement>("draft-subtype").value;
  const objective = el<HTMLSelectElement>("draft-objective").value as Objective;
  const bodyText = el<HTMLTextAreaElement>("draft-body").value;
  const visRaw = el<HTMLSelectElement>("draft-visibility").value;
  const groupId = el<HTMLInputElement>("draft-group").value;
  const parentRef = el<HTMLInputElement>("draft-parent").value.trim();
  const visibility: WireVisibility =
    visRaw === "proxy_group"
      ? { kind: "proxy_group", group_id: groupId }
      : (visRaw as WireVisibility);
  const approach: WireApproach =
    parentRef === ""
      ? "new"
      : { kind: "follow_up", parent_context_ref: parentRef };
  const draft = {
    anchor: gate.anchor,
    ann_type: composeType(kind, subtype),
    objective,
    body_text: bodyText,
    approach,
    visibility,
  };
  const provisional: AnnotationRecord = {
    ...draft,
    context_ref: "(saving)",
    origin_system: "(saving)",
    annotator_ref: currentUser,
    session_ref: api.sessionRef ?? "",
    created_at: Math.floor(Date.now() / 1000),
  };
  const token = list.beginOptimistic(provisional);
  renderDocumentView();
  clearError();
  try {
    const saved = await api.createAnnotation(draft);
    list.commit(token, saved);
    el<HTMLTextAreaElement>("draft-body").value = "";
    el<HTMLInputElement>("draft-parent").value = "";
  } catch (err) {
    list.rollback(token);
    showError(err);
  }
  renderDocumentView();
}

async function runSearch(): Promise<void> {
  const query = el<HTMLInputElement>("search-q").value;
  const extended = el<HTMLInputElement>("search-extended").checked;
  clearError();
  try {
    const result = extended
      ? await api.searchExtended(query)
      : await api.searchBase(query);
    el<HTMLDivElement>("results").innerHTML = renderHitList(result.hits);
  } catch (err) {
    showError(err);
  }
}

async function showProfile(): Promise<void> {
  if (currentUser === null) {
    return;
  }
  clearError();
  try {
    const profile = await api.profile(currentUser);
    el<HTMLDivElement>("profile").innerHTML = renderProfile(profile);
  } catch (err) {
    showError(err);
  }
}

async function showAnalytics(): Promise<void> {
  clearError();
  const grouping = el<HTMLSelectElement>("matrix-grouping").value;
  const bucket = el<HTMLSelectElement>("matrix-bucket").value;
  const kind = el<HTMLSelectElement>("graph-kind").value;
  try {
    const matrix = await api.groupTime(grouping, bucket);
    el<HTMLDivElement>("matrix").innerHTML = renderMatrix(matrix);
    const edges = await api.graph(kind);
    el<HTMLDivElement>("graph").innerHTML = renderGraphSvg(edges, 7);
  } catch (err) {
    showError(err);
  }
}

function setLoggedIn(user: string | null): void {
  currentUser = user;
  el<HTMLElement>("who").textContent = user ?? "not signed in";
  el<HTMLFormElement>("login-form").hidden = user !== null;
  el<HTMLButtonElement>("logout").hidden = user === null;
  el<HTMLElement>("workspace").hidden = user === null;
}

function init(): void {
  fillSelect(el("draft-kind"), TYPE_KINDS);
  fillSelect(el("draft-objective"), OBJECTIVES);
  fillSelect(el("draft-subtype"), TYPOGRAPHIC_STYLES);
  el<HTMLSelectElement>("draft-kind").addEventListener("change", () => {
    const kind = el<HTMLSelectElement>("draft-kind").value as TypeKind;
    const subSelect = el<HTMLSelectElement>("draft-subtype");
    const subtyped = (SUBTYPED_KINDS as readonly string[]).includes(kind);
    subSelect.hidden = !subtyped;
    if (kind === "typographic") {
      fillSelect(subSelect, TYPOGRAPHIC_STYLES);
    } else if (kind === "icon") {
      fillSelect(subSelect, ICON_SYMBOLS);
    }
  });
  el<HTMLSelectElement>("draft-kind").dispatchEvent(new Event("change"));

  el<HTMLFormElement>("login-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    clearError();
    try {
      const session = await api.login(
        el<HTMLInputElement>("login-user").value,
        el<HTMLInputElement>("login-password").value,
      );
      setLoggedIn(session.annotator_ref);
    } catch (err) {
      showError(err);
    }
  });

  el<HTMLButtonElement>("logout").addEventListener("click", async () => {
    try {
      await api.logout();
    } catch {
      api.sessionRef = null;
    }
    setLoggedIn(null);
  });

  el<HTMLFormElement>("search-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runSearch();
  });

  el<HTMLDivElement>("results").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const link = target.closest("a.open-doc");
    if (link !== null) {
      ev.preventDefault();
      void openDocument(link.getAttribute("data-ref") ?? "");
    }
  });

  el<HTMLFormElement>("open-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void openDocument(el<HTMLInputElement>("open-ref").value.trim());
  });

  el<HTMLDivElement>("reader").addEventListener("mouseup", () => {
    selection = readSelection();
    if (selection !== null) {
      wholeDocument = false;
      el<HTMLInputElement>("whole-doc").checked = false;
    }
    refreshDraftGate();
  });

  el<HTMLInputElement>("whole-doc").addEventListener("change", (ev) => {
    wholeDocument = (ev.target as HTMLInputElement).checked;
    refreshDraftGate();
  });

  el<HTMLSelectElement>("draft-visibility").addEventListener("change", () => {
    const isGroup =
      el<HTMLSelectElement>("draft-visibility").value === "proxy_group";
    el<HTMLInputElement>("draft-group").hidden = !isGroup;
  });

  el<HTMLFormElement>("draft-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submitDraft();
  });

  el<HTMLButtonElement>("profile-btn").addEventListener("click", () => {
    void showProfile();
  });

  el<HTMLButtonElement>("analytics-btn").addEventListener("click", () => {
    void showAnalytics();
  });

  setLoggedIn(null);
  refreshDraftGate();
}

init();
