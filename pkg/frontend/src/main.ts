/** DOM wiring: audio playback, transcript editor, hotkeys, submit, progress. */

import { ApiClient, SubmissionRejected } from "./api";
import { AnnotationSession, GrammarMismatch } from "./session";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const statusBox = el<HTMLDivElement>("status");
const recordInfo = el<HTMLDivElement>("record-info");
const audio = el<HTMLAudioElement>("player");
const draft = el<HTMLTextAreaElement>("draft");
const errorBox = el<HTMLDivElement>("error");
const lexicalBadge = el<HTMLSpanElement>("lexical-badge");
const hotkeyList = el<HTMLUListElement>("hotkeys");
const progressBox = el<HTMLDivElement>("progress");
const submitBtn = el<HTMLButtonElement>("submit");
const skipBtn = el<HTMLButtonElement>("skip");
const undoBtn = el<HTMLButtonElement>("undo");
const replayBtn = el<HTMLButtonElement>("replay");
const loginForm = el<HTMLFormElement>("login");
const workbench = el<HTMLDivElement>("workbench");

let session: AnnotationSession | undefined;

function setStatus(text: string, kind: "info" | "error" = "info"): void {
  statusBox.textContent = text;
  statusBox.className = kind;
}

function renderHotkeys(): void {
  if (!session) return;
  hotkeyList.replaceChildren(
    ...session.taxonomy.categories.map((cat, i) => {
      const li = document.createElement("li");
      const key = session!.hotkeyFor(i);
      li.textContent = key ? `Alt+${key}  ${cat.surface}` : cat.surface;
      li.title = `${cat.id} (${cat.kind})`;
      li.addEventListener("click", () => {
        session!.editor.moveCursor(draft.selectionStart ?? draft.value.length);
        session!.editor.insertTag(cat.surface);
        syncDraft();
      });
      return li;
    }),
  );
}

function syncDraft(): void {
  if (!session || !session.current) return;
  const editor = session.editor;
  draft.value = editor.text;
  draft.setSelectionRange(editor.cursor, editor.cursor);
  const validation = session.validate();
  if (validation.ok) {
    errorBox.textContent = "";
    draft.classList.remove("invalid");
  } else {
    errorBox.textContent =
      validation.message + (validation.charOffset !== undefined ? ` at position ${validation.charOffset}` : "");
    draft.classList.add("invalid");
    if (validation.charOffset !== undefined) {
      draft.setSelectionRange(validation.charOffset, validation.charOffset + 1);
    }
  }
  lexicalBadge.hidden = !editor.lexicalEdited;
  submitBtn.disabled = !session.submittable;
  undoBtn.disabled = !editor.canUndo;
}

function renderRecord(): void {
  if (!session) return;
  const rec = session.current;
  if (!rec) {
    recordInfo.textContent = "No records left in this batch.";
    draft.value = "";
    submitBtn.disabled = true;
    return;
  }
  const cross = rec.cross_annotators ? ` (cross: ${rec.cross_annotators.join(" + ")})` : "";
  recordInfo.textContent = `${rec.id} — speaker ${rec.speaker}, ${rec.duration_s}s${cross}`;
  audio.src = session.audioUrl();
  syncDraft();
}

async function renderProgress(): Promise<void> {
  if (!session) return;
  const doc = await session.progress();
  const mine = doc.per_annotator[session.annotator] ?? 0;
  progressBox.textContent =
    `you: ${mine} — corpus: ${doc.annotated}/${doc.records} annotated, ` +
    `${doc.submissions} submissions`;
}

async function submitCurrent(): Promise<void> {
  if (!session) return;
  try {
    await session.submitCurrent();
    setStatus(`submitted (${session.submitted} this session)`);
    renderRecord();
    await renderProgress();
  } catch (err) {
    if (err instanceof SubmissionRejected) {
      // server re-validation caught something our grammar accepted;
      // surface it inline at the reported span
      errorBox.textContent = `server rejected: ${err.detail.error}` +
        (err.detail.byte_offset !== undefined ? ` at byte ${err.detail.byte_offset}` : "");
      draft.classList.add("invalid");
    } else {
      setStatus(String(err), "error");
    }
  }
}

loginForm.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const name = (el<HTMLInputElement>("annotator").value || "").trim();
  if (!name) return;
  session = new AnnotationSession(name, new ApiClient(""));
  try {
    await session.start();
  } catch (err) {
    if (err instanceof GrammarMismatch) {
      setStatus(
        `refusing to start: client grammar diverges from server (${err.failures.length} vectors)`,
        "error",
      );
      session = undefined;
      return;
    }
    setStatus(String(err), "error");
    session = undefined;
    return;
  }
  loginForm.hidden = true;
  workbench.hidden = false;
  setStatus(`signed in as ${name}; grammar conformance verified`);
  renderHotkeys();
  renderRecord();
  await renderProgress();
});

draft.addEventListener("input", () => {
  if (!session || !session.current) return;
  session.editor.setText(draft.value, draft.selectionStart ?? draft.value.length);
  syncDraft();
});

draft.addEventListener("keydown", (ev) => {
  if (!session) return;
  if (ev.altKey && !ev.ctrlKey && !ev.metaKey) {
    session.editor.moveCursor(draft.selectionStart ?? draft.value.length);
    if (session.insertByHotkey(ev.key)) {
      ev.preventDefault();
      syncDraft();
    }
  } else if ((ev.ctrlKey || ev.metaKey) && ev.key.toLowerCase() === "z") {
    ev.preventDefault();
    session.editor.undo();
    syncDraft();
  }
});

submitBtn.addEventListener("click", () => void submitCurrent());
skipBtn.addEventListener("click", () => {
  session?.skip();
  renderRecord();
});
undoBtn.addEventListener("click", () => {
  session?.editor.undo();
  syncDraft();
});
replayBtn.addEventListener("click", () => {
  audio.currentTime = 0;
  void audio.play();
});
