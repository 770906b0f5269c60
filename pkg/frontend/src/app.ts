/** Browser entry point: the evaluator's task screen.
 *
 * Layout mirrors the study workflow: the transcript and the evaluator's
 * own scratchpad note stay visible on the left for the whole task, while
 * each of the five blinded notes gets a post-editing pane with a timer,
 * live track changes, error-span capture, tags, and submission.
 */

import { fetchBundle, listConsultations, postJudgement } from "./api.js";
import { captureErrors, CaptureError, SpanInput } from "./capture.js";
import { EditSession, formatTimer } from "./session.js";
import { Scratchpad } from "./scratchpad.js";
import { TaskBundle } from "./types.js";

interface NoteState {
  session: EditSession;
  spans: SpanInput[];
  comments: string;
  tags: Set<string>;
  submitted: boolean;
}

const base = "";
let bundle: TaskBundle | null = null;
let states: NoteState[] = [];
let activeNote = 0;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function renderTranscript(container: HTMLElement): void {
  container.textContent = "";
  for (const turn of bundle?.transcript ?? []) {
    const row = el("div", `turn turn-${turn.speaker}`);
    row.append(el("span", "speaker", turn.speaker), el("span", "turn-text", turn.text));
    container.append(row);
  }
}

function renderDiff(container: HTMLElement, state: NoteState): void {
  container.textContent = "";
  for (const segment of state.session.segments()) {
    if (segment.op === "keep") {
      container.append(document.createTextNode(segment.text));
    } else if (segment.op === "insert") {
      container.append(el("ins", "diff-insert", segment.text));
    } else {
      container.append(el("del", "diff-delete", segment.text));
    }
  }
}

function renderSpans(state: NoteState): void {
  const list = byId<HTMLUListElement>("span-list");
  list.textContent = "";
  state.spans.forEach((span, index) => {
    const item = el("li", `span-item span-${span.kind}`);
    const label = el("span", "span-kind", span.kind + (span.critical ? " (critical)" : ""));
    const text = el("span", "span-text", span.text);
    const remove = el("button", "span-remove", "remove");
    remove.type = "button";
    remove.disabled = state.submitted;
    remove.addEventListener("click", () => {
      state.spans.splice(index, 1);
      renderSpans(state);
    });
    item.append(label, text, remove);
    list.append(item);
  });
}

function renderTags(state: NoteState): void {
  const box = byId<HTMLDivElement>("tags");
  box.textContent = "";
  for (const tag of bundle?.taxonomy_tags ?? []) {
    const label = el("label", "tag");
    const input = el("input");
    input.type = "checkbox";
    input.checked = state.tags.has(tag);
    input.disabled = state.submitted;
    input.addEventListener("change", () => {
      if (input.checked) {
        state.tags.add(tag);
      } else {
        state.tags.delete(tag);
      }
    });
    label.append(input, document.createTextNode(` ${tag}`));
    box.append(label);
  }
}

function setStatus(message: string, isError = false): void {
  const status = byId<HTMLParagraphElement>("status");
  status.textContent = message;
  status.className = isError ? "status-error" : "status-ok";
}

function showNote(index: number): void {
  activeNote = index;
  const state = states[index];
  if (!state || !bundle) {
    return;
  }
  document.querySelectorAll<HTMLButtonElement>("#note-tabs button").forEach((b, i) => {
    b.classList.toggle("active", i === index);
  });
  const editor = byId<HTMLTextAreaElement>("editor");
  editor.value = state.session.current;
  editor.disabled = state.submitted;
  byId<HTMLTextAreaElement>("note-comments").value = state.comments;
  byId<HTMLButtonElement>("submit-note").disabled = state.submitted;
  renderDiff(byId("diff"), state);
  renderSpans(state);
  renderTags(state);
  setStatus(state.submitted ? "already submitted" : "");
}

function currentState(): NoteState | null {
  return states[activeNote] ?? null;
}

async function submitActiveNote(): Promise<void> {
  const state = currentState();
  if (!state || state.submitted) {
    return;
  }
  const evaluator = byId<HTMLInputElement>("evaluator-id").value;
  state.comments = byId<HTMLTextAreaElement>("note-comments").value;
  state.session.submit();
  try {
    const doc = captureErrors(
      state.session,
      evaluator,
      state.spans,
      state.comments,
      [...state.tags],
    );
    await postJudgement(base, doc);
    state.submitted = true;
    showNote(activeNote);
    setStatus(`stored judgement for note ${doc.note_id}`);
  } catch (err) {
    if (err instanceof CaptureError) {
      setStatus(err.message, true);
    } else {
      setStatus(`submit failed: ${(err as Error).message}`, true);
    }
  }
}

function wireEditor(): void {
  const editor = byId<HTMLTextAreaElement>("editor");
  editor.addEventListener("focus", () => currentState()?.session.focus());
  editor.addEventListener("input", () => {
    const state = currentState();
    if (state && !state.submitted) {
      state.session.updateText(editor.value);
      renderDiff(byId("diff"), state);
    }
  });
  window.setInterval(() => {
    const state = currentState();
    if (state) {
      byId("timer").textContent = formatTimer(state.session.elapsedSeconds());
    }
  }, 250);
}

function wireSpanForm(): void {
  byId<HTMLButtonElement>("add-span").addEventListener("click", () => {
    const state = currentState();
    if (!state || state.submitted) {
      return;
    }
    const textInput = byId<HTMLTextAreaElement>("span-text");
    const kind = byId<HTMLSelectElement>("span-kind").value as SpanInput["kind"];
    const critical = byId<HTMLInputElement>("span-critical").checked;
    if (!textInput.value.trim()) {
      setStatus("paste the span text first", true);
      return;
    }
    state.spans.push({ text: textInput.value, kind, critical });
    textInput.value = "";
    byId<HTMLInputElement>("span-critical").checked = false;
    renderSpans(state);
  });
}

async function loadConsultation(cid: string): Promise<void> {
  bundle = await fetchBundle(base, cid);
  states = bundle.notes.map((note) => ({
    session: new EditSession(note.note_id, note.text),
    spans: [],
    comments: "",
    tags: new Set<string>(),
    submitted: false,
  }));
  const pad = new Scratchpad(bundle.consultation_id, window.localStorage);
  const padBox = byId<HTMLTextAreaElement>("scratchpad");
  padBox.value = pad.load();
  padBox.oninput = () => pad.save(padBox.value);

  renderTranscript(byId("transcript"));
  const tabs = byId<HTMLDivElement>("note-tabs");
  tabs.textContent = "";
  bundle.notes.forEach((_, index) => {
    const tab = el("button", "", `note ${index + 1}`);
    tab.type = "button";
    tab.addEventListener("click", () => showNote(index));
    tabs.append(tab);
  });
  showNote(0);
}

async function boot(): Promise<void> {
  wireEditor();
  wireSpanForm();
  byId<HTMLButtonElement>("submit-note").addEventListener("click", () => {
    void submitActiveNote();
  });
  const picker = byId<HTMLSelectElement>("consultation");
  const ids = await listConsultations(base);
  for (const cid of ids) {
    const option = el("option", "", cid);
    option.value = cid;
    picker.append(option);
  }
  picker.addEventListener("change", () => {
    void loadConsultation(picker.value);
  });
  if (ids.length > 0 && ids[0] !== undefined) {
    picker.value = ids[0];
    await loadConsultation(ids[0]);
  }
}

if (typeof document !== "undefined") {
  void boot().catch((err) => {
    setStatus(`failed to load tasks: ${(err as Error).message}`, true);
  });
}
