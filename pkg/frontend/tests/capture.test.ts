import { describe, expect, it } from "vitest";
import { CaptureError, captureErrors } from "../src/capture.js";
import { EditSession } from "../src/session.js";

function submittedSession(elapsedMs = 83_400): EditSession {
  let now = 0;
  const session = new EditSession("note-7", "original text", () => now);
  session.focus();
  now = elapsedMs;
  session.updateText("edited text");
  session.submit();
  return session;
}

describe("captureErrors", () => {
  it("exports exactly the corpus schema fields", () => {
    const doc = captureErrors(
      submittedSession(),
      "ev1",
      [
        { text: "BP was 140/90", kind: "incorrect", critical: true },
        { text: "seen last week", kind: "incorrect" },
        { text: "allergy to penicillin", kind: "omission" },
      ],
      "one hallucinated vital",
      ["hallucination", "omission-generic", "hallucination"],
    );
    expect(Object.keys(doc).sort()).toEqual([
      "comments",
      "evaluator_id",
      "incorrect_spans",
      "note_id",
      "omission_spans",
      "post_edit_seconds",
      "taxonomy_tags",
    ]);
    for (const span of [...doc.incorrect_spans, ...doc.omission_spans]) {
      expect(Object.keys(span).sort()).toEqual(["critical", "kind", "text"]);
    }
    expect(doc.evaluator_id).toBe("ev1");
    expect(doc.note_id).toBe("note-7");
    expect(doc.post_edit_seconds).toBe(83.4);
    expect(doc.incorrect_spans).toHaveLength(2);
    expect(doc.omission_spans).toHaveLength(1);
    expect(doc.incorrect_spans[0]?.critical).toBe(true);
    expect(doc.incorrect_spans[1]?.critical).toBe(false);
    expect(doc.comments).toBe("one hallucinated vital");
    expect(doc.taxonomy_tags).toEqual(["hallucination", "omission-generic"]);
  });

  it("keeps pasted span text untransformed", () => {
    const pasted = "  BP 120/80 recorded twice \n";
    const doc = captureErrors(
      submittedSession(),
      "ev1",
      [{ text: pasted, kind: "incorrect" }],
      "",
      [],
    );
    expect(doc.incorrect_spans[0]?.text).toBe(pasted);
  });

  it("routes spans to the list matching their kind", () => {
    const doc = captureErrors(
      submittedSession(),
      "ev1",
      [
        { text: "a", kind: "omission" },
        { text: "b", kind: "incorrect" },
        { text: "c", kind: "omission", critical: true },
      ],
      "",
      [],
    );
    expect(doc.incorrect_spans.map((s) => s.text)).toEqual(["b"]);
    expect(doc.omission_spans.map((s) => s.text)).toEqual(["a", "c"]);
    expect(doc.omission_spans.every((s) => s.kind === "omission")).toBe(true);
  });

  it("blocks export before submit", () => {
    const session = new EditSession("note-7", "text", () => 0);
    expect(() => captureErrors(session, "ev1", [], "", [])).toThrow(CaptureError);
  });

  it("blocks a missing evaluator id", () => {
    expect(() => captureErrors(submittedSession(), "   ", [], "", [])).toThrow(
      /evaluator/,
    );
  });

  it("blocks empty span text", () => {
    expect(() =>
      captureErrors(submittedSession(), "ev1", [{ text: " ", kind: "omission" }], "", []),
    ).toThrow(/non-empty/);
  });

  it("blocks a missing note id", () => {
    let now = 0;
    const session = new EditSession("", "text", () => now);
    session.submit();
    expect(() => captureErrors(session, "ev1", [], "", [])).toThrow(/note id/);
  });
});
