/** Build the exported judgement document from a finished session.
 *
 * Span texts are the evaluator's pasted selections, byte for byte; the
 * document carries exactly the corpus schema fields and nothing else.
 */

import { EditSession } from "./session.js";
import { ErrorSpanDoc, JudgementDoc, SpanKind } from "./types.js";

export interface SpanInput {
  text: string;
  kind: SpanKind;
  critical?: boolean;
}

export class CaptureError extends Error {}

export function captureErrors(
  session: EditSession,
  evaluatorId: string,
  spans: SpanInput[],
  comments: string,
  taxonomyTags: string[],
): JudgementDoc {
  if (!session.submitted) {
    throw new CaptureError("submit the edit before exporting");
  }
  if (!evaluatorId.trim()) {
    throw new CaptureError("evaluator id is required");
  }
  if (!session.noteId) {
    throw new CaptureError("session has no note id");
  }
  const elapsed = session.elapsedSeconds();
  if (!(elapsed >= 0)) {
    throw new CaptureError(`negative post-edit time: ${elapsed}`);
  }
  const incorrect: ErrorSpanDoc[] = [];
  const omission: ErrorSpanDoc[] = [];
  for (const span of spans) {
    if (!span.text.trim()) {
      throw new CaptureError("error spans need non-empty text");
    }
    const doc: ErrorSpanDoc = {
      text: span.text,
      kind: span.kind,
      critical: span.critical ?? false,
    };
    (span.kind === "incorrect" ? incorrect : omission).push(doc);
  }
  const tags = [...new Set(taxonomyTags)].sort();
  return {
    evaluator_id: evaluatorId,
    note_id: session.noteId,
    post_edit_seconds: elapsed,
    incorrect_spans: incorrect,
    omission_spans: omission,
    comments,
    taxonomy_tags: tags,
  };
}
