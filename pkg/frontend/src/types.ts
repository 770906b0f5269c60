/** Wire documents, field names exactly as the task server uses them. */

export interface TranscriptTurn {
  speaker: string;
  text: string;
}

/** A blinded note as served: no role, no source. */
export interface BundleNote {
  note_id: string;
  text: string;
}

export interface TaskBundle {
  consultation_id: string;
  transcript: TranscriptTurn[];
  notes: BundleNote[];
  taxonomy_tags: string[];
}

export type SpanKind = "incorrect" | "omission";

export interface ErrorSpanDoc {
  text: string;
  kind: SpanKind;
  critical: boolean;
}

export interface JudgementDoc {
  evaluator_id: string;
  note_id: string;
  post_edit_seconds: number;
  incorrect_spans: ErrorSpanDoc[];
  omission_spans: ErrorSpanDoc[];
  comments: string;
  taxonomy_tags: string[];
}
