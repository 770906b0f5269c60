/** Thin client for the task server's endpoints. */

import { JudgementDoc, TaskBundle } from "./types.js";

async function parseError(response: Response): Promise<string> {
  try {
    const doc = (await response.json()) as { error?: string };
    if (doc.error) {
      return doc.error;
    }
  } catch {
    // fall through to the status line
  }
  return `${response.status} ${response.statusText}`;
}

export async function listConsultations(base: string): Promise<string[]> {
  const response = await fetch(`${base}/tasks`);
  if (!response.ok) {
    throw new Error(await parseError(response));
  }
  const doc = (await response.json()) as { consultations: string[] };
  return doc.consultations;
}

export async function fetchBundle(base: string, consultationId: string): Promise<TaskBundle> {
  const response = await fetch(`${base}/tasks/${encodeURIComponent(consultationId)}`);
  if (!response.ok) {
    throw new Error(await parseError(response));
  }
  return (await response.json()) as TaskBundle;
}

export async function postJudgement(
  base: string,
  doc: JudgementDoc,
): Promise<{ evaluator_id: string; note_id: string }> {
  const response = await fetch(`${base}/judgements`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(doc),
  });
  if (!response.ok) {
    throw new Error(await parseError(response));
  }
  const stored = (await response.json()) as {
    stored: { evaluator_id: string; note_id: string };
  };
  return stored.stored;
}
