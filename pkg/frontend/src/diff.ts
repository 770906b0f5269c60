/** Word-level track changes.
 *
 * The display is derived from (original, current) alone.  Both texts are
 * split into alternating word and whitespace runs, a longest common
 * subsequence aligns them, and runs of equal operations merge into
 * segments.  Two invariants hold by construction:
 *
 *   kept + inserted segments, concatenated in order == current
 *   kept + deleted  segments, concatenated in order == original
 */

export type DiffOp = "keep" | "insert" | "delete";

export interface DiffSegment {
  op: DiffOp;
  text: string;
}

/** Alternating word and whitespace runs; whitespace runs only pair with
 * identical runs, so changed spacing shows up as a change. */
export function wordTokens(text: string): string[] {
  return text.match(/\s+|\S+/g) ?? [];
}

function lcsTable(a: string[], b: string[]): Int32Array {
  const w = b.length + 1;
  const table = new Int32Array((a.length + 1) * w);
  for (let i = 1; i <= a.length; i++) {
    for (let j = 1; j <= b.length; j++) {
      table[i * w + j] =
        a[i - 1] === b[j - 1]
          ? table[(i - 1) * w + (j - 1)]! + 1
          : Math.max(table[(i - 1) * w + j]!, table[i * w + (j - 1)]!);
    }
  }
  return table;
}

/** Track-changes segments between the served note and the evaluator's text. */
export function renderTrackChanges(original: string, current: string): DiffSegment[] {
  const a = wordTokens(original);
  const b = wordTokens(current);
  const w = b.length + 1;
  const table = lcsTable(a, b);

  // walk the table backwards; deletions surface before insertions at a
  // replacement point so struck text reads ahead of its replacement
  const ops: { op: DiffOp; token: string }[] = [];
  let i = a.length;
  let j = b.length;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && a[i - 1] === b[j - 1]) {
      ops.push({ op: "keep", token: a[i - 1]! });
      i--;
      j--;
    } else if (j > 0 && (i === 0 || table[i * w + (j - 1)]! >= table[(i - 1) * w + j]!)) {
      ops.push({ op: "insert", token: b[j - 1]! });
      j--;
    } else {
      ops.push({ op: "delete", token: a[i - 1]! });
      i--;
    }
  }
  ops.reverse();

  const segments: DiffSegment[] = [];
  for (const { op, token } of ops) {
    const last = segments[segments.length - 1];
    if (last !== undefined && last.op === op) {
      last.text += token;
    } else {
      segments.push({ op, text: token });
    }
  }
  return segments;
}

/** The text an evaluator sees as final: kept plus inserted segments. */
export function reassembleCurrent(segments: DiffSegment[]): string {
  return segments
    .filter((s) => s.op !== "delete")
    .map((s) => s.text)
    .join("");
}

/** The served text: kept plus deleted segments. */
export function reassembleOriginal(segments: DiffSegment[]): string {
  return segments
    .filter((s) => s.op !== "insert")
    .map((s) => s.text)
    .join("");
}
