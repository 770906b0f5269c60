import { describe, expect, it } from "vitest";
import {
  DiffSegment,
  reassembleCurrent,
  reassembleOriginal,
  renderTrackChanges,
  wordTokens,
} from "../src/diff.js";

function ops(segments: DiffSegment[]): string[] {
  return segments.map((s) => s.op);
}

describe("wordTokens", () => {
  it("alternates word and whitespace runs", () => {
    expect(wordTokens("knee pain  worse\n")).toEqual([
      "knee",
      " ",
      "pain",
      "  ",
      "worse",
      "\n",
    ]);
  });

  it("keeps leading whitespace as its own token", () => {
    expect(wordTokens("  knee")).toEqual(["  ", "knee"]);
  });

  it("handles empty text", () => {
    expect(wordTokens("")).toEqual([]);
  });
});

describe("renderTrackChanges", () => {
  it("returns a single kept segment when nothing changed", () => {
    const text = "Patient reports knee pain since May.";
    expect(renderTrackChanges(text, text)).toEqual([{ op: "keep", text }]);
  });

  it("marks a pure deletion as one struck segment", () => {
    const segments = renderTrackChanges("keep this extra words gone", "keep this");
    expect(ops(segments)).toEqual(["keep", "delete"]);
    expect(segments[1]?.text).toBe(" extra words gone");
  });

  it("marks a pure insertion", () => {
    const segments = renderTrackChanges("plan rest", "plan complete rest");
    expect(ops(segments)).toContain("insert");
    expect(reassembleCurrent(segments)).toBe("plan complete rest");
  });

  it("shows deletions before insertions at a replacement", () => {
    const segments = renderTrackChanges("pain in left knee", "pain in right knee");
    expect(ops(segments)).toEqual(["keep", "delete", "insert", "keep"]);
  });

  it("diffs at word granularity, not characters", () => {
    const segments = renderTrackChanges("paracetamol", "ibuprofen");
    expect(segments).toEqual([
      { op: "delete", text: "paracetamol" },
      { op: "insert", text: "ibuprofen" },
    ]);
  });

  it("handles empty originals and empty currents", () => {
    expect(renderTrackChanges("", "new text")).toEqual([{ op: "insert", text: "new text" }]);
    expect(renderTrackChanges("old text", "")).toEqual([{ op: "delete", text: "old text" }]);
    expect(renderTrackChanges("", "")).toEqual([]);
  });

  it("reassembles both sides on a mixed multiline edit", () => {
    const original = "Knee pain since May.\nNo swelling seen.\nPlan: rest, ice.";
    const current = "Knee pain since March.\nNo swelling or redness seen.\nPlan: rest.";
    const segments = renderTrackChanges(original, current);
    expect(reassembleCurrent(segments)).toBe(current);
    expect(reassembleOriginal(segments)).toBe(original);
  });
});

// deterministic PRNG so failures replay
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const VOCAB = [
  "patient", "reports", "knee", "pain", "swelling", "left", "right",
  "since", "May", "worse", "rest", "ice", "plan", "review", "weeks",
  "no", "redness", "examination", "normal", "advised", "paracetamol",
];
const SPACES = [" ", "  ", "\n", " \n"];

function randomNote(rand: () => number): string {
  const length = 5 + Math.floor(rand() * 60);
  let out = "";
  for (let i = 0; i < length; i++) {
    out += VOCAB[Math.floor(rand() * VOCAB.length)];
    if (i < length - 1) {
      out += SPACES[Math.floor(rand() * SPACES.length)];
    }
  }
  return rand() < 0.3 ? out + "." : out;
}

function randomEdit(rand: () => number, original: string): string {
  const tokens = original.split(/\s+/).filter((t) => t.length > 0);
  const edits = 1 + Math.floor(rand() * 8);
  for (let e = 0; e < edits; e++) {
    const at = Math.floor(rand() * (tokens.length + 1));
    const choice = rand();
    if (choice < 0.34 && tokens.length > 1) {
      tokens.splice(Math.min(at, tokens.length - 1), 1 + Math.floor(rand() * 4));
    } else if (choice < 0.67) {
      tokens.splice(at, 0, VOCAB[Math.floor(rand() * VOCAB.length)]!);
    } else if (tokens.length > 0) {
      tokens[Math.min(at, tokens.length - 1)] = VOCAB[Math.floor(rand() * VOCAB.length)]!;
    }
  }
  let out = "";
  for (let i = 0; i < tokens.length; i++) {
    out += tokens[i];
    if (i < tokens.length - 1) {
      out += SPACES[Math.floor(rand() * SPACES.length)];
    }
  }
  return out;
}

describe("reassembly property", () => {
  it("holds on 50 random edit scripts", () => {
    const rand = mulberry32(20260814);
    for (let script = 0; script < 50; script++) {
      const original = randomNote(rand);
      const current = randomEdit(rand, original);
      const segments = renderTrackChanges(original, current);
      expect(reassembleCurrent(segments), `script ${script}`).toBe(current);
      expect(reassembleOriginal(segments), `script ${script}`).toBe(original);
      // segments are maximal runs: no two neighbours share an op
      for (let s = 1; s < segments.length; s++) {
        expect(segments[s]?.op).not.toBe(segments[s - 1]?.op);
      }
    }
  });
});
