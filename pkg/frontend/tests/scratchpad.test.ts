import { describe, expect, it } from "vitest";
import { Scratchpad } from "../src/scratchpad.js";

function memoryStore() {
  const map = new Map<string, string>();
  return {
    getItem: (k: string) => map.get(k) ?? null,
    setItem: (k: string, v: string) => void map.set(k, v),
  };
}

describe("Scratchpad", () => {
  it("starts empty and round-trips saves", () => {
    const store = memoryStore();
    const pad = new Scratchpad("study012", store);
    expect(pad.load()).toBe("");
    pad.save("own note draft");
    expect(pad.load()).toBe("own note draft");
  });

  it("persists across reloads of the same consultation", () => {
    const store = memoryStore();
    new Scratchpad("study012", store).save("kept text");
    expect(new Scratchpad("study012", store).load()).toBe("kept text");
  });

  it("keeps consultations separate", () => {
    const store = memoryStore();
    new Scratchpad("study012", store).save("for 12");
    new Scratchpad("study013", store).save("for 13");
    expect(new Scratchpad("study012", store).load()).toBe("for 12");
    expect(new Scratchpad("study013", store).load()).toBe("for 13");
  });
});
