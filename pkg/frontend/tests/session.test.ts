import { describe, expect, it } from "vitest";
import { EditSession, formatTimer, timerToSeconds } from "../src/session.js";

function scriptedClock(start = 1_000_000) {
  let now = start;
  return {
    now: () => now,
    advance: (ms: number) => {
      now += ms;
    },
    set: (ms: number) => {
      now = ms;
    },
  };
}

describe("EditSession timer", () => {
  it("stays at zero until the first focus", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    clock.advance(30_000);
    expect(session.elapsedSeconds()).toBe(0);
    session.focus();
    clock.advance(2_500);
    expect(session.elapsedSeconds()).toBe(2.5);
  });

  it("does not restart on repeated focus", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    session.focus();
    clock.advance(10_000);
    session.focus();
    clock.advance(5_000);
    expect(session.elapsedSeconds()).toBe(15);
  });

  it("starts on first edit when no focus event fired", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    clock.advance(60_000);
    session.updateText("text changed");
    clock.advance(4_000);
    expect(session.elapsedSeconds()).toBe(4);
  });

  it("is monotone even if the wall clock jumps backwards", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    session.focus();
    clock.advance(20_000);
    expect(session.elapsedSeconds()).toBe(20);
    clock.set(1_000_000 + 5_000); // clock adjusted backwards
    expect(session.elapsedSeconds()).toBe(20);
    clock.advance(30_000);
    expect(session.elapsedSeconds()).toBe(35);
  });

  it("stops on submit and never advances again", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    session.focus();
    clock.advance(83_400);
    session.submit();
    clock.advance(120_000);
    expect(session.elapsedSeconds()).toBe(83.4);
    session.submit(); // idempotent
    expect(session.elapsedSeconds()).toBe(83.4);
  });

  it("submitting an untouched note records zero seconds", () => {
    const clock = scriptedClock();
    const session = new EditSession("n1", "text", clock.now);
    clock.advance(9_000);
    session.submit();
    expect(session.elapsedSeconds()).toBe(0);
  });
});

describe("EditSession text state", () => {
  it("never mutates the served original", () => {
    const session = new EditSession("n1", "served text", () => 0);
    session.updateText("served text plus edits");
    expect(session.original).toBe("served text");
    expect(session.current).toBe("served text plus edits");
  });

  it("rejects edits after submit", () => {
    const session = new EditSession("n1", "text", () => 0);
    session.submit();
    expect(() => session.updateText("more")).toThrow(/submitted/);
  });

  it("derives display segments from original and current only", () => {
    const session = new EditSession("n1", "a b c", () => 0);
    session.updateText("a x c");
    session.updateText("a b d");
    // intermediate states leave no trace
    expect(session.segments()).toEqual([
      { op: "keep", text: "a b " },
      { op: "delete", text: "c" },
      { op: "insert", text: "d" },
    ]);
  });
});

describe("timer display", () => {
  it("formats minutes and seconds", () => {
    expect(formatTimer(0)).toBe("00:00");
    expect(formatTimer(83.4)).toBe("01:23");
    expect(formatTimer(3599.9)).toBe("59:59");
    expect(formatTimer(-2)).toBe("00:00");
  });

  it("round-trips within a second of the exported value", () => {
    for (const elapsed of [0, 0.4, 59.9, 60, 61.2, 96.5, 136.4, 3000.7]) {
      const display = formatTimer(elapsed);
      expect(Math.abs(timerToSeconds(display) - elapsed)).toBeLessThan(1);
    }
  });
});
