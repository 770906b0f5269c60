/** One note's post-editing session: text state and the task timer.
 *
 * The timer starts on the first focus of the editing area, never before,
 * and stops permanently on submit.  Elapsed time is monotone even if the
 * wall clock is adjusted mid-session.  The served text is kept immutable;
 * the track-changes display derives from (original, current) only.
 */

import { DiffSegment, renderTrackChanges } from "./diff.js";

/** Millisecond clock, injectable so tests can script time. */
export type Clock = () => number;

export class EditSession {
  readonly noteId: string;
  readonly original: string;
  private text: string;
  private readonly clock: Clock;
  private startedAt: number | null = null;
  private stoppedAt: number | null = null;
  private maxElapsedMs = 0;

  constructor(noteId: string, original: string, clock: Clock = () => Date.now()) {
    this.noteId = noteId;
    this.original = original;
    this.text = original;
    this.clock = clock;
  }

  get current(): string {
    return this.text;
  }

  get submitted(): boolean {
    return this.stoppedAt !== null;
  }

  /** First focus of the editor arms the timer; later focuses are no-ops. */
  focus(): void {
    if (this.startedAt === null && this.stoppedAt === null) {
      this.startedAt = this.clock();
    }
  }

  updateText(text: string): void {
    if (this.submitted) {
      throw new Error("session already submitted");
    }
    this.focus(); // typing implies focus even if no focus event fired
    this.text = text;
  }

  elapsedSeconds(): number {
    if (this.startedAt === null) {
      return 0;
    }
    const end = this.stoppedAt ?? this.clock();
    const ms = Math.max(0, end - this.startedAt);
    this.maxElapsedMs = Math.max(this.maxElapsedMs, ms);
    return this.maxElapsedMs / 1000;
  }

  /** Stop the timer; the session becomes read-only. Idempotent. */
  submit(): void {
    if (this.stoppedAt === null) {
      if (this.startedAt === null) {
        this.startedAt = this.clock();
      }
      this.stoppedAt = this.clock();
      this.elapsedSeconds(); // pin the final value
    }
  }

  segments(): DiffSegment[] {
    return renderTrackChanges(this.original, this.text);
  }
}

/** MM:SS, floored, as shown next to the editor. */
export function formatTimer(seconds: number): string {
  const whole = Math.max(0, Math.floor(seconds));
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${String(minutes).padStart(2, "0")}:${String(rest).padStart(2, "0")}`;
}

/** Inverse of formatTimer, for checking display against export. */
export function timerToSeconds(display: string): number {
  const [minutes, seconds] = display.split(":");
  return Number(minutes) * 60 + Number(seconds);
}
