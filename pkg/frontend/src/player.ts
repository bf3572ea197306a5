/** Playback clock over a fixed frame list. Pure state machine; the page
 * drives it from requestAnimationFrame and the tests drive it directly. */

import type { Frame } from "./types.js";

export const STEP_SECONDS = 0.5;

export class Player {
  private frames: Frame[];
  private clock = 0;
  playing = false;
  speed = 1.0;

  constructor(frames: Frame[]) {
    this.frames = frames;
  }

  get isEmpty(): boolean {
    return this.frames.length === 0;
  }

  /** Last frame time; 0 for an empty or single-frame list. */
  get duration(): number {
    return this.frames.length ? this.frames[this.frames.length - 1].time : 0;
  }

  get time(): number {
    return this.clock;
  }

  setFrames(frames: Frame[]): void {
    this.frames = frames;
    this.clock = 0;
    this.playing = false;
  }

  play(): void {
    if (this.isEmpty) return;
    // restart from the top when play is hit at the end
    if (this.clock >= this.duration) this.clock = 0;
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }

  toggle(): void {
    this.playing ? this.pause() : this.play();
  }

  /** Advance the clock by wall-time dt (seconds); stops at the end. */
  tick(dt: number): void {
    if (!this.playing) return;
    this.clock += dt * this.speed;
    if (this.clock >= this.duration) {
      this.clock = this.duration;
      this.playing = false;
    }
  }

  /** Jump by +-0.5 s, clamped to the frame range; pauses playback. */
  step(direction: 1 | -1): void {
    this.playing = false;
    this.scrubTo(this.clock + direction * STEP_SECONDS);
  }

  scrubTo(t: number): void {
    this.clock = Math.min(Math.max(t, 0), this.duration);
  }

  /** Index of the frame at or just before the clock. */
  frameIndex(): number {
    const n = this.frames.length;
    if (n === 0) return -1;
    let lo = 0;
    let hi = n - 1;
    while (lo < hi) {
      const mid = (lo + hi + 1) >> 1;
      if (this.frames[mid].time <= this.clock) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  }

  currentFrame(): Frame | null {
    const i = this.frameIndex();
    return i < 0 ? null : this.frames[i];
  }

  /** Marks for the scrubber: one per 0.5 s of duration. */
  snapshotMarks(): number[] {
    const marks: number[] = [];
    for (let t = 0; t <= this.duration + 1e-9; t += STEP_SECONDS) {
      marks.push(Math.round(t * 1000) / 1000);
    }
    return marks;
  }
}
