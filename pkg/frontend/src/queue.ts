/** Serialized label submission over a batch of scenes.
 *
 * One request in flight at a time, one submission per scene ever
 * (repeat keypresses are dropped while a scene resolves), transient
 * network failures retried with exponential backoff without losing the
 * queue position, and a 409 resolved as labeled-elsewhere rather than
 * an error.
 */

import { ApiError, Client } from "./api.js";
import type { Label } from "./types.js";

export type CardState = "pending" | "submitting" | "labeled" | "labeled-elsewhere" | "failed";

export interface Submission {
  id: string;
  outcome: "labeled" | "labeled-elsewhere" | "failed";
  label: Label | null;
  /** filled on failure: the message worth showing */
  error?: string;
}

export interface QueueOptions {
  maxRetries?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class LabelQueue {
  private readonly client: Client;
  private readonly ids: string[];
  private readonly states = new Map<string, CardState>();
  private readonly maxRetries: number;
  private readonly backoffMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private cursor = 0;
  private chain: Promise<unknown> = Promise.resolve();

  constructor(client: Client, ids: string[], options: QueueOptions = {}) {
    this.client = client;
    this.ids = [...ids];
    this.maxRetries = options.maxRetries ?? 3;
    this.backoffMs = options.backoffMs ?? 500;
    this.sleep = options.sleep ?? defaultSleep;
    for (const id of this.ids) this.states.set(id, "pending");
  }

  get total(): number {
    return this.ids.length;
  }

  /** Scenes still needing a label (pending or failed-and-retryable). */
  get remaining(): number {
    let n = 0;
    for (const id of this.ids) {
      const s = this.states.get(id);
      if (s === "pending" || s === "failed" || s === "submitting") n += 1;
    }
    return n;
  }

  get done(): boolean {
    return this.remaining === 0;
  }

  current(): string | null {
    return this.cursor < this.ids.length ? this.ids[this.cursor] : null;
  }

  stateOf(id: string): CardState {
    return this.states.get(id) ?? "pending";
  }

  /** Label the current scene and advance. Resolves when the submission
   * settles; drops the call if the current scene is already resolving. */
  label(label: Label): Promise<Submission | null> {
    const id = this.current();
    if (id === null) return Promise.resolve(null);
    const state = this.states.get(id);
    if (state === "submitting" || state === "labeled" || state === "labeled-elsewhere") {
      return Promise.resolve(null);
    }
    this.states.set(id, "submitting");
    const settled = this.chain.then(() => this.submit(id, label));
    // keep the chain alive past failures so later submissions still run
    this.chain = settled.catch(() => undefined);
    return settled;
  }

  /** Skip past the current card without labeling (e.g. resolved elsewhere). */
  advance(): void {
    if (this.cursor < this.ids.length) this.cursor += 1;
  }

  private async submit(id: string, label: Label): Promise<Submission> {
    for (let attempt = 0; ; attempt += 1) {
      try {
        await this.client.submitLabel(id, label);
        this.states.set(id, "labeled");
        this.advanceFrom(id);
        return { id, outcome: "labeled", label };
      } catch (err) {
        if (err instanceof ApiError) {
          if (err.status === 409 && err.code === "already_labeled") {
            this.states.set(id, "labeled-elsewhere");
            this.advanceFrom(id);
            return { id, outcome: "labeled-elsewhere", label: null };
          }
          // a definite refusal: no retry, keep the position
          this.states.set(id, "failed");
          return { id, outcome: "failed", label: null, error: err.message };
        }
        // network-level failure: back off and retry in place
        if (attempt >= this.maxRetries) {
          this.states.set(id, "failed");
          const msg = err instanceof Error ? err.message : String(err);
          return { id, outcome: "failed", label: null, error: msg };
        }
        await this.sleep(this.backoffMs * 2 ** attempt);
      }
    }
  }

  private advanceFrom(id: string): void {
    if (this.current() === id) this.advance();
  }
}
