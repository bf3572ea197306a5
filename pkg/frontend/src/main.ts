/** Page wiring: connects the service client, the label queue, the
 * player, and the dashboard to the DOM. */

import { ApiError, Client } from "./api.js";
import { lossChartPoints, rateRows, trainGate } from "./dashboard.js";
import { Player } from "./player.js";
import { drawFrame, drawPlaceholder, fitProjection, Projection, Viewport } from "./render.js";
import { LabelQueue } from "./queue.js";
import type { Label, SceneDetail } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function defaultBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://127.0.0.1:8000";
}

class App {
  client: Client;
  player = new Player([]);
  queue: LabelQueue | null = null;
  scenes = new Map<string, SceneDetail>();
  projection: Projection = { scale: 1, offsetX: 0, offsetY: 0 };
  round = 1;
  connected = false;
  lastEpochs = 100;

  readonly canvas = $<HTMLCanvasElement>("stage");
  readonly ctx = this.canvas.getContext("2d")!;
  readonly lossCanvas = $<HTMLCanvasElement>("loss-chart");

  constructor() {
    this.client = new Client(defaultBaseUrl());
    $<HTMLInputElement>("base-url").value = this.client.baseUrl;
  }

  get viewport(): Viewport {
    return { width: this.canvas.width, height: this.canvas.height, margin: 0.08 };
  }

  setBaseUrl(url: string): void {
    this.client = new Client(url);
  }

  currentScene(): SceneDetail | null {
    const id = this.queue?.current() ?? null;
    return id ? this.scenes.get(id) ?? null : null;
  }

  async refreshRound(): Promise<void> {
    try {
      const status = await this.client.currentRound();
      this.connected = true;
      this.round = status.round;
      $("round-number").textContent = String(status.round);
      $("pending-count").textContent = String(status.pending);
      $("banner").hidden = true;

      const rows = rateRows(status.history);
      $("rates").innerHTML = rows.length
        ? rows.map((r) =>
            `<tr><td>${r.round}</td><td>${(r.goodRate * 100).toFixed(1)}%</td>` +
            `<td>${(r.mediumRate * 100).toFixed(1)}%</td>` +
            `<td>${(r.badRate * 100).toFixed(1)}%</td><td>${r.total}</td></tr>`,
          ).join("")
        : `<tr><td colspan="5">no completed labels yet</td></tr>`;

      const labeledThisRound =
        status.history.find((h) => h.round === status.round)?.total ?? 0;
      const gate = trainGate(status.pending, status.training, labeledThisRound);
      const btn = $<HTMLButtonElement>("train");
      btn.disabled = !gate.enabled;
      btn.title = gate.reason ?? "refit the weights on every label so far";
    } catch {
      this.connected = false;
      $("banner").hidden = false;
    }
  }

  async loadBatch(count: number): Promise<void> {
    const note = $("note");
    note.textContent = "sampling...";
    try {
      const batch = await this.client.sampleBatch(this.round, count);
      const details = await Promise.all(batch.ids.map((id) => this.client.getScene(id)));
      for (const d of details) this.scenes.set(d.id, d);
      this.queue = new LabelQueue(this.client, batch.ids);
      note.textContent = `loaded ${batch.ids.length} scenes for round ${batch.round}`;
      this.showCurrent();
    } catch (err) {
      note.textContent = err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : "network failure while sampling; check the service and retry";
    }
    await this.refreshRound();
  }

  setLabelButtons(enabled: boolean): void {
    for (const id of ["label-good", "label-medium", "label-bad"]) {
      $<HTMLButtonElement>(id).disabled = !enabled;
    }
  }

  /** 0.5 s tick marks under the scrubber for the loaded clip. */
  refreshMarks(): void {
    $("marks").innerHTML = this.player.snapshotMarks()
      .map((t) => `<option value="${t}"></option>`).join("");
  }

  showCurrent(): void {
    const scene = this.currentScene();
    const q = this.queue;
    $("progress").textContent = q ? `${q.total - q.remaining} / ${q.total}` : "-";
    const bar = $<HTMLProgressElement>("progress-bar");
    bar.max = q?.total ?? 1;
    bar.value = q ? q.total - q.remaining : 0;
    this.setLabelButtons(scene !== null);

    if (!scene) {
      this.player.setFrames([]);
      this.refreshMarks();
      $("scene-summary").textContent = q?.done
        ? "batch finished; train or load another batch"
        : "no scene loaded";
      $("card-state").textContent = "";
      return;
    }
    this.player.setFrames(scene.frames);
    this.refreshMarks();
    this.projection = fitProjection(scene.frames, this.viewport);
    this.player.play();

    const rel = (scene.scene as { relation?: { name?: string } }).relation;
    const e = scene.energy;
    $("scene-summary").textContent =
      `${scene.id} | ${rel?.name ?? "?"} | ${this.player.duration.toFixed(2)} s | ` +
      `energy ${e.total.toFixed(2)} (tree ${e.tree.toFixed(2)}, ` +
      `spatial ${e.spatial.toFixed(2)}, temporal ${e.temporal.toFixed(2)})`;
    $("card-state").textContent = "";
  }

  async submit(label: Label): Promise<void> {
    if (!this.queue) return;
    this.setLabelButtons(false);
    const result = await this.queue.label(label);
    if (result === null) return;   // repeat keypress while resolving
    if (result.outcome === "labeled-elsewhere") {
      $("card-state").textContent = `${result.id} was already labeled elsewhere`;
    } else if (result.outcome === "failed") {
      $("card-state").textContent = `submission failed: ${result.error ?? "unknown"}`;
      this.setLabelButtons(true);   // keep the card so the user can retry
      return;
    }
    this.showCurrent();
    await this.refreshRound();
  }

  async train(): Promise<void> {
    const epochs = Number($<HTMLInputElement>("epochs").value) || 100;
    this.lastEpochs = epochs;
    const note = $("note");
    note.textContent = `training round ${this.round} (${epochs} epochs)...`;
    try {
      const result = await this.client.train(this.round, { epochs });
      note.textContent =
        `round ${result.round - 1} trained: weights ${result.theta_version}, ` +
        `dataset ${result.dataset_hash}, step size ` +
        `l2 ${result.param_diff.l2.toFixed(4)}`;
      this.drawLossChart(result.losses);
      this.queue = null;
      this.scenes.clear();
      this.showCurrent();
    } catch (err) {
      note.textContent = err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : "network failure during training";
    }
    await this.refreshRound();
  }

  drawLossChart(losses: number[]): void {
    const ctx = this.lossCanvas.getContext("2d")!;
    const w = this.lossCanvas.width;
    const h = this.lossCanvas.height;
    ctx.clearRect(0, 0, w, h);
    const points = lossChartPoints(losses, w, h);
    if (points.length === 0) return;
    ctx.strokeStyle = "#2a6fdb";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
    $("loss-caption").textContent =
      `${losses.length} epochs; final loss ${losses[losses.length - 1].toFixed(4)}`;
  }

  renderLoop(): void {
    let last = performance.now();
    const frame = (now: number) => {
      this.player.tick((now - last) / 1000);
      last = now;
      const current = this.player.currentFrame();
      if (current) {
        drawFrame(this.ctx, current, this.projection, this.viewport);
      } else {
        const msg = this.queue && !this.currentScene() && !this.queue.done
          ? "frames missing; use retry"
          : "no scene loaded";
        drawPlaceholder(this.ctx, this.viewport, msg);
      }
      const scrub = $<HTMLInputElement>("scrubber");
      if (document.activeElement !== scrub) {
        scrub.max = String(this.player.duration);
        scrub.value = String(this.player.time);
      }
      $("clock").textContent =
        `${this.player.time.toFixed(2)} / ${this.player.duration.toFixed(2)} s`;
      requestAnimationFrame(frame);
    };
    requestAnimationFrame(frame);
  }
}

function wire(): void {
  const app = new App();

  $("connect").addEventListener("click", () => {
    app.setBaseUrl($<HTMLInputElement>("base-url").value);
    void app.refreshRound();
  });
  $("load-batch").addEventListener("click", () => {
    const count = Number($<HTMLInputElement>("batch-size").value) || 10;
    void app.loadBatch(count);
  });
  $("train").addEventListener("click", () => void app.train());
  $("play-pause").addEventListener("click", () => app.player.toggle());
  $("step-back").addEventListener("click", () => app.player.step(-1));
  $("step-forward").addEventListener("click", () => app.player.step(1));
  $("retry-scene").addEventListener("click", async () => {
    const id = app.queue?.current();
    if (!id) return;
    try {
      app.scenes.set(id, await app.client.getScene(id));
      app.showCurrent();
    } catch {
      $("card-state").textContent = "still unreachable; try again";
    }
  });
  $<HTMLInputElement>("scrubber").addEventListener("input", (ev) => {
    app.player.pause();
    app.player.scrubTo(Number((ev.target as HTMLInputElement).value));
  });

  for (const [id, label] of [["label-good", "good"], ["label-medium", "medium"],
                             ["label-bad", "bad"]] as const) {
    $(id).addEventListener("click", () => void app.submit(label));
  }

  window.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    if (ev.key === "g") void app.submit("good");
    else if (ev.key === "m") void app.submit("medium");
    else if (ev.key === "b") void app.submit("bad");
    else if (ev.key === " ") {
      ev.preventDefault();
      app.player.toggle();
    } else if (ev.key === "ArrowLeft") app.player.step(-1);
    else if (ev.key === "ArrowRight") app.player.step(1);
  });

  app.showCurrent();
  void app.refreshRound();
  window.setInterval(() => void app.refreshRound(), 4000);
  app.renderLoop();
}

document.addEventListener("DOMContentLoaded", wire);
