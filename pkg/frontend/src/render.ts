/** Canvas drawing: side-by-side orthographic stick figures with face
 * landmark insets. Projection math is kept pure for testing; only the
 * draw* functions touch a 2D context. */

import type { CharacterFrame, Frame } from "./types.js";

// Parent index per joint for the 65-joint skeleton the bundled assets
// use (hips-rooted chains: spine/head, two arms with fingers, two legs).
// Drawing topology only; frames with a different joint count fall back
// to dots.
export const BONE_PARENTS: number[] = [
  -1, 0, 1, 2, 3, 4, 5, 3, 7, 8, 9, 10, 11, 12, 13, 10, 15, 16, 17, 10,
  19, 20, 21, 10, 23, 24, 25, 10, 27, 28, 29, 3, 31, 32, 33, 34, 35, 36,
  37, 34, 39, 40, 41, 34, 43, 44, 45, 34, 47, 48, 49, 34, 51, 52, 53, 0,
  55, 56, 57, 58, 0, 60, 61, 62, 63,
];

export interface Viewport {
  width: number;
  height: number;
  /** fraction of the canvas left as margin on each side */
  margin: number;
}

export interface Projection {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Front view: world x goes right, world y goes up, depth is dropped. */
export function projectPoint(
  p: [number, number, number], proj: Projection,
): [number, number] {
  return [proj.offsetX + p[0] * proj.scale, proj.offsetY - p[1] * proj.scale];
}

/** Fit a projection so every joint of every frame stays on screen; the
 * whole clip shares one projection so the figures do not jitter. */
export function fitProjection(frames: Frame[], vp: Viewport): Projection {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const frame of frames) {
    for (const c of frame.characters) {
      for (const [x, y] of c.joints) {
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
      }
    }
  }
  if (!isFinite(minX)) {
    return { scale: 1, offsetX: vp.width / 2, offsetY: vp.height / 2 };
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const usableW = vp.width * (1 - 2 * vp.margin);
  const usableH = vp.height * (1 - 2 * vp.margin);
  const scale = Math.min(usableW / spanX, usableH / spanY);
  // center the bounding box
  const offsetX = vp.width / 2 - ((minX + maxX) / 2) * scale;
  const offsetY = vp.height / 2 + ((minY + maxY) / 2) * scale;
  return { scale, offsetX, offsetY };
}

const FIGURE_COLORS = ["#2a6fdb", "#d9542b"];

export function drawFigure(
  ctx: CanvasRenderingContext2D, character: CharacterFrame,
  proj: Projection, color: string,
): void {
  const pts = character.joints.map((p) => projectPoint(p, proj));
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  if (character.joints.length === BONE_PARENTS.length) {
    ctx.beginPath();
    for (let j = 0; j < pts.length; j += 1) {
      const parent = BONE_PARENTS[j];
      if (parent < 0) continue;
      ctx.moveTo(pts[parent][0], pts[parent][1]);
      ctx.lineTo(pts[j][0], pts[j][1]);
    }
    ctx.stroke();
  }
  for (const [x, y] of pts) {
    ctx.beginPath();
    ctx.arc(x, y, 2, 0, 2 * Math.PI);
    ctx.fill();
  }
}

/** Face inset: landmark coordinate pairs drawn as dots in a framed box. */
export function drawFaceInset(
  ctx: CanvasRenderingContext2D, face: number[],
  x: number, y: number, size: number, color: string,
): void {
  ctx.strokeStyle = "#8888";
  ctx.strokeRect(x, y, size, size);
  if (face.length < 4 || face.length % 2 !== 0) return;
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (let i = 0; i < face.length; i += 2) {
    minX = Math.min(minX, face[i]);
    maxX = Math.max(maxX, face[i]);
    minY = Math.min(minY, face[i + 1]);
    maxY = Math.max(maxY, face[i + 1]);
  }
  const span = Math.max(maxX - minX, maxY - minY, 1e-6);
  const pad = size * 0.15;
  const s = (size - 2 * pad) / span;
  ctx.fillStyle = color;
  for (let i = 0; i < face.length; i += 2) {
    const px = x + pad + (face[i] - minX) * s;
    // landmark y grows upward; canvas y grows downward
    const py = y + size - pad - (face[i + 1] - minY) * s;
    ctx.beginPath();
    ctx.arc(px, py, 1.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function drawFrame(
  ctx: CanvasRenderingContext2D, frame: Frame, proj: Projection,
  vp: Viewport,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  const inset = Math.min(vp.width, vp.height) * 0.18;
  frame.characters.forEach((c, i) => {
    const color = FIGURE_COLORS[i % FIGURE_COLORS.length];
    drawFigure(ctx, c, proj, color);
    const x = i === 0 ? 8 : vp.width - inset - 8;
    drawFaceInset(ctx, c.face, x, 8, inset, color);
  });
}

export function drawPlaceholder(
  ctx: CanvasRenderingContext2D, vp: Viewport, message: string,
): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.fillStyle = "#999";
  ctx.font = "14px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(message, vp.width / 2, vp.height / 2);
}
