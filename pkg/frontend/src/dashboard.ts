/** View-model helpers for the round dashboard: label-rate rows and the
 * loss chart geometry. Pure data in, drawable primitives out; every
 * number shown comes from a service response. */

import type { RoundRow } from "./types.js";

export interface RateRow {
  round: number;
  goodRate: number;
  mediumRate: number;
  badRate: number;
  total: number;
}

export function rateRows(history: RoundRow[]): RateRow[] {
  return history.map((row) => ({
    round: row.round,
    goodRate: row.total ? row.good / row.total : 0,
    mediumRate: row.total ? row.medium / row.total : 0,
    badRate: row.total ? row.bad / row.total : 0,
    total: row.total,
  }));
}

export interface ChartPoint {
  x: number;
  y: number;
}

/** Map per-epoch losses to canvas coordinates: one point per epoch,
 * evenly spaced, y scaled to the loss range (flat traces center). */
export function lossChartPoints(
  losses: number[], width: number, height: number, pad = 8,
): ChartPoint[] {
  const n = losses.length;
  if (n === 0) return [];
  const lo = Math.min(...losses);
  const hi = Math.max(...losses);
  const span = hi - lo;
  const usableW = width - 2 * pad;
  const usableH = height - 2 * pad;
  return losses.map((loss, i) => ({
    x: pad + (n === 1 ? usableW / 2 : (i / (n - 1)) * usableW),
    y: span > 0
      ? pad + (1 - (loss - lo) / span) * usableH
      : height / 2,
  }));
}

export interface TrainGate {
  enabled: boolean;
  reason: string | null;
}

/** The train button is live only when the round has labels to learn
 * from and nothing is pending or already running. */
export function trainGate(pending: number, training: boolean, labeledThisRound: number): TrainGate {
  if (training) return { enabled: false, reason: "training is running" };
  if (pending > 0) return { enabled: false, reason: `${pending} scene(s) still pending` };
  if (labeledThisRound === 0) return { enabled: false, reason: "no labels this round yet" };
  return { enabled: true, reason: null };
}
