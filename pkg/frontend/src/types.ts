/** Payload shapes of the labeling service, mirrored field for field. */

export type Label = "good" | "medium" | "bad";
export type SceneStatus = "pending" | "labeled" | "skipped";

export interface CharacterFrame {
  joints: [number, number, number][];
  face: number[];
  vad: [number, number, number];
}

export interface Frame {
  time: number;
  characters: CharacterFrame[];
}

export interface EnergyBreakdown {
  tree: number;
  spatial: number;
  temporal: number;
  total: number;
}

export interface SceneRow {
  id: string;
  round: number;
  label: Label | null;
}

export interface SceneDetail {
  id: string;
  status: SceneStatus;
  round: number;
  label: Label | null;
  scene: Record<string, unknown>;
  energy: EnergyBreakdown;
  frames: Frame[];
  fps: number;
}

export interface SampleResult {
  round: number;
  ids: string[];
}

export interface LabelResult {
  id: string;
  label: Label;
  round: number;
  pending: number;
}

export interface RoundRow {
  round: number;
  good: number;
  medium: number;
  bad: number;
  total: number;
}

export interface RoundStatus {
  round: number;
  pending: number;
  training: boolean;
  history: RoundRow[];
}

export interface TrainResult {
  round: number;
  theta_version: string;
  dataset_hash: string;
  losses: number[];
  param_diff: {
    l2: number;
    linf: number;
    per_component: Record<string, number>;
  };
}

export interface ParamsResult {
  theta: Record<string, unknown>;
  version: string;
  round: number;
}
