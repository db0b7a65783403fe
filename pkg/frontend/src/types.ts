// Payload shapes of the guidance service. The UI treats these as the
// single source of truth and never recomputes any number they carry.

export interface SessionInfo {
  session_id: string;
  grid: [number, number];
  render_scale: number;
  prompt: number[];
  revision: number;
}

export interface TrajectoryJson {
  token_index: number;
  polylines: number[][][];
  weights: number[];
}

export interface EchoResponse {
  revision: number;
  /** token index (as string) -> sorted [row, col] cells */
  cells: Record<string, number[][]>;
}

export interface StepEvent {
  step: number;
  t: number;
  e_control: number;
  e_movement: number;
  e_total: number;
  latent_norm: number;
  heatmaps: Record<string, string>;
  preview?: string;
}

export interface ResultSummary {
  dtl: number;
  per_token: Record<string, number>;
  revision: number;
  run: number;
  mode: string;
  seed: number;
  steps: number;
  unusable_mask_steps: number[];
  artifacts: string[];
}

export interface DoneEvent extends ResultSummary {
  image: string;
  masks: Record<string, string>;
}

export interface FailedEvent {
  error_class: string;
  message: string;
}

export interface ServiceErrorBody {
  error: string;
  message: string;
}

export interface RunOverrides {
  lambda?: number;
  eta?: number;
  mode?: string;
  seed?: number;
}
