// Stroke capture model. A stroke is one pointer drag in canvas pixels,
// bound to a prompt token; all strokes for a token become the polylines
// of that token's trajectory. Double-clicking a stroke toggles its
// enhancement weight between 1.0 and 2.0.

import { canvasToGrid, GridDims } from "./grid.js";
import { TrajectoryJson } from "./types.js";

export interface CanvasStroke {
  token: number;
  /** ordered [x, y] canvas-pixel points */
  points: [number, number][];
  enhanced: boolean;
}

export const ENHANCED_WEIGHT = 2.0;

export function startStroke(token: number): CanvasStroke {
  return { token, points: [], enhanced: false };
}

/** Append a point, skipping exact repeats from jitter-free pointers. */
export function addPoint(stroke: CanvasStroke, x: number, y: number): void {
  const last = stroke.points[stroke.points.length - 1];
  if (last && last[0] === x && last[1] === y) return;
  stroke.points.push([x, y]);
}

/**
 * Commit a finished stroke into the per-token list. Strokes that never
 * captured a point are discarded silently.
 */
export function finishStroke(strokes: CanvasStroke[], stroke: CanvasStroke): CanvasStroke[] {
  if (stroke.points.length === 0) return strokes;
  return [...strokes, stroke];
}

export function toggleEnhancement(strokes: CanvasStroke[], index: number): void {
  const stroke = strokes[index];
  if (stroke) stroke.enhanced = !stroke.enhanced;
}

/** Index of the stroke nearest (x, y) within `radius` pixels, or -1. */
export function nearestStroke(strokes: CanvasStroke[], x: number, y: number, radius: number): number {
  let best = -1;
  let bestDist = radius;
  strokes.forEach((stroke, i) => {
    for (const [px, py] of stroke.points) {
      const d = Math.hypot(px - x, py - y);
      if (d <= bestDist) {
        best = i;
        bestDist = d;
      }
    }
  });
  return best;
}

export function strokeToPolyline(stroke: CanvasStroke, canvasSize: number, dims: GridDims): number[][] {
  return stroke.points.map(([x, y]) => {
    const [r, c] = canvasToGrid(x, y, canvasSize, dims);
    return [r, c];
  });
}

/**
 * Trajectory JSON for one token from its strokes, ready to PUT. Returns
 * null when the token has no strokes with points.
 */
export function toTrajectoryJson(
  token: number,
  strokes: CanvasStroke[],
  canvasSize: number,
  dims: GridDims,
): TrajectoryJson | null {
  const mine = strokes.filter((s) => s.token === token && s.points.length > 0);
  if (mine.length === 0) return null;
  return {
    token_index: token,
    polylines: mine.map((s) => strokeToPolyline(s, canvasSize, dims)),
    weights: mine.map((s) => (s.enhanced ? ENHANCED_WEIGHT : 1.0)),
  };
}

/** Trajectory list covering every token that has at least one stroke. */
export function allTrajectories(strokes: CanvasStroke[], canvasSize: number, dims: GridDims): TrajectoryJson[] {
  const tokens = [...new Set(strokes.map((s) => s.token))].sort((a, b) => a - b);
  const out: TrajectoryJson[] = [];
  for (const token of tokens) {
    const traj = toTrajectoryJson(token, strokes, canvasSize, dims);
    if (traj) out.push(traj);
  }
  return out;
}
