// Canvas rendering for the drawing surface: grid overlay, echoed cells,
// and the raw strokes on top.

import { Cell, GridDims, gridCellRect } from "./grid.js";
import { CanvasStroke } from "./stroke.js";

export const TOKEN_COLORS = ["#e8625a", "#5ae87a", "#5aa2e8", "#e8b04a", "#b06ae8", "#5ae8d8"];

export function tokenColor(slot: number): string {
  return TOKEN_COLORS[slot % TOKEN_COLORS.length] ?? "#ffffff";
}

export function drawGridOverlay(ctx: CanvasRenderingContext2D, canvasSize: number, dims: GridDims): void {
  ctx.strokeStyle = "rgba(255,255,255,0.12)";
  ctx.lineWidth = 1;
  const [h, w] = dims;
  for (let r = 1; r < h; r++) {
    const y = (r * canvasSize) / h;
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(canvasSize, y);
    ctx.stroke();
  }
  for (let c = 1; c < w; c++) {
    const x = (c * canvasSize) / w;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, canvasSize);
    ctx.stroke();
  }
}

/** Echoed rasterization, one translucent square per grid cell. */
export function drawEchoCells(
  ctx: CanvasRenderingContext2D,
  cells: number[][],
  color: string,
  canvasSize: number,
  dims: GridDims,
): void {
  ctx.fillStyle = color;
  ctx.globalAlpha = 0.28;
  for (const cell of cells) {
    const rect = gridCellRect(cell as Cell, canvasSize, dims);
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
  }
  ctx.globalAlpha = 1.0;
}

export function drawStroke(ctx: CanvasRenderingContext2D, stroke: CanvasStroke, color: string): void {
  if (stroke.points.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = stroke.enhanced ? 5 : 2.5;
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  const first = stroke.points[0];
  if (!first) return;
  if (stroke.points.length === 1) {
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(first[0], first[1], ctx.lineWidth, 0, Math.PI * 2);
    ctx.fill();
    return;
  }
  ctx.beginPath();
  ctx.moveTo(first[0], first[1]);
  for (let i = 1; i < stroke.points.length; i++) {
    const p = stroke.points[i];
    if (p) ctx.lineTo(p[0], p[1]);
  }
  ctx.stroke();
}
