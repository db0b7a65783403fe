// Energy-vs-step line chart drawn straight onto a 2D context. Uses a
// structural context type so the series layout logic stays testable
// without a browser canvas.

export interface EnergyPoint {
  step: number;
  e_control: number;
  e_movement: number;
  e_total: number;
}

export interface ChartContext {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

const PAD = 24;

const SERIES: { key: keyof Omit<EnergyPoint, "step">; color: string; label: string }[] = [
  { key: "e_total", color: "#e8b04a", label: "total" },
  { key: "e_control", color: "#5aa2e8", label: "control" },
  { key: "e_movement", color: "#b06ae8", label: "movement" },
];

/** Pixel positions for one series, shared by the renderer and tests. */
export function layoutSeries(
  points: EnergyPoint[],
  key: keyof Omit<EnergyPoint, "step">,
  width: number,
  height: number,
): [number, number][] {
  if (points.length === 0) return [];
  const maxStep = Math.max(...points.map((p) => p.step), 1);
  let top = 0;
  for (const series of SERIES) {
    for (const p of points) top = Math.max(top, p[series.key]);
  }
  if (top <= 0) top = 1;
  const spanX = width - 2 * PAD;
  const spanY = height - 2 * PAD;
  return points.map((p) => [
    PAD + (p.step / maxStep) * spanX,
    height - PAD - (p[key] / top) * spanY,
  ]);
}

export function drawEnergyChart(ctx: ChartContext, points: EnergyPoint[], width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.font = "11px sans-serif";
  let labelX = PAD;
  for (const series of SERIES) {
    const px = layoutSeries(points, series.key, width, height);
    ctx.strokeStyle = series.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    px.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
    ctx.fillStyle = series.color;
    ctx.fillText(series.label, labelX, 14);
    labelX += 64;
  }
}
