// Grid coordinate handling. rasterizePolylines mirrors the service's
// rasterizer cell for cell so the local preview and the echoed cells can
// be compared exactly; any drift between the two is a bug.

export type Cell = [number, number];
export type GridDims = [number, number];

/** Round half to even, matching the service's vertex rounding. */
export function rint(x: number): number {
  const lo = Math.floor(x);
  const frac = x - lo;
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return lo % 2 === 0 ? lo : lo + 1;
}

export function clampRound(vertex: readonly number[], dims: GridDims): Cell {
  const [h, w] = dims;
  const r = Math.min(Math.max(vertex[0] ?? 0, 0), h - 1);
  const c = Math.min(Math.max(vertex[1] ?? 0, 0), w - 1);
  return [rint(r), rint(c)];
}

/** All-quadrant integer Bresenham; returns an 8-connected cell chain. */
export function bresenham(r0: number, c0: number, r1: number, c1: number): Cell[] {
  const dc = Math.abs(c1 - c0);
  const dr = -Math.abs(r1 - r0);
  const sc = c1 >= c0 ? 1 : -1;
  const sr = r1 >= r0 ? 1 : -1;
  let err = dc + dr;
  let r = r0;
  let c = c0;
  const cells: Cell[] = [];
  for (;;) {
    cells.push([r, c]);
    if (r === r1 && c === c1) return cells;
    const e2 = 2 * err;
    if (e2 >= dr) {
      err += dr;
      c += sc;
    }
    if (e2 <= dc) {
      err += dc;
      r += sr;
    }
  }
}

/**
 * Union of Bresenham cells over a bundle of polylines, sorted by row
 * then column. This is exactly what the service echoes per token.
 */
export function rasterizePolylines(polylines: number[][][], dims: GridDims): Cell[] {
  const seen = new Map<string, Cell>();
  for (const poly of polylines) {
    if (poly.length === 0) continue;
    const verts = poly.map((v) => clampRound(v, dims));
    const first = verts[0] as Cell;
    seen.set(cellKey(first), first);
    for (let i = 0; i + 1 < verts.length; i++) {
      const a = verts[i] as Cell;
      const b = verts[i + 1] as Cell;
      for (const cell of bresenham(a[0], a[1], b[0], b[1])) {
        seen.set(cellKey(cell), cell);
      }
    }
  }
  return sortCells([...seen.values()]);
}

export function cellKey(cell: Cell): string {
  return `${cell[0]},${cell[1]}`;
}

export function sortCells(cells: Cell[]): Cell[] {
  return [...cells].sort((a, b) => a[0] - b[0] || a[1] - b[1]);
}

export function cellsEqual(a: number[][], b: number[][]): boolean {
  if (a.length !== b.length) return false;
  return a.every((cell, i) => cell[0] === b[i]?.[0] && cell[1] === b[i]?.[1]);
}

/**
 * Canvas pixel -> continuous grid coordinate. Cell (r, c) covers the
 * square of `cellPx` pixels whose center maps to exactly (r, c), so a
 * click in a cell's interior rounds back to that cell.
 */
export function canvasToGrid(x: number, y: number, canvasSize: number, dims: GridDims): [number, number] {
  const [h, w] = dims;
  const row = (y / canvasSize) * h - 0.5;
  const col = (x / canvasSize) * w - 0.5;
  return [row, col];
}

/** Canvas-pixel rectangle covered by a grid cell, for overlay drawing. */
export function gridCellRect(cell: Cell, canvasSize: number, dims: GridDims): { x: number; y: number; w: number; h: number } {
  const cellH = canvasSize / dims[0];
  const cellW = canvasSize / dims[1];
  return { x: cell[1] * cellW, y: cell[0] * cellH, w: cellW, h: cellH };
}
