// Page wiring. All engine numbers shown here come out of service
// payloads untouched; the only geometry the client computes is the
// local rasterization preview, which must agree with the echo.

import { ServiceClient, ServiceError } from "./api.js";
import { drawEnergyChart, EnergyPoint } from "./chart.js";
import { drawEchoCells, drawGridOverlay, drawStroke, tokenColor } from "./draw.js";
import { cellsEqual, GridDims, rasterizePolylines } from "./grid.js";
import { abPanelModel, recordFromDone, RunLog } from "./runs.js";
import { addPoint, allTrajectories, CanvasStroke, finishStroke, nearestStroke, startStroke, toggleEnhancement } from "./stroke.js";
import { DoneEvent, FailedEvent, SessionInfo, StepEvent } from "./types.js";

const CANVAS_SIZE = 512;
const DBLCLICK_RADIUS = 16;

const client = new ServiceClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("draw-canvas");
const chartCanvas = el<HTMLCanvasElement>("energy-chart");
const statusLine = el<HTMLDivElement>("status-line");
const banner = el<HTMLDivElement>("banner");
const heatmapRow = el<HTMLDivElement>("heatmaps");
const previewImg = el<HTMLImageElement>("preview");
const abPanel = el<HTMLDivElement>("ab-panel");
const tokenButtons = el<HTMLDivElement>("token-buttons");
const wordA = el<HTMLSelectElement>("word-a");
const wordB = el<HTMLSelectElement>("word-b");
const lambdaSlider = el<HTMLInputElement>("lambda");
const etaSlider = el<HTMLInputElement>("eta");
const lambdaValue = el<HTMLSpanElement>("lambda-value");
const etaValue = el<HTMLSpanElement>("eta-value");
const modeSelect = el<HTMLSelectElement>("mode");
const seedInput = el<HTMLInputElement>("seed");
const stepsInput = el<HTMLInputElement>("steps");
const gridToggle = el<HTMLInputElement>("grid-toggle");

interface AppState {
  session: SessionInfo | null;
  words: string[];
  activeToken: number;
  strokes: CanvasStroke[];
  live: CanvasStroke | null;
  echoCells: Record<string, number[][]>;
  energy: EnergyPoint[];
  running: boolean;
  runs: RunLog;
}

const state: AppState = {
  session: null,
  words: [],
  activeToken: 0,
  strokes: [],
  live: null,
  echoCells: {},
  energy: [],
  running: false,
  runs: new RunLog(),
};

function gridDims(): GridDims {
  return state.session ? state.session.grid : [16, 16];
}

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function showBanner(text: string): void {
  banner.textContent = text;
  banner.hidden = false;
}

function clearBanner(): void {
  banner.hidden = true;
}

function redraw(): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#10131a";
  ctx.fillRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
  if (gridToggle.checked) drawGridOverlay(ctx, CANVAS_SIZE, gridDims());
  for (const [token, cells] of Object.entries(state.echoCells)) {
    drawEchoCells(ctx, cells, tokenColor(Number(token)), CANVAS_SIZE, gridDims());
  }
  for (const stroke of state.strokes) drawStroke(ctx, stroke, tokenColor(stroke.token));
  if (state.live) drawStroke(ctx, state.live, tokenColor(state.live.token));
}

function renderTokenButtons(): void {
  tokenButtons.replaceChildren();
  state.words.forEach((word, i) => {
    const btn = document.createElement("button");
    btn.textContent = `${i}: ${word}`;
    btn.style.borderColor = tokenColor(i);
    btn.className = i === state.activeToken ? "token active" : "token";
    btn.addEventListener("click", () => {
      state.activeToken = i;
      renderTokenButtons();
    });
    tokenButtons.append(btn);
  });
}

function renderAbPanel(): void {
  abPanel.replaceChildren();
  const cards = abPanelModel(state.runs);
  if (cards.length === 0) {
    const empty = document.createElement("div");
    empty.className = "muted";
    empty.textContent = "no completed runs yet";
    abPanel.append(empty);
    return;
  }
  for (const card of cards) {
    const box = document.createElement("div");
    box.className = "ab-card";
    const title = document.createElement("div");
    title.className = "ab-title";
    title.textContent = card.title;
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = card.badge;
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${card.image}`;
    img.alt = card.title;
    box.append(title, badge, img);
    abPanel.append(box);
  }
}

function renderHeatmaps(maps: Record<string, string>): void {
  heatmapRow.replaceChildren();
  for (const [token, b64] of Object.entries(maps)) {
    const wrap = document.createElement("figure");
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${b64}`;
    img.alt = `attention for token ${token}`;
    const cap = document.createElement("figcaption");
    cap.textContent = state.words[Number(token)] ?? token;
    cap.style.color = tokenColor(Number(token));
    wrap.append(img, cap);
    heatmapRow.append(wrap);
  }
}

function renderChart(): void {
  const ctx = chartCanvas.getContext("2d");
  if (ctx) drawEnergyChart(ctx, state.energy, chartCanvas.width, chartCanvas.height);
}

async function pushTrajectories(): Promise<void> {
  if (!state.session) return;
  const trajectories = allTrajectories(state.strokes, CANVAS_SIZE, gridDims());
  try {
    const echo = await client.putTrajectories(state.session.session_id, trajectories);
    state.echoCells = echo.cells;
    for (const traj of trajectories) {
      const preview = rasterizePolylines(traj.polylines, gridDims());
      const echoed = echo.cells[String(traj.token_index)] ?? [];
      if (!cellsEqual(preview, echoed)) {
        showBanner(`preview/echo mismatch for token ${traj.token_index}`);
      }
    }
    setStatus(`trajectories saved (revision ${echo.revision})`);
    redraw();
  } catch (err) {
    showBanner(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
  }
}

async function newSession(): Promise<void> {
  clearBanner();
  const words = [wordA.value, wordB.value];
  try {
    state.session = await client.createSession({
      prompt: words,
      guidance: { total_steps: Number(stepsInput.value) || 50 },
    });
    state.words = words;
    state.activeToken = 0;
    state.strokes = [];
    state.echoCells = {};
    state.energy = [];
    state.runs = new RunLog();
    renderTokenButtons();
    renderAbPanel();
    renderChart();
    heatmapRow.replaceChildren();
    previewImg.removeAttribute("src");
    setStatus(`session ${state.session.session_id} ready, draw a trajectory`);
    redraw();
  } catch (err) {
    showBanner(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
  }
}

function runLabel(): string {
  return `${modeSelect.value} λ=${lambdaSlider.value} η=${etaSlider.value} seed=${seedInput.value}`;
}

async function runSession(): Promise<void> {
  if (!state.session || state.running) return;
  clearBanner();
  state.running = true;
  state.energy = [];
  renderChart();
  const sessionId = state.session.session_id;
  const label = runLabel();
  const finalState = await client.runSession(
    sessionId,
    {
      mode: modeSelect.value,
      lambda: Number(lambdaSlider.value),
      eta: Number(etaSlider.value),
      seed: Number(seedInput.value),
    },
    {
      onFrame: (frame) => {
        if (frame.event === "step") {
          const step = JSON.parse(frame.data) as StepEvent;
          state.energy.push(step);
          renderChart();
          renderHeatmaps(step.heatmaps);
          if (step.preview) previewImg.src = `data:image/png;base64,${step.preview}`;
          setStatus(`step ${step.step}, E=${step.e_total.toFixed(4)}`);
        } else if (frame.event === "done") {
          const done = JSON.parse(frame.data) as DoneEvent;
          previewImg.src = `data:image/png;base64,${done.image}`;
          state.runs.push(recordFromDone(done, label));
          renderAbPanel();
          setStatus(`run ${done.run} done, DTL ${String(done.dtl)}`);
        } else if (frame.event === "failed") {
          const failed = JSON.parse(frame.data) as FailedEvent;
          showBanner(`run failed (${failed.error_class}): ${failed.message}`);
          setStatus("run failed");
        }
      },
      onState: (streamState) => {
        if (streamState === "disconnected") void recoverFromDrop(sessionId);
      },
    },
  );
  state.running = false;
  if (finalState === "disconnected") setStatus("stream lost");
}

/** The stream died mid-run: tell the user and re-fetch session state. */
async function recoverFromDrop(sessionId: string): Promise<void> {
  showBanner("stream lost, re-fetching session state");
  try {
    const result = await client.getResult(sessionId);
    state.runs.push({ ...recordFromDone({ ...result, image: "", masks: {} }, runLabel()) });
    renderAbPanel();
    showBanner(`stream lost; recovered completed run ${result.run}`);
  } catch {
    // no completed run to recover; the banner already says the stream dropped
  }
}

function canvasPoint(ev: PointerEvent | MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * CANVAS_SIZE,
    ((ev.clientY - rect.top) / rect.height) * CANVAS_SIZE,
  ];
}

function wireCanvas(): void {
  canvas.addEventListener("pointerdown", (ev) => {
    if (!state.session || state.running) return;
    canvas.setPointerCapture(ev.pointerId);
    state.live = startStroke(state.activeToken);
    const [x, y] = canvasPoint(ev);
    addPoint(state.live, x, y);
    redraw();
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!state.live) return;
    const [x, y] = canvasPoint(ev);
    addPoint(state.live, x, y);
    redraw();
  });
  canvas.addEventListener("pointerup", () => {
    if (!state.live) return;
    state.strokes = finishStroke(state.strokes, state.live);
    state.live = null;
    redraw();
    void pushTrajectories();
  });
  canvas.addEventListener("dblclick", (ev) => {
    const [x, y] = canvasPoint(ev);
    const hit = nearestStroke(state.strokes, x, y, DBLCLICK_RADIUS);
    if (hit >= 0) {
      toggleEnhancement(state.strokes, hit);
      redraw();
      void pushTrajectories();
    }
  });
}

async function boot(): Promise<void> {
  const { vocab, modes } = await client.vocab();
  for (const select of [wordA, wordB]) {
    for (const word of vocab) {
      const opt = document.createElement("option");
      opt.value = word;
      opt.textContent = word;
      select.append(opt);
    }
  }
  wordA.value = vocab.includes("cat") ? "cat" : (vocab[0] ?? "");
  wordB.value = vocab.includes("moon") ? "moon" : (vocab[1] ?? "");
  for (const mode of modes) {
    const opt = document.createElement("option");
    opt.value = mode;
    opt.textContent = mode;
    modeSelect.append(opt);
  }
  modeSelect.value = "full";

  lambdaSlider.addEventListener("input", () => (lambdaValue.textContent = lambdaSlider.value));
  etaSlider.addEventListener("input", () => (etaValue.textContent = etaSlider.value));
  gridToggle.addEventListener("change", redraw);
  el<HTMLButtonElement>("new-session").addEventListener("click", () => void newSession());
  el<HTMLButtonElement>("run").addEventListener("click", () => void runSession());
  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    state.strokes = [];
    state.echoCells = {};
    redraw();
    void pushTrajectories();
  });
  wireCanvas();
  renderAbPanel();
  redraw();
  await newSession();
}

void boot();
