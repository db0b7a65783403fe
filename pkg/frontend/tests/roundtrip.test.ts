// End-to-end round trip against a real service process: a scripted
// stroke becomes trajectory JSON, the service's echoed rasterization
// must match the local preview cell for cell, and the A/B panel must
// show the two most recent runs' DTL values exactly as delivered.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { cellsEqual, rasterizePolylines } from "../src/grid.js";
import { abPanelModel, recordFromDone, RunLog } from "../src/runs.js";
import { SseFrame } from "../src/sse.js";
import { addPoint, allTrajectories, startStroke, toggleEnhancement } from "../src/stroke.js";
import { DoneEvent, SessionInfo } from "../src/types.js";

const CANVAS = 512;

let server: ChildProcess;
let client: ServiceClient;
let serverLog = "";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        probe.close(() => resolve(port));
      } else {
        probe.close(() => reject(new Error("no port")));
      }
    });
  });
}

async function waitHealthy(base: string): Promise<void> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/healthz`);
      if (resp.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service never became healthy\n${serverLog}`);
    }
    await new Promise((r) => setTimeout(r, 100));
  }
}

beforeAll(async () => {
  const port = await freePort();
  const runsDir = mkdtempSync(join(tmpdir(), "trajguide-ui-"));
  server = spawn("trajguide-serve", ["--host", "127.0.0.1", "--port", String(port), "--runs-dir", runsDir], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  server.stdout?.on("data", (d) => (serverLog += d));
  server.stderr?.on("data", (d) => (serverLog += d));
  client = new ServiceClient(`http://127.0.0.1:${port}`);
  await waitHealthy(client.base);
});

afterAll(() => {
  server?.kill();
});

/** Deterministic pointer drag sampled the way pointermove delivers it. */
function scriptedStroke(token: number, from: [number, number], to: [number, number], samples: number) {
  const stroke = startStroke(token);
  for (let i = 0; i < samples; i++) {
    const t = i / (samples - 1);
    addPoint(stroke, from[0] + (to[0] - from[0]) * t, from[1] + (to[1] - from[1]) * t);
  }
  return stroke;
}

async function createSession(): Promise<SessionInfo> {
  return client.createSession({
    prompt: ["cat", "moon"],
    guidance: { total_steps: 12, guided_steps: 3, repeats_per_step: 2 },
  });
}

async function run(sessionId: string, overrides: Record<string, number | string>): Promise<DoneEvent> {
  const frames: SseFrame[] = [];
  const final = await client.runSession(sessionId, overrides, {
    onFrame: (frame) => frames.push(frame),
    onState: () => {},
  });
  expect(final).toBe("done");
  const last = frames[frames.length - 1]!;
  expect(last.event).toBe("done");
  expect(frames.filter((f) => f.event === "step")).toHaveLength(12);
  return JSON.parse(last.data) as DoneEvent;
}

describe("stroke round trip through the live service", () => {
  it("echoes exactly the cells the preview rasterizer computed", async () => {
    const session = await createSession();
    const strokes = [
      scriptedStroke(0, [100, 400], [420, 180], 24),
      scriptedStroke(1, [60, 60], [200, 90], 9),
    ];
    // enhance the second token's stroke the way a double-click would
    toggleEnhancement(strokes, 1);

    const trajectories = allTrajectories(strokes, CANVAS, session.grid);
    expect(trajectories).toHaveLength(2);
    expect(trajectories[0]!.polylines[0]!.length).toBeGreaterThanOrEqual(2);
    expect(trajectories[1]!.weights).toEqual([2.0]);

    const echo = await client.putTrajectories(session.session_id, trajectories);
    expect(echo.revision).toBe(1);
    for (const traj of trajectories) {
      const preview = rasterizePolylines(traj.polylines, session.grid);
      const echoed = echo.cells[String(traj.token_index)];
      expect(echoed).toBeDefined();
      expect(echoed).toEqual(preview);
      expect(cellsEqual(preview, echoed!)).toBe(true);
    }
  });

  it("shows the two most recent runs' DTL values as the service sent them", async () => {
    const session = await createSession();
    const strokes = [scriptedStroke(0, [96, 384], [384, 384], 16)];
    await client.putTrajectories(session.session_id, allTrajectories(strokes, CANVAS, session.grid));

    const first = await run(session.session_id, { mode: "none", seed: 450 });
    const second = await run(session.session_id, { mode: "full", seed: 450, lambda: 10, eta: 30 });

    const log = new RunLog();
    log.push(recordFromDone(first, "none"));
    log.push(recordFromDone(second, "full λ=10 η=30"));

    const cards = abPanelModel(log);
    expect(cards).toHaveLength(2);
    // newest first, numbers byte-for-byte from the done events
    expect(cards[0]!.dtl).toBe(second.dtl);
    expect(cards[1]!.dtl).toBe(first.dtl);
    expect(cards[0]!.badge).toBe(`DTL ${String(second.dtl)}`);
    expect(cards[1]!.badge).toBe(`DTL ${String(first.dtl)}`);
    expect(cards[0]!.title).toBe(`run ${second.run} (full λ=10 η=30)`);
    // the guided run should beat the unguided one on the same stroke
    expect(second.dtl).toBeGreaterThan(first.dtl);

    // a stored result exists afterwards and carries the same DTL
    const stored = await client.getResult(session.session_id);
    expect(stored.dtl).toBe(second.dtl);
  });
});
