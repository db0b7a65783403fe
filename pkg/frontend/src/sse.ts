// Server-sent event handling for the run stream. The run endpoint is a
// POST, which EventSource cannot issue, so frames are parsed off a fetch
// body instead.

export interface SseFrame {
  event: string;
  data: string;
}

/**
 * Incremental SSE frame parser. Feed it text in whatever chunks the
 * network delivers; complete frames come back in order.
 */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    for (;;) {
      const cut = this.buffer.indexOf("\n\n");
      if (cut < 0) break;
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }
}

function parseBlock(block: string): SseFrame | null {
  let event = "message";
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("event: ")) event = line.slice(7);
    else if (line.startsWith("data: ")) data.push(line.slice(6));
  }
  if (data.length === 0) return null;
  return { event, data: data.join("\n") };
}

export type StreamState = "idle" | "streaming" | "done" | "failed" | "disconnected";

export type StreamInput = "open" | "step" | "done" | "failed" | "error";

/**
 * Subscription state machine. A terminal frame wins over a later
 * transport error (the connection closing after "done" is normal);
 * anything else dropping the transport means the UI lost the stream and
 * should re-fetch session state.
 */
export function nextStreamState(state: StreamState, input: StreamInput): StreamState {
  if (state === "done" || state === "failed") return state;
  switch (input) {
    case "open":
      return "streaming";
    case "step":
      return state === "streaming" ? "streaming" : state;
    case "done":
      return "done";
    case "failed":
      return "failed";
    case "error":
      return "disconnected";
  }
}

export interface StreamHandlers {
  onFrame: (frame: SseFrame) => void;
  onState: (state: StreamState) => void;
}

/**
 * POST `body` to `url` and pump the SSE response through `handlers`.
 * Resolves with the final stream state.
 */
export async function streamEvents(url: string, body: unknown, handlers: StreamHandlers): Promise<StreamState> {
  let state: StreamState = "idle";
  const move = (input: StreamInput): StreamState => {
    const next = nextStreamState(state, input);
    if (next !== state) handlers.onState(next);
    return next;
  };
  try {
    const resp = await fetch(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body ?? {}),
    });
    if (!resp.ok || !resp.body) {
      return (state = move("error"));
    }
    state = move("open");
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
        handlers.onFrame(frame);
        if (frame.event === "done" || frame.event === "failed" || frame.event === "step") {
          state = move(frame.event as StreamInput);
        }
      }
    }
    if (state === "streaming") state = move("error");
  } catch {
    state = move("error");
  }
  return state;
}
