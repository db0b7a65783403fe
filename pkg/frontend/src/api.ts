// Thin typed client for the guidance service endpoints.

import { streamEvents, StreamHandlers, StreamState } from "./sse.js";
import {
  EchoResponse,
  ResultSummary,
  RunOverrides,
  ServiceErrorBody,
  SessionInfo,
  TrajectoryJson,
} from "./types.js";

export class ServiceError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ServiceErrorBody) {
    super(body.message);
    this.code = body.error;
    this.status = status;
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) throw new ServiceError(resp.status, body as ServiceErrorBody);
  return body as T;
}

export class ServiceClient {
  constructor(readonly base: string) {}

  async vocab(): Promise<{ vocab: string[]; modes: string[] }> {
    return asJson(await fetch(`${this.base}/vocab`));
  }

  async createSession(body: unknown): Promise<SessionInfo> {
    return asJson(
      await fetch(`${this.base}/sessions`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async putTrajectories(sessionId: string, trajectories: TrajectoryJson[]): Promise<EchoResponse> {
    return asJson(
      await fetch(`${this.base}/sessions/${sessionId}/trajectories`, {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(trajectories),
      }),
    );
  }

  runSession(sessionId: string, overrides: RunOverrides, handlers: StreamHandlers): Promise<StreamState> {
    return streamEvents(`${this.base}/sessions/${sessionId}/run`, overrides, handlers);
  }

  async getResult(sessionId: string): Promise<ResultSummary> {
    return asJson(await fetch(`${this.base}/sessions/${sessionId}/result`));
  }

  artifactUrl(sessionId: string, name: string): string {
    return `${this.base}/sessions/${sessionId}/artifacts/${name}`;
  }
}
