// Completed-run log backing the A/B panel. Keeps the two most recent
// runs; every number displayed comes straight from service payloads.

import { DoneEvent } from "./types.js";

export interface RunRecord {
  run: number;
  label: string;
  dtl: number;
  perToken: Record<string, number>;
  mode: string;
  seed: number;
  image: string;
  revision: number;
}

export function recordFromDone(done: DoneEvent, label: string): RunRecord {
  return {
    run: done.run,
    label,
    dtl: done.dtl,
    perToken: done.per_token,
    mode: done.mode,
    seed: done.seed,
    image: done.image,
    revision: done.revision,
  };
}

export class RunLog {
  private records: RunRecord[] = [];

  push(record: RunRecord): void {
    this.records.push(record);
    if (this.records.length > 2) this.records.shift();
  }

  latest(): RunRecord | null {
    return this.records[this.records.length - 1] ?? null;
  }

  previous(): RunRecord | null {
    return this.records.length > 1 ? (this.records[this.records.length - 2] ?? null) : null;
  }
}

export interface AbCard {
  title: string;
  badge: string;
  dtl: number;
  image: string;
}

/** DTL badge text: the service's value verbatim, no reformatting. */
export function badgeText(dtl: number): string {
  return `DTL ${String(dtl)}`;
}

/**
 * View model for the A/B panel, newest run first. The DOM renders these
 * strings verbatim.
 */
export function abPanelModel(log: RunLog): AbCard[] {
  const cards: AbCard[] = [];
  const latest = log.latest();
  const previous = log.previous();
  if (latest) {
    cards.push({
      title: `run ${latest.run} (${latest.label})`,
      badge: badgeText(latest.dtl),
      dtl: latest.dtl,
      image: latest.image,
    });
  }
  if (previous) {
    cards.push({
      title: `run ${previous.run} (${previous.label})`,
      badge: badgeText(previous.dtl),
      dtl: previous.dtl,
      image: previous.image,
    });
  }
  return cards;
}
