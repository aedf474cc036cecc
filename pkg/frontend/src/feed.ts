import type { WireEvent } from "./types.js";

export type FeedListener = (events: WireEvent[]) => void;

/** Ordered, deduplicated view of the event stream.
 *
 * Events arrive from long-poll batches that may overlap after a reconnect;
 * the store keeps one copy per seq, always sorted, and exposes `lastSeq` so
 * the next subscription resumes with since=<lastSeq>.
 */
export class FeedStore {
  private events: WireEvent[] = [];
  private seen = new Set<number>();
  private listeners: FeedListener[] = [];

  get lastSeq(): number {
    return this.events.length ? this.events[this.events.length - 1].seq : 0;
  }

  all(): WireEvent[] {
    return this.events.slice();
  }

  ingest(batch: WireEvent[]): WireEvent[] {
    const added: WireEvent[] = [];
    for (const event of batch) {
      if (this.seen.has(event.seq)) continue;
      this.seen.add(event.seq);
      added.push(event);
    }
    if (added.length) {
      this.events.push(...added);
      this.events.sort((a, b) => a.seq - b.seq);
      for (const listener of this.listeners) listener(added);
    }
    return added;
  }

  onEvents(listener: FeedListener): void {
    this.listeners.push(listener);
  }

  /** Prompt ids that have appeared in the feed but not yet been resolved.
   * Derived purely from the stream, so it stays correct after reconnects
   * and when a prompt is resolved elsewhere (e.g. headless). */
  unresolvedPromptIds(): number[] {
    const open = new Map<number, boolean>();
    for (const event of this.events) {
      if (event.type === "pending") {
        const id = event.params["pending_id"];
        if (typeof id === "number") open.set(id, true);
      } else if (event.type === "resolution") {
        const id = event.params["pending_id"];
        if (typeof id === "number") open.delete(id);
      }
    }
    return [...open.keys()];
  }

  reset(): void {
    this.events = [];
    this.seen.clear();
  }
}
