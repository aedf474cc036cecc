import { describe, expect, it } from "vitest";

import { FeedStore } from "../src/feed.js";
import type { WireEvent } from "../src/types.js";

function event(seq: number, overrides: Partial<WireEvent> = {}): WireEvent {
  return {
    seq,
    t: seq,
    actor: "com.app",
    action: "http",
    verdict: "delivered",
    params: {},
    type: "event",
    ...overrides,
  };
}

describe("FeedStore", () => {
  it("keeps events in seq order even when batches arrive shuffled", () => {
    const feed = new FeedStore();
    feed.ingest([event(3), event(1)]);
    feed.ingest([event(2)]);
    expect(feed.all().map((e) => e.seq)).toEqual([1, 2, 3]);
  });

  it("dedupes overlapping batches after a reconnect", () => {
    const feed = new FeedStore();
    feed.ingest([event(1), event(2)]);
    const added = feed.ingest([event(2), event(3)]);
    expect(added.map((e) => e.seq)).toEqual([3]);
    expect(feed.all()).toHaveLength(3);
  });

  it("tracks lastSeq for since-based resumption", () => {
    const feed = new FeedStore();
    expect(feed.lastSeq).toBe(0);
    feed.ingest([event(5), event(7)]);
    expect(feed.lastSeq).toBe(7);
  });

  it("notifies listeners only with newly added events", () => {
    const feed = new FeedStore();
    const seen: number[] = [];
    feed.onEvents((added) => seen.push(...added.map((e) => e.seq)));
    feed.ingest([event(1)]);
    feed.ingest([event(1), event(2)]);
    expect(seen).toEqual([1, 2]);
  });

  it("derives unresolved prompts from the stream", () => {
    const feed = new FeedStore();
    feed.ingest([
      event(1, { type: "pending", action: "firewall-prompt", params: { pending_id: 1 } }),
      event(2, { type: "pending", action: "firewall-prompt", params: { pending_id: 2 } }),
      event(3, {
        type: "resolution",
        action: "firewall-decision",
        params: { pending_id: 1, decision: "allow" },
      }),
    ]);
    expect(feed.unresolvedPromptIds()).toEqual([2]);
  });

  it("reset clears the stream for a fresh scenario", () => {
    const feed = new FeedStore();
    feed.ingest([event(1)]);
    feed.reset();
    expect(feed.all()).toEqual([]);
    expect(feed.lastSeq).toBe(0);
  });
});
