import { describe, expect, it } from "vitest";

import { DragController, screenDeltaToWorld } from "../src/drag.js";
import type { ClientMsg, ViewInfo } from "../src/protocol.js";
import type { Pick } from "../src/picking.js";

const view: ViewInfo = {
  fx: 200,
  fy: 200,
  right: [1, 0, 0],
  down: [0, 1, 0],
};

const pick: Pick = { vertex: 7, x: 50, y: 50, depth: 4.0, world: [1, 2, 3] };

interface Timer {
  fn: () => void;
  at: number;
}

function makeClock() {
  // deterministic clock + scheduler so throttling is testable
  let now = 0;
  const timers: Timer[] = [];
  return {
    now: () => now,
    schedule: (fn: () => void, ms: number) => {
      const t = { fn, at: now + ms };
      timers.push(t);
      return t as unknown as ReturnType<typeof setTimeout>;
    },
    advance: (ms: number) => {
      now += ms;
      for (const t of [...timers]) {
        if (t.at <= now) {
          timers.splice(timers.indexOf(t), 1);
          t.fn();
        }
      }
    },
  };
}

describe("screenDeltaToWorld", () => {
  it("maps a horizontal drag via depth over focal", () => {
    // 10 px at depth d with focal f: world move of 10*d/f along camera-right
    const world = screenDeltaToWorld(10, 0, 4.0, view);
    expect(world).toEqual([10 * 4.0 / 200, 0, 0]);
  });

  it("combines right and down axes", () => {
    const tilted: ViewInfo = { fx: 100, fy: 100, right: [0, 0, 1], down: [0, -1, 0] };
    const world = screenDeltaToWorld(5, 10, 2.0, tilted);
    expect(world[2]).toBeCloseTo(0.1);
    expect(world[1]).toBeCloseTo(-0.2);
  });
});

describe("DragController", () => {
  it("emits nothing for zero delta", () => {
    const sent: ClientMsg[] = [];
    const clock = makeClock();
    const ctl = new DragController((m) => sent.push(m), clock.now, clock.schedule);
    ctl.begin(pick, [1, 2, 3], 50, 50);
    ctl.move(50, 50, view);
    expect(sent).toHaveLength(0);
  });

  it("throttles a 1-second 1000-event burst to at most 60 messages", () => {
    const sent: ClientMsg[] = [];
    const clock = makeClock();
    const ctl = new DragController((m) => sent.push(m), clock.now, clock.schedule);
    ctl.begin(pick, [1, 2, 3], 0, 0);
    for (let k = 1; k <= 1000; k++) {
      ctl.move(k * 0.1, 0, view);
      clock.advance(1);
    }
    const drags = sent.filter((m) => m.type === "drag");
    expect(drags.length).toBeLessThanOrEqual(60);
    expect(drags.length).toBeGreaterThan(30);
  });

  it("delivers the trailing target after the burst", () => {
    const sent: ClientMsg[] = [];
    const clock = makeClock();
    const ctl = new DragController((m) => sent.push(m), clock.now, clock.schedule);
    ctl.begin(pick, [1, 2, 3], 0, 0);
    ctl.move(10, 0, view);     // sent immediately
    ctl.move(20, 0, view);     // queued
    ctl.move(30, 0, view);     // replaces queued
    clock.advance(100);
    const drags = sent.filter((m) => m.type === "drag");
    const last = drags[drags.length - 1];
    expect(last.type === "drag" && last.target[0]).toBeCloseTo(1 + 30 * 4.0 / 200);
  });

  it("release emits a single release message", () => {
    const sent: ClientMsg[] = [];
    const clock = makeClock();
    const ctl = new DragController((m) => sent.push(m), clock.now, clock.schedule);
    ctl.begin(pick, [1, 2, 3], 0, 0);
    ctl.move(4, 0, view);
    ctl.end();
    ctl.end();               // idempotent: already inactive
    expect(sent.filter((m) => m.type === "release")).toHaveLength(1);
  });

  it("targets accumulate from the picked world position", () => {
    const sent: ClientMsg[] = [];
    const clock = makeClock();
    const ctl = new DragController((m) => sent.push(m), clock.now, clock.schedule);
    ctl.begin(pick, pick.world, 100, 100);
    ctl.move(110, 100, view);
    const msg = sent[0];
    expect(msg.type).toBe("drag");
    if (msg.type === "drag") {
      expect(msg.vertex).toBe(7);
      expect(msg.target[0]).toBeCloseTo(1 + 0.2);
      expect(msg.target[1]).toBeCloseTo(2);
      expect(msg.target[2]).toBeCloseTo(3);
    }
  });
});
