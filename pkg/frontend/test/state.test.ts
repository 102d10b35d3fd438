import assert from "node:assert/strict";
import { test } from "node:test";

import {
  canApplyLearning,
  initialState,
  learnedDeviation,
  reduce,
  reduceAll,
  seriesCount,
  speedKmh,
} from "../src/state.js";
import type { ServerMsg, TickMsg } from "../src/wire.js";

const tick = (over: Partial<TickMsg> = {}): TickMsg => ({
  type: "tick",
  t: 1.0,
  d_m: 100,
  v_kmh: 78.5,
  target_kmh: 80,
  limit_kmh: 80,
  offset_kmh: 0,
  pldf_active: true,
  intervening: false,
  ...over,
});

const profile = (iteration: number): ServerMsg => ({
  type: "profile",
  iteration,
  points: [
    [0, 80],
    [100, 80 + iteration],
  ],
});

const lapDone = (lapId: number, combined = 0.2): ServerMsg => ({
  type: "lap_done",
  lap_id: lapId,
  aborted: false,
  rates: { pedal_ir: 0.1, set_speed_ir: 0.15, combined_ir: combined, lap_time_s: 210 },
});

test("rendered speed equals the latest tick", () => {
  let state = reduce(initialState, tick({ v_kmh: 42.4 }));
  assert.equal(speedKmh(state), 42.4);
  state = reduce(state, tick({ v_kmh: 55.1 }));
  assert.equal(speedKmh(state), 55.1);
});

test("chart series count equals iteration count", () => {
  let state = initialState;
  for (const k of [0, 1, 2]) state = reduce(state, profile(k));
  assert.equal(seriesCount(state), 3);
  assert.equal(state.iteration, 2);
  assert.deepEqual(
    state.profiles.map((p) => p.iteration),
    [0, 1, 2],
  );
});

test("reset to iteration 0 clears the overlay", () => {
  let state = reduceAll([profile(0), profile(1), profile(2)]);
  state = reduce(state, { type: "ack", cmd: "reset_learning" });
  state = reduce(state, profile(0));
  assert.equal(seriesCount(state), 1);
  assert.equal(state.iteration, 0);
  assert.deepEqual(state.ratesHistory, []);
});

test("rates bars match lap_done payloads exactly", () => {
  const state = reduceAll([lapDone(1, 0.31), lapDone(2, 0.12)]);
  assert.equal(state.ratesHistory.length, 2);
  assert.equal(state.ratesHistory[0]?.rates.combined_ir, 0.31);
  assert.equal(state.ratesHistory[1]?.rates.combined_ir, 0.12);
  assert.equal(state.ratesHistory[1]?.lapId, 2);
});

test("aborted laps contribute no rates", () => {
  const state = reduce(initialState, {
    type: "lap_done",
    lap_id: 1,
    aborted: true,
    rates: null,
  });
  assert.equal(state.ratesHistory.length, 0);
  assert.equal(state.lapRunning, false);
});

test("learned-deviation badge follows the 1 km/h rule", () => {
  assert.equal(learnedDeviation(null), false);
  assert.equal(learnedDeviation(tick({ target_kmh: 80, limit_kmh: 80, offset_kmh: 0 })), false);
  assert.equal(learnedDeviation(tick({ target_kmh: 80.9, limit_kmh: 80, offset_kmh: 0 })), false);
  assert.equal(learnedDeviation(tick({ target_kmh: 81.2, limit_kmh: 80, offset_kmh: 0 })), true);
  assert.equal(learnedDeviation(tick({ target_kmh: 78.4, limit_kmh: 80, offset_kmh: 0 })), true);
  // lever offsets are expected behavior, not learned deviation
  assert.equal(learnedDeviation(tick({ target_kmh: 85, limit_kmh: 80, offset_kmh: 5 })), false);
  assert.equal(learnedDeviation(tick({ target_kmh: 88, limit_kmh: 80, offset_kmh: 5 })), true);
  // curve-governed targets below limit+offset beyond 1 km/h light it up too
  assert.equal(learnedDeviation(tick({ target_kmh: 62, limit_kmh: 100, offset_kmh: 0 })), true);
});

test("apply control enabled only between laps with a lap recorded", () => {
  let state = initialState;
  assert.equal(canApplyLearning(state), false);
  state = reduce(state, { type: "ack", cmd: "start_lap", lap_id: 1 });
  state = reduce(state, tick());
  assert.equal(canApplyLearning(state), false); // mid-lap
  state = reduce(state, lapDone(1));
  assert.equal(canApplyLearning(state), true);
});

test("replaying the message stream reconstructs the identical view", () => {
  const stream: ServerMsg[] = [
    { type: "ack", cmd: "connect", session: "abc" },
    { type: "ack", cmd: "load_route", name: "rural-demo", length_m: 4500 },
    profile(0),
    { type: "ack", cmd: "start_lap", lap_id: 1 },
    tick({ d_m: 50 }),
    tick({ d_m: 120, v_kmh: 81 }),
    lapDone(1, 0.4),
    profile(1),
    { type: "error", code: "no_lap", text: "no lap is running" },
  ];
  const a = reduceAll(stream);
  const b = reduceAll(stream);
  assert.deepEqual(a, b);
  assert.equal(a.sessionId, "abc");
  assert.equal(a.routeName, "rural-demo");
  assert.equal(a.lastError?.code, "no_lap");
});

test("errors are surfaced without clearing session state", () => {
  let state = reduceAll([profile(0), tick()]);
  state = reduce(state, { type: "error", code: "lap_running", text: "finish the lap first" });
  assert.equal(state.lastError?.code, "lap_running");
  assert.equal(seriesCount(state), 1);
  assert.ok(state.tick);
});
