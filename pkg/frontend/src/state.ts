// Pure session-state reducer. The cockpit holds no physics: every rendered
// value is reconstructed from the server message stream, so replaying the
// same messages always rebuilds the identical view.

import type { ProfileMsg, Rates, ServerMsg, TickMsg } from "./wire.js";

export interface ProfileSeries {
  iteration: number;
  points: [number, number][];
}

export interface LapRates {
  lapId: number;
  rates: Rates;
}

export interface UiSessionState {
  connection: "idle" | "connected" | "closed";
  sessionId: string | null;
  routeName: string | null;
  routeLength: number | null;
  tick: TickMsg | null;
  lapId: number | null;
  lapRunning: boolean;
  iteration: number;
  profiles: ProfileSeries[];
  ratesHistory: LapRates[];
  lastError: { code: string; text: string } | null;
}

export const initialState: UiSessionState = {
  connection: "idle",
  sessionId: null,
  routeName: null,
  routeLength: null,
  tick: null,
  lapId: null,
  lapRunning: false,
  iteration: 0,
  profiles: [],
  ratesHistory: [],
  lastError: null,
};

function upsertProfile(profiles: ProfileSeries[], msg: ProfileMsg): ProfileSeries[] {
  // A profile at iteration k supersedes everything from k on; a fresh
  // baseline (k=0 after load_route or reset_learning) therefore clears the chart.
  const kept = profiles.filter((p) => p.iteration < msg.iteration);
  return [...kept, { iteration: msg.iteration, points: msg.points }];
}

export function reduce(state: UiSessionState, msg: ServerMsg): UiSessionState {
  switch (msg.type) {
    case "tick":
      return { ...state, tick: msg, lapRunning: true };
    case "lap_done": {
      const history =
        msg.rates === null
          ? state.ratesHistory
          : [...state.ratesHistory, { lapId: msg.lap_id, rates: msg.rates }];
      return { ...state, lapRunning: false, lapId: msg.lap_id, ratesHistory: history };
    }
    case "profile":
      return {
        ...state,
        iteration: msg.iteration,
        profiles: upsertProfile(state.profiles, msg),
      };
    case "error":
      return { ...state, lastError: { code: msg.code, text: msg.text } };
    case "ack":
      switch (msg.cmd) {
        case "connect":
          return { ...state, connection: "connected", sessionId: msg.session ?? null };
        case "load_route":
          return {
            ...state,
            routeName: msg.name ?? null,
            routeLength: msg.length_m ?? null,
            ratesHistory: [],
            tick: null,
            lapId: null,
            lapRunning: false,
          };
        case "start_lap":
          return { ...state, lapId: msg.lap_id ?? null, lapRunning: true, lastError: null };
        case "reset_learning":
          return { ...state, ratesHistory: [] };
        default:
          return state;
      }
    default:
      return state;
  }
}

export function reduceAll(msgs: ServerMsg[], from: UiSessionState = initialState): UiSessionState {
  return msgs.reduce(reduce, from);
}

// Rendered speed is by contract the latest tick's speed.
export function speedKmh(state: UiSessionState): number {
  return state.tick?.v_kmh ?? 0;
}

export function seriesCount(state: UiSessionState): number {
  return state.profiles.length;
}

// The learning-transparency badge: the function may hold a speed that is not
// the posted limit plus the lever offset, because it learned to. Surface it.
export function learnedDeviation(tick: TickMsg | null, thresholdKmh = 1.0): boolean {
  if (tick === null) return false;
  return Math.abs(tick.target_kmh - (tick.limit_kmh + tick.offset_kmh)) > thresholdKmh;
}

export function canApplyLearning(state: UiSessionState): boolean {
  return !state.lapRunning && state.ratesHistory.length > 0;
}
