// Wire protocol shared with the session service: JSON text messages over one
// persistent WebSocket, plus a few plain HTTP endpoints.

export interface Rates {
  pedal_ir: number;
  set_speed_ir: number;
  combined_ir: number;
  lap_time_s: number;
}

export interface TickMsg {
  type: "tick";
  t: number;
  d_m: number;
  v_kmh: number;
  target_kmh: number;
  limit_kmh: number;
  offset_kmh: number;
  pldf_active: boolean;
  intervening: boolean;
}

export interface LapDoneMsg {
  type: "lap_done";
  lap_id: number;
  aborted: boolean;
  rates: Rates | null;
}

export interface ProfileMsg {
  type: "profile";
  iteration: number;
  points: [number, number][]; // [d_m, v_kmh]
}

export interface ErrorMsg {
  type: "error";
  code: string;
  text: string;
}

export interface AckMsg {
  type: "ack";
  cmd: string;
  session?: string;
  name?: string;
  length_m?: number;
  lap_id?: number;
  iteration?: number;
  delta_kmh?: number;
}

export type ServerMsg = TickMsg | LapDoneMsg | ProfileMsg | ErrorMsg | AckMsg;

export type ClientMsg =
  | { type: "load_route"; name: string }
  | { type: "start_lap" }
  | { type: "abort_lap" }
  | { type: "input"; gas: number; brake: number }
  | { type: "lever"; delta_kmh: number }
  | { type: "reactivate" }
  | { type: "apply_spaa" }
  | { type: "reset_learning" };

export function parseServerMsg(data: string): ServerMsg | null {
  try {
    const doc = JSON.parse(data);
    if (doc && typeof doc.type === "string") return doc as ServerMsg;
  } catch {
    /* ignore malformed frames */
  }
  return null;
}

export interface RouteInfo {
  name: string;
  length_m: number;
}
