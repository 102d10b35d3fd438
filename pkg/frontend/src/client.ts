// WebSocket session client: sends exactly the wire message an action maps to
// and funnels every server message through the pure reducer.

import { actionToMessage, type UiAction } from "./input.js";
import { initialState, reduce, type UiSessionState } from "./state.js";
import { parseServerMsg, type RouteInfo, type ServerMsg } from "./wire.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

/** Adapt a browser or ws-package WebSocket to the minimal socket surface. */
export function adaptSocket(ws: {
  send(data: string): void;
  close(): void;
  onmessage: unknown;
  onopen: unknown;
  onclose: unknown;
}): SocketLike {
  const raw = ws as {
    send(data: string): void;
    close(): void;
    onmessage: ((ev: { data: unknown }) => void) | null;
    onopen: (() => void) | null;
    onclose: (() => void) | null;
  };
  return {
    send: (data) => raw.send(data),
    close: () => raw.close(),
    set onmessage(fn: ((ev: { data: unknown }) => void) | null) {
      raw.onmessage = fn ? (ev) => fn({ data: ev.data }) : null;
    },
    set onopen(fn: (() => void) | null) {
      raw.onopen = fn ? () => fn() : null;
    },
    set onclose(fn: (() => void) | null) {
      raw.onclose = fn ? () => fn() : null;
    },
  };
}

export class CockpitClient {
  state: UiSessionState = initialState;
  private socket: SocketLike | null = null;
  private listeners: ((state: UiSessionState, msg: ServerMsg | null) => void)[] = [];

  constructor(
    private baseUrl: string,
    private socketFactory: SocketFactory,
  ) {}

  onChange(fn: (state: UiSessionState, msg: ServerMsg | null) => void): void {
    this.listeners.push(fn);
  }

  private emit(msg: ServerMsg | null): void {
    for (const fn of this.listeners) fn(this.state, msg);
  }

  connect(sessionId?: string): void {
    const ws = this.baseUrl.replace(/^http/, "ws");
    const url = sessionId ? `${ws}/session?session=${sessionId}` : `${ws}/session`;
    this.socket = this.socketFactory(url);
    this.socket.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) {
        this.state = reduce(this.state, msg);
        this.emit(msg);
      }
    };
    this.socket.onclose = () => {
      this.state = { ...this.state, connection: "closed", lapRunning: false };
      this.emit(null);
    };
  }

  send(action: UiAction): void {
    if (!this.socket) return;
    this.socket.send(JSON.stringify(actionToMessage(action)));
  }

  close(): void {
    this.socket?.close();
  }

  async fetchRoutes(): Promise<RouteInfo[]> {
    const resp = await fetch(`${this.baseUrl}/routes`);
    return (await resp.json()) as RouteInfo[];
  }

  async fetchHistory(): Promise<unknown> {
    const resp = await fetch(`${this.baseUrl}/history?session=${this.state.sessionId ?? ""}`);
    return resp.json();
  }
}
