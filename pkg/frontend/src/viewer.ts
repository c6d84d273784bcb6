// Session client: connection with backoff, viewer state, frame delivery.
// The WebSocket factory is injectable so the state machine is testable
// without a browser or server.

import {
  ClientMsg,
  FrameStats,
  PickPoint,
  ProtocolError,
  ServerMsg,
  ViewInfo,
  parseServerMessage,
  serialize,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SelectedHandle {
  vertex: number;
  currentTarget: [number, number, number];
}

export interface ViewerState {
  connection: "connecting" | "connected" | "disconnected";
  role: "controller" | "viewer" | null;
  frameId: number;
  framePayload: string | null;
  pickPoints: PickPoint[];
  view: ViewInfo | null;
  stats: FrameStats | null;
  handles: SelectedHandle[];
  lastError: string | null;
}

export interface ViewerEvents {
  onFrame?: (payload: string, state: ViewerState) => void;
  onState?: (state: ViewerState) => void;
}

export class SessionClient {
  readonly state: ViewerState = {
    connection: "disconnected",
    role: null,
    frameId: 0,
    framePayload: null,
    pickPoints: [],
    view: null,
    stats: null,
    handles: [],
    lastError: null,
  };

  private socket: SocketLike | null = null;
  private retryMs = 250;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private factory: SocketFactory,
    private events: ViewerEvents = {},
    private schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
  }

  send(msg: ClientMsg): void {
    if (this.state.connection !== "connected" || !this.socket) return;
    // never reference a vertex that is not part of the acknowledged set
    if (msg.type === "drag" &&
        !this.state.handles.some((h) => h.vertex === msg.vertex)) {
      return;
    }
    if (msg.type === "set_handles") {
      this.state.handles = msg.handles.map((h) => ({
        vertex: h.vertex,
        currentTarget: [...h.target] as [number, number, number],
      }));
    }
    if (msg.type === "drag") {
      const entry = this.state.handles.find((h) => h.vertex === msg.vertex);
      if (entry) entry.currentTarget = [...msg.target] as [number, number, number];
    }
    this.socket.send(serialize(msg));
  }

  private open(): void {
    this.state.connection = "connecting";
    this.events.onState?.(this.state);
    const ws = this.factory(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.retryMs = 250;
      this.state.connection = "connected";
      this.state.lastError = null;
      this.events.onState?.(this.state);
      this.send({ type: "request_frame" });
    };
    ws.onmessage = (ev) => this.handle(ev.data);
    ws.onerror = () => ws.close();
    ws.onclose = () => {
      this.state.connection = "disconnected";
      this.events.onState?.(this.state);
      if (!this.closed) {
        this.retryTimer = this.schedule(() => this.open(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
  }

  private handle(data: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMessage(data);
    } catch (e) {
      if (e instanceof ProtocolError) {
        this.state.lastError = e.message;
        this.events.onState?.(this.state);
        return;
      }
      throw e;
    }
    switch (msg.type) {
      case "hello":
        this.state.role = msg.role;
        break;
      case "error":
        this.state.lastError = msg.message;
        break;
      case "frame":
        // a reconnect restarts the server-side sequence; accept it fresh
        if (msg.frame_id <= this.state.frameId && msg.frame_id !== 1) return;
        this.state.frameId = msg.frame_id;
        this.state.framePayload = msg.payload;
        this.state.pickPoints = msg.pick_points;
        this.state.view = msg.view;
        this.state.stats = msg.stats;
        this.events.onFrame?.(msg.payload, this.state);
        break;
    }
    this.events.onState?.(this.state);
  }
}
