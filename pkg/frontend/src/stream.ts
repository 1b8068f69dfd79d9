// Event-stream consumer with resume-by-sequence. The server replays history
// from ?since= and may repeat events around a reconnect; sequence numbers
// strictly increase, so anything at or below lastSeq is a duplicate.

export type StreamEvent = {
  seq: number;
  t: number;
  kind: string;
} & Record<string, unknown>;

export type StreamStatus = "connecting" | "live" | "stale" | "disconnected";

export type EventSourceLike = {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: (() => void) | null;
  close(): void;
};

export type StreamOptions = {
  makeSource: (sinceSeq: number) => EventSourceLike;
  onEvent: (ev: StreamEvent) => void;
  onStatus: (status: StreamStatus) => void;
  staleMs?: number;
  retryMs?: number;
};

const DEFAULT_STALE_MS = 5000;
const DEFAULT_RETRY_MS = 1000;

export class EventStream {
  private lastSeq = 0;
  private source: EventSourceLike | null = null;
  private staleTimer: ReturnType<typeof setTimeout> | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;
  private readonly staleMs: number;
  private readonly retryMs: number;

  constructor(private readonly opts: StreamOptions) {
    this.staleMs = opts.staleMs ?? DEFAULT_STALE_MS;
    this.retryMs = opts.retryMs ?? DEFAULT_RETRY_MS;
  }

  get sinceSeq(): number {
    return this.lastSeq;
  }

  start(): void {
    if (!this.stopped) {
      return;
    }
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.clearTimers();
    if (this.source) {
      this.source.close();
      this.source = null;
    }
    this.opts.onStatus("disconnected");
  }

  private connect(): void {
    this.opts.onStatus("connecting");
    const source = this.opts.makeSource(this.lastSeq);
    this.source = source;
    source.onopen = () => {
      this.opts.onStatus("live");
      this.armStaleTimer();
    };
    source.onmessage = (ev) => this.handleMessage(ev.data);
    source.onerror = () => this.handleError();
  }

  private handleMessage(data: string): void {
    let parsed: StreamEvent;
    try {
      parsed = JSON.parse(data) as StreamEvent;
    } catch {
      return;
    }
    if (typeof parsed.seq !== "number" || parsed.seq <= this.lastSeq) {
      return;
    }
    this.lastSeq = parsed.seq;
    this.opts.onStatus("live");
    this.armStaleTimer();
    this.opts.onEvent(parsed);
  }

  private handleError(): void {
    if (this.stopped) {
      return;
    }
    if (this.source) {
      this.source.close();
      this.source = null;
    }
    this.clearTimers();
    this.opts.onStatus("disconnected");
    this.retryTimer = setTimeout(() => this.connect(), this.retryMs);
  }

  private armStaleTimer(): void {
    if (this.staleTimer !== null) {
      clearTimeout(this.staleTimer);
    }
    this.staleTimer = setTimeout(() => this.opts.onStatus("stale"), this.staleMs);
  }

  private clearTimers(): void {
    if (this.staleTimer !== null) {
      clearTimeout(this.staleTimer);
      this.staleTimer = null;
    }
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
  }
}
