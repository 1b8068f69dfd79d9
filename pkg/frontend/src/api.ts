// Typed client for the gateway's HTTP endpoints. Every method maps to one
// documented route; nothing here invents state the server did not report.

export type MeterSnapshot = {
  state: string;
  power_w: number;
  credit_sen: number;
  credit_rm: string;
  relay: boolean;
  buzzer: boolean;
  t: number;
  lcd: [string, string];
};

export type CardInfo = {
  uid: string;
  credit_sen: number;
  write_count: number;
};

export type LoadInfo = {
  name: string;
  rated_watts: number;
  measured_watts: number;
  on: boolean;
};

export type SmsInfo = {
  msisdn: string;
  body: string;
  sent_at: number;
  sequence: number;
};

export class ApiError extends Error {
  // body is the raw response text, kept verbatim for display
  constructor(readonly status: number, readonly body: string) {
    super(`HTTP ${status}: ${body}`);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly base: string,
    fetchFn?: FetchLike,
  ) {
    // fetch must be called unbound from any `this`
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  meter(): Promise<MeterSnapshot> {
    return this.request("GET", "/meter");
  }

  loads(): Promise<LoadInfo[]> {
    return this.request("GET", "/loads");
  }

  cards(): Promise<CardInfo[]> {
    return this.request("GET", "/cards");
  }

  sms(): Promise<SmsInfo[]> {
    return this.request("GET", "/sms");
  }

  mintCard(): Promise<CardInfo> {
    return this.request("POST", "/cards");
  }

  topup(cardUid: string, amountSen: number): Promise<CardInfo> {
    return this.request("POST", "/topup", { card_uid: cardUid, amount_sen: amountSen });
  }

  insertCard(cardUid: string): Promise<MeterSnapshot> {
    return this.request("POST", "/meter/card", { card_uid: cardUid });
  }

  setLoad(name: string, on: boolean): Promise<LoadInfo[]> {
    return this.request("POST", `/meter/loads/${encodeURIComponent(name)}`, { on });
  }

  streamUrl(sinceSeq: number): string {
    return `${this.base}/events/stream?since=${sinceSeq}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const text = await resp.text();
    if (!resp.ok) {
      throw new ApiError(resp.status, text);
    }
    return JSON.parse(text) as T;
  }
}
