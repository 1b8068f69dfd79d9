import { describe, expect, it } from "vitest";
import { ApiError, GatewayClient } from "../src/api.js";

type Recorded = { url: string; init?: RequestInit };

function recordingFetch(status: number, body: unknown) {
  const calls: Recorded[] = [];
  const fetchFn = (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return Promise.resolve(
      new Response(typeof body === "string" ? body : JSON.stringify(body), { status }),
    );
  };
  return { calls, fetchFn };
}

const BASE = "http://gw.test:8000";

describe("GatewayClient", () => {
  it("reads the meter snapshot", async () => {
    const snapshot = {
      state: "AwaitingCard",
      power_w: 0,
      credit_sen: 0,
      credit_rm: "0.00",
      relay: false,
      buzzer: false,
      t: 0,
      lcd: ["INSERT CARD     ", "                "],
    };
    const { calls, fetchFn } = recordingFetch(200, snapshot);
    const client = new GatewayClient(BASE, fetchFn);
    expect(await client.meter()).toEqual(snapshot);
    expect(calls).toEqual([{ url: `${BASE}/meter`, init: { method: "GET" } }]);
  });

  it("posts top-ups as JSON with explicit content type", async () => {
    const { calls, fetchFn } = recordingFetch(200, { uid: "ab", credit_sen: 500, write_count: 1 });
    const client = new GatewayClient(BASE, fetchFn);
    await client.topup("ab", 500);
    expect(calls[0]?.url).toBe(`${BASE}/topup`);
    expect(calls[0]?.init?.method).toBe("POST");
    expect(calls[0]?.init?.headers).toEqual({ "content-type": "application/json" });
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({ card_uid: "ab", amount_sen: 500 });
  });

  it("escapes load names in the path", async () => {
    const { calls, fetchFn } = recordingFetch(200, []);
    const client = new GatewayClient(BASE, fetchFn);
    await client.setLoad("odd load/name", true);
    expect(calls[0]?.url).toBe(`${BASE}/meter/loads/odd%20load%2Fname`);
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({ on: true });
  });

  it("throws ApiError carrying the response body verbatim", async () => {
    const body = '{"code":"unknown_card","message":"no card with uid deadbeef"}';
    const { fetchFn } = recordingFetch(404, body);
    const client = new GatewayClient(BASE, fetchFn);
    const err = await client.insertCard("deadbeef").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    if (err instanceof ApiError) {
      expect(err.status).toBe(404);
      expect(err.body).toBe(body);
    }
  });

  it("builds the stream URL from the last seen sequence", () => {
    const client = new GatewayClient(BASE, () => Promise.reject(new Error("unused")));
    expect(client.streamUrl(0)).toBe(`${BASE}/events/stream?since=0`);
    expect(client.streamUrl(41)).toBe(`${BASE}/events/stream?since=41`);
  });
});
