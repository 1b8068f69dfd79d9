import { ApiError, type CardInfo } from "./api.js";

// RM amounts arrive as free text; whole sen only, so at most 2 decimals.
export type AmountParse =
  | { ok: true; sen: number }
  | { ok: false; error: string };

export function parseTopupAmount(raw: string): AmountParse {
  const text = raw.trim();
  if (text === "") {
    return { ok: false, error: "enter an amount in RM" };
  }
  const match = /^(\d+)(?:\.(\d{1,2}))?$/.exec(text);
  if (!match) {
    if (text.startsWith("-")) {
      return { ok: false, error: "amount cannot be negative" };
    }
    if (/^\d+\.\d{3,}$/.test(text)) {
      return { ok: false, error: "at most 2 decimal places (whole sen)" };
    }
    return { ok: false, error: `not an RM amount: "${raw}"` };
  }
  const whole = Number(match[1]);
  const cents = match[2] === undefined ? 0 : Number(match[2].padEnd(2, "0"));
  return { ok: true, sen: whole * 100 + cents };
}

export type TopupResult =
  | { ok: true; card: CardInfo }
  | { ok: false; error: string };

type TopupClient = {
  topup(cardUid: string, amountSen: number): Promise<CardInfo>;
};

// Invalid input never reaches the network; server rejections surface verbatim.
export async function submitTopup(
  client: TopupClient,
  cardUid: string,
  rawAmount: string,
): Promise<TopupResult> {
  const parsed = parseTopupAmount(rawAmount);
  if (!parsed.ok) {
    return { ok: false, error: parsed.error };
  }
  try {
    const card = await client.topup(cardUid, parsed.sen);
    return { ok: true, card };
  } catch (err) {
    if (err instanceof ApiError) {
      return { ok: false, error: err.body };
    }
    throw err;
  }
}
