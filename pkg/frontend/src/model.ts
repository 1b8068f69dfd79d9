import type { CardInfo, LoadInfo, MeterSnapshot, SmsInfo } from "./api.js";
import type { StreamEvent } from "./stream.js";

// State shown on screen. Everything is copied from gateway responses or
// stream events; the console never simulates the meter itself.

export type SeriesPoint = {
  t: number;
  creditRm: number;
  powerW: number;
};

export const SERIES_LIMIT = 600;

export type MeterView = {
  state: string;
  powerW: number;
  creditRm: string;
  relay: boolean;
  buzzer: boolean;
  t: number;
};

export type ViewModel = {
  meter: MeterView;
  lcd: [string, string];
  loads: LoadInfo[];
  cards: CardInfo[];
  sms: SmsInfo[]; // newest first
  series: SeriesPoint[];
};

export function emptyViewModel(): ViewModel {
  return {
    meter: {
      state: "AwaitingCard",
      powerW: 0,
      creditRm: "0.00",
      relay: false,
      buzzer: false,
      t: 0,
    },
    lcd: ["", ""],
    loads: [],
    cards: [],
    sms: [],
    series: [],
  };
}

export function applySnapshot(vm: ViewModel, snap: MeterSnapshot): void {
  vm.meter = {
    state: snap.state,
    powerW: snap.power_w,
    creditRm: snap.credit_rm,
    relay: snap.relay,
    buzzer: snap.buzzer,
    t: snap.t,
  };
  vm.lcd = [snap.lcd[0], snap.lcd[1]];
}

const POWERED_STATES = new Set(["Active", "LowCredit"]);

export function applyEvent(vm: ViewModel, ev: StreamEvent): void {
  switch (ev.kind) {
    case "tick": {
      vm.meter = {
        state: ev["state"] as string,
        powerW: ev["power_w"] as number,
        creditRm: ev["credit_rm"] as string,
        relay: ev["relay"] as boolean,
        buzzer: ev["buzzer"] as boolean,
        t: ev.t,
      };
      vm.series.push({
        t: ev.t,
        creditRm: (ev["credit_micro"] as number) / 1_000_000,
        powerW: ev["power_w"] as number,
      });
      if (vm.series.length > SERIES_LIMIT) {
        vm.series.splice(0, vm.series.length - SERIES_LIMIT);
      }
      break;
    }
    case "state_change": {
      const to = ev["to"] as string;
      vm.meter.state = to;
      vm.meter.relay = POWERED_STATES.has(to);
      vm.meter.buzzer = to === "LowCredit";
      if (!vm.meter.relay) {
        vm.meter.powerW = 0;
      }
      break;
    }
    case "relay": {
      vm.meter.relay = ev["closed"] as boolean;
      if (!vm.meter.relay) {
        vm.meter.powerW = 0;
      }
      break;
    }
    case "buzzer": {
      vm.meter.buzzer = ev["on"] as boolean;
      break;
    }
    case "display": {
      vm.lcd = [ev["line1"] as string, ev["line2"] as string];
      break;
    }
    case "sms": {
      vm.sms.unshift({
        msisdn: ev["msisdn"] as string,
        body: ev["body"] as string,
        sent_at: ev["sent_at"] as number,
        sequence: ev["sequence"] as number,
      });
      break;
    }
    case "load": {
      const load = vm.loads.find((l) => l.name === (ev["name"] as string));
      if (load) {
        load.on = ev["on"] as boolean;
      }
      break;
    }
    default: {
      // card events carry no meter state; the card list refreshes via REST
      break;
    }
  }
}
