import type { StreamStatus } from "./stream.js";
import type { SeriesPoint, ViewModel } from "./model.js";

// DOM updates live here; nothing at module top level touches the document,
// so the pure helpers stay importable from node tests.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function senToRm(sen: number): string {
  const sign = sen < 0 ? "-" : "";
  const abs = Math.abs(sen);
  return `${sign}${Math.floor(abs / 100)}.${String(abs % 100).padStart(2, "0")}`;
}

export type ChartPaths = {
  credit: string;
  power: string;
  creditMax: number;
  powerMax: number;
};

// Polyline point lists for an SVG viewport of width x height. Both series
// share the x axis (time) and scale independently to their own maximum.
export function buildChartPaths(series: SeriesPoint[], width: number, height: number): ChartPaths {
  if (series.length === 0) {
    return { credit: "", power: "", creditMax: 0, powerMax: 0 };
  }
  const first = series[0]!;
  const last = series[series.length - 1]!;
  const tSpan = Math.max(last.t - first.t, 1e-9);
  const creditMax = Math.max(...series.map((p) => p.creditRm), 1e-9);
  const powerMax = Math.max(...series.map((p) => p.powerW), 1e-9);
  const x = (t: number) => ((t - first.t) / tSpan) * width;
  const y = (value: number, max: number) => height - (value / max) * height;
  const fmt = (v: number) => String(Math.round(v * 100) / 100);
  const credit = series.map((p) => `${fmt(x(p.t))},${fmt(y(p.creditRm, creditMax))}`).join(" ");
  const power = series.map((p) => `${fmt(x(p.t))},${fmt(y(p.powerW, powerMax))}`).join(" ");
  return { credit, power, creditMax, powerMax };
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

export function renderStatus(status: StreamStatus): void {
  const badge = el("conn-status");
  badge.textContent = status;
  badge.className = `badge conn-${status}`;
}

function renderMeter(vm: ViewModel): void {
  el("lcd").textContent = `${vm.lcd[0]}\n${vm.lcd[1]}`;
  el("meter-state").textContent = vm.meter.state;
  el("meter-credit").textContent = `RM ${vm.meter.creditRm}`;
  el("meter-power").textContent = `${vm.meter.powerW} W`;
  el("meter-t").textContent = `${vm.meter.t} s`;
  const relay = el("meter-relay");
  relay.textContent = vm.meter.relay ? "relay closed" : "relay open";
  relay.className = `badge ${vm.meter.relay ? "ok" : "off"}`;
  const buzzer = el("meter-buzzer");
  buzzer.textContent = vm.meter.buzzer ? "buzzer ON" : "buzzer quiet";
  buzzer.className = `badge ${vm.meter.buzzer ? "warn" : "off"}`;
}

function renderChart(vm: ViewModel): void {
  const svg = el("chart");
  const width = 560;
  const height = 150;
  const paths = buildChartPaths(vm.series, width, height);
  (el("chart-credit") as unknown as SVGPolylineElement).setAttribute("points", paths.credit);
  (el("chart-power") as unknown as SVGPolylineElement).setAttribute("points", paths.power);
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  el("chart-legend").textContent =
    vm.series.length === 0
      ? "no samples yet"
      : `credit peak RM ${paths.creditMax.toFixed(2)}, power peak ${Math.round(paths.powerMax)} W, ${vm.series.length} samples`;
}

function renderLoads(vm: ViewModel): void {
  el("load-list").innerHTML = vm.loads
    .map(
      (load) => `
    <label class="load-row">
      <input type="checkbox" data-load="${escapeHtml(load.name)}" ${load.on ? "checked" : ""}>
      <span>${escapeHtml(load.name)}</span>
      <span class="dim">${load.measured_watts} W measured / ${load.rated_watts} W rated</span>
    </label>`,
    )
    .join("");
}

function renderCards(vm: ViewModel): void {
  const rows = vm.cards
    .map(
      (card) => `
    <tr>
      <td><code>${escapeHtml(card.uid)}</code></td>
      <td>RM ${senToRm(card.credit_sen)}</td>
      <td>${card.write_count}</td>
      <td><button data-insert="${escapeHtml(card.uid)}">insert</button></td>
    </tr>`,
    )
    .join("");
  el("card-rows").innerHTML =
    rows || `<tr><td colspan="4" class="dim">no cards yet; mint one</td></tr>`;
  const select = el("topup-uid") as HTMLSelectElement;
  const previous = select.value;
  select.innerHTML = vm.cards
    .map((card) => `<option value="${escapeHtml(card.uid)}">${escapeHtml(card.uid)}</option>`)
    .join("");
  if (vm.cards.some((card) => card.uid === previous)) {
    select.value = previous;
  }
}

function renderSms(vm: ViewModel): void {
  el("sms-list").innerHTML =
    vm.sms
      .map(
        (msg) => `
    <li>
      <div class="sms-head">#${msg.sequence} to ${escapeHtml(msg.msisdn)} at t=${msg.sent_at}s</div>
      <div class="sms-body">${escapeHtml(msg.body)}</div>
    </li>`,
      )
      .join("") || `<li class="dim">no messages</li>`;
}

export function renderAll(vm: ViewModel, status: StreamStatus): void {
  renderStatus(status);
  renderMeter(vm);
  renderChart(vm);
  renderLoads(vm);
  renderCards(vm);
  renderSms(vm);
}

export function setTopupError(text: string): void {
  el("topup-error").textContent = text;
}

export function setActionError(text: string): void {
  el("action-error").textContent = text;
}
