import { ApiError, GatewayClient } from "./api.js";
import { EventStream, type EventSourceLike, type StreamStatus } from "./stream.js";
import { applyEvent, applySnapshot, emptyViewModel, type ViewModel } from "./model.js";
import { renderAll, setActionError, setTopupError } from "./render.js";
import { submitTopup } from "./validate.js";

function adaptEventSource(es: EventSource): EventSourceLike {
  const like: EventSourceLike = {
    onopen: null,
    onmessage: null,
    onerror: null,
    close: () => es.close(),
  };
  es.onopen = () => like.onopen?.();
  es.onmessage = (ev) => like.onmessage?.({ data: String(ev.data) });
  es.onerror = () => like.onerror?.();
  return like;
}

type App = {
  client: GatewayClient;
  vm: ViewModel;
  stream: EventStream;
  status: StreamStatus;
};

let app: App | null = null;
let renderQueued = false;

function scheduleRender(): void {
  if (renderQueued || !app) {
    return;
  }
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    if (app) {
      renderAll(app.vm, app.status);
    }
  });
}

async function refreshCards(): Promise<void> {
  if (!app) {
    return;
  }
  app.vm.cards = await app.client.cards();
  scheduleRender();
}

async function connect(base: string): Promise<void> {
  if (app) {
    app.stream.stop();
  }
  const client = new GatewayClient(base.replace(/\/+$/, ""));
  const vm = emptyViewModel();
  applySnapshot(vm, await client.meter());
  vm.loads = await client.loads();
  vm.cards = await client.cards();
  // Inbox endpoint returns oldest first; the pane shows newest first.
  vm.sms = (await client.sms()).reverse();

  // A single stream connection per gateway; reconnects resume by sequence.
  const stream = new EventStream({
    makeSource: (since) => adaptEventSource(new EventSource(client.streamUrl(since))),
    onEvent: (ev) => {
      if (app) {
        applyEvent(app.vm, ev);
        scheduleRender();
      }
    },
    onStatus: (status) => {
      if (app) {
        app.status = status;
        scheduleRender();
      }
    },
  });
  app = { client, vm, stream, status: "connecting" };
  stream.start();
  scheduleRender();
}

async function withButton(button: HTMLButtonElement, action: () => Promise<void>): Promise<void> {
  button.disabled = true;
  try {
    setActionError("");
    await action();
  } catch (err) {
    setActionError(err instanceof ApiError ? err.body : String(err));
  } finally {
    button.disabled = false;
  }
}

function bindControls(): void {
  const baseInput = document.getElementById("base-url") as HTMLInputElement;
  const connectBtn = document.getElementById("connect-btn") as HTMLButtonElement;
  connectBtn.addEventListener("click", () => {
    void withButton(connectBtn, () => connect(baseInput.value));
  });

  const mintBtn = document.getElementById("mint-btn") as HTMLButtonElement;
  mintBtn.addEventListener("click", () => {
    void withButton(mintBtn, async () => {
      if (!app) {
        return;
      }
      await app.client.mintCard();
      await refreshCards();
    });
  });

  const topupBtn = document.getElementById("topup-btn") as HTMLButtonElement;
  topupBtn.addEventListener("click", () => {
    void (async () => {
      if (!app) {
        return;
      }
      const uid = (document.getElementById("topup-uid") as HTMLSelectElement).value;
      const amount = (document.getElementById("topup-amount") as HTMLInputElement).value;
      if (!uid) {
        setTopupError("mint a card first");
        return;
      }
      topupBtn.disabled = true;
      try {
        setTopupError("");
        const result = await submitTopup(app.client, uid, amount);
        if (!result.ok) {
          setTopupError(result.error);
          return;
        }
        await refreshCards();
      } finally {
        topupBtn.disabled = false;
      }
    })();
  });

  document.getElementById("card-rows")?.addEventListener("click", (ev) => {
    const button = (ev.target as HTMLElement).closest("button[data-insert]");
    if (!(button instanceof HTMLButtonElement) || !app) {
      return;
    }
    void withButton(button, async () => {
      if (!app) {
        return;
      }
      applySnapshot(app.vm, await app.client.insertCard(button.dataset["insert"] ?? ""));
      await refreshCards();
    });
  });

  document.getElementById("load-list")?.addEventListener("change", (ev) => {
    const box = ev.target as HTMLInputElement;
    const name = box.dataset["load"];
    if (!name || !app) {
      return;
    }
    void (async () => {
      if (!app) {
        return;
      }
      try {
        setActionError("");
        app.vm.loads = await app.client.setLoad(name, box.checked);
      } catch (err) {
        setActionError(err instanceof ApiError ? err.body : String(err));
      }
      scheduleRender();
    })();
  });
}

bindControls();
const scheme = location.protocol.startsWith("http") ? location.protocol : "http:";
const defaultBase = `${scheme}//${location.hostname || "127.0.0.1"}:8000`;
(document.getElementById("base-url") as HTMLInputElement).value = defaultBase;
void connect(defaultBase).catch((err) => {
  setActionError(`cannot reach gateway at ${defaultBase}: ${String(err)}`);
});
