// Wiring: connect to a session, follow the tick stream, re-render on
// every message, and forward console injections to the server.

import { ApiError, Client, statementKind, type StreamMessage } from "./api.js";
import { applyMessage, buildModelTree, initialState, type SessionState } from "./state.js";
import {
  renderBanner,
  renderConfidences,
  renderHeader,
  renderModelTree,
  renderStats,
  renderTimeline,
} from "./views.js";

const client = new Client();

interface App {
  state: SessionState;
  lastError: string | null;
  source: EventSource | null;
  windowFrom: number;
  windowTo: number;
  hybrid: boolean;
}

const app: App = {
  state: initialState(""),
  lastError: null,
  source: null,
  windowFrom: 0,
  windowTo: 20,
  hybrid: false,
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function render() {
  el("banner").innerHTML = renderBanner(app.state, app.lastError);
  el("header-info").innerHTML = renderHeader(app.state);
  el("model-tree").innerHTML = renderModelTree(
    buildModelTree(app.state.models, app.state.tombstones),
    app.state.selectedModel,
  );
  for (const node of el("model-tree").querySelectorAll<HTMLElement>(".model-node.alive")) {
    node.onclick = () => {
      app.state = { ...app.state, selectedModel: node.dataset.model ?? null };
      void render();
    };
  }
  const sid = app.state.sessionId;
  const mid = app.state.selectedModel;
  if (sid && mid && !app.state.inconsistent) {
    try {
      const to = Math.min(app.windowTo, app.state.clock);
      const fluents = await client.getFluents(sid, mid, app.windowFrom, to);
      el("timeline").innerHTML = renderTimeline(fluents, app.windowFrom, to);
    } catch (e) {
      // SemiDestructive sessions reject history windows
      el("timeline").innerHTML = `<p class="notice">${
        e instanceof ApiError ? String(e.detail ?? e.message) : String(e)
      }</p>`;
    }
  } else {
    el("timeline").innerHTML = "";
  }
  const last = app.state.cycles[app.state.cycles.length - 1] ?? null;
  el("activities").innerHTML = renderConfidences(last);
  if (sid) {
    try {
      const stats = await client.getStats(sid);
      el("stats").innerHTML = renderStats(stats.perTick);
    } catch {
      /* stats are best-effort */
    }
  }
}

function subscribe(sid: string) {
  app.source?.close();
  const source = new EventSource(client.streamUrl(sid));
  source.onmessage = (ev) => {
    const msg = JSON.parse(ev.data) as StreamMessage;
    app.state = applyMessage(app.state, msg);
    void render();
  };
  app.source = source;
}

async function connect(sid: string) {
  app.lastError = null;
  try {
    const desc = await client.getDescriptor(sid);
    app.hybrid = desc.mode === "Hybrid";
    app.state = initialState(sid);
    // catch up from the current tick before following the stream
    const models = await client.getModels(sid);
    app.state = {
      ...app.state,
      clock: models.clock,
      models: models.models,
      tombstones: models.tombstones,
      selectedModel: models.models[0]?.id ?? null,
    };
    if (app.hybrid) {
      const acts = await client.getActivities(sid);
      app.state = { ...app.state, cycles: acts.cycles };
    }
    subscribe(sid);
  } catch (e) {
    app.state = initialState("");
    app.lastError =
      e instanceof ApiError && e.status === 404
        ? `session ${sid} not found`
        : String(e);
  }
  await render();
}

async function inject(statement: string) {
  const sid = app.state.sessionId;
  if (!sid) {
    app.lastError = "connect to a session first";
    await render();
    return;
  }
  try {
    const ack = await client.postStatement(sid, statementKind(statement), statement);
    app.lastError = null;
    el("inject-ack").textContent = `queued for t=${ack.queuedFor} (clock ${ack.clock})`;
  } catch (e) {
    el("inject-ack").textContent = "";
    app.lastError = e instanceof ApiError ? String(e.detail ?? e.message) : String(e);
  }
  await render();
}

export function boot() {
  el("connect-form").onsubmit = (ev) => {
    ev.preventDefault();
    const sid = (el("session-id") as HTMLInputElement).value.trim();
    if (sid) void connect(sid);
  };
  el("inject-form").onsubmit = (ev) => {
    ev.preventDefault();
    const text = (el("statement") as HTMLInputElement).value.trim();
    if (text) void inject(text);
  };
  el("tick-btn").onclick = () => {
    const sid = app.state.sessionId;
    if (sid) {
      client.postTick(sid).catch((e) => {
        app.lastError = e instanceof ApiError ? String(e.detail ?? e.message) : String(e);
        if (e instanceof ApiError && e.status === 409) {
          app.state = { ...app.state, inconsistent: true, models: [] };
        }
        void render();
      });
    }
  };
  el("window-form").onsubmit = (ev) => {
    ev.preventDefault();
    app.windowFrom = Number((el("window-from") as HTMLInputElement).value) || 0;
    app.windowTo = Number((el("window-to") as HTMLInputElement).value) || app.state.clock;
    void render();
  };
}

if (typeof document !== "undefined" && document.getElementById("connect-form")) {
  boot();
}
