import { ApiClient, ApiError } from "./api.js";
import { FeedStore } from "./feed.js";
import type { PendingDecision, Snapshot, Verdict, WireEvent } from "./types.js";

const api = new ApiClient();
const feed = new FeedStore();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

// --- notices (inline, non-blocking) ---------------------------------------

function notify(message: string, kind: "info" | "error" = "info"): void {
  const box = byId("notices");
  const note = el("div", `notice notice-${kind}`, message);
  box.appendChild(note);
  setTimeout(() => note.remove(), 6000);
}

function surface(err: unknown): void {
  if (err instanceof ApiError) {
    notify(`${err.status}: ${err.detail}`, "error");
  } else {
    notify(String(err), "error");
  }
}

// --- event feed ------------------------------------------------------------

function renderEvent(event: WireEvent): HTMLElement {
  const row = el("div", `event event-${event.type}`);
  row.appendChild(el("span", "seq", `#${event.seq}`));
  row.appendChild(el("span", "actor", event.actor));
  row.appendChild(el("span", "action", event.action));
  row.appendChild(el("span", `verdict verdict-${event.verdict}`, event.verdict));
  const detail = Object.entries(event.params)
    .map(([k, v]) => `${k}=${JSON.stringify(v)}`)
    .join(" ");
  row.appendChild(el("span", "params", detail));
  return row;
}

feed.onEvents((added) => {
  const list = byId("feed");
  for (const event of added) list.appendChild(renderEvent(event));
  list.scrollTop = list.scrollHeight;
  if (added.some((e) => e.type === "pending" || e.type === "resolution")) {
    void refreshPending();
  }
  if (added.some((e) => e.type === "state-change" || e.action === "install")) {
    void refreshState();
  }
});

// --- pending prompts -------------------------------------------------------

const inflight = new Set<number>();

function renderPrompt(p: PendingDecision): HTMLElement {
  const card = el("div", "prompt");
  card.dataset.pendingId = String(p.id);
  card.appendChild(
    el("div", "prompt-title", `${p.app} wants ${p.method} ${p.host}${p.path}`)
  );
  const row = el("div", "prompt-actions");
  for (const action of ["allow", "block", "fake"] as Verdict[]) {
    const button = el("button", `btn btn-${action}`, action);
    button.addEventListener("click", () => void decide(p.id, action, card));
    row.appendChild(button);
  }
  card.appendChild(row);
  return card;
}

async function decide(id: number, action: Verdict, card: HTMLElement) {
  if (inflight.has(id)) return; // one POST per operator gesture
  inflight.add(id);
  card.classList.add("prompt-busy");
  try {
    await api.decide(id, action);
    card.remove(); // optimistic; the resolution event confirms it
  } catch (err) {
    card.remove(); // stale prompt (404/409): drop it and tell the operator
    surface(err);
  } finally {
    inflight.delete(id);
  }
}

async function refreshPending() {
  try {
    const items = await api.pending();
    const box = byId("prompts");
    box.innerHTML = "";
    for (const p of items) box.appendChild(renderPrompt(p));
  } catch (err) {
    surface(err);
  }
}

// --- app inspector & state -------------------------------------------------

function grantLine(entry: { id: string; params: string[] | null }): string {
  return entry.params ? `${entry.id} [${entry.params.join(", ")}]` : entry.id;
}

function renderState(snapshot: Snapshot) {
  const box = byId("apps");
  box.innerHTML = "";
  for (const app of snapshot.apps) {
    const card = el("div", app.isProxy ? "app app-proxy" : "app");
    card.appendChild(el("div", "app-name", `${app.package} (uid ${app.uid})`));
    const grants = el("ul", "grants");
    for (const g of app.grants) grants.appendChild(el("li", "", grantLine(g)));
    card.appendChild(grants);
    const fp = el("ul", "footprint");
    for (const f of app.footprint) fp.appendChild(el("li", "", grantLine(f)));
    card.appendChild(el("div", "label", "native footprint"));
    card.appendChild(fp);
    box.appendChild(card);
  }
  byId("net-state").textContent = snapshot.network.connected
    ? "connected"
    : "disconnected";
  byId("stats-state").textContent =
    `stats: ${snapshot.stats.buffered} buffered / ${snapshot.stats.flushed} flushed`;
  byId("scenario-state").textContent = snapshot.scenarioRunning
    ? "scenario running"
    : snapshot.scenarioPassed === undefined
      ? "idle"
      : snapshot.scenarioPassed
        ? "scenario passed"
        : "scenario failed";
}

async function refreshState() {
  try {
    renderState(await api.state());
  } catch (err) {
    surface(err);
  }
}

// --- controls ----------------------------------------------------------------

function wireControls() {
  byId("policy-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const app = (byId("policy-app") as HTMLInputElement).value.trim();
    const domains = (byId("policy-domains") as HTMLInputElement).value
      .split(",")
      .map((d) => d.trim())
      .filter(Boolean);
    const action = (byId("policy-default") as HTMLSelectElement).value;
    api
      .setPolicy(app, domains, action)
      .then(() => notify(`policy set for ${app}`))
      .catch(surface);
  });

  byId("net-toggle").addEventListener("click", () => {
    api
      .state()
      .then((s) => api.setNetwork(!s.network.connected))
      .catch(surface);
  });

  byId("user-action-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const sessionId = (byId("session-id") as HTMLInputElement).value.trim();
    api
      .userAction(sessionId)
      .then((r) => notify(`issued ${r.token} for ${sessionId}`))
      .catch(surface);
  });

  byId("scenario-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const path = (byId("scenario-path") as HTMLInputElement).value.trim();
    api
      .startScenario(path)
      .then(() => {
        feed.reset();
        byId("feed").innerHTML = "";
        notify(`scenario started: ${path}`);
      })
      .catch(surface);
  });
}

// --- event loop ----------------------------------------------------------------

async function poll() {
  for (;;) {
    try {
      const batch = await api.events(feed.lastSeq, 20);
      feed.ingest(batch);
    } catch (err) {
      surface(err);
      await new Promise((r) => setTimeout(r, 1000));
    }
  }
}

wireControls();
void refreshState();
void refreshPending();
void poll();
