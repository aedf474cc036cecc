import type { PendingDecision, Snapshot, Verdict, WireEvent } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface ApiClientOptions {
  baseUrl?: string;
  token?: string;
  fetchFn?: typeof fetch;
}

/** Thin typed wrapper over the /v1 control endpoints. Every state change the
 * console makes goes through exactly one of the POST methods below. */
export class ApiClient {
  private baseUrl: string;
  private token?: string;
  private fetchFn: typeof fetch;

  constructor(opts: ApiClientOptions = {}) {
    this.baseUrl = (opts.baseUrl ?? "").replace(/\/$/, "");
    this.token = opts.token;
    this.fetchFn = opts.fetchFn ?? fetch.bind(globalThis);
  }

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["X-Permesh-Token"] = this.token;
    return h;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.request(path, { headers: this.headers(false) });
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.request(path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    return (await resp.json()) as T;
  }

  state(): Promise<Snapshot> {
    return this.get<Snapshot>("/v1/state");
  }

  pending(): Promise<PendingDecision[]> {
    return this.get<PendingDecision[]>("/v1/pending");
  }

  /** Fetch events after `since` as parsed NDJSON; `wait` enables long-poll. */
  async events(since = 0, wait = 0): Promise<WireEvent[]> {
    const resp = await this.request(`/v1/events?since=${since}&wait=${wait}`, {
      headers: this.headers(false),
    });
    const text = await resp.text();
    return text
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as WireEvent);
  }

  decide(id: number, action: Verdict): Promise<{ ok: boolean }> {
    return this.post("/v1/decide", { id, action });
  }

  setPolicy(app: string, allowedDomains: string[], defaultAction = "prompt") {
    return this.post<{ ok: boolean }>("/v1/policy", {
      app,
      allowedDomains,
      defaultAction,
    });
  }

  userAction(sessionId: string): Promise<{ ok: boolean; token: string }> {
    return this.post("/v1/user-action", { sessionId });
  }

  startScenario(path: string): Promise<{ ok: boolean }> {
    return this.post("/v1/scenario/start", { path });
  }

  setNetwork(connected: boolean): Promise<{ ok: boolean }> {
    return this.post("/v1/network", { connected });
  }
}
