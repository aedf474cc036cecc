// Client-side mirrors of the control API wire format.

export type Verdict = "allow" | "block" | "fake";

export interface WireEvent {
  seq: number;
  t: number;
  actor: string;
  action: string;
  verdict: string;
  params: Record<string, unknown>;
  type: "event" | "pending" | "resolution" | "state-change";
}

export interface PendingDecision {
  id: number;
  app: string;
  method: string;
  host: string;
  path: string;
  createdAt: number;
}

export interface GrantEntry {
  id: string;
  params: string[] | null;
}

export interface AppEntry {
  package: string;
  uid: number;
  isProxy: boolean;
  grants: GrantEntry[];
  footprint: GrantEntry[];
}

export interface PolicyEntry {
  app: string;
  allowedDomains: string[];
  defaultAction: string;
}

export interface Snapshot {
  apps: AppEntry[];
  policies: PolicyEntry[];
  network: { connected: boolean };
  stats: { buffered: number; flushed: number };
  pendingCount: number;
  simTime: number;
  scenarioRunning: boolean;
  scenarioPassed?: boolean;
}
