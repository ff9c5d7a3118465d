// Typed client for the session service. Every type here mirrors a
// JSON payload produced by the server; the UI never computes fluent
// values or probabilities itself.

export interface ModelSummary {
  id: string;
  parent: string | null;
  bornAt: number;
  true: string[];
  released: string[];
  events: string[];
  knownTrue?: string[];
  knownFalse?: string[];
  hcds?: string[];
  potentialEvents?: string[];
}

export interface Elimination {
  modelId: string;
  t: number;
  reason: string;
  detail: string;
}

export interface TickReport {
  t: number;
  survivors: string[];
  created: string[];
  eliminated: Elimination[];
  merged: { dropped: string; into: string }[];
  timingsMs: Record<string, number>;
  models: ModelSummary[];
  elapsedMs: number;
  factCount: number;
  ruleFirings: number;
}

export interface ModelsResponse {
  clock: number;
  models: ModelSummary[];
  tombstones: Elimination[];
}

export interface FluentTick {
  t: number;
  true: string[];
  released: string[];
  events: string[];
}

export interface FluentsResponse {
  modelId: string;
  ticks: FluentTick[];
  knownTrue?: string[];
  knownFalse?: string[];
  hcds?: string[];
}

export interface PossEntry {
  user: string;
  activity: string;
  explanationId: string;
  weight: number;
}

export interface Recognition {
  user: string;
  activity: string;
  confidence: number;
  at: number;
}

export interface DoAction {
  kind: string;
  payload: string;
  at: number;
  cause: Recognition | null;
}

export interface CycleReport {
  tStart: number;
  tEnd: number;
  poss: PossEntry[];
  confidences: Record<string, number>;
  recognized: Recognition[];
  doActions: DoAction[];
}

export interface StatsRecord {
  t: number;
  factCount: number;
  ruleFirings: number;
  modelsAlive: number;
  elapsedMs: number;
}

export interface StatsResponse {
  clock: number;
  modelCount: number;
  modelIds: string[];
  eliminatedTotal: number;
  mode: string;
  epistemic: boolean;
  branchCap: number;
  perTick: StatsRecord[];
}

export type StreamMessage =
  | { type: "tick"; report: TickReport }
  | { type: "cycle"; report: CycleReport }
  | { type: "inconsistent"; report: TickReport | null };

export class ApiError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`HTTP ${status}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let detail: unknown = resp.statusText;
    try {
      detail = (await resp.json()).detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  if (resp.status === 204) return undefined as T;
  return resp.json() as Promise<T>;
}

export class Client {
  constructor(private base = "") {}

  getModels(sid: string): Promise<ModelsResponse> {
    return request(`${this.base}/sessions/${sid}/models`);
  }

  getFluents(sid: string, mid: string, from?: number, to?: number): Promise<FluentsResponse> {
    const q = new URLSearchParams();
    if (from !== undefined) q.set("from", String(from));
    if (to !== undefined) q.set("to", String(to));
    const qs = q.toString();
    return request(`${this.base}/sessions/${sid}/models/${mid}/fluents${qs ? "?" + qs : ""}`);
  }

  getActivities(sid: string): Promise<{ cycles: CycleReport[] }> {
    return request(`${this.base}/sessions/${sid}/activities`);
  }

  getStats(sid: string): Promise<StatsResponse> {
    return request(`${this.base}/sessions/${sid}/stats`);
  }

  getDescriptor(sid: string): Promise<Record<string, unknown>> {
    return request(`${this.base}/sessions/${sid}`);
  }

  postStatement(sid: string, kind: "events" | "observations", statement: string) {
    return request<{ queuedFor: number; clock: number }>(
      `${this.base}/sessions/${sid}/${kind}`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ statement }),
      },
    );
  }

  postTick(sid: string): Promise<TickReport> {
    return request(`${this.base}/sessions/${sid}/tick`, { method: "POST" });
  }

  streamUrl(sid: string): string {
    return `${this.base}/sessions/${sid}/stream`;
  }
}

// Statements are routed by their head: state assertions go to the
// observations endpoint, everything else (Happens) to events.
export function statementKind(statement: string): "events" | "observations" {
  const head = statement.trim().replace(/^[~\s]+/, "");
  return head.startsWith("HoldsAt") ? "observations" : "events";
}
