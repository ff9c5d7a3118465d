// Pure view-model derivations. Everything here rearranges server
// payloads for display; nothing infers new facts.

import type {
  CycleReport,
  Elimination,
  FluentTick,
  ModelSummary,
  StatsRecord,
  StreamMessage,
  TickReport,
} from "./api.js";

export interface SessionState {
  sessionId: string;
  clock: number;
  ticks: TickReport[];
  cycles: CycleReport[];
  models: ModelSummary[];
  tombstones: Elimination[];
  selectedModel: string | null;
  inconsistent: boolean;
}

export function initialState(sessionId: string): SessionState {
  return {
    sessionId,
    clock: 0,
    ticks: [],
    cycles: [],
    models: [],
    tombstones: [],
    selectedModel: null,
    inconsistent: false,
  };
}

// Stream replay can resend ticks already fetched during catch-up;
// reports are keyed by tick so duplicates replace rather than append.
export function applyMessage(state: SessionState, msg: StreamMessage): SessionState {
  if (msg.type === "cycle") {
    const cycles = state.cycles.filter((c) => c.tStart !== msg.report.tStart);
    cycles.push(msg.report);
    cycles.sort((a, b) => a.tStart - b.tStart);
    return { ...state, cycles };
  }
  if (msg.type === "inconsistent") {
    const next = msg.report ? applyTick(state, msg.report) : state;
    return { ...next, inconsistent: true, models: [] };
  }
  return applyTick(state, msg.report);
}

function applyTick(state: SessionState, report: TickReport): SessionState {
  const ticks = state.ticks.filter((r) => r.t !== report.t);
  ticks.push(report);
  ticks.sort((a, b) => a.t - b.t);
  const latest = ticks[ticks.length - 1];
  const tombstones = mergeTombstones(state.tombstones, report.eliminated);
  const models = latest.models;
  const selected =
    state.selectedModel && models.some((m) => m.id === state.selectedModel)
      ? state.selectedModel
      : models[0]?.id ?? state.selectedModel;
  return {
    ...state,
    clock: latest.t,
    ticks,
    models,
    tombstones,
    selectedModel: selected,
  };
}

function mergeTombstones(existing: Elimination[], incoming: Elimination[]): Elimination[] {
  const seen = new Set(existing.map((e) => `${e.modelId}@${e.t}`));
  const out = existing.slice();
  for (const e of incoming) {
    if (!seen.has(`${e.modelId}@${e.t}`)) out.push(e);
  }
  return out;
}

export interface TreeNode {
  id: string;
  bornAt: number;
  alive: boolean;
  reason?: string;
  detail?: string;
  children: TreeNode[];
}

// The model tree shows lineage: every id descends from its parent
// field; eliminated models stay visible (greyed) as tombstones.
export function buildModelTree(models: ModelSummary[], tombstones: Elimination[]): TreeNode[] {
  const nodes = new Map<string, TreeNode>();
  for (const m of models) {
    nodes.set(m.id, { id: m.id, bornAt: m.bornAt, alive: true, children: [] });
  }
  for (const e of tombstones) {
    if (!nodes.has(e.modelId)) {
      nodes.set(e.modelId, {
        id: e.modelId,
        bornAt: -1,
        alive: false,
        reason: e.reason,
        detail: e.detail,
        children: [],
      });
    }
  }
  const roots: TreeNode[] = [];
  const parentOf = (id: string): string | null => {
    const m = models.find((x) => x.id === id);
    if (m) return m.parent;
    const dot = id.lastIndexOf(".");
    return dot === -1 ? null : id.slice(0, dot);
  };
  for (const node of nodes.values()) {
    const pid = parentOf(node.id);
    const parent = pid !== null ? nodes.get(pid) : undefined;
    if (parent && parent.id !== node.id) parent.children.push(node);
    else roots.push(node);
  }
  const sortRec = (ns: TreeNode[]) => {
    ns.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
    ns.forEach((n) => sortRec(n.children));
  };
  sortRec(roots);
  return roots;
}

export interface Interval {
  start: number;
  end: number; // inclusive
  kind: "true" | "released";
}

// Per-fluent true/undetermined intervals over the fetched window.
// Contiguous ticks with the same status collapse into one interval.
export function timelineIntervals(ticks: FluentTick[]): Map<string, Interval[]> {
  const fluents = new Set<string>();
  for (const tk of ticks) {
    tk.true.forEach((f) => fluents.add(f));
    tk.released.forEach((f) => fluents.add(f));
  }
  const out = new Map<string, Interval[]>();
  for (const f of [...fluents].sort()) {
    const intervals: Interval[] = [];
    for (const tk of ticks) {
      const kind = tk.true.includes(f) ? "true" : tk.released.includes(f) ? "released" : null;
      if (!kind) continue;
      const last = intervals[intervals.length - 1];
      if (last && last.kind === kind && last.end === tk.t - 1) last.end = tk.t;
      else intervals.push({ start: tk.t, end: tk.t, kind });
    }
    out.set(f, intervals);
  }
  return out;
}

export interface ConfidenceRow {
  activity: string;
  confidence: number;
  recognized: boolean;
}

export function confidenceRows(cycle: CycleReport): ConfidenceRow[] {
  const recognized = new Set(cycle.recognized.map((r) => r.activity));
  return Object.entries(cycle.confidences)
    .map(([activity, confidence]) => ({
      activity,
      confidence,
      recognized: recognized.has(activity),
    }))
    .sort((a, b) => b.confidence - a.confidence);
}

export function statsRows(perTick: StatsRecord[]): StatsRecord[] {
  return perTick.slice().sort((a, b) => a.t - b.t);
}
