// HTML string renderers. Pure functions of server data so they can be
// tested without a browser; main.ts assigns the results to innerHTML.

import type { CycleReport, FluentsResponse, StatsRecord } from "./api.js";
import {
  confidenceRows,
  statsRows,
  timelineIntervals,
  type SessionState,
  type TreeNode,
} from "./state.js";

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderModelTree(roots: TreeNode[], selected: string | null): string {
  const node = (n: TreeNode): string => {
    const cls = [
      "model-node",
      n.alive ? "alive" : "eliminated",
      n.id === selected ? "selected" : "",
    ]
      .filter(Boolean)
      .join(" ");
    const note = n.alive ? "" : ` <span class="note">${esc(n.reason ?? "eliminated")}</span>`;
    const kids = n.children.length
      ? `<ul>${n.children.map((c) => `<li>${node(c)}</li>`).join("")}</ul>`
      : "";
    return `<span class="${cls}" data-model="${esc(n.id)}">${esc(n.id)}</span>${note}${kids}`;
  };
  if (!roots.length) return `<p class="empty">no models</p>`;
  return `<ul class="model-tree">${roots.map((r) => `<li>${node(r)}</li>`).join("")}</ul>`;
}

export function renderTimeline(fluents: FluentsResponse, from: number, to: number): string {
  const ticks = fluents.ticks.filter((tk) => tk.t >= from && tk.t <= to);
  const span = to - from + 1;
  if (span <= 0 || !ticks.length) return `<p class="empty">empty window</p>`;
  const intervals = timelineIntervals(ticks);
  const known = new Set([...(fluents.knownTrue ?? []), ...(fluents.knownFalse ?? [])]);
  const epistemic = fluents.knownTrue !== undefined;
  const rows: string[] = [];
  for (const [fluent, ivs] of intervals) {
    const shading = !epistemic ? "" : known.has(fluent) ? " known" : " unknown";
    const bars = ivs
      .map((iv) => {
        const left = ((iv.start - from) / span) * 100;
        const width = ((iv.end - iv.start + 1) / span) * 100;
        return (
          `<span class="bar ${iv.kind}${shading}" ` +
          `style="left:${left.toFixed(2)}%;width:${width.toFixed(2)}%" ` +
          `title="${esc(fluent)} [${iv.start},${iv.end}] ${iv.kind}"></span>`
        );
      })
      .join("");
    rows.push(
      `<div class="timeline-row"><span class="fluent${shading}">${esc(fluent)}</span>` +
        `<span class="track">${bars}</span></div>`,
    );
  }
  const hcds = (fluents.hcds ?? [])
    .map((h) => `<li class="hcd">${esc(h)}</li>`)
    .join("");
  const hcdBlock = epistemic
    ? `<div class="hcds"><h4>hidden-cause clauses</h4><ul>${hcds || "<li class=\"empty\">none</li>"}</ul></div>`
    : "";
  return `<div class="timeline" data-model="${esc(fluents.modelId)}">${rows.join("")}</div>${hcdBlock}`;
}

export function renderConfidences(cycle: CycleReport | null): string {
  if (!cycle) return `<p class="empty">no cycles yet</p>`;
  const rows = confidenceRows(cycle)
    .map(
      (r) =>
        `<tr class="${r.recognized ? "recognized" : ""}">` +
        `<td>${esc(r.activity)}</td><td>${r.confidence.toFixed(4)}</td>` +
        `<td>${r.recognized ? "recognized" : ""}</td></tr>`,
    )
    .join("");
  const poss = cycle.poss
    .map(
      (p) =>
        `<li>${esc(p.user)} ${esc(p.activity)} <code>${esc(p.explanationId)}</code> w${p.weight}</li>`,
    )
    .join("");
  const actions = cycle.doActions
    .map((d) => `<li>${esc(d.kind)} ${esc(d.payload)} @t${d.at}</li>`)
    .join("");
  return (
    `<p>cycle t${cycle.tStart}&rarr;t${cycle.tEnd}</p>` +
    `<table class="confidences"><thead><tr><th>activity</th><th>confidence</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<ul class="poss">${poss}</ul><ul class="do-actions">${actions}</ul>`
  );
}

export function renderStats(perTick: StatsRecord[]): string {
  if (!perTick.length) return `<p class="empty">no ticks yet</p>`;
  const rows = statsRows(perTick)
    .map(
      (r) =>
        `<tr><td>${r.t}</td><td>${r.factCount}</td><td>${r.ruleFirings}</td>` +
        `<td>${r.modelsAlive}</td><td>${r.elapsedMs.toFixed(2)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="stats"><thead><tr><th>t</th><th>facts</th><th>firings</th>` +
    `<th>models</th><th>ms</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderBanner(state: SessionState, error: string | null): string {
  if (error) return `<div class="banner error">${esc(error)}</div>`;
  if (state.inconsistent)
    return `<div class="banner error">all models eliminated — session inconsistent</div>`;
  return "";
}

export function renderHeader(state: SessionState): string {
  return (
    `<span>session <code>${esc(state.sessionId)}</code></span>` +
    `<span>clock ${state.clock}</span>` +
    `<span>${state.models.length} model(s), ${state.tombstones.length} eliminated</span>`
  );
}
