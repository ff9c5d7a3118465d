import { describe, expect, it } from "vitest";

import type {
  CycleReport,
  FluentsResponse,
  ModelsResponse,
  StatsResponse,
} from "../src/api.js";
import { statementKind } from "../src/api.js";
import { buildModelTree } from "../src/state.js";
import {
  renderConfidences,
  renderModelTree,
  renderStats,
  renderTimeline,
} from "../src/views.js";
import { golden, numbersIn } from "./golden.js";

describe("model tree view", () => {
  it("greys eliminated models and highlights the selection", () => {
    const models = golden<ModelsResponse>("models.json");
    const roots = buildModelTree(
      [models.models[0]],
      [{ modelId: "m0.1", t: 2, reason: "observation", detail: "Heads(C)" }],
    );
    const html = renderModelTree(roots, "m0");
    expect(html).toContain('data-model="m0"');
    expect(html).toMatch(/model-node alive selected[^>]*>m0</);
    expect(html).toMatch(/model-node eliminated[^>]*>m0\.1</);
    expect(html).toContain('<span class="note">observation</span>');
  });
});

describe("timeline view", () => {
  const fl = golden<FluentsResponse>("fluents_epistemic_hcd.json");

  it("stripes Lit(L) exactly where the server reported it true", () => {
    const html = renderTimeline(fl, 0, 2);
    expect(html).toContain('title="Lit(L) [2,2] true"');
    expect(html).toContain('title="Closed(S2) [0,2] true"');
    expect(html).toContain('title="Closed(S3) [0,0] released"');
  });

  it("shades known and unknown fluents differently in epistemic mode", () => {
    const html = renderTimeline(fl, 0, 2);
    expect(html).toMatch(/class="fluent known">Lit\(L\)</);
    expect(html).toMatch(/class="fluent unknown">Closed\(S3\)</);
  });

  it("lists the hidden-cause clauses verbatim from the API", () => {
    const html = renderTimeline(fl, 0, 2);
    for (const clause of fl.hcds ?? []) {
      expect(html).toContain(clause.replace(/~/g, "~"));
    }
    expect(fl.hcds?.length).toBeGreaterThan(0);
  });

  it("renders an empty chart for an empty window", () => {
    expect(renderTimeline(fl, 5, 4)).toContain("empty window");
    expect(renderTimeline({ modelId: "m0", ticks: [] }, 0, 3)).toContain("empty window");
  });
});

describe("activity panel", () => {
  const cycle = golden<CycleReport>("cycle_report.json");

  it("shows confidences, recognitions and hypothesis weights", () => {
    const html = renderConfidences(cycle);
    expect(html).toContain("TakeShower");
    expect(html).toContain((0.6340000000000001).toFixed(4));
    expect(html).toContain((0.45).toFixed(4));
    expect(html).toMatch(/recognized[^<]*"?>\s*<td>TakeShower/);
    expect(html).toContain("TS8:NoShowerYet");
    expect(html).toContain("w2");
    expect(html).toContain("w3");
  });

  it("displays only numbers present in the API payload", () => {
    const allowed = numbersIn(cycle);
    const html = renderConfidences(cycle);
    for (const match of html.matchAll(/\d+\.\d+/g)) {
      const shown = Number(match[0]);
      const ok = [...allowed].some((n) => Math.abs(n - shown) < 5e-5);
      expect(ok, `number ${shown} not traceable to the API payload`).toBe(true);
    }
  });
});

describe("statistics panel", () => {
  it("renders one row per tick straight from the stats endpoint", () => {
    const stats = golden<StatsResponse>("stats.json");
    const html = renderStats(stats.perTick);
    expect(html.match(/<tr><td>/g)?.length).toBe(stats.perTick.length);
    for (const rec of stats.perTick) {
      expect(html).toContain(
        `<tr><td>${rec.t}</td><td>${rec.factCount}</td><td>${rec.ruleFirings}</td>`,
      );
    }
  });
});

describe("inject routing", () => {
  it("sends state assertions to observations and events elsewhere", () => {
    expect(statementKind("Happens(Close(S1), -1).")).toBe("events");
    expect(statementKind("HoldsAt(Heads(C), 2).")).toBe("observations");
    expect(statementKind("~HoldsAt(Heads(C), 3).")).toBe("observations");
  });
});
