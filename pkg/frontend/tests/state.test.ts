import { describe, expect, it } from "vitest";

import { ApiClient, ServiceUnreachable } from "../src/api.js";
import { Store, parseSweepCsv, sweepCrossover } from "../src/state.js";
import { layoutDag } from "../src/dag.js";

const SWEEP_CSV = `selectivity,plan,scored_vectors,postings_scanned,widen_rounds
0.001,PreFilter,50.0,50.0,0.0
0.001,PostFilter,23218.0,50.0,12.0
0.5,PreFilter,25000.0,25000.0,0.0
0.5,PostFilter,2590.0,25000.0,0.4
`;

describe("sweep parsing", () => {
  it("parses rows and finds the crossover", () => {
    const rows = parseSweepCsv(SWEEP_CSV);
    expect(rows).toHaveLength(4);
    expect(rows[0]).toEqual({
      selectivity: 0.001,
      plan: "PreFilter",
      scored_vectors: 50,
      postings_scanned: 50,
      widen_rounds: 0,
    });
    expect(sweepCrossover(rows)).toBe(0.5);
  });

  it("rejects a foreign header", () => {
    expect(() => parseSweepCsv("a,b,c\n1,2,3")).toThrow();
  });

  it("returns null when the cheaper plan never flips", () => {
    const rows = parseSweepCsv(
      "selectivity,plan,scored_vectors,postings_scanned,widen_rounds\n0.1,PreFilter,1,1,0\n0.1,PostFilter,2,1,0\n",
    );
    expect(sweepCrossover(rows)).toBeNull();
  });
});

describe("store", () => {
  it("refresh populates configs and apps", async () => {
    const client = new ApiClient("http://x", async (url) => {
      const path = String(url);
      const body = path.endsWith("/configs")
        ? [{ hash: "h1", kind: "dataset", name: "d" }]
        : [];
      return new Response(JSON.stringify(body), { status: 200 });
    });
    const store = new Store(client);
    await store.refresh();
    expect(store.state.configs).toHaveLength(1);
    expect(store.state.serviceDown).toBe(false);
  });

  it("refresh flags a down service instead of throwing", async () => {
    const client = new ApiClient("http://x", async () => {
      throw new TypeError("refused");
    });
    const store = new Store(client);
    await store.refresh();
    expect(store.state.serviceDown).toBe(true);
  });

  it("notifies subscribers on update", () => {
    const store = new Store(new ApiClient("http://x"));
    let seen = 0;
    const unsub = store.subscribe(() => {
      seen += 1;
    });
    store.update({ serviceDown: true });
    unsub();
    store.update({ serviceDown: false });
    expect(seen).toBe(1);
  });
});

describe("dag layout", () => {
  it("places kinds in columns and derives edges from bodies", () => {
    const entries = [
      { hash: "d1", kind: "dataset" as const, name: "data" },
      { hash: "v1", kind: "vectorset" as const, name: "vs" },
      { hash: "a1", kind: "app" as const, name: "app" },
    ];
    const bodies = new Map<string, Record<string, unknown>>([
      ["v1", { dataset: "d1" }],
      ["a1", { dataset: "d1", vectorsets: ["v1"] }],
    ]);
    const layout = layoutDag(entries, bodies);
    expect(layout.nodes.map((n) => n.kind)).toEqual(["dataset", "vectorset", "app"]);
    const xs = new Map(layout.nodes.map((n) => [n.kind, n.x]));
    expect(xs.get("dataset")! < xs.get("vectorset")!).toBe(true);
    expect(xs.get("vectorset")! < xs.get("app")!).toBe(true);
    expect(layout.edges).toEqual([
      { from: "d1", to: "v1" },
      { from: "d1", to: "a1" },
      { from: "v1", to: "a1" },
    ]);
  });

  it("ignores dangling refs", () => {
    const entries = [{ hash: "v1", kind: "vectorset" as const, name: "vs" }];
    const bodies = new Map<string, Record<string, unknown>>([["v1", { dataset: "missing" }]]);
    expect(layoutDag(entries, bodies).edges).toEqual([]);
  });
});
