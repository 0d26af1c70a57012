// Layout math for the config DAG: three columns (dataset, vectorset, app)
// with edges derived from stored config bodies. Pure, so it is unit-testable
// without a DOM.

import type { ConfigEntry } from "./types.js";

export interface DagNode {
  hash: string;
  kind: "dataset" | "vectorset" | "app";
  name: string;
  x: number;
  y: number;
}

export interface DagEdge {
  from: string; // child hash (dependency)
  to: string; // parent hash (dependent)
}

export interface DagLayout {
  nodes: DagNode[];
  edges: DagEdge[];
  width: number;
  height: number;
}

const COLUMN_X: Record<DagNode["kind"], number> = { dataset: 80, vectorset: 320, app: 560 };
const ROW_H = 64;
const TOP = 40;

export function layoutDag(
  entries: ConfigEntry[],
  bodies: Map<string, Record<string, unknown>>,
): DagLayout {
  const nodes: DagNode[] = [];
  const counters: Record<DagNode["kind"], number> = { dataset: 0, vectorset: 0, app: 0 };
  for (const entry of entries) {
    const row = counters[entry.kind]++;
    nodes.push({
      hash: entry.hash,
      kind: entry.kind,
      name: entry.name,
      x: COLUMN_X[entry.kind],
      y: TOP + row * ROW_H,
    });
  }
  const known = new Set(entries.map((e) => e.hash));
  const edges: DagEdge[] = [];
  for (const entry of entries) {
    const body = bodies.get(entry.hash);
    if (!body) continue;
    if (entry.kind === "vectorset" && typeof body.dataset === "string" && known.has(body.dataset)) {
      edges.push({ from: body.dataset, to: entry.hash });
    }
    if (entry.kind === "app") {
      if (typeof body.dataset === "string" && known.has(body.dataset)) {
        edges.push({ from: body.dataset, to: entry.hash });
      }
      if (Array.isArray(body.vectorsets)) {
        for (const vs of body.vectorsets) {
          if (typeof vs === "string" && known.has(vs)) edges.push({ from: vs, to: entry.hash });
        }
      }
    }
  }
  const maxRows = Math.max(counters.dataset, counters.vectorset, counters.app, 1);
  return { nodes, edges, width: 720, height: TOP + maxRows * ROW_H + 20 };
}

export function shortHash(hash: string): string {
  return hash.slice(0, 12);
}
