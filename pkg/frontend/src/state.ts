// Client-side mirror of service state. Mutations happen only through the API;
// this store just caches the latest responses and notifies views.

import { ApiClient, ServiceUnreachable } from "./api.js";
import type {
  ActivationReport,
  AppEntry,
  BenchReport,
  ConfigEntry,
  SearchResponse,
  SweepRow,
} from "./types.js";

export interface UiAppState {
  configs: ConfigEntry[];
  apps: AppEntry[];
  serviceDown: boolean;
  lastSearch: SearchResponse | null;
  lastReport: ActivationReport | null;
  benchReport: BenchReport | null;
  sweepRows: SweepRow[];
}

type Listener = (state: UiAppState) => void;

export class Store {
  state: UiAppState = {
    configs: [],
    apps: [],
    serviceDown: false,
    lastSearch: null,
    lastReport: null,
    benchReport: null,
    sweepRows: [],
  };
  private listeners: Listener[] = [];

  constructor(public api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(patch: Partial<UiAppState>): void {
    this.state = { ...this.state, ...patch };
    for (const l of this.listeners) l(this.state);
  }

  async refresh(): Promise<void> {
    try {
      const [configs, apps] = await Promise.all([this.api.listConfigs(), this.api.listApps()]);
      this.update({ configs, apps, serviceDown: false });
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        this.update({ serviceDown: true });
        return;
      }
      throw err;
    }
  }

  startPolling(intervalMs = 3000): () => void {
    const timer = setInterval(() => {
      void this.refresh();
    }, intervalMs);
    return () => clearInterval(timer);
  }
}

export function parseSweepCsv(text: string): SweepRow[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0) return [];
  const header = (lines[0] ?? "").split(",");
  const expected = ["selectivity", "plan", "scored_vectors", "postings_scanned", "widen_rounds"];
  if (header.join(",") !== expected.join(",")) {
    throw new Error(`unexpected sweep CSV header: ${lines[0]}`);
  }
  return lines.slice(1).filter((l) => l.trim()).map((line) => {
    const cells = line.split(",");
    return {
      selectivity: Number(cells[0]),
      plan: cells[1] ?? "",
      scored_vectors: Number(cells[2]),
      postings_scanned: Number(cells[3]),
      widen_rounds: Number(cells[4]),
    };
  });
}

export function sweepCrossover(rows: SweepRow[]): number | null {
  const bySel = new Map<number, { pre?: number; post?: number }>();
  for (const r of rows) {
    const entry = bySel.get(r.selectivity) ?? {};
    if (r.plan === "PreFilter") entry.pre = r.scored_vectors;
    if (r.plan === "PostFilter") entry.post = r.scored_vectors;
    bySel.set(r.selectivity, entry);
  }
  for (const s of [...bySel.keys()].sort((a, b) => a - b)) {
    const { pre, post } = bySel.get(s)!;
    if (pre !== undefined && post !== undefined && post < pre) return s;
  }
  return null;
}
