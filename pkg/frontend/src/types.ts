// Wire types mirroring the service JSON. The UI never recomputes scores or
// rates; every rendered number is traceable to one of these fields.

export type FilterNode =
  | { op: "eq"; field: string; value: unknown }
  | { op: "in"; field: string; value: unknown[] }
  | { op: "range"; field: string; min?: number | string; max?: number | string }
  | { op: "and"; children: FilterNode[] }
  | { op: "or"; children: FilterNode[] }
  | { op: "not"; children: [FilterNode] };

export interface ScoredHit {
  doc_id: string;
  score: number;
  chunk_index: number;
}

export interface PlanReport {
  kind: "Unfiltered" | "PreFilter" | "PostFilter" | "Lexical";
  selectivity: number | null;
  m0: number | null;
  widen_rounds: number;
}

export interface CostCounters {
  scored_vectors: number;
  postings_scanned: number;
  widen_rounds: number;
}

export interface SearchResponse {
  hits: ScoredHit[];
  plan: PlanReport;
  counters: CostCounters;
  vectorset: string;
}

export interface LayerOutcome {
  outcome: "reused" | "built";
  wall_time_s: number;
}

export interface ActivationReport {
  layers: Record<string, LayerOutcome>;
  embed_calls: number;
}

export interface ConfigEntry {
  hash: string;
  kind: "dataset" | "vectorset" | "app";
  name: string;
}

export interface AppEntry {
  hash: string;
  name: string;
  active_vectorset: string;
  vectorsets: string[];
  report: ActivationReport | null;
}

export interface Violation {
  code: string;
  message: string;
  where: string | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  violations?: Violation[];
}

export interface BenchReport {
  app_hash: string;
  ks: number[];
  rates: Record<string, number>;
  per_query: { query_id: string; gold_rank: number | null; plan: string }[];
  counters_by_plan: Record<string, Record<string, number>>;
  n_queries: number;
  skipped: string[];
}

export interface SweepRow {
  selectivity: number;
  plan: string;
  scored_vectors: number;
  postings_scanned: number;
  widen_rounds: number;
}
