// Screen 3: ad-hoc search with the filter builder, plan badge, and counters.
// The plan badge shows which reduction pathway fired and which vectorset
// answered; after a hot-swap the next search shows the new name.

import { ApiError } from "../api.js";
import { FilterBuilder, type FieldSpec } from "../filter_builder.js";
import type { Store } from "../state.js";
import type { SearchResponse } from "../types.js";

export class SearchConsole {
  readonly root: HTMLElement;
  private appSelect: HTMLSelectElement;
  private queryInput: HTMLInputElement;
  private kInput: HTMLInputElement;
  private modeSelect: HTMLSelectElement;
  private results: HTMLElement;
  private errors: HTMLElement;
  private builderMount: HTMLElement;
  private builder: FilterBuilder | null = null;
  private builderFor: string | null = null;

  constructor(private doc: Document, private store: Store) {
    this.root = doc.createElement("section");
    this.root.id = "search-console";
    const heading = doc.createElement("h2");
    heading.textContent = "Search Console";
    this.root.appendChild(heading);

    const form = doc.createElement("div");
    form.className = "search-form";

    this.appSelect = doc.createElement("select");
    this.appSelect.id = "search-app";
    this.appSelect.addEventListener("change", () => {
      void this.mountBuilder();
    });

    this.queryInput = doc.createElement("input");
    this.queryInput.id = "search-query";
    this.queryInput.placeholder = "query text";

    this.kInput = doc.createElement("input");
    this.kInput.id = "search-k";
    this.kInput.type = "number";
    this.kInput.min = "1";
    this.kInput.value = "10";

    this.modeSelect = doc.createElement("select");
    this.modeSelect.id = "search-mode";
    for (const mode of ["auto", "semantic", "keyword"]) {
      const opt = doc.createElement("option");
      opt.value = mode;
      opt.textContent = mode;
      this.modeSelect.appendChild(opt);
    }

    const go = doc.createElement("button");
    go.type = "button";
    go.id = "search-go";
    go.textContent = "search";
    go.addEventListener("click", () => {
      void this.search();
    });

    form.append(this.appSelect, this.queryInput, this.kInput, this.modeSelect, go);
    this.root.appendChild(form);

    this.builderMount = doc.createElement("div");
    this.builderMount.className = "builder-mount";
    this.root.appendChild(this.builderMount);

    this.errors = doc.createElement("div");
    this.errors.className = "search-errors";
    this.root.appendChild(this.errors);

    this.results = doc.createElement("div");
    this.results.className = "search-results";
    this.root.appendChild(this.results);

    store.subscribe(() => this.syncApps());
  }

  currentFilter(): unknown | null {
    return this.builder ? this.builder.value() : null;
  }

  private syncApps(): void {
    const current = this.appSelect.value;
    this.appSelect.innerHTML = "";
    for (const app of this.store.state.apps) {
      const opt = this.doc.createElement("option");
      opt.value = app.hash;
      opt.textContent = `${app.name} (${app.hash.slice(0, 8)})`;
      if (app.hash === current) opt.selected = true;
      this.appSelect.appendChild(opt);
    }
    if (this.appSelect.value && this.builderFor !== this.appSelect.value) {
      void this.mountBuilder();
    }
  }

  private async datasetFields(appHash: string): Promise<FieldSpec[]> {
    const appBody = await this.store.api.getConfig(appHash);
    const dsHash = appBody.dataset;
    if (typeof dsHash !== "string") return [];
    const ds = await this.store.api.getConfig(dsHash);
    const fields = ds.metadata_fields;
    if (!Array.isArray(fields)) return [];
    return fields as FieldSpec[];
  }

  private async mountBuilder(): Promise<void> {
    const appHash = this.appSelect.value;
    if (!appHash) return;
    this.builderFor = appHash;
    try {
      const fields = await this.datasetFields(appHash);
      this.builder = new FilterBuilder(this.doc, fields);
      this.builderMount.innerHTML = "";
      this.builderMount.appendChild(this.builder.root);
    } catch {
      this.builderMount.textContent = "could not load dataset schema for the filter builder";
    }
  }

  private async search(): Promise<void> {
    this.errors.innerHTML = "";
    const appHash = this.appSelect.value;
    if (!appHash) {
      this.errors.textContent = "no activated app selected";
      return;
    }
    const filter = this.builder?.value() ?? null;
    try {
      const resp = await this.store.api.search(appHash, {
        query_text: this.queryInput.value,
        k: parseInt(this.kInput.value, 10) || 10,
        mode: this.modeSelect.value as "auto" | "semantic" | "keyword",
        ...(filter !== null ? { filter } : {}),
      });
      this.store.update({ lastSearch: resp });
      this.renderResults(resp);
    } catch (err) {
      if (err instanceof ApiError) {
        const list = this.doc.createElement("ul");
        list.className = "violations";
        const items = err.body.violations ?? [{ code: err.body.code, message: err.body.message, where: null }];
        for (const v of items) {
          const li = this.doc.createElement("li");
          li.textContent = `${v.code}: ${v.message}`;
          list.appendChild(li);
        }
        this.errors.appendChild(list);
      } else {
        this.errors.textContent = String(err);
      }
    }
  }

  private renderResults(resp: SearchResponse): void {
    this.results.innerHTML = "";

    const badge = this.doc.createElement("div");
    badge.className = `plan-badge plan-${resp.plan.kind.toLowerCase()}`;
    badge.id = "plan-badge";
    const selectivity = resp.plan.selectivity === null ? "" : ` · s=${resp.plan.selectivity.toFixed(4)}`;
    badge.textContent = `${resp.plan.kind}${selectivity} · vectorset ${resp.vectorset}`;
    badge.dataset.vectorset = resp.vectorset;
    badge.dataset.kind = resp.plan.kind;
    this.results.appendChild(badge);

    const counters = this.doc.createElement("div");
    counters.className = "counters";
    counters.textContent =
      `scored_vectors ${resp.counters.scored_vectors} · ` +
      `postings_scanned ${resp.counters.postings_scanned} · ` +
      `widen_rounds ${resp.counters.widen_rounds}`;
    this.results.appendChild(counters);

    const table = this.doc.createElement("table");
    table.className = "hits";
    const head = this.doc.createElement("tr");
    for (const col of ["#", "doc_id", "score", "chunk"]) {
      const th = this.doc.createElement("th");
      th.textContent = col;
      head.appendChild(th);
    }
    table.appendChild(head);
    resp.hits.forEach((hit, i) => {
      const row = this.doc.createElement("tr");
      const cells = [String(i + 1), hit.doc_id, hit.score.toFixed(6), String(hit.chunk_index)];
      for (const text of cells) {
        const td = this.doc.createElement("td");
        td.textContent = text;
        row.appendChild(td);
      }
      table.appendChild(row);
    });
    this.results.appendChild(table);
  }
}
