// Screen 2: activation with layer-by-layer reuse/built badges and the
// hot-swap selector. Badges mirror the ActivationReport JSON verbatim.

import { ApiError } from "../api.js";
import { shortHash } from "../dag.js";
import type { Store } from "../state.js";
import type { ActivationReport, AppEntry, ConfigEntry } from "../types.js";

export class AppConsole {
  readonly root: HTMLElement;
  private list: HTMLElement;

  constructor(private doc: Document, private store: Store) {
    this.root = doc.createElement("section");
    this.root.id = "app-console";
    const heading = doc.createElement("h2");
    heading.textContent = "App Console";
    this.root.appendChild(heading);
    this.list = doc.createElement("div");
    this.list.className = "app-list";
    this.root.appendChild(this.list);
    store.subscribe(() => this.redraw());
  }

  private appConfigs(): ConfigEntry[] {
    return this.store.state.configs.filter((c) => c.kind === "app");
  }

  private redraw(): void {
    this.list.innerHTML = "";
    const active = new Map(this.store.state.apps.map((a) => [a.hash, a]));
    for (const cfg of this.appConfigs()) {
      this.list.appendChild(this.renderApp(cfg, active.get(cfg.hash)));
    }
    if (this.appConfigs().length === 0) {
      const empty = this.doc.createElement("p");
      empty.textContent = "No app configs registered yet.";
      this.list.appendChild(empty);
    }
  }

  private renderApp(cfg: ConfigEntry, live: AppEntry | undefined): HTMLElement {
    const card = this.doc.createElement("div");
    card.className = "app-card";
    card.dataset.hash = cfg.hash;

    const title = this.doc.createElement("h3");
    title.textContent = `${cfg.name} (${shortHash(cfg.hash)})`;
    card.appendChild(title);

    const status = this.doc.createElement("div");
    status.className = "activation-status";
    card.appendChild(status);

    const activateBtn = this.doc.createElement("button");
    activateBtn.type = "button";
    activateBtn.className = "activate";
    activateBtn.textContent = live ? "re-activate" : "activate";
    activateBtn.addEventListener("click", () => {
      void this.activate(cfg.hash, status, activateBtn);
    });
    card.appendChild(activateBtn);

    if (live?.report) {
      status.appendChild(this.renderReport(live.report));
    }

    if (live) {
      const servingLine = this.doc.createElement("p");
      servingLine.className = "serving";
      servingLine.textContent = `serving vectorset: ${live.active_vectorset}`;
      card.appendChild(servingLine);

      const swapWrap = this.doc.createElement("div");
      swapWrap.className = "swap";
      const select = this.doc.createElement("select");
      select.className = "swap-select";
      for (const name of live.vectorsets) {
        const opt = this.doc.createElement("option");
        opt.value = name;
        opt.textContent = name;
        if (name === live.active_vectorset) opt.selected = true;
        select.appendChild(opt);
      }
      const swapBtn = this.doc.createElement("button");
      swapBtn.type = "button";
      swapBtn.className = "swap-btn";
      swapBtn.textContent = "hot-swap";
      const confirmation = this.doc.createElement("span");
      confirmation.className = "swap-confirmation";
      swapBtn.addEventListener("click", () => {
        void this.swap(cfg.hash, select.value, confirmation);
      });
      swapWrap.append(select, swapBtn, confirmation);
      card.appendChild(swapWrap);
    }
    return card;
  }

  private renderReport(report: ActivationReport): HTMLElement {
    const wrap = this.doc.createElement("div");
    wrap.className = "layer-badges";
    for (const [layer, outcome] of Object.entries(report.layers)) {
      const badge = this.doc.createElement("span");
      badge.className = `badge badge-${outcome.outcome}`;
      badge.dataset.layer = layer;
      badge.textContent = `${layer}: ${outcome.outcome} (${outcome.wall_time_s.toFixed(2)}s)`;
      wrap.appendChild(badge);
    }
    const calls = this.doc.createElement("span");
    calls.className = "embed-calls";
    calls.textContent = `embed calls: ${report.embed_calls}`;
    wrap.appendChild(calls);
    return wrap;
  }

  private async activate(hash: string, status: HTMLElement, btn: HTMLButtonElement): Promise<void> {
    btn.disabled = true;
    status.textContent = "activating…";
    try {
      const report = await this.store.api.activate(hash);
      status.innerHTML = "";
      status.appendChild(this.renderReport(report));
      this.store.update({ lastReport: report });
      await this.store.refresh();
    } catch (err) {
      status.textContent = err instanceof ApiError ? `error: ${err.body.message}` : String(err);
      status.className = "activation-status error";
    } finally {
      btn.disabled = false;
    }
  }

  private async swap(hash: string, vectorset: string, confirmation: HTMLElement): Promise<void> {
    confirmation.textContent = "swapping…";
    try {
      const report = await this.store.api.swap(hash, vectorset);
      const outcome = report.layers.vectorset?.outcome ?? "reused";
      confirmation.textContent = `now serving ${vectorset} (${outcome})`;
      await this.store.refresh();
    } catch (err) {
      confirmation.textContent = err instanceof ApiError ? `error: ${err.body.message}` : String(err);
    }
  }
}
