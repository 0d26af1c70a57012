// Screen 1: the config DAG (dataset -> vectorset -> app) with hashes and
// registration/validation status, plus a JSON upload box for new configs.

import { ApiError } from "../api.js";
import { layoutDag, shortHash } from "../dag.js";
import type { Store } from "../state.js";
import type { ConfigEntry } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export class ConfigExplorer {
  readonly root: HTMLElement;
  private bodies = new Map<string, Record<string, unknown>>();
  private canvas: HTMLElement;
  private uploadStatus: HTMLElement;

  constructor(private doc: Document, private store: Store) {
    this.root = doc.createElement("section");
    this.root.id = "config-explorer";
    const heading = doc.createElement("h2");
    heading.textContent = "Config Explorer";
    this.root.appendChild(heading);

    this.canvas = doc.createElement("div");
    this.canvas.className = "dag-canvas";
    this.root.appendChild(this.canvas);

    const form = doc.createElement("div");
    form.className = "config-upload";
    const textarea = doc.createElement("textarea");
    textarea.id = "config-json";
    textarea.placeholder = '{"kind": "dataset", ...}';
    const submit = doc.createElement("button");
    submit.type = "button";
    submit.id = "config-submit";
    submit.textContent = "register config";
    this.uploadStatus = doc.createElement("div");
    this.uploadStatus.className = "upload-status";
    submit.addEventListener("click", () => {
      void this.submit(textarea.value);
    });
    form.append(textarea, submit, this.uploadStatus);
    this.root.appendChild(form);

    store.subscribe(() => {
      void this.redraw();
    });
  }

  private async submit(text: string): Promise<void> {
    this.uploadStatus.innerHTML = "";
    let parsed: unknown;
    try {
      parsed = JSON.parse(text);
    } catch (err) {
      this.renderViolations([{ code: "bad_json", message: String(err), where: null }]);
      return;
    }
    try {
      const { hash } = await this.store.api.putConfig(parsed);
      this.uploadStatus.textContent = `registered ${shortHash(hash)}`;
      this.uploadStatus.className = "upload-status ok";
      await this.store.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.body.violations) {
        this.renderViolations(err.body.violations);
      } else {
        this.uploadStatus.textContent = String(err);
        this.uploadStatus.className = "upload-status error";
      }
    }
  }

  private renderViolations(violations: { code: string; message: string; where: string | null }[]): void {
    this.uploadStatus.className = "upload-status error";
    const list = this.doc.createElement("ul");
    list.className = "violations";
    for (const v of violations) {
      const item = this.doc.createElement("li");
      item.textContent = `${v.code}: ${v.message}`;
      list.appendChild(item);
    }
    this.uploadStatus.appendChild(list);
  }

  private async redraw(): Promise<void> {
    const entries = this.store.state.configs;
    await this.fetchMissingBodies(entries);
    const layout = layoutDag(entries, this.bodies);

    const svg = this.doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("width", String(layout.width));
    svg.setAttribute("height", String(layout.height));
    svg.setAttribute("class", "dag");

    const pos = new Map(layout.nodes.map((n) => [n.hash, n]));
    for (const edge of layout.edges) {
      const from = pos.get(edge.from);
      const to = pos.get(edge.to);
      if (!from || !to) continue;
      const line = this.doc.createElementNS(SVG_NS, "line");
      line.setAttribute("x1", String(from.x + 90));
      line.setAttribute("y1", String(from.y + 16));
      line.setAttribute("x2", String(to.x));
      line.setAttribute("y2", String(to.y + 16));
      line.setAttribute("class", "dag-edge");
      svg.appendChild(line);
    }
    for (const node of layout.nodes) {
      const group = this.doc.createElementNS(SVG_NS, "g");
      group.setAttribute("class", `dag-node dag-${node.kind}`);
      group.setAttribute("data-hash", node.hash);
      const rect = this.doc.createElementNS(SVG_NS, "rect");
      rect.setAttribute("x", String(node.x));
      rect.setAttribute("y", String(node.y));
      rect.setAttribute("width", "180");
      rect.setAttribute("height", "36");
      rect.setAttribute("rx", "6");
      const label = this.doc.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(node.x + 8));
      label.setAttribute("y", String(node.y + 15));
      label.textContent = `${node.kind}: ${node.name}`;
      const hash = this.doc.createElementNS(SVG_NS, "text");
      hash.setAttribute("x", String(node.x + 8));
      hash.setAttribute("y", String(node.y + 30));
      hash.setAttribute("class", "dag-hash");
      hash.textContent = `${shortHash(node.hash)} · valid`;
      group.append(rect, label, hash);
      svg.appendChild(group);
    }
    this.canvas.innerHTML = "";
    this.canvas.appendChild(svg);
  }

  private async fetchMissingBodies(entries: ConfigEntry[]): Promise<void> {
    const missing = entries.filter((e) => !this.bodies.has(e.hash));
    for (const entry of missing) {
      try {
        this.bodies.set(entry.hash, await this.store.api.getConfig(entry.hash));
      } catch {
        // unreachable service is surfaced by the global banner
      }
    }
  }
}
