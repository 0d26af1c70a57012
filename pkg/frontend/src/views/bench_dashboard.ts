// Screen 4: retrieval-rate table/chart from a bench report file and the
// pre/post cost curves from a sweep CSV, with the crossover marked.

import { parseSweepCsv, sweepCrossover, type Store } from "../state.js";
import type { BenchReport, SweepRow } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export class BenchDashboard {
  readonly root: HTMLElement;
  private reportMount: HTMLElement;
  private sweepMount: HTMLElement;

  constructor(private doc: Document, private store: Store) {
    this.root = doc.createElement("section");
    this.root.id = "bench-dashboard";
    const heading = doc.createElement("h2");
    heading.textContent = "Bench Dashboard";
    this.root.appendChild(heading);

    const controls = doc.createElement("div");
    controls.className = "bench-controls";
    controls.appendChild(this.fileInput("bench-report-file", "report.json", (text) => {
      this.store.update({ benchReport: JSON.parse(text) as BenchReport });
    }));
    controls.appendChild(this.fileInput("bench-sweep-file", "sweep.csv", (text) => {
      this.store.update({ sweepRows: parseSweepCsv(text) });
    }));
    this.root.appendChild(controls);

    this.reportMount = doc.createElement("div");
    this.reportMount.className = "bench-report";
    this.sweepMount = doc.createElement("div");
    this.sweepMount.className = "bench-sweep";
    this.root.append(this.reportMount, this.sweepMount);

    store.subscribe((state) => {
      if (state.benchReport) this.renderReport(state.benchReport);
      if (state.sweepRows.length) this.renderSweep(state.sweepRows);
    });
  }

  private fileInput(id: string, label: string, onText: (text: string) => void): HTMLElement {
    const wrap = this.doc.createElement("label");
    wrap.textContent = label + " ";
    const input = this.doc.createElement("input");
    input.type = "file";
    input.id = id;
    input.addEventListener("change", () => {
      const file = input.files?.[0];
      if (!file) return;
      void file.text().then(onText);
    });
    wrap.appendChild(input);
    return wrap;
  }

  renderReport(report: BenchReport): void {
    this.reportMount.innerHTML = "";
    const summary = this.doc.createElement("p");
    summary.id = "bench-summary";
    summary.textContent =
      `app ${report.app_hash.slice(0, 12)} · ${report.n_queries} queries` +
      (report.skipped.length ? ` · ${report.skipped.length} skipped` : "");
    this.reportMount.appendChild(summary);

    const table = this.doc.createElement("table");
    table.className = "rates";
    const head = this.doc.createElement("tr");
    for (const col of ["k", "rate(k)"]) {
      const th = this.doc.createElement("th");
      th.textContent = col;
      head.appendChild(th);
    }
    table.appendChild(head);
    const ks = Object.keys(report.rates).map(Number).sort((a, b) => a - b);
    for (const k of ks) {
      const row = this.doc.createElement("tr");
      const kCell = this.doc.createElement("td");
      kCell.textContent = String(k);
      const rateCell = this.doc.createElement("td");
      rateCell.textContent = (report.rates[String(k)] ?? 0).toFixed(3);
      row.append(kCell, rateCell);
      table.appendChild(row);
    }
    this.reportMount.appendChild(table);
    this.reportMount.appendChild(this.rateChart(report, ks));
  }

  private rateChart(report: BenchReport, ks: number[]): SVGElement {
    const width = 420;
    const height = 180;
    const svg = this.doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("width", String(width));
    svg.setAttribute("height", String(height));
    svg.setAttribute("class", "rate-chart");
    const barWidth = Math.max(16, (width - 40) / Math.max(ks.length, 1) - 10);
    ks.forEach((k, i) => {
      const rate = report.rates[String(k)] ?? 0;
      const barHeight = rate * (height - 40);
      const rect = this.doc.createElementNS(SVG_NS, "rect");
      rect.setAttribute("x", String(30 + i * (barWidth + 10)));
      rect.setAttribute("y", String(height - 20 - barHeight));
      rect.setAttribute("width", String(barWidth));
      rect.setAttribute("height", String(barHeight));
      rect.setAttribute("class", "rate-bar");
      svg.appendChild(rect);
      const label = this.doc.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(30 + i * (barWidth + 10)));
      label.setAttribute("y", String(height - 6));
      label.textContent = `k=${k}`;
      svg.appendChild(label);
    });
    return svg;
  }

  renderSweep(rows: SweepRow[]): void {
    this.sweepMount.innerHTML = "";
    const crossover = sweepCrossover(rows);
    const note = this.doc.createElement("p");
    note.id = "sweep-crossover";
    note.textContent =
      crossover === null
        ? "no crossover within the sweep"
        : `crossover s* = ${crossover} (first selectivity where vector-first is cheaper)`;
    this.sweepMount.appendChild(note);
    this.sweepMount.appendChild(this.sweepChart(rows, crossover));
  }

  private sweepChart(rows: SweepRow[], crossover: number | null): SVGElement {
    const width = 460;
    const height = 220;
    const svg = this.doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("width", String(width));
    svg.setAttribute("height", String(height));
    svg.setAttribute("class", "sweep-chart");

    const sels = [...new Set(rows.map((r) => r.selectivity))].sort((a, b) => a - b);
    const maxCost = Math.max(...rows.map((r) => r.scored_vectors), 1);
    const x = (s: number) => 40 + (sels.indexOf(s) / Math.max(sels.length - 1, 1)) * (width - 60);
    const y = (c: number) => height - 30 - (c / maxCost) * (height - 60);

    for (const plan of ["PreFilter", "PostFilter"]) {
      const points = sels
        .map((s) => rows.find((r) => r.selectivity === s && r.plan === plan))
        .filter((r): r is SweepRow => r !== undefined)
        .map((r) => `${x(r.selectivity)},${y(r.scored_vectors)}`)
        .join(" ");
      const poly = this.doc.createElementNS(SVG_NS, "polyline");
      poly.setAttribute("points", points);
      poly.setAttribute("class", `sweep-line sweep-${plan.toLowerCase()}`);
      poly.setAttribute("fill", "none");
      svg.appendChild(poly);
    }
    if (crossover !== null) {
      const marker = this.doc.createElementNS(SVG_NS, "line");
      marker.setAttribute("x1", String(x(crossover)));
      marker.setAttribute("x2", String(x(crossover)));
      marker.setAttribute("y1", "10");
      marker.setAttribute("y2", String(height - 30));
      marker.setAttribute("class", "crossover-marker");
      svg.appendChild(marker);
    }
    sels.forEach((s) => {
      const label = this.doc.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(x(s) - 12));
      label.setAttribute("y", String(height - 12));
      label.textContent = String(s);
      svg.appendChild(label);
    });
    return svg;
  }
}
