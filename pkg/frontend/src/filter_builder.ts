// Filter tree model + DOM editor. serialize() emits exactly the service wire
// form; parse(serialize(t)) always returns a tree deep-equal to t.

import type { FilterNode } from "./types.js";

export type FieldKind = "keyword" | "keyword_list" | "integer" | "float" | "date";

export interface FieldSpec {
  name: string;
  kind: FieldKind;
  filterable?: boolean;
}

export function serialize(node: FilterNode): FilterNode {
  switch (node.op) {
    case "eq":
      return { op: "eq", field: node.field, value: node.value };
    case "in":
      return { op: "in", field: node.field, value: [...node.value] };
    case "range": {
      const out: FilterNode = { op: "range", field: node.field };
      if (node.min !== undefined) out.min = node.min;
      if (node.max !== undefined) out.max = node.max;
      return out;
    }
    case "and":
    case "or":
      return { op: node.op, children: node.children.map(serialize) };
    case "not":
      return { op: "not", children: [serialize(node.children[0])] };
  }
}

export function parse(wire: unknown): FilterNode {
  if (typeof wire !== "object" || wire === null) throw new Error("filter must be an object");
  const obj = wire as Record<string, unknown>;
  const op = obj.op;
  if (op === "eq") {
    return { op, field: requireField(obj), value: obj.value };
  }
  if (op === "in") {
    if (!Array.isArray(obj.value)) throw new Error("'in' needs a value list");
    return { op, field: requireField(obj), value: [...obj.value] };
  }
  if (op === "range") {
    const node: FilterNode = { op, field: requireField(obj) };
    if (obj.min !== undefined && obj.min !== null) node.min = obj.min as number | string;
    if (obj.max !== undefined && obj.max !== null) node.max = obj.max as number | string;
    return node;
  }
  if (op === "and" || op === "or") {
    if (!Array.isArray(obj.children) || obj.children.length === 0) {
      throw new Error(`'${op}' needs children`);
    }
    return { op, children: obj.children.map(parse) };
  }
  if (op === "not") {
    if (!Array.isArray(obj.children) || obj.children.length !== 1) {
      throw new Error("'not' needs exactly one child");
    }
    return { op, children: [parse(obj.children[0])] };
  }
  throw new Error(`unknown filter op ${String(op)}`);
}

function requireField(obj: Record<string, unknown>): string {
  if (typeof obj.field !== "string" || !obj.field) throw new Error("filter leaf needs a field");
  return obj.field;
}

function coerceValue(kind: FieldKind, raw: string): unknown {
  if (kind === "integer") return parseInt(raw, 10);
  if (kind === "float") return parseFloat(raw);
  return raw;
}

// --- DOM editor ---------------------------------------------------------------

export class FilterBuilder {
  readonly root: HTMLElement;
  private tree: FilterNode | null = null;

  constructor(
    private doc: Document,
    private fields: FieldSpec[],
    private onChange: () => void = () => {},
  ) {
    this.root = doc.createElement("div");
    this.root.className = "filter-builder";
    this.render();
  }

  value(): FilterNode | null {
    return this.tree === null ? null : serialize(this.tree);
  }

  load(wire: unknown | null): void {
    this.tree = wire === null ? null : parse(wire);
    this.render();
    this.onChange();
  }

  private filterableFields(): FieldSpec[] {
    return this.fields.filter((f) => f.filterable !== false);
  }

  private defaultLeaf(): FilterNode {
    const field = this.filterableFields()[0];
    return { op: "eq", field: field ? field.name : "", value: "" };
  }

  private render(): void {
    this.root.innerHTML = "";
    if (this.tree === null) {
      const add = this.doc.createElement("button");
      add.type = "button";
      add.className = "fb-add";
      add.textContent = "+ add filter";
      add.addEventListener("click", () => {
        this.tree = this.defaultLeaf();
        this.render();
        this.onChange();
      });
      this.root.appendChild(add);
      return;
    }
    this.root.appendChild(this.renderNode(this.tree, (next) => {
      this.tree = next;
      this.render();
      this.onChange();
    }, () => {
      this.tree = null;
      this.render();
      this.onChange();
    }));
  }

  private renderNode(
    node: FilterNode,
    replace: (next: FilterNode) => void,
    remove: () => void,
  ): HTMLElement {
    const el = this.doc.createElement("div");
    el.className = `fb-node fb-${node.op}`;

    const opSelect = this.doc.createElement("select");
    opSelect.className = "fb-op";
    for (const op of ["eq", "in", "range", "and", "or", "not"]) {
      const opt = this.doc.createElement("option");
      opt.value = op;
      opt.textContent = op;
      if (op === node.op) opt.selected = true;
      opSelect.appendChild(opt);
    }
    opSelect.addEventListener("change", () => {
      replace(this.convertNode(node, opSelect.value));
    });
    el.appendChild(opSelect);

    if (node.op === "eq" || node.op === "in" || node.op === "range") {
      el.appendChild(this.renderLeafControls(node, replace));
    } else {
      const children = this.doc.createElement("div");
      children.className = "fb-children";
      node.children.forEach((child, i) => {
        children.appendChild(
          this.renderNode(
            child,
            (next) => {
              const updated = node.children.slice() as FilterNode[];
              updated[i] = next;
              replace({ ...node, children: updated } as FilterNode);
            },
            () => {
              if (node.op === "not" || node.children.length === 1) {
                remove();
              } else {
                const updated = node.children.filter((_, j) => j !== i);
                replace({ ...node, children: updated } as FilterNode);
              }
            },
          ),
        );
      });
      el.appendChild(children);
      if (node.op !== "not") {
        const add = this.doc.createElement("button");
        add.type = "button";
        add.className = "fb-add-child";
        add.textContent = "+ condition";
        add.addEventListener("click", () => {
          replace({ ...node, children: [...node.children, this.defaultLeaf()] } as FilterNode);
        });
        el.appendChild(add);
      }
    }

    const del = this.doc.createElement("button");
    del.type = "button";
    del.className = "fb-remove";
    del.textContent = "×";
    del.title = "remove";
    del.addEventListener("click", remove);
    el.appendChild(del);
    return el;
  }

  private renderLeafControls(
    node: Extract<FilterNode, { op: "eq" | "in" | "range" }>,
    replace: (next: FilterNode) => void,
  ): HTMLElement {
    const wrap = this.doc.createElement("span");
    wrap.className = "fb-leaf";

    const fieldSelect = this.doc.createElement("select");
    fieldSelect.className = "fb-field";
    for (const f of this.filterableFields()) {
      const opt = this.doc.createElement("option");
      opt.value = f.name;
      opt.textContent = f.name;
      if (f.name === node.field) opt.selected = true;
      fieldSelect.appendChild(opt);
    }
    wrap.appendChild(fieldSelect);
    const kindOf = (name: string): FieldKind =>
      this.fields.find((f) => f.name === name)?.kind ?? "keyword";

    if (node.op === "range") {
      const min = this.doc.createElement("input");
      min.className = "fb-min";
      min.placeholder = "min";
      min.value = node.min === undefined ? "" : String(node.min);
      const max = this.doc.createElement("input");
      max.className = "fb-max";
      max.placeholder = "max";
      max.value = node.max === undefined ? "" : String(node.max);
      const push = () => {
        const kind = kindOf(fieldSelect.value);
        const next: FilterNode = { op: "range", field: fieldSelect.value };
        if (min.value !== "") next.min = coerceValue(kind, min.value) as number | string;
        if (max.value !== "") next.max = coerceValue(kind, max.value) as number | string;
        replace(next);
      };
      min.addEventListener("change", push);
      max.addEventListener("change", push);
      fieldSelect.addEventListener("change", push);
      wrap.appendChild(min);
      wrap.appendChild(max);
    } else {
      const value = this.doc.createElement("input");
      value.className = "fb-value";
      value.placeholder = node.op === "in" ? "v1, v2, ..." : "value";
      value.value =
        node.op === "in" ? node.value.map(String).join(", ") : node.value === "" ? "" : String(node.value);
      const push = () => {
        const kind = kindOf(fieldSelect.value);
        if (node.op === "in") {
          const values = value.value
            .split(",")
            .map((s) => s.trim())
            .filter((s) => s.length > 0)
            .map((s) => coerceValue(kind, s));
          replace({ op: "in", field: fieldSelect.value, value: values });
        } else {
          replace({ op: "eq", field: fieldSelect.value, value: coerceValue(kind, value.value) });
        }
      };
      value.addEventListener("change", push);
      fieldSelect.addEventListener("change", push);
      wrap.appendChild(value);
    }
    return wrap;
  }

  private convertNode(node: FilterNode, op: string): FilterNode {
    const fallback = this.defaultLeaf() as Extract<FilterNode, { op: "eq" }>;
    const leafField = "field" in node ? node.field : fallback.field;
    switch (op) {
      case "eq":
        return { op, field: leafField, value: "" };
      case "in":
        return { op, field: leafField, value: [] };
      case "range":
        return { op, field: leafField };
      case "and":
      case "or": {
        const seed = node.op === "and" || node.op === "or" || node.op === "not"
          ? node.children
          : [node];
        return { op, children: [...seed] };
      }
      case "not": {
        const child = node.op === "not" ? node.children[0] : node;
        return { op: "not", children: [child] };
      }
      default:
        throw new Error(`unknown op ${op}`);
    }
  }
}
