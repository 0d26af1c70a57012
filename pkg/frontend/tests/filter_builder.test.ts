import { describe, expect, it } from "vitest";

import { FilterBuilder, parse, serialize, type FieldSpec } from "../src/filter_builder.js";
import type { FilterNode } from "../src/types.js";

const FIELDS: FieldSpec[] = [
  { name: "tag", kind: "keyword" },
  { name: "year", kind: "integer" },
  { name: "rating", kind: "float" },
  { name: "published", kind: "date" },
  { name: "labels", kind: "keyword_list" },
];

function randomTree(rand: () => number, depth = 0): FilterNode {
  const roll = rand();
  if (depth >= 3 || roll < 0.55) {
    const leaf = Math.floor(rand() * 3);
    if (leaf === 0) return { op: "eq", field: "tag", value: `t${Math.floor(rand() * 5)}` };
    if (leaf === 1) return { op: "in", field: "labels", value: ["la", "lb"].slice(0, 1 + Math.floor(rand() * 2)) };
    const node: FilterNode = { op: "range", field: "year" };
    if (rand() < 0.7) node.min = 1990 + Math.floor(rand() * 30);
    if (rand() < 0.7) node.max = 2020 + Math.floor(rand() * 10);
    return node;
  }
  if (roll < 0.8) {
    const n = 1 + Math.floor(rand() * 3);
    const children = Array.from({ length: n }, () => randomTree(rand, depth + 1));
    return rand() < 0.5 ? { op: "and", children } : { op: "or", children };
  }
  return { op: "not", children: [randomTree(rand, depth + 1)] };
}

function mulberry32(seed: number): () => number {
  let a = seed;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("wire-form round trip", () => {
  it("parse(serialize(t)) deep-equals t for random trees", () => {
    const rand = mulberry32(99);
    for (let i = 0; i < 500; i++) {
      const tree = randomTree(rand);
      const wire = serialize(tree);
      expect(parse(JSON.parse(JSON.stringify(wire)))).toEqual(tree);
    }
  });

  it("range omits absent bounds in the wire form", () => {
    const wire = serialize({ op: "range", field: "year", min: 2000 });
    expect(wire).toEqual({ op: "range", field: "year", min: 2000 });
    expect("max" in wire).toBe(false);
  });

  it("rejects malformed wire objects", () => {
    expect(() => parse({ op: "between", field: "year" })).toThrow();
    expect(() => parse({ op: "and", children: [] })).toThrow();
    expect(() => parse({ op: "not", children: [] })).toThrow();
    expect(() => parse({ op: "eq" })).toThrow();
  });
});

describe("DOM editor", () => {
  it("builds an eq leaf through the controls and serializes exactly", () => {
    const builder = new FilterBuilder(document, FIELDS);
    (builder.root.querySelector(".fb-add") as HTMLButtonElement).click();
    const field = builder.root.querySelector(".fb-field") as HTMLSelectElement;
    field.value = "year";
    field.dispatchEvent(new Event("change"));
    const value = builder.root.querySelector(".fb-value") as HTMLInputElement;
    value.value = "2021";
    value.dispatchEvent(new Event("change"));
    expect(builder.value()).toEqual({ op: "eq", field: "year", value: 2021 });
  });

  it("wraps a leaf into a boolean group when the op changes", () => {
    const builder = new FilterBuilder(document, FIELDS);
    (builder.root.querySelector(".fb-add") as HTMLButtonElement).click();
    const op = builder.root.querySelector(".fb-op") as HTMLSelectElement;
    op.value = "and";
    op.dispatchEvent(new Event("change"));
    const wire = builder.value();
    expect(wire).toMatchObject({ op: "and" });
    expect((wire as { children: unknown[] }).children).toHaveLength(1);
  });

  it("loads an existing wire form and round-trips it", () => {
    const builder = new FilterBuilder(document, FIELDS);
    const wire = {
      op: "and",
      children: [
        { op: "eq", field: "tag", value: "t0" },
        { op: "range", field: "year", min: 2000, max: 2010 },
      ],
    };
    builder.load(wire);
    expect(builder.value()).toEqual(wire);
  });

  it("only offers filterable fields", () => {
    const withHidden: FieldSpec[] = [...FIELDS, { name: "internal", kind: "keyword", filterable: false }];
    const builder = new FilterBuilder(document, withHidden);
    (builder.root.querySelector(".fb-add") as HTMLButtonElement).click();
    const options = [...builder.root.querySelectorAll(".fb-field option")].map((o) => (o as HTMLOptionElement).value);
    expect(options).not.toContain("internal");
    expect(options).toContain("tag");
  });
});
