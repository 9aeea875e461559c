import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  nodesOfKind,
  parseSchema,
  SchemaShapeError,
  SchemaVersionMismatchError,
  StateMachine,
  walk,
} from "../src/schema.js";

const GOLDEN_PATH = new URL(
  "../../tests/golden/fixture_schema.json",
  import.meta.url,
);

function goldenDoc(): Record<string, unknown> {
  return JSON.parse(readFileSync(GOLDEN_PATH, "utf8")) as Record<
    string,
    unknown
  >;
}

describe("parseSchema on the frozen fixture", () => {
  it("accepts the golden document as served by the backend", () => {
    const schema = parseSchema(readFileSync(GOLDEN_PATH, "utf8"));
    expect(schema.schemaVersion).toBe(1);
    expect(schema.theme).toBe("HighContrast");
    expect(schema.modalities).toEqual(["Pictogram", "Text"]);
    expect(schema.root.kind).toBe("Container");
  });

  it("exposes the three steps in document order with their numbers", () => {
    const schema = parseSchema(goldenDoc());
    const steps = nodesOfKind(schema, "StepBlock");
    expect(steps.map((s) => s.stepNumber)).toEqual([1, 2, 3]);
    expect(steps[0]?.content).toBe("Take Ibuprofen 400mg.");
    // walk() is depth-first document order, so the alert precedes step 1
    const kinds = [...walk(schema.root)].map((n) => n.kind);
    expect(kinds.indexOf("AlertBanner")).toBeLessThan(
      kinds.indexOf("StepBlock"),
    );
  });

  it("keeps pictogram alt text addressable", () => {
    const schema = parseSchema(goldenDoc());
    const pictos = nodesOfKind(schema, "PictogramLabel");
    expect(pictos.length).toBeGreaterThanOrEqual(4);
    for (const p of pictos) {
      expect(p.alt).toBeTruthy();
      expect(p.content).toBeTruthy();
    }
  });

  it("rejects any other schema version before looking at the body", () => {
    const doc = goldenDoc();
    doc.schemaVersion = 2;
    // even a well-formed body must not slip through on version 2
    expect(() => parseSchema(doc)).toThrow(SchemaVersionMismatchError);
  });

  it("rejects structural damage with a SchemaShapeError", () => {
    const broken = goldenDoc();
    delete (broken.root as Record<string, unknown>).colors;
    expect(() => parseSchema(broken)).toThrow(SchemaShapeError);

    const badTheme = goldenDoc();
    badTheme.theme = "Sepia";
    expect(() => parseSchema(badTheme)).toThrow(SchemaShapeError);

    const badTransition = goldenDoc();
    (badTransition.interactionStates as Record<string, unknown>).transitions =
      [["Reading"]];
    expect(() => parseSchema(badTransition)).toThrow(SchemaShapeError);
  });
});

describe("StateMachine edge lookup", () => {
  const machine = () =>
    new StateMachine(parseSchema(goldenDoc()).interactionStates);

  it("allows exactly the declared edges", () => {
    const m = machine();
    expect(m.allows("Reading", "NavigatingSteps")).toBe(true);
    expect(m.allows("NavigatingSteps", "NavigatingSteps")).toBe(true);
    expect(m.allows("NavigatingSteps", "RequestingHelp")).toBe(true);
    expect(m.allows("RequestingHelp", "NavigatingSteps")).toBe(true);
    expect(m.allows("NavigatingSteps", "CompletingTask")).toBe(true);
  });

  it("denies the finish shortcut from the reading state", () => {
    expect(machine().allows("Reading", "CompletingTask")).toBe(false);
  });

  it("lists reachable targets per state", () => {
    const m = machine();
    expect(m.targetsFrom("Reading")).toEqual(["NavigatingSteps"]);
    expect(new Set(m.targetsFrom("NavigatingSteps"))).toEqual(
      new Set(["NavigatingSteps", "RequestingHelp", "CompletingTask"]),
    );
  });
});
