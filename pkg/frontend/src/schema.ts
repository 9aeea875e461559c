/**
 * Typed view of the UI schema JSON served by the adaptation service.
 *
 * The wire format is versioned; this module refuses anything other than
 * version 1 so a stale console never misrenders a newer schema.
 */

export const SUPPORTED_SCHEMA_VERSION = 1;

export type ComponentKind =
  | "Container"
  | "AlertBanner"
  | "StepBlock"
  | "PictogramLabel"
  | "Button"
  | "FeedbackScale";

export type ThemeName = "Default" | "HighContrast";

export type Modality = "Text" | "Audio" | "Pictogram" | "Video";

export interface ColorPair {
  foreground: string;
  background: string;
}

export interface SchemaNode {
  componentId: string;
  kind: ComponentKind;
  content: string;
  colors: ColorPair;
  requirementRefs: string[];
  targetSize: [number, number];
  stepNumber?: number;
  pictogramId?: string;
  alt?: string;
  children: SchemaNode[];
}

export interface StateMachineDoc {
  states: string[];
  transitions: [string, string][];
}

export interface UISchema {
  schemaVersion: number;
  theme: ThemeName;
  modalities: Modality[];
  root: SchemaNode;
  interactionStates: StateMachineDoc;
}

export class SchemaVersionMismatchError extends Error {
  constructor(got: unknown) {
    super(
      `schema version ${String(got)} is not supported ` +
        `(this console understands version ${SUPPORTED_SCHEMA_VERSION})`,
    );
    this.name = "SchemaVersionMismatchError";
  }
}

export class SchemaShapeError extends Error {
  constructor(detail: string) {
    super(`schema document is malformed: ${detail}`);
    this.name = "SchemaShapeError";
  }
}

const KINDS: ReadonlySet<string> = new Set([
  "Container",
  "AlertBanner",
  "StepBlock",
  "PictogramLabel",
  "Button",
  "FeedbackScale",
]);

function asNode(doc: unknown, path: string): SchemaNode {
  if (typeof doc !== "object" || doc === null) {
    throw new SchemaShapeError(`${path} is not an object`);
  }
  const d = doc as Record<string, unknown>;
  if (typeof d.componentId !== "string" || !d.componentId) {
    throw new SchemaShapeError(`${path}.componentId missing`);
  }
  if (typeof d.kind !== "string" || !KINDS.has(d.kind)) {
    throw new SchemaShapeError(`${path}.kind is ${String(d.kind)}`);
  }
  const colors = d.colors as Record<string, unknown> | undefined;
  if (
    !colors ||
    typeof colors.foreground !== "string" ||
    typeof colors.background !== "string"
  ) {
    throw new SchemaShapeError(`${path}.colors missing`);
  }
  const size = d.targetSize;
  if (
    !Array.isArray(size) ||
    size.length !== 2 ||
    typeof size[0] !== "number" ||
    typeof size[1] !== "number"
  ) {
    throw new SchemaShapeError(`${path}.targetSize missing`);
  }
  const children = Array.isArray(d.children) ? d.children : [];
  return {
    componentId: d.componentId,
    kind: d.kind as ComponentKind,
    content: typeof d.content === "string" ? d.content : "",
    colors: { foreground: colors.foreground, background: colors.background },
    requirementRefs: Array.isArray(d.requirementRefs)
      ? d.requirementRefs.map(String)
      : [],
    targetSize: [size[0], size[1]],
    stepNumber: typeof d.stepNumber === "number" ? d.stepNumber : undefined,
    pictogramId:
      typeof d.pictogramId === "string" ? d.pictogramId : undefined,
    alt: typeof d.alt === "string" ? d.alt : undefined,
    children: children.map((c, i) => asNode(c, `${path}.children[${i}]`)),
  };
}

/** Parse and validate a schema document (string or already-parsed JSON). */
export function parseSchema(doc: unknown): UISchema {
  const parsed: unknown = typeof doc === "string" ? JSON.parse(doc) : doc;
  if (typeof parsed !== "object" || parsed === null) {
    throw new SchemaShapeError("top level is not an object");
  }
  const d = parsed as Record<string, unknown>;
  if (d.schemaVersion !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaVersionMismatchError(d.schemaVersion);
  }
  if (d.theme !== "Default" && d.theme !== "HighContrast") {
    throw new SchemaShapeError(`theme is ${String(d.theme)}`);
  }
  const states = d.interactionStates as Record<string, unknown> | undefined;
  if (!states || !Array.isArray(states.states) || !Array.isArray(states.transitions)) {
    throw new SchemaShapeError("interactionStates missing");
  }
  return {
    schemaVersion: SUPPORTED_SCHEMA_VERSION,
    theme: d.theme,
    modalities: Array.isArray(d.modalities)
      ? (d.modalities.map(String) as Modality[])
      : [],
    root: asNode(d.root, "root"),
    interactionStates: {
      states: states.states.map(String),
      transitions: (states.transitions as unknown[]).map((t) => {
        if (!Array.isArray(t) || t.length !== 2) {
          throw new SchemaShapeError("transition is not a pair");
        }
        return [String(t[0]), String(t[1])] as [string, string];
      }),
    },
  };
}

/** Depth-first, document order. */
export function* walk(node: SchemaNode): Generator<SchemaNode> {
  yield node;
  for (const child of node.children) {
    yield* walk(child);
  }
}

export function nodesOfKind(schema: UISchema, kind: ComponentKind): SchemaNode[] {
  return [...walk(schema.root)].filter((n) => n.kind === kind);
}

/** Edge lookup over the schema's declared interaction state machine. */
export class StateMachine {
  private readonly edges: Set<string>;
  readonly states: string[];

  constructor(doc: StateMachineDoc) {
    this.states = [...doc.states];
    this.edges = new Set(doc.transitions.map(([a, b]) => `${a}->${b}`));
  }

  allows(from: string, to: string): boolean {
    return this.edges.has(`${from}->${to}`);
  }

  targetsFrom(from: string): string[] {
    return this.states.filter((s) => this.allows(from, s));
  }
}
