import { StateMachine, UISchema } from "./schema.js";

export type ConsoleMode = "Reviewer" | "EndUser";

export type NavigationEvent = [string, string, number];

export class IllegalNavigationError extends Error {
  constructor(from: string, to: string) {
    super(`no transition from ${from} to ${to} in the loaded schema`);
    this.name = "IllegalNavigationError";
  }
}

/**
 * One tab's interaction with one loaded schema. Navigation is only ever
 * allowed along the schema's own state machine edges, so the events we
 * later send with feedback are valid by construction.
 */
export class ConsoleSession {
  readonly mode: ConsoleMode;
  readonly activeJobId: string;
  private readonly machine: StateMachine;
  private state: string;
  private readonly events: NavigationEvent[] = [];
  private readonly now: () => number;

  constructor(
    mode: ConsoleMode,
    jobId: string,
    schema: UISchema,
    now: () => number = () => Date.now() / 1000,
  ) {
    this.mode = mode;
    this.activeJobId = jobId;
    this.machine = new StateMachine(schema.interactionStates);
    const first = schema.interactionStates.states[0];
    this.state = first ?? "Reading";
    this.now = now;
  }

  get currentState(): string {
    return this.state;
  }

  canNavigate(to: string): boolean {
    return this.machine.allows(this.state, to);
  }

  allowedTargets(): string[] {
    return this.machine.targetsFrom(this.state);
  }

  navigate(to: string): void {
    if (!this.canNavigate(to)) {
      throw new IllegalNavigationError(this.state, to);
    }
    this.events.push([this.state, to, this.now()]);
    this.state = to;
  }

  navigationEvents(): NavigationEvent[] {
    return [...this.events];
  }
}
