import { ApiClient, ApiError, GateReportDoc, JobPayload } from "./api.js";

export interface ReviewPanelOptions {
  document: Document;
  client: ApiClient;
  /** Called after every successful queue refresh. */
  onChange?: (jobs: JobPayload[]) => void;
}

/** One human-readable line per failing gate in the report. */
export function failingGateLines(report: GateReportDoc | null): string[] {
  if (!report) return [];
  const lines: string[] = [];
  for (const g of report.perGate) {
    if (g.passed) continue;
    const head = `${g.gate}: ${g.metricValue} (needs ${g.threshold})`;
    lines.push(g.details.length ? `${head} - ${g.details.join("; ")}` : head);
  }
  return lines;
}

function describeError(err: unknown): string {
  return err instanceof ApiError
    ? `Service error ${err.status} (${err.kind}): ${err.message}`
    : `Request failed: ${String(err)}`;
}

export class ReviewPanel {
  readonly element: HTMLElement;
  private readonly doc: Document;
  private readonly client: ApiClient;
  private readonly onChange?: (jobs: JobPayload[]) => void;
  private lastOutcome = "";

  constructor(opts: ReviewPanelOptions) {
    this.doc = opts.document;
    this.client = opts.client;
    this.onChange = opts.onChange;
    this.element = this.doc.createElement("section");
    this.element.className = "af-review";
  }

  async refresh(): Promise<void> {
    let jobs: JobPayload[];
    try {
      jobs = await this.client.reviewQueue();
    } catch (err) {
      this.showError(describeError(err), () => void this.refresh());
      return;
    }
    this.element.textContent = "";
    const heading = this.doc.createElement("h2");
    heading.textContent = `Review queue (${jobs.length})`;
    this.element.appendChild(heading);

    if (this.lastOutcome) {
      const line = this.doc.createElement("p");
      line.className = "af-review-outcome";
      line.textContent = this.lastOutcome;
      this.element.appendChild(line);
    }

    if (jobs.length === 0) {
      const empty = this.doc.createElement("p");
      empty.className = "af-review-empty";
      empty.textContent = "Nothing waiting for review.";
      this.element.appendChild(empty);
    }
    for (const job of jobs) {
      this.element.appendChild(this.card(job));
    }
    this.onChange?.(jobs);
  }

  /**
   * Send one review decision and re-pull the queue. Returns the outcome
   * line shown to the reviewer, e.g. "Now Approved." or, after an edit
   * that still fails a gate, the failing gate summary.
   */
  async applyReview(
    jobId: string,
    action: "Approve" | "Reject" | "Edit",
    editedText?: string,
  ): Promise<string> {
    try {
      const updated = await this.client.postReview(jobId, action, {
        editedText,
      });
      const failures = failingGateLines(updated.latestGateReport);
      this.lastOutcome =
        action === "Edit" && failures.length
          ? `${jobId} still ${updated.status}. ${failures.join(" / ")}`
          : `${jobId} now ${updated.status}.`;
      await this.refresh();
    } catch (err) {
      // keep the queue on screen so the reviewer can simply try again
      this.lastOutcome = describeError(err);
      await this.refresh();
    }
    return this.lastOutcome;
  }

  private showError(message: string, retry: () => void): void {
    this.element.textContent = "";
    const box = this.doc.createElement("div");
    box.className = "af-error";
    box.setAttribute("role", "alert");
    const msg = this.doc.createElement("p");
    msg.textContent = message;
    box.appendChild(msg);
    const button = this.doc.createElement("button");
    button.type = "button";
    button.className = "af-retry";
    button.textContent = "Retry";
    button.addEventListener("click", retry);
    box.appendChild(button);
    this.element.appendChild(box);
  }

  /** Lazy "why did these rules fire" loader, one fetch per click. */
  private explainSection(jobId: string): HTMLElement {
    const doc = this.doc;
    const wrap = doc.createElement("div");
    wrap.className = "af-explain";
    const button = doc.createElement("button");
    button.type = "button";
    button.dataset.action = "Explain";
    button.textContent = "Why these adaptations?";
    const list = doc.createElement("ul");
    list.className = "af-explain-rules";
    button.addEventListener("click", () => {
      void this.client
        .explanation(jobId)
        .then((rules) => {
          list.textContent = "";
          for (const rule of rules) {
            const item = doc.createElement("li");
            const dars = Array.isArray(rule.darIds)
              ? (rule.darIds as string[]).join(", ")
              : "";
            item.textContent = `${String(rule.ruleId)} via ${dars}`;
            list.appendChild(item);
          }
        })
        .catch((err: unknown) => {
          list.textContent = "";
          const item = doc.createElement("li");
          item.textContent = describeError(err);
          list.appendChild(item);
        });
    });
    wrap.appendChild(button);
    wrap.appendChild(list);
    return wrap;
  }

  private card(job: JobPayload): HTMLElement {
    const doc = this.doc;
    const card = doc.createElement("article");
    card.className = "af-review-card";
    card.dataset.jobId = job.jobId;

    const header = doc.createElement("header");
    const title = doc.createElement("strong");
    title.textContent = job.jobId;
    const badge = doc.createElement("span");
    badge.className = `af-status af-status-${job.status.toLowerCase()}`;
    badge.textContent = job.status;
    header.appendChild(title);
    header.appendChild(badge);
    card.appendChild(header);

    if (job.candidate) {
      const quote = doc.createElement("blockquote");
      quote.className = "af-candidate";
      quote.textContent = job.candidate.plainText;
      card.appendChild(quote);
    }

    const failures = failingGateLines(job.latestGateReport);
    if (failures.length) {
      const list = doc.createElement("ul");
      list.className = "af-gate-failures";
      for (const line of failures) {
        const item = doc.createElement("li");
        item.textContent = line;
        list.appendChild(item);
      }
      card.appendChild(list);
    }

    card.appendChild(this.explainSection(job.jobId));

    const actions = doc.createElement("div");
    actions.className = "af-review-actions";
    for (const action of ["Approve", "Reject"] as const) {
      const button = doc.createElement("button");
      button.type = "button";
      button.dataset.action = action;
      button.textContent = action;
      button.addEventListener("click", () => {
        void this.applyReview(job.jobId, action);
      });
      actions.appendChild(button);
    }

    const editArea = doc.createElement("textarea");
    editArea.className = "af-edit-text";
    editArea.value = job.candidate?.plainText ?? "";
    const editButton = doc.createElement("button");
    editButton.type = "button";
    editButton.dataset.action = "Edit";
    editButton.textContent = "Submit edit";
    editButton.addEventListener("click", () => {
      void this.applyReview(job.jobId, "Edit", editArea.value);
    });
    actions.appendChild(editArea);
    actions.appendChild(editButton);

    card.appendChild(actions);
    return card;
  }
}
