/** Thin fetch wrapper over the adaptation service's HTTP API. */

export interface JobPayload {
  jobId: string;
  status: string;
  schema: unknown | null;
  humanApproved: boolean;
  error: string | null;
  attempts: number;
  gateReports: GateReportDoc[];
  latestGateReport: GateReportDoc | null;
  candidate?: { plainText: string; steps: string[] };
}

export interface GateReportDoc {
  perGate: {
    gate: string;
    passed: boolean;
    metricValue: number;
    threshold: number;
    details: string[];
  }[];
  overallPassed: boolean;
  attempt: number;
}

export interface ComplianceEntryDoc {
  reqId: string;
  title: string;
  status: string;
  evidence: unknown[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly token?: string,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["content-type"] = "application/json";
    if (this.token) h["authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = { detail: text };
    }
    if (!response.ok) {
      const doc = (body ?? {}) as Record<string, unknown>;
      throw new ApiError(
        response.status,
        String(doc.error ?? "Error"),
        String(doc.detail ?? response.statusText),
      );
    }
    return body;
  }

  async health(): Promise<{ status: string; backend: string; rules: number }> {
    return (await this.request("/health")) as {
      status: string;
      backend: string;
      rules: number;
    };
  }

  async submitAdaptation(
    profile: Record<string, unknown>,
    input: Record<string, unknown>,
  ): Promise<string> {
    const doc = (await this.request("/adaptations", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ profile, input }),
    })) as { jobId: string };
    return doc.jobId;
  }

  async getJob(jobId: string): Promise<JobPayload> {
    return (await this.request(`/adaptations/${jobId}`, {
      headers: this.headers(false),
    })) as JobPayload;
  }

  /** Poll until the job leaves Pending/Running or the deadline passes. */
  async waitForJob(jobId: string, timeoutMs = 15000): Promise<JobPayload> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status !== "Pending" && job.status !== "Running") return job;
      if (Date.now() > deadline) {
        throw new ApiError(504, "Timeout", `job ${jobId} never settled`);
      }
      await new Promise((r) => setTimeout(r, 150));
    }
  }

  async reviewQueue(): Promise<JobPayload[]> {
    const doc = (await this.request("/review-queue", {
      headers: this.headers(false),
    })) as { jobs: JobPayload[] };
    return doc.jobs;
  }

  async postReview(
    jobId: string,
    action: "Approve" | "Reject" | "Edit",
    options: { editedText?: string; reviewer?: string; rationale?: string } = {},
  ): Promise<JobPayload> {
    return (await this.request(`/adaptations/${jobId}/review`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ action, ...options }),
    })) as JobPayload;
  }

  async postFeedback(entry: {
    jobId: string;
    componentId: string;
    comprehensionRating: number;
    navigationEvents?: [string, string, number][];
    comment?: string;
  }): Promise<string> {
    const doc = (await this.request("/feedback", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(entry),
    })) as { feedbackId: string };
    return doc.feedbackId;
  }

  async complianceReport(
    format: "full" | "summary" = "summary",
  ): Promise<ComplianceEntryDoc[]> {
    const doc = (await this.request(`/compliance-report?format=${format}`, {
      headers: this.headers(false),
    })) as { complianceReport: { requirements: ComplianceEntryDoc[] } };
    return doc.complianceReport.requirements;
  }

  async explanation(jobId: string): Promise<Record<string, unknown>[]> {
    const doc = (await this.request(`/adaptations/${jobId}/explanation`, {
      headers: this.headers(false),
    })) as { activeRules: Record<string, unknown>[] };
    return doc.activeRules;
  }

  pictogramUrl(pictogramId: string): string {
    return `${this.baseUrl}/pictograms/${encodeURIComponent(pictogramId)}`;
  }
}
