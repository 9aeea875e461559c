import { ApiClient, ApiError } from "./api.js";
import { FeedbackStatus, submitFeedback } from "./feedback.js";
import { renderSchema } from "./renderer.js";
import { ReviewPanel } from "./review.js";
import { parseSchema, UISchema } from "./schema.js";
import { ConsoleSession } from "./session.js";

// Sample request used by the "Load demo job" button. Mirrors the service's
// bundled fixture so a fresh install shows something meaningful.
const DEMO_PROFILE = {
  profileId: "demo-console",
  needs: ["CognitiveDisability", "HearingImpairment", "MotorCognitiveLoad"],
};

const DEMO_INPUT = {
  inputId: "demo-rx",
  text:
    "You should take Ibuprofen 400mg every 8 hours unless you experience " +
    "gastric discomfort.",
  protectedTerms: ["Ibuprofen"],
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function bootConsole(doc: Document, mount: HTMLElement): void {
  const shell = el(doc, "div", "af-shell");

  const form = el(doc, "form", "af-connect");
  const urlInput = el(doc, "input") as HTMLInputElement;
  urlInput.value = "http://127.0.0.1:8000";
  urlInput.name = "baseUrl";
  const tokenInput = el(doc, "input") as HTMLInputElement;
  tokenInput.name = "token";
  tokenInput.placeholder = "API token (leave empty if unset)";
  const demoButton = el(doc, "button", "", "Load demo job") as HTMLButtonElement;
  demoButton.type = "submit";
  const queueButton = el(doc, "button", "", "Review queue") as HTMLButtonElement;
  queueButton.type = "button";
  form.appendChild(urlInput);
  form.appendChild(tokenInput);
  form.appendChild(demoButton);
  form.appendChild(queueButton);
  shell.appendChild(form);

  const viewArea = el(doc, "div", "af-view");
  const statusLine = el(doc, "p", "af-app-status");
  shell.appendChild(statusLine);
  shell.appendChild(viewArea);
  mount.appendChild(shell);

  const makeClient = () =>
    new ApiClient(urlInput.value.replace(/\/$/, ""), tokenInput.value || undefined);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const client = makeClient();
    statusLine.textContent = "Submitting...";
    void (async () => {
      try {
        const jobId = await client.submitAdaptation(DEMO_PROFILE, DEMO_INPUT);
        const job = await client.waitForJob(jobId);
        if (!job.schema) {
          statusLine.textContent = `Job ${jobId} is ${job.status}; nothing to render yet.`;
          return;
        }
        const schema: UISchema = parseSchema(job.schema);
        const session = new ConsoleSession("EndUser", jobId, schema);
        const feedbackStatus = new FeedbackStatus(doc);
        const rendered = renderSchema(schema, {
          document: doc,
          pictogramUrl: (id) => client.pictogramUrl(id),
          session,
          onFeedback: (rating, componentId) => {
            void submitFeedback(client, session, componentId, rating)
              .then((fid) => feedbackStatus.showSubmitted(fid))
              .catch((err: unknown) =>
                feedbackStatus.showError(
                  err instanceof Error ? err.message : String(err),
                ),
              );
          },
        });
        viewArea.textContent = "";
        viewArea.appendChild(rendered);
        viewArea.appendChild(feedbackStatus.element);
        statusLine.textContent = `Job ${jobId}: ${job.status}, showing state ${session.currentState}.`;
      } catch (err) {
        statusLine.textContent =
          err instanceof ApiError
            ? `Service error ${err.status} (${err.kind}): ${err.message}`
            : `Could not reach the service: ${String(err)}`;
      }
    })();
  });

  queueButton.addEventListener("click", () => {
    const panel = new ReviewPanel({ document: doc, client: makeClient() });
    viewArea.textContent = "";
    viewArea.appendChild(panel.element);
    statusLine.textContent = "Review mode.";
    void panel.refresh();
  });
}

// Browser entry point; tests import bootConsole directly instead.
declare const window: (Window & typeof globalThis) | undefined;
if (typeof window !== "undefined" && typeof document !== "undefined") {
  const mount = document.getElementById("app");
  if (mount) bootConsole(document, mount);
}
