import { ApiClient } from "./api.js";
import { ConsoleSession } from "./session.js";

export class InvalidRatingError extends Error {
  constructor(rating: number) {
    super(`comprehension rating must be an integer from 1 to 5, got ${rating}`);
    this.name = "InvalidRatingError";
  }
}

export function validRating(rating: number): boolean {
  return Number.isInteger(rating) && rating >= 1 && rating <= 5;
}

/**
 * Post one comprehension rating for a rendered component, carrying the
 * session's accumulated navigation trail. Ratings outside 1..5 are
 * rejected here, before any request goes out.
 */
export async function submitFeedback(
  client: ApiClient,
  session: ConsoleSession,
  componentId: string,
  rating: number,
  comment = "",
): Promise<string> {
  if (!validRating(rating)) {
    throw new InvalidRatingError(rating);
  }
  return client.postFeedback({
    jobId: session.activeJobId,
    componentId,
    comprehensionRating: rating,
    navigationEvents: session.navigationEvents(),
    comment,
  });
}

/** Confirmation strip under the rendered view. */
export class FeedbackStatus {
  readonly element: HTMLElement;

  constructor(doc: Document) {
    this.element = doc.createElement("p");
    this.element.className = "af-feedback-status";
    this.element.setAttribute("aria-live", "polite");
  }

  showSubmitted(feedbackId: string): void {
    this.element.dataset.state = "ok";
    this.element.textContent = `Thanks, feedback recorded as ${feedbackId}.`;
  }

  showError(message: string): void {
    this.element.dataset.state = "error";
    this.element.textContent = `Feedback not sent: ${message}`;
  }
}
