import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  InvalidRatingError,
  submitFeedback,
  validRating,
} from "../src/feedback.js";
import { parseSchema } from "../src/schema.js";
import { ConsoleSession } from "../src/session.js";

const GOLDEN = parseSchema(
  readFileSync(
    new URL("../../tests/golden/fixture_schema.json", import.meta.url),
    "utf8",
  ),
);

class CaptureClient {
  posted: Record<string, unknown>[] = [];

  async postFeedback(entry: Record<string, unknown>): Promise<string> {
    this.posted.push(entry);
    return "F-0042";
  }

  asClient(): ApiClient {
    return this as unknown as ApiClient;
  }
}

describe("validRating", () => {
  it("accepts exactly the integers 1 through 5", () => {
    expect([1, 2, 3, 4, 5].every(validRating)).toBe(true);
    for (const bad of [0, 6, -1, 2.5, NaN, Infinity]) {
      expect(validRating(bad)).toBe(false);
    }
  });
});

describe("submitFeedback", () => {
  it("posts the rating with the session's navigation trail", async () => {
    const client = new CaptureClient();
    const session = new ConsoleSession("EndUser", "J-77", GOLDEN, () => 9);
    session.navigate("NavigatingSteps");
    session.navigate("RequestingHelp");

    const id = await submitFeedback(
      client.asClient(),
      session,
      "c-feedback",
      4,
      "clear enough",
    );
    expect(id).toBe("F-0042");
    expect(client.posted).toEqual([
      {
        jobId: "J-77",
        componentId: "c-feedback",
        comprehensionRating: 4,
        navigationEvents: [
          ["Reading", "NavigatingSteps", 9],
          ["NavigatingSteps", "RequestingHelp", 9],
        ],
        comment: "clear enough",
      },
    ]);
  });

  it("blocks out-of-range ratings before any request is made", async () => {
    const client = new CaptureClient();
    const session = new ConsoleSession("EndUser", "J-77", GOLDEN);
    for (const bad of [0, 6, 3.5]) {
      await expect(
        submitFeedback(client.asClient(), session, "c-feedback", bad),
      ).rejects.toThrow(InvalidRatingError);
    }
    expect(client.posted).toEqual([]);
  });
});
