import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the live-service suite boots a real HTTP server in beforeAll
    hookTimeout: 30000,
    testTimeout: 20000,
  },
});
