import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // bindings shell out to the Python CLI, so allow slow starts
    testTimeout: 60_000,
  },
});
