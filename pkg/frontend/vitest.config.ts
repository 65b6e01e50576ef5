import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // interop tests spawn the Python CLI several times
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
