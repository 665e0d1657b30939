import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // training tests run a real optimizer loop on the pure-JS backend
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
