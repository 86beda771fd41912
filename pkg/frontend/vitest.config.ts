import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the integration test boots the Python service and waits for its
    // first render to warm up, which dominates the suite runtime
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
