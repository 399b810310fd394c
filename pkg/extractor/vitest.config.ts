import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // conformance test shells out to the metrics CLI per image
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
