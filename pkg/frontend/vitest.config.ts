import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    globalSetup: ["tests/fixture_service.ts"],
    testTimeout: 120_000,
    hookTimeout: 180_000,
  },
});
