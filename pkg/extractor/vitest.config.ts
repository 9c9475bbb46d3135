import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // forward passes through the larger trunks take a while on one core
    testTimeout: 240_000,
    hookTimeout: 240_000,
    // the model tests are memory- and CPU-heavy; run files one at a time
    fileParallelism: false,
  },
});
