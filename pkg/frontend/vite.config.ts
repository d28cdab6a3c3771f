import { defineConfig } from 'vitest/config';

export default defineConfig({
  build: {
    outDir: 'dist',
    sourcemap: true,
  },
  server: {
    proxy: {
      // Local development against a review service on the default port.
      '/api': 'http://127.0.0.1:8000',
      '/images': 'http://127.0.0.1:8000',
    },
  },
  test: {
    environment: 'jsdom',
    testTimeout: 30000,
  },
});
