import { defineConfig } from 'vitest/config';

// assets are served by the gateway's static mount at /console
export default defineConfig({
  base: '/console/',
  build: { outDir: 'dist' },
  server: {
    proxy: {
      '/sessions': 'http://127.0.0.1:8075',
      '/review': 'http://127.0.0.1:8075',
      '/graph': 'http://127.0.0.1:8075',
      '/diagnose': 'http://127.0.0.1:8075',
      '/healthz': 'http://127.0.0.1:8075',
      '/ingest': 'http://127.0.0.1:8075',
    },
  },
  test: {
    environment: 'node',
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
