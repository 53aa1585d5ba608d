/**
 * Launch command: load the adapter config, build the checkpoint, serve /v1.
 *
 *   node dist/main.js --config config.json [--port N] [--host H]
 */

import { readFileSync } from "node:fs";

import { AdapterConfig, DEFAULT_CONFIG, createCheckpoint } from "./checkpoint.js";
import { buildApp } from "./server.js";

function parseArgs(argv: string[]): { config?: string; port?: number; host?: string } {
  const out: { config?: string; port?: number; host?: string } = {};
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--config":
        out.config = argv[++i];
        break;
      case "--port":
        out.port = Number(argv[++i]);
        break;
      case "--host":
        out.host = argv[++i];
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  return out;
}

export function loadConfig(path?: string): AdapterConfig {
  if (!path) {
    return { ...DEFAULT_CONFIG };
  }
  const raw = JSON.parse(readFileSync(path, "utf-8")) as Partial<AdapterConfig>;
  const config = { ...DEFAULT_CONFIG, ...raw };
  if (!Number.isInteger(config.sample_rate_hz) || config.sample_rate_hz <= 0) {
    throw new Error(`sample_rate_hz must be a positive integer, got ${config.sample_rate_hz}`);
  }
  if (!Number.isInteger(config.max_batch) || config.max_batch < 1) {
    throw new Error(`max_batch must be a positive integer, got ${config.max_batch}`);
  }
  return config;
}

function main(): void {
  let args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  }
  let config: AdapterConfig;
  let checkpoint;
  try {
    config = loadConfig(args.config);
    if (args.port !== undefined) config.port = args.port;
    if (args.host !== undefined) config.host = args.host;
    checkpoint = createCheckpoint(config);
  } catch (err) {
    console.error(`startup failure: ${(err as Error).message}`);
    process.exit(1);
  }
  const app = buildApp(checkpoint, config);
  const server = app.listen(config.port, config.host, () => {
    const address = server.address();
    const port = typeof address === "object" && address ? address.port : config.port;
    console.log(`adapter (${checkpoint.modelId}) listening on http://${config.host}:${port}`);
  });
}

main();
