#!/usr/bin/env node
/** Entry point: an optional JSON config file, overridden by flags. */
import { readFileSync } from "fs";

import { ModelLoadError } from "./models";
import { BridgeConfig, loadForecaster, serveHttp, serveStdio } from "./server";

const USAGE = [
  "usage: bridge [--config file.json] [--model-kind stub|chronos-class|llm-prompt]",
  "              [--model-ref <path|builtin:naive|cmd:argv>] [--device <name>]",
  "              [--minmax] [--http <port>]",
].join("\n");

export function parseArgs(argv: string[]): BridgeConfig {
  let fromFile: Partial<BridgeConfig> = {};
  const flags: Partial<BridgeConfig> = {};
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${flag} needs a value\n${USAGE}`);
      return argv[++i];
    };
    switch (flag) {
      case "--config":
        fromFile = JSON.parse(readFileSync(next(), "utf8")) as Partial<BridgeConfig>;
        break;
      case "--model-kind":
        flags.model_kind = next() as BridgeConfig["model_kind"];
        break;
      case "--model-ref":
        flags.model_ref = next();
        break;
      case "--device":
        flags.device = next();
        break;
      case "--minmax":
        flags.minmax = true;
        break;
      case "--http": {
        const port = Number(next());
        if (!Number.isInteger(port) || port < 0 || port > 65535) {
          throw new Error(`--http needs a port, got ${JSON.stringify(argv[i])}\n${USAGE}`);
        }
        flags.http = port;
        break;
      }
      default:
        throw new Error(`unknown flag ${flag}\n${USAGE}`);
    }
  }
  return { model_kind: "stub", ...fromFile, ...flags };
}

export function main(argv: string[]): void {
  let cfg: BridgeConfig;
  try {
    cfg = parseArgs(argv);
  } catch (e) {
    process.stderr.write(`${(e as Error).message}\n`);
    process.exit(2);
  }
  try {
    const model = loadForecaster(cfg);
    if (cfg.http !== undefined) {
      serveHttp(model, cfg, cfg.http);
    } else {
      serveStdio(model, cfg);
    }
  } catch (e) {
    if (e instanceof ModelLoadError) {
      process.stderr.write(`model load failed: ${e.message}\n`);
      process.exit(1);
    }
    throw e;
  }
}

if (require.main === module) {
  main(process.argv.slice(2));
}
