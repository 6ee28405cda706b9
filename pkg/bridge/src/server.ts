/**
 * Protocol v1 responder over stdio (one JSON document per line) or HTTP
 * (POST /forecast). One request is in flight at a time; every failure is
 * answered with an {"error": ...} payload so the channel stays usable.
 */
import { createServer, Server } from "http";
import { createInterface } from "readline";

import {
  ForecastRequest,
  ForecastResponse,
  assertResponseInvariants,
  parseRequest,
  serializeError,
  serializeResponse,
} from "./protocol";
import { applyMinMax, fitMinMax, invertMinMax } from "./scaling";
import {
  ChronosClassForecaster,
  Forecaster,
  LlmPromptForecaster,
  ModelLoadError,
  StubForecaster,
  resolveCompleter,
} from "./models";

export interface BridgeConfig {
  model_kind: "stub" | "chronos-class" | "llm-prompt";
  model_ref?: string;
  device?: string;
  minmax?: boolean;
  http?: number;
}

export function loadForecaster(cfg: BridgeConfig): Forecaster {
  switch (cfg.model_kind) {
    case "stub":
      return new StubForecaster();
    case "chronos-class":
      if (!cfg.model_ref) {
        throw new ModelLoadError("chronos-class needs model_ref pointing at a weights file");
      }
      return ChronosClassForecaster.load(cfg.model_ref);
    case "llm-prompt": {
      if (!cfg.model_ref) {
        throw new ModelLoadError("llm-prompt needs model_ref (builtin:naive or cmd:<argv>)");
      }
      const { complete, name } = resolveCompleter(cfg.model_ref);
      return new LlmPromptForecaster(complete, name);
    }
    default:
      throw new ModelLoadError(
        `unknown model_kind ${JSON.stringify((cfg as { model_kind: unknown }).model_kind)}`,
      );
  }
}

export function answer(model: Forecaster, cfg: BridgeConfig, req: ForecastRequest): string {
  const scale =
    cfg.minmax || req.scaling_hint === "minmax" ? fitMinMax(req.context) : null;
  const context = scale ? applyMinMax(scale, req.context) : req.context;

  const started = Date.now();
  const out = model.predict(context, req.horizon, {
    seriesId: req.series_id,
    freq: req.freq,
  });
  // the stub is the transcript-replay target, so its replies carry no
  // wall-clock jitter
  const latency = model instanceof StubForecaster ? 0 : Math.max(0, Date.now() - started);

  const res: ForecastResponse = {
    point: scale ? invertMinMax(scale, out.point) : out.point,
    model_name: model.modelName,
    latency_ms: latency,
  };
  if (out.quantiles !== undefined) {
    res.quantiles = Object.fromEntries(
      Object.entries(out.quantiles).map(([level, values]) => [
        level,
        scale ? invertMinMax(scale, values) : values,
      ]),
    );
  }
  assertResponseInvariants(res, req.horizon);
  return serializeResponse(res);
}

export function handleLine(model: Forecaster, cfg: BridgeConfig, line: string): string {
  try {
    return answer(model, cfg, parseRequest(line));
  } catch (e) {
    return serializeError(e instanceof Error ? e.message : String(e));
  }
}

export function serveStdio(model: Forecaster, cfg: BridgeConfig): void {
  const rl = createInterface({ input: process.stdin });
  rl.on("line", (line) => {
    if (line.trim() === "") return;
    process.stdout.write(handleLine(model, cfg, line) + "\n");
  });
}

export function serveHttp(model: Forecaster, cfg: BridgeConfig, port: number): Server {
  const server = createServer((req, res) => {
    if (req.method !== "POST" || req.url !== "/forecast") {
      res.writeHead(404, { "content-type": "application/json" });
      res.end(serializeError(`no route for ${req.method} ${req.url}`));
      return;
    }
    let body = "";
    req.on("data", (chunk) => {
      body += chunk;
    });
    req.on("end", () => {
      res.writeHead(200, { "content-type": "application/json" });
      res.end(handleLine(model, cfg, body));
    });
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr !== null ? addr.port : port;
    process.stderr.write(`listening on http://127.0.0.1:${bound}/forecast\n`);
  });
  return server;
}
