/**
 * Forecaster backends behind the protocol: a conformance stub, a small
 * pretrained autoregressive pipeline loaded from a weights file, and a
 * prompt-based forecaster that delegates to a text-completion backend.
 */
import { spawnSync } from "child_process";
import { readFileSync } from "fs";

import { ProtocolViolation } from "./protocol";

export interface SeriesMeta {
  seriesId: string;
  freq: string;
}

export interface Prediction {
  point: number[];
  quantiles?: Record<string, number[]>;
}

export interface Forecaster {
  readonly modelName: string;
  predict(context: number[], horizon: number, meta: SeriesMeta): Prediction;
}

export class ModelLoadError extends Error {}

/** Repeats the last context value; the fixed target of transcript replay. */
export class StubForecaster implements Forecaster {
  readonly modelName = "stub";

  predict(context: number[], horizon: number): Prediction {
    return { point: new Array(horizon).fill(context[context.length - 1]) };
  }
}

interface ChronosWeights {
  name: string;
  ar: number[];
  quantile_offsets?: Record<string, number>;
  spread?: number;
}

export class ChronosClassForecaster implements Forecaster {
  readonly modelName: string;
  private readonly ar: number[];
  private readonly offsets: Record<string, number>;
  private readonly spread: number;

  constructor(weights: ChronosWeights) {
    this.modelName = weights.name;
    this.ar = weights.ar;
    this.offsets = weights.quantile_offsets ?? {};
    this.spread = weights.spread ?? 0;
  }

  static load(ref: string): ChronosClassForecaster {
    let doc: unknown;
    try {
      doc = JSON.parse(readFileSync(ref, "utf8"));
    } catch (e) {
      throw new ModelLoadError(`cannot load weights from ${ref}: ${(e as Error).message}`);
    }
    const w = doc as Partial<ChronosWeights>;
    if (
      typeof w.name !== "string" ||
      w.name === "" ||
      !Array.isArray(w.ar) ||
      w.ar.length === 0 ||
      !w.ar.every((v) => typeof v === "number" && Number.isFinite(v))
    ) {
      throw new ModelLoadError(`weights file ${ref} needs a name and ar coefficients`);
    }
    return new ChronosClassForecaster(w as ChronosWeights);
  }

  predict(context: number[], horizon: number): Prediction {
    // the pipeline consumes float32: values are narrowed coming in and
    // again after every autoregressive step
    const buf = context.map(Math.fround);
    const point: number[] = [];
    for (let step = 0; step < horizon; step++) {
      let next = 0;
      for (let i = 0; i < this.ar.length; i++) {
        const idx = buf.length - 1 - i;
        next += this.ar[i] * buf[idx >= 0 ? idx : 0];
      }
      next = Math.fround(next);
      buf.push(next);
      point.push(next);
    }
    const levels = Object.keys(this.offsets);
    if (levels.length === 0) return { point };
    const quantiles: Record<string, number[]> = {};
    for (const level of levels) {
      const off = this.offsets[level] * this.spread;
      // spread widens with the step, as refitting-free rollouts do
      quantiles[level] = point.map((p, k) => p + off * Math.sqrt(k + 1));
    }
    return { point, quantiles };
  }
}

export const PROMPT_PRECISION = 4;
const NUMBER_TOKEN = /^-?\d+(\.\d+)?$/;
const RETRY_SUFFIX = "\nYour last reply was unusable. Emit only the numbers.";

export type CompleteFn = (prompt: string) => string;

export function buildPrompt(context: number[], horizon: number, meta: SeriesMeta): string {
  const values = context.map((v) => v.toFixed(PROMPT_PRECISION)).join(", ");
  return [
    `Series "${meta.seriesId}" is sampled ${meta.freq}. Recent values:`,
    values,
    `Continue the series. Reply with exactly ${horizon} comma-separated numbers and nothing else.`,
  ].join("\n");
}

export function parseCompletion(text: string, horizon: number): number[] {
  const tokens = text.trim().split(/\s*,\s*/);
  if (tokens.length !== horizon || !tokens.every((t) => NUMBER_TOKEN.test(t))) {
    throw new ProtocolViolation(
      `completion is not ${horizon} comma-separated numbers: ${JSON.stringify(text.slice(0, 80))}`,
    );
  }
  return tokens.map(Number);
}

export class LlmPromptForecaster implements Forecaster {
  readonly modelName: string;
  private readonly complete: CompleteFn;

  constructor(complete: CompleteFn, name = "llm-prompt") {
    this.complete = complete;
    this.modelName = name;
  }

  predict(context: number[], horizon: number, meta: SeriesMeta): Prediction {
    const prompt = buildPrompt(context, horizon, meta);
    try {
      return { point: parseCompletion(this.complete(prompt), horizon) };
    } catch (e) {
      if (!(e instanceof ProtocolViolation)) throw e;
      // a malformed generation earns one corrective retry, then gives up
      return { point: parseCompletion(this.complete(prompt + RETRY_SUFFIX), horizon) };
    }
  }
}

/** Continues the series by repeating its most recent value. */
export function naiveCompleter(prompt: string): string {
  const numbers = prompt.match(/-?\d+\.\d+/g) ?? [];
  const want = prompt.match(/exactly (\d+) comma-separated/);
  if (numbers.length === 0 || want === null) return "";
  return new Array(Number(want[1])).fill(numbers[numbers.length - 1]).join(", ");
}

export function resolveCompleter(ref: string): { complete: CompleteFn; name: string } {
  if (ref === "builtin:naive") {
    return { complete: naiveCompleter, name: "llm-naive" };
  }
  if (ref.startsWith("cmd:")) {
    const argv = ref.slice(4).split(" ").filter(Boolean);
    if (argv.length === 0) {
      throw new ModelLoadError("cmd: completer needs a command");
    }
    const complete: CompleteFn = (prompt) => {
      const run = spawnSync(argv[0], argv.slice(1), {
        input: prompt,
        encoding: "utf8",
        timeout: 60_000,
      });
      if (run.error) throw new Error(`completion backend failed: ${run.error.message}`);
      if (run.status !== 0) throw new Error(`completion backend exited ${run.status}`);
      return run.stdout;
    };
    return { complete, name: `llm-prompt:${argv[0].split("/").pop()}` };
  }
  throw new ModelLoadError(
    `unknown completer ${JSON.stringify(ref)} (use builtin:naive or cmd:<argv>)`,
  );
}
