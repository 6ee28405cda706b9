/**
 * Wire protocol v1: newline-delimited JSON, one request and one response per
 * line (the same payloads travel over HTTP POST bodies).
 *
 * Request fields
 *   protocol_version  int, must be 1
 *   series_id         non-empty string
 *   freq              non-empty string ("hourly", "business-daily", ...)
 *   context           non-empty array of finite numbers
 *   horizon           int >= 1
 *   scaling_hint      "none" | "minmax"
 *
 * Response fields (keys emitted in sorted order, compact separators)
 *   latency_ms        int >= 0
 *   model_name        non-empty string
 *   point             array of finite numbers, length == horizon
 *   quantiles         optional map of level -> array of the same length
 *
 * Any failure is reported as {"error": "<message>"} so clients can surface
 * a transport error without tearing down the channel.
 */

export const PROTOCOL_VERSION = 1;
export const SCALING_HINTS = ["none", "minmax"] as const;
export type ScalingHint = (typeof SCALING_HINTS)[number];

export interface ForecastRequest {
  protocol_version: number;
  series_id: string;
  freq: string;
  context: number[];
  horizon: number;
  scaling_hint: ScalingHint;
}

export interface ForecastResponse {
  point: number[];
  quantiles?: Record<string, number[]>;
  model_name: string;
  latency_ms: number;
}

export class ProtocolViolation extends Error {}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

export function parseRequest(line: string): ForecastRequest {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new ProtocolViolation("request is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolViolation("request must be a JSON object");
  }
  const req = doc as Record<string, unknown>;
  if (req.protocol_version !== PROTOCOL_VERSION) {
    throw new ProtocolViolation(
      `unsupported protocol_version ${JSON.stringify(req.protocol_version)}`,
    );
  }
  if (typeof req.series_id !== "string" || req.series_id === "") {
    throw new ProtocolViolation("series_id must be a non-empty string");
  }
  if (typeof req.freq !== "string" || req.freq === "") {
    throw new ProtocolViolation("freq must be a non-empty string");
  }
  if (
    !Array.isArray(req.context) ||
    req.context.length === 0 ||
    !req.context.every(isFiniteNumber)
  ) {
    throw new ProtocolViolation("context must be a non-empty array of finite numbers");
  }
  if (
    typeof req.horizon !== "number" ||
    !Number.isInteger(req.horizon) ||
    req.horizon < 1
  ) {
    throw new ProtocolViolation("horizon must be an integer >= 1");
  }
  if (req.scaling_hint !== "none" && req.scaling_hint !== "minmax") {
    throw new ProtocolViolation(
      `scaling_hint must be one of ${JSON.stringify(SCALING_HINTS)}`,
    );
  }
  return {
    protocol_version: PROTOCOL_VERSION,
    series_id: req.series_id,
    freq: req.freq,
    context: req.context as number[],
    horizon: req.horizon,
    scaling_hint: req.scaling_hint,
  };
}

/**
 * Canonical float text: shortest round-trip decimal, a trailing ".0" on
 * integral values, exponent notation outside [1e-4, 1e16) with a signed
 * two-digit exponent. This matches the form the core emitter writes, which
 * is what makes transcript replay byte-comparable.
 */
export function formatFloat(v: number): string {
  if (!Number.isFinite(v)) {
    throw new ProtocolViolation("non-finite value in response");
  }
  if (Object.is(v, -0)) return "-0.0";
  const abs = Math.abs(v);
  if (abs !== 0 && (abs < 1e-4 || abs >= 1e16)) {
    const [mantissa, exp] = v.toExponential().split("e");
    const sign = exp.startsWith("-") ? "-" : "+";
    return `${mantissa}e${sign}${exp.replace(/^[+-]/, "").padStart(2, "0")}`;
  }
  if (Number.isInteger(v)) return v.toFixed(1);
  return String(v);
}

export function serializeResponse(res: ForecastResponse): string {
  const fields = [
    `"latency_ms":${res.latency_ms}`,
    `"model_name":${JSON.stringify(res.model_name)}`,
    `"point":[${res.point.map(formatFloat).join(",")}]`,
  ];
  if (res.quantiles !== undefined) {
    const levels = Object.keys(res.quantiles).sort();
    const body = levels
      .map((l) => `${JSON.stringify(l)}:[${res.quantiles![l].map(formatFloat).join(",")}]`)
      .join(",");
    fields.push(`"quantiles":{${body}}`);
  }
  return `{${fields.join(",")}}`;
}

export function serializeError(message: string): string {
  return `{"error":${JSON.stringify(message)}}`;
}

export function assertResponseInvariants(res: ForecastResponse, horizon: number): void {
  if (res.point.length !== horizon || !res.point.every(isFiniteNumber)) {
    throw new ProtocolViolation(
      `point must be ${horizon} finite numbers, got ${res.point.length}`,
    );
  }
  for (const [level, values] of Object.entries(res.quantiles ?? {})) {
    if (values.length !== horizon || !values.every(isFiniteNumber)) {
      throw new ProtocolViolation(`quantile ${level} must be ${horizon} finite numbers`);
    }
  }
  if (typeof res.model_name !== "string" || res.model_name === "") {
    throw new ProtocolViolation("model_name must be a non-empty string");
  }
  if (!Number.isInteger(res.latency_ms) || res.latency_ms < 0) {
    throw new ProtocolViolation("latency_ms must be a non-negative integer");
  }
}
