import { describe, expect, it } from "vitest";

import {
  ProtocolViolation,
  formatFloat,
  parseRequest,
  serializeError,
  serializeResponse,
} from "../src/protocol";

const GOOD = {
  protocol_version: 1,
  series_id: "alpha",
  freq: "hourly",
  context: [1.5, 2.25, 3.5],
  horizon: 2,
  scaling_hint: "none",
};

describe("parseRequest", () => {
  it("accepts a canonical request", () => {
    const req = parseRequest(JSON.stringify(GOOD));
    expect(req.series_id).toBe("alpha");
    expect(req.context).toEqual([1.5, 2.25, 3.5]);
    expect(req.horizon).toBe(2);
  });

  const mangles: Array<[string, Record<string, unknown>]> = [
    ["wrong version", { ...GOOD, protocol_version: 2 }],
    ["version as string", { ...GOOD, protocol_version: "1" }],
    ["empty series_id", { ...GOOD, series_id: "" }],
    ["missing freq", { ...GOOD, freq: undefined }],
    ["empty context", { ...GOOD, context: [] }],
    ["boolean in context", { ...GOOD, context: [1.0, true] }],
    ["null in context", { ...GOOD, context: [1.0, null] }],
    ["zero horizon", { ...GOOD, horizon: 0 }],
    ["float horizon", { ...GOOD, horizon: 2.5 }],
    ["boolean horizon", { ...GOOD, horizon: true }],
    ["unknown hint", { ...GOOD, scaling_hint: "robust" }],
  ];
  for (const [label, doc] of mangles) {
    it(`rejects ${label}`, () => {
      expect(() => parseRequest(JSON.stringify(doc))).toThrow(ProtocolViolation);
    });
  }

  it("rejects non-JSON and non-objects", () => {
    expect(() => parseRequest("not json")).toThrow(ProtocolViolation);
    expect(() => parseRequest("[1,2]")).toThrow(ProtocolViolation);
    // bare NaN is not valid JSON, so non-finite context never gets in
    expect(() => parseRequest('{"context":[NaN]}')).toThrow(ProtocolViolation);
  });
});

describe("formatFloat", () => {
  it("writes canonical float text", () => {
    expect(formatFloat(3.5)).toBe("3.5");
    expect(formatFloat(2.25)).toBe("2.25");
    expect(formatFloat(4)).toBe("4.0");
    expect(formatFloat(-7)).toBe("-7.0");
    expect(formatFloat(0)).toBe("0.0");
    expect(formatFloat(-0)).toBe("-0.0");
    expect(formatFloat(0.1 + 0.2)).toBe("0.30000000000000004");
    expect(formatFloat(1e-5)).toBe("1e-05");
    expect(formatFloat(1.5e-7)).toBe("1.5e-07");
    expect(formatFloat(1e16)).toBe("1e+16");
    expect(formatFloat(0.0001)).toBe("0.0001");
  });

  it("refuses non-finite values", () => {
    expect(() => formatFloat(NaN)).toThrow(ProtocolViolation);
    expect(() => formatFloat(Infinity)).toThrow(ProtocolViolation);
  });
});

describe("serialization", () => {
  it("emits sorted keys and compact separators", () => {
    const line = serializeResponse({
      point: [3.5, 3.5],
      model_name: "stub",
      latency_ms: 0,
    });
    expect(line).toBe('{"latency_ms":0,"model_name":"stub","point":[3.5,3.5]}');
  });

  it("sorts quantile levels", () => {
    const line = serializeResponse({
      point: [1.5],
      quantiles: { "0.9": [2.5], "0.1": [0.5] },
      model_name: "m",
      latency_ms: 3,
    });
    expect(line).toBe(
      '{"latency_ms":3,"model_name":"m","point":[1.5],"quantiles":{"0.1":[0.5],"0.9":[2.5]}}',
    );
  });

  it("shapes error lines", () => {
    expect(serializeError("boom")).toBe('{"error":"boom"}');
  });
});
