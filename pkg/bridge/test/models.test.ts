import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

import { describe, expect, it } from "vitest";

import {
  ChronosClassForecaster,
  LlmPromptForecaster,
  ModelLoadError,
  StubForecaster,
  buildPrompt,
  naiveCompleter,
  parseCompletion,
  resolveCompleter,
} from "../src/models";
import { ProtocolViolation } from "../src/protocol";

const META = { seriesId: "alpha", freq: "hourly" };

describe("stub", () => {
  it("echoes the last context value", () => {
    const out = new StubForecaster().predict([1.5, 2.5, 7.25], 3, META);
    expect(out.point).toEqual([7.25, 7.25, 7.25]);
  });
});

describe("chronos-class", () => {
  it("loads weights from disk and predicts the horizon", () => {
    const dir = mkdtempSync(join(tmpdir(), "bridge-"));
    const ref = join(dir, "w.json");
    writeFileSync(ref, JSON.stringify({ name: "tiny", ar: [0.5, 0.5] }));
    const model = ChronosClassForecaster.load(ref);
    expect(model.modelName).toBe("tiny");
    const out = model.predict([2.0, 4.0], 3, META);
    expect(out.point).toHaveLength(3);
    expect(out.point[0]).toBe(3.0);
    expect(out.quantiles).toBeUndefined();
  });

  it("narrows inputs to float32", () => {
    // 1 + 2^-25 is representable in float64 but rounds to 1 in float32,
    // so a pure persistence model must predict exactly 1
    const model = new ChronosClassForecaster({ name: "persist", ar: [1.0] });
    const fine = 1 + 2 ** -25;
    expect(fine).not.toBe(1);
    expect(model.predict([fine], 2, META).point).toEqual([1.0, 1.0]);
  });

  it("emits one quantile track per configured level", () => {
    const model = new ChronosClassForecaster({
      name: "q",
      ar: [1.0],
      quantile_offsets: { "0.1": -1.0, "0.9": 1.0 },
      spread: 0.5,
    });
    const out = model.predict([2.0], 2, META);
    expect(Object.keys(out.quantiles!).sort()).toEqual(["0.1", "0.9"]);
    expect(out.quantiles!["0.9"][0]).toBeCloseTo(2.5, 12);
    expect(out.quantiles!["0.1"][1]).toBeCloseTo(2.0 - 0.5 * Math.SQRT2, 12);
  });

  const dir = mkdtempSync(join(tmpdir(), "bridge-bad-"));
  const badRefs: Array<[string, string | null]> = [
    ["missing file", null],
    ["not json", "plain text"],
    ["missing ar", JSON.stringify({ name: "x" })],
    ["empty ar", JSON.stringify({ name: "x", ar: [] })],
    ["non-finite ar", '{"name":"x","ar":[null]}'],
  ];
  for (const [label, body] of badRefs) {
    it(`refuses to load ${label}`, () => {
      const ref = join(dir, label.replace(/ /g, "-") + ".json");
      if (body !== null) writeFileSync(ref, body);
      expect(() => ChronosClassForecaster.load(ref)).toThrow(ModelLoadError);
    });
  }
});

describe("llm-prompt", () => {
  it("prompts with fixed-precision comma-separated values", () => {
    const prompt = buildPrompt([1.5, 7.25], 3, META);
    expect(prompt).toContain("1.5000, 7.2500");
    expect(prompt).toContain('Series "alpha" is sampled hourly');
    expect(prompt).toContain("exactly 3 comma-separated numbers");
  });

  it("parses only exact numeric lists", () => {
    expect(parseCompletion("1.5, -2.25, 3", 3)).toEqual([1.5, -2.25, 3]);
    expect(parseCompletion("  4.0 , 5.0 ", 2)).toEqual([4.0, 5.0]);
    for (const bad of [
      "the answer is 1.5, 2.5",
      "1.5, 2.5 maybe",
      "1.5; 2.5",
      "1.5, 2.5, 3.5",
      "1e3, 2.5",
      "",
    ]) {
      expect(() => parseCompletion(bad, 2)).toThrow(ProtocolViolation);
    }
  });

  it("retries a malformed generation exactly once", () => {
    const replies = ["I think it keeps rising.", "1.5, 2.5"];
    let calls = 0;
    const model = new LlmPromptForecaster(() => replies[calls++], "flaky");
    expect(model.predict([1.0], 2, META).point).toEqual([1.5, 2.5]);
    expect(calls).toBe(2);

    let stubborn = 0;
    const hopeless = new LlmPromptForecaster(() => {
      stubborn++;
      return "word salad";
    });
    expect(() => hopeless.predict([1.0], 2, META)).toThrow(ProtocolViolation);
    expect(stubborn).toBe(2);
  });

  it("appends a corrective line on retry", () => {
    const prompts: string[] = [];
    const model = new LlmPromptForecaster((p) => {
      prompts.push(p);
      return prompts.length === 1 ? "nope" : "1.0";
    });
    model.predict([1.0], 1, META);
    expect(prompts[1].startsWith(prompts[0])).toBe(true);
    expect(prompts[1].length).toBeGreaterThan(prompts[0].length);
  });

  it("continues the last value through the builtin completer", () => {
    const { complete, name } = resolveCompleter("builtin:naive");
    expect(name).toBe("llm-naive");
    const model = new LlmPromptForecaster(complete, name);
    expect(model.predict([3.25, 7.25], 3, META).point).toEqual([7.25, 7.25, 7.25]);
  });

  it("rejects unknown completer schemes", () => {
    expect(() => resolveCompleter("hf:some/model")).toThrow(ModelLoadError);
    expect(() => resolveCompleter("cmd:")).toThrow(ModelLoadError);
  });

  it("delegates cmd: completers to a subprocess", () => {
    const { complete } = resolveCompleter("cmd:head -n 1");
    expect(complete("9.5, 9.5\nrest of prompt")).toBe("9.5, 9.5\n");
  });
});

describe("naiveCompleter", () => {
  it("reads the count and last value out of the prompt", () => {
    const prompt = buildPrompt([2.5, 4.75], 2, META);
    expect(naiveCompleter(prompt)).toBe("4.7500, 4.7500");
  });

  it("returns nothing for an unreadable prompt", () => {
    expect(naiveCompleter("no numbers here")).toBe("");
  });
});
