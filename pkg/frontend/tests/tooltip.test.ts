import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { TooltipController } from "../src/tooltip.js";
import predictorExplanation from "./fixtures/predictor_explanation.json";

function clientReturning(payloads: Record<string, unknown>, calls: string[] = []) {
  return new GatewayClient("", async (url) => {
    calls.push(url);
    const key = Object.keys(payloads).find((k) => url.includes(k));
    if (!key) return new Response("not found", { status: 404 });
    return new Response(JSON.stringify(payloads[key]), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  });
}

describe("TooltipController", () => {
  it("shows the /explain/edge response text byte-for-byte", async () => {
    const shown: string[] = [];
    const client = clientReturning({ "/explain/edge/F6": predictorExplanation });
    const tooltips = new TooltipController(
      client,
      "abc123",
      (text) => shown.push(text),
      () => shown.push("<hidden>"),
    );
    const result = await tooltips.hover("edge", "F6");
    expect(result?.text).toEqual(predictorExplanation.text);
    expect(shown).toEqual([predictorExplanation.text]);
  });

  it("caches repeated hovers on the same target", async () => {
    const calls: string[] = [];
    const client = clientReturning({ "/explain/edge/F6": predictorExplanation }, calls);
    const tooltips = new TooltipController(client, "abc123", () => {}, () => {});
    await tooltips.hover("edge", "F6");
    await tooltips.hover("edge", "F6");
    expect(calls.length).toBe(1);
  });

  it("drops results that arrive after the cursor moved on", async () => {
    const shown: string[] = [];
    let release: (() => void) | null = null;
    const gate = new Promise<void>((resolve) => (release = resolve));
    const client = new GatewayClient("", async (url) => {
      if (url.includes("F6")) {
        await gate; // hold the first response until the cursor leaves
        return new Response(JSON.stringify(predictorExplanation), { status: 200 });
      }
      return new Response(JSON.stringify({ ...predictorExplanation, text: "other" }), {
        status: 200,
      });
    });
    const tooltips = new TooltipController(
      client,
      "abc123",
      (text) => shown.push(text),
      () => {},
    );
    const slow = tooltips.hover("edge", "F6");
    const fast = await tooltips.hover("edge", "F7");
    release!();
    const stale = await slow;
    expect(fast?.text).toBe("other");
    expect(stale).toBeNull();
    expect(shown).toEqual(["other"]);
  });

  it("hides the tooltip when the endpoint errors", async () => {
    const shown: string[] = [];
    const client = clientReturning({});
    const tooltips = new TooltipController(
      client,
      "abc123",
      (text) => shown.push(text),
      () => shown.push("<hidden>"),
    );
    const result = await tooltips.hover("edge", "missing");
    expect(result).toBeNull();
    expect(shown).toEqual(["<hidden>"]);
  });
});
