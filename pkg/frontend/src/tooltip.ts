// Hover tooltips.
//
// Tooltip text is always the byte-exact `text` of the corresponding
// /explain response; this module never rewrites or reformats it. Requests
// are cached per target and cancelled results are dropped when the cursor
// has moved on.

import type { GatewayClient } from "./api.js";
import type { Explanation } from "./types.js";

export type TooltipKind = "node" | "edge";

export class TooltipController {
  private cache = new Map<string, Explanation>();
  private current: string | null = null;

  constructor(
    private client: GatewayClient,
    private analysisId: string,
    private show: (text: string) => void,
    private hide: () => void,
  ) {}

  private key(kind: TooltipKind, targetId: string): string {
    return `${kind}:${targetId}`;
  }

  async hover(kind: TooltipKind, targetId: string): Promise<Explanation | null> {
    const key = this.key(kind, targetId);
    this.current = key;
    let explanation = this.cache.get(key);
    if (!explanation) {
      try {
        explanation =
          kind === "edge"
            ? await this.client.explainEdge(this.analysisId, targetId)
            : await this.client.explainNode(this.analysisId, targetId);
      } catch {
        if (this.current === key) this.hide();
        return null;
      }
      this.cache.set(key, explanation);
    }
    if (this.current !== key) {
      return null; // the cursor moved on while the request was in flight
    }
    this.show(explanation.text);
    return explanation;
  }

  leave(): void {
    this.current = null;
    this.hide();
  }
}
