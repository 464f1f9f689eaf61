// Thin fetch client for the gateway. The fetch function is injectable so
// tests can drive the client without a network.

import type {
  AnalysisRequest,
  Explanation,
  GraphDocument,
  Pathway,
  ReportDocument,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class GatewayClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      headers: { Accept: "application/json" },
    });
    if (!res.ok) {
      throw new ApiError(res.status, `GET ${path} -> ${res.status}`);
    }
    return (await res.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.getJson("/health");
  }

  async createAnalysis(request: AnalysisRequest): Promise<{ id: string; cached: boolean }> {
    const res = await this.fetchFn(this.baseUrl + "/analyses", {
      method: "POST",
      headers: { "Content-Type": "application/json", Accept: "application/json" },
      body: JSON.stringify(request),
    });
    if (!res.ok) {
      const detail = await res.text();
      throw new ApiError(res.status, `POST /analyses -> ${res.status}: ${detail}`);
    }
    return (await res.json()) as { id: string; cached: boolean };
  }

  async report(id: string): Promise<ReportDocument> {
    return this.getJson(`/analyses/${id}`);
  }

  async graph(id: string): Promise<GraphDocument> {
    return this.getJson(`/analyses/${id}/graph`);
  }

  async pathways(id: string): Promise<Pathway[]> {
    return this.getJson(`/analyses/${id}/pathways`);
  }

  async explainNode(id: string, nodeId: string): Promise<Explanation> {
    return this.getJson(`/analyses/${id}/explain/node/${encodeURIComponent(nodeId)}`);
  }

  async explainEdge(id: string, edgeId: string): Promise<Explanation> {
    return this.getJson(`/analyses/${id}/explain/edge/${encodeURIComponent(edgeId)}`);
  }
}
