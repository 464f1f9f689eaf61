// Wire types mirroring the gateway API documents.

export interface GraphNode {
  id: string;
  label: string;
  ns: string;
  kind: "concept" | "instance" | "metric" | "literal";
  value?: number;
  units?: string;
  highlighted: boolean;
}

export interface GraphEdge {
  id: string;
  src: string;
  rel: string;
  dst: string;
  origin: "asserted" | "data_evidence" | "ml_derived" | "inferred";
  evidence?: { kind: string; value: number };
  provenance?: string[];
}

export interface GraphDocument {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface Pathway {
  edges: string[];
  nodes: string[];
  score: number;
  kind: string;
}

export interface Explanation {
  target: string;
  text: string;
  evidence: { name: string; value: string }[];
  sources: string[];
}

export interface ShapContribution {
  feature: string;
  phi: number;
  direction: "positive" | "negative";
}

export interface ShapSection {
  subject: string;
  baseline: number;
  prediction: number;
  contributions: ShapContribution[];
}

export interface RiskLevel {
  tract: string;
  predicted: number;
  percentile: number;
  band: "low" | "medium" | "high";
}

export interface PlotsSection {
  outcome: { column: string; values: number[] };
  features: Record<string, number[]>;
  fit: Record<string, { slope: number; intercept: number }>;
  tracts: string[];
}

export interface ModelSection {
  hyper: { C: number; epsilon: number };
  w: Record<string, number>;
  b: number;
  train: { rmse: number; r2: number };
  test: { rmse: number; r2: number };
  importance: Record<string, number>;
  importance_mode: string;
  r2_mode: string;
  cv_table: { C: number; epsilon: number; mean_rmse: number }[];
}

export interface ReportDocument {
  id: string;
  request: AnalysisRequest;
  correlation: { target: string; rho: Record<string, number> };
  vif: { threshold: number; vif: Record<string, number>; removed: string[] };
  model: ModelSection;
  shap: ShapSection | null;
  graph: GraphDocument;
  pathways: Pathway[];
  risk_levels: RiskLevel[];
  recommendations: Explanation[];
  plots?: PlotsSection;
}

export type Role = "physician" | "researcher" | "public";
export type Aim = "causal_pathway" | "descriptive";
export type Level = "patient" | "population";
export type Granularity = "zip" | "census_tract";

export interface AnalysisRequest {
  outcome: string;
  aim: Aim;
  level: Level;
  location: string;
  granularity: Granularity;
  sdoh_filters: string[];
  seed: number;
  importance_mode: string | null;
  r2_mode: string | null;
  role: Role;
}

// S1-S5 form state plus the interaction state of the report view.
export interface ViewState {
  role: Role;
  outcome: string | null; // S1
  aim: Aim | null; // S2
  level: Level | null; // S3
  location: string; // S3
  granularity: Granularity | null; // S4
  sdohFilters: string[]; // S5
  seed: number;
  activeAnalysisId: string | null;
  hoveredId: string | null;
  highlightedPathway: number | null;
  plotTab: "regression" | "shap" | "model";
}

export function initialViewState(): ViewState {
  return {
    role: "physician",
    outcome: null,
    aim: null,
    level: null,
    location: "",
    granularity: null,
    sdohFilters: [],
    seed: 0,
    activeAnalysisId: null,
    hoveredId: null,
    highlightedPathway: null,
    plotTab: "regression",
  };
}
