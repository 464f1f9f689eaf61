// The S1-S5 selection flow: validate the form state and build the
// analysis request the gateway accepts.

import type { AnalysisRequest, ViewState } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

export function validateSelections(state: ViewState): FieldError[] {
  const errors: FieldError[] = [];
  if (!state.outcome) {
    errors.push({ field: "outcome", message: "Select an outcome of interest (S1)." });
  }
  if (!state.aim) {
    errors.push({ field: "aim", message: "Select an analytics aim (S2)." });
  }
  if (!state.level) {
    errors.push({ field: "level", message: "Select the level of analysis (S3)." });
  } else if (state.level === "patient" && !state.location.trim()) {
    errors.push({ field: "location", message: "Enter the patient's census tract (S3)." });
  } else if (state.level === "population" && !state.location.trim()) {
    errors.push({ field: "location", message: "Enter the city of interest (S3)." });
  }
  if (!state.granularity) {
    errors.push({ field: "granularity", message: "Select the geographic granularity (S4)." });
  }
  if (state.level === "patient" && state.role === "public") {
    errors.push({
      field: "role",
      message: "Patient-level analyses are not available to the public role.",
    });
  }
  return errors;
}

export function exploreEnabled(state: ViewState): boolean {
  return validateSelections(state).length === 0;
}

export function buildRequest(state: ViewState): AnalysisRequest {
  const errors = validateSelections(state);
  if (errors.length > 0) {
    throw new Error(errors.map((e) => e.message).join(" "));
  }
  return {
    outcome: state.outcome!,
    aim: state.aim!,
    level: state.level!,
    location: state.location.trim(),
    granularity: state.granularity!,
    sdoh_filters: [...state.sdohFilters].sort(),
    seed: state.seed,
    importance_mode: null,
    r2_mode: null,
    role: state.role,
  };
}
