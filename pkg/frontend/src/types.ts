import { z } from "zod";

// Payload schemas for the engine's HTTP API. Every response is parsed
// through these so a contract drift fails loudly instead of rendering
// garbage.

export const BindingValue = z.union([z.number(), z.boolean()]);

export const ResultRow = z.object({
  candidate_id: z.number().int(),
  bindings: z.record(BindingValue),
  n: z.number().int(),
  diversity: z.number().nullable(),
  hr: z.number().nullable(),
  hr_lo: z.number().nullable(),
  hr_hi: z.number().nullable(),
  p: z.number().nullable(),
  kidney_rr: z.number().nullable(),
  liver_rr: z.number().nullable(),
  status: z.enum(["ok", "degenerate"]),
  reason: z.string().nullable(),
});
export type ResultRow = z.infer<typeof ResultRow>;

export const Adjustable = z.object({
  name: z.string(),
  values: z.array(BindingValue),
  unit: z.string().nullable().optional(),
});
export type Adjustable = z.infer<typeof Adjustable>;

export const Manifest = z.object({
  count: z.number().int(),
  adjustables: z.array(Adjustable),
});
export type Manifest = z.infer<typeof Manifest>;

export const SpecSummary = z.object({
  grid_size: z.number().int(),
  inclusions: z.array(z.string()),
  exclusions: z.array(z.string()),
  has_intervention: z.boolean(),
  adjustables: z.array(Adjustable),
  normalized_text: z.string(),
  spec_hash: z.string(),
});
export type SpecSummary = z.infer<typeof SpecSummary>;

export const Job = z.object({
  job_id: z.string(),
  grid_id: z.string(),
  state: z.enum(["queued", "running", "done", "failed"]),
  completed: z.number().int(),
  total: z.number().int(),
  error: z.string().nullable(),
});
export type Job = z.infer<typeof Job>;

export const EvaluateResponse = z.object({
  job_id: z.string(),
  grid_id: z.string(),
  cached: z.boolean(),
});
export type EvaluateResponse = z.infer<typeof EvaluateResponse>;

const curvePoint = z.tuple([z.number(), z.number().nullable()]);
const armCurves = z.record(z.array(curvePoint));

export const Profile = z.object({
  candidate_id: z.number().int(),
  gender_dist: z.record(z.record(z.number())),
  age_hist: z.record(z.array(z.number())),
  kidney_curve: armCurves,
  liver_curve: armCurves,
  hr: z.number().nullable(),
  hr_ci95: z.array(z.number()).nullable(),
});
export type Profile = z.infer<typeof Profile>;

const meanSd = z.tuple([z.number(), z.number()]);
const groupCurvePoint = z.tuple([z.number(), z.number(), z.number()]);

export const GroupProfile = z.object({
  member_ids: z.array(z.number().int()),
  gender_dist: z.record(z.record(meanSd)),
  age_hist: z.record(z.array(meanSd)),
  kidney_curve: z.record(z.array(groupCurvePoint)),
  liver_curve: z.record(z.array(groupCurvePoint)),
  metric_means: z.record(z.number().nullable()),
});
export type GroupProfile = z.infer<typeof GroupProfile>;

export const ExplorationRecord = z.object({
  record_id: z.number().int(),
  kind: z.enum(["criterion_adjust", "lasso_select", "axis_change"]),
  bindings_constraints: z.record(z.array(BindingValue)),
  selected_candidates: z.array(z.number().int()),
  axes: z.array(z.string()),
  metric_means: z.record(z.number().nullable()).nullable(),
  timestamp: z.number(),
  viewport: z.record(z.unknown()).nullable(),
});
export type ExplorationRecord = z.infer<typeof ExplorationRecord>;

export const Stage = z.object({
  stage_id: z.number().int(),
  importance: z.number().int().min(1).max(5),
  keywords: z.array(z.string()),
  description: z.string(),
  records: z.array(ExplorationRecord),
});
export type Stage = z.infer<typeof Stage>;

export const Session = z.object({
  schema_version: z.literal(1),
  session_id: z.string(),
  spec_hash: z.string(),
  stages: z.array(Stage),
  current_stage_id: z.number().int().nullable(),
});
export type Session = z.infer<typeof Session>;

export const ApiError = z.object({
  code: z.string(),
  message: z.string(),
  location: z.object({ line: z.number(), col: z.number() }).optional(),
});
export type ApiError = z.infer<typeof ApiError>;

export const METRICS = ["n", "diversity", "hr", "kidney_rr", "liver_rr"] as const;
export type MetricName = (typeof METRICS)[number];
