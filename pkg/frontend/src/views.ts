import type {
  Adjustable,
  GroupProfile,
  MetricName,
  ResultRow,
  Session,
  Stage,
} from "./types.js";
import { METRICS } from "./types.js";

// Pure render-model builders. Every number shown comes from the results
// table or the session document; nothing is recomputed client-side beyond
// layout (positions, radii, decimation).

// ---------------------------------------------------------------------------
// Criterion view

/** Per-tick candidate counts for one adjustable's slider. */
export function tickCounts(
  rows: ResultRow[],
  adjustable: Adjustable,
): Map<number | boolean, number> {
  const counts = new Map<number | boolean, number>();
  for (const value of adjustable.values) counts.set(value, 0);
  for (const row of rows) {
    const value = row.bindings[adjustable.name];
    if (value !== undefined) counts.set(value, (counts.get(value) ?? 0) + 1);
  }
  return counts;
}

/** Adjustables on which two candidates differ (the two-color slider diff). */
export function sliderDiff(a: ResultRow, b: ResultRow): string[] {
  const names = new Set([...Object.keys(a.bindings), ...Object.keys(b.bindings)]);
  return [...names].filter((n) => a.bindings[n] !== b.bindings[n]).sort();
}

// ---------------------------------------------------------------------------
// Outcome view

export interface ScatterPoint {
  id: number;
  x: number;
  y: number;
}

export const DECIMATION_THRESHOLD = 20_000;

/**
 * Scatter points for the chosen metric axes. Above the threshold the
 * points are decimated on a screen-space grid (one representative per
 * cell); selection stays exact because it always goes through the server.
 */
export function scatterModel(
  rows: ResultRow[],
  xMetric: MetricName,
  yMetric: MetricName,
  threshold = DECIMATION_THRESHOLD,
): { points: ScatterPoint[]; decimated: boolean } {
  const points: ScatterPoint[] = [];
  for (const row of rows) {
    if (row.status !== "ok") continue;
    const x = (row as Record<string, unknown>)[xMetric];
    const y = (row as Record<string, unknown>)[yMetric];
    if (typeof x !== "number" || typeof y !== "number") continue;
    points.push({ id: row.candidate_id, x, y });
  }
  if (points.length <= threshold) return { points, decimated: false };

  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const cells = Math.ceil(Math.sqrt(threshold));
  const seen = new Map<string, ScatterPoint>();
  for (const p of points) {
    const cx = x1 > x0 ? Math.min(cells - 1, Math.floor(((p.x - x0) / (x1 - x0)) * cells)) : 0;
    const cy = y1 > y0 ? Math.min(cells - 1, Math.floor(((p.y - y0) / (y1 - y0)) * cells)) : 0;
    const key = `${cx},${cy}`;
    if (!seen.has(key)) seen.set(key, p);
  }
  return { points: [...seen.values()], decimated: true };
}

// ---------------------------------------------------------------------------
// Exploration view

export interface MatrixCell {
  value: number;
  /** Circle radius in [0, 1]; area-linear within the row. */
  radius: number;
}

export interface MatrixRow {
  adjustable: string;
  cells: MatrixCell[];
}

/**
 * Criterion matrix for one stage: one row per adjustable, one column per
 * record. The cell value is the mean of the record's permitted values for
 * that adjustable (the full declared set when unconstrained), matching
 * the server's matrix endpoint; the exact value is kept for hover.
 */
export function matrixModel(stage: Stage, adjustables: Adjustable[]): MatrixRow[] {
  const out: MatrixRow[] = [];
  for (const adj of adjustables) {
    const values = stage.records.map((record) => {
      const allowed = record.bindings_constraints[adj.name];
      const pool = allowed && allowed.length ? allowed : adj.values;
      const nums = pool.map((v) => (typeof v === "boolean" ? (v ? 1 : 0) : v));
      return nums.reduce((a, b) => a + b, 0) / nums.length;
    });
    const rowMax = Math.max(...values.map(Math.abs), 0);
    out.push({
      adjustable: adj.name,
      cells: values.map((value) => ({
        value,
        radius: rowMax > 0 ? Math.sqrt(Math.abs(value) / rowMax) : 0,
      })),
    });
  }
  return out;
}

export interface TrendPoint {
  recordId: number;
  value: number | null;
}

/** Five metric trend lines over a stage's records. */
export function trendLines(stage: Stage): Record<MetricName, TrendPoint[]> {
  const out = {} as Record<MetricName, TrendPoint[]>;
  for (const metric of METRICS) {
    out[metric] = stage.records.map((record) => ({
      recordId: record.record_id,
      value: record.metric_means?.[metric] ?? null,
    }));
  }
  return out;
}

export interface ThumbnailModel {
  recordId: number;
  axes: [string, string];
  /** Axis labels are rendered only when the axes changed at this record. */
  showAxisLabels: boolean;
  selectedCount: number;
}

export function thumbnails(stage: Stage, defaultAxes: [string, string]): ThumbnailModel[] {
  const out: ThumbnailModel[] = [];
  let prev: [string, string] = defaultAxes;
  for (const record of stage.records) {
    const axes: [string, string] = [record.axes[0], record.axes[1]];
    const changed = axes[0] !== prev[0] || axes[1] !== prev[1];
    out.push({
      recordId: record.record_id,
      axes,
      showAxisLabels: changed,
      selectedCount: record.selected_candidates.length,
    });
    prev = axes;
  }
  return out;
}

export interface StageSummary {
  stageId: number;
  importance: number;
  keywords: string[];
  recordCount: number;
}

/** Condensed strip of the important stages (importance >= cutoff). */
export function importantStages(session: Session, cutoff = 4): StageSummary[] {
  return session.stages
    .filter((s) => s.importance >= cutoff)
    .map((s) => ({
      stageId: s.stage_id,
      importance: s.importance,
      keywords: s.keywords,
      recordCount: s.records.length,
    }));
}

export interface ExplorationModel {
  stages: Array<{
    summary: StageSummary & { description: string };
    matrix: MatrixRow[];
    trends: Record<MetricName, TrendPoint[]>;
    thumbnails: ThumbnailModel[];
  }>;
  importantStrip: StageSummary[];
}

/** Everything the Exploration view renders, derived from the session doc. */
export function explorationModel(
  session: Session,
  adjustables: Adjustable[],
  defaultAxes: [string, string] = ["n", "hr"],
): ExplorationModel {
  return {
    stages: session.stages.map((stage) => ({
      summary: {
        stageId: stage.stage_id,
        importance: stage.importance,
        keywords: stage.keywords,
        recordCount: stage.records.length,
        description: stage.description,
      },
      matrix: matrixModel(stage, adjustables),
      trends: trendLines(stage),
      thumbnails: thumbnails(stage, defaultAxes),
    })),
    importantStrip: importantStages(session),
  };
}

// ---------------------------------------------------------------------------
// Detailed characteristic view

export interface MetricComparison {
  metric: MetricName;
  a: number | null;
  b: number | null;
  delta: number | null;
}

export function groupCompareModel(a: GroupProfile, b: GroupProfile): MetricComparison[] {
  return METRICS.map((metric) => {
    const va = a.metric_means[metric] ?? null;
    const vb = b.metric_means[metric] ?? null;
    return {
      metric,
      a: va,
      b: vb,
      delta: va !== null && vb !== null ? vb - va : null,
    };
  });
}

export function candidateCompareModel(a: ResultRow, b: ResultRow): MetricComparison[] {
  return METRICS.map((metric) => {
    const va = (a as Record<string, unknown>)[metric];
    const vb = (b as Record<string, unknown>)[metric];
    const na = typeof va === "number" ? va : null;
    const nb = typeof vb === "number" ? vb : null;
    return { metric, a: na, b: nb, delta: na !== null && nb !== null ? nb - na : null };
  });
}
