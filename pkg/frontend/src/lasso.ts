import type { ApiClient } from "./api.js";
import { pointInPolygon, type Point } from "./geometry.js";
import type { ResultRow } from "./types.js";

/**
 * Client-side lasso selection over the results table. Degenerate
 * candidates never match (they have no plotted position on metric axes),
 * mirroring the server's region-query semantics.
 */
export function lassoSelect(
  rows: ResultRow[],
  xMetric: string,
  yMetric: string,
  polygon: Point[],
): number[] {
  const ids: number[] = [];
  for (const row of rows) {
    if (row.status !== "ok") continue;
    const x = (row as Record<string, unknown>)[xMetric];
    const y = (row as Record<string, unknown>)[yMetric];
    if (typeof x !== "number" || typeof y !== "number") continue;
    if (pointInPolygon(x, y, polygon)) ids.push(row.candidate_id);
  }
  return ids;
}

export interface LassoConfirmation {
  ids: number[];
  serverIds: number[];
  confirmed: boolean;
}

/**
 * Evaluate the lasso locally for responsiveness, then confirm against the
 * server's region query. A mismatch is surfaced to the caller as a bug
 * (confirmed=false), never silently reconciled.
 */
export async function confirmLasso(
  client: ApiClient,
  gridId: string,
  rows: ResultRow[],
  xMetric: string,
  yMetric: string,
  polygon: Point[],
): Promise<LassoConfirmation> {
  const ids = lassoSelect(rows, xMetric, yMetric, polygon);
  const serverRows = await client.candidates(gridId, undefined, {
    x_metric: xMetric,
    y_metric: yMetric,
    polygon,
  });
  const serverIds = serverRows.map((r) => r.candidate_id);
  const confirmed =
    ids.length === serverIds.length && ids.every((id, i) => id === serverIds[i]);
  return { ids, serverIds, confirmed };
}
