import { z } from "zod";
import {
  ApiError,
  EvaluateResponse,
  ExplorationRecord,
  GroupProfile,
  Job,
  Manifest,
  Profile,
  ResultRow,
  Session,
  SpecSummary,
  Stage,
} from "./types.js";
import type { Point } from "./geometry.js";

export class EngineError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public location?: { line: number; col: number },
  ) {
    super(message);
  }
}

export interface Region {
  x_metric: string;
  y_metric: string;
  polygon?: Point[];
  x?: [number, number];
  y?: [number, number];
}

const resultsEnvelope = z.object({ results: z.array(ResultRow) });
const matrixEnvelope = z.object({ matrix: z.record(z.array(z.number())) });
const compareEnvelope = z.object({ group_a: GroupProfile, group_b: GroupProfile });

/** Thin typed client; every response body is schema-validated. */
export class ApiClient {
  constructor(private baseUrl: string) {}

  private async request<T>(
    schema: z.ZodType<T>,
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const doc = await resp.json();
    if (!resp.ok) {
      const parsed = ApiError.safeParse(doc);
      if (parsed.success) {
        throw new EngineError(
          resp.status, parsed.data.code, parsed.data.message, parsed.data.location,
        );
      }
      throw new EngineError(resp.status, "error", JSON.stringify(doc));
    }
    return schema.parse(doc);
  }

  health() {
    return this.request(
      z.object({ status: z.string(), patients: z.number() }), "GET", "/api/health",
    );
  }

  parseSpec(text: string): Promise<SpecSummary> {
    return this.request(SpecSummary, "POST", "/api/spec", { text });
  }

  evaluate(text: string, threads?: number): Promise<EvaluateResponse> {
    return this.request(EvaluateResponse, "POST", "/api/grid/evaluate", {
      text,
      ...(threads !== undefined ? { threads } : {}),
    });
  }

  job(jobId: string): Promise<Job> {
    return this.request(Job, "GET", `/api/jobs/${jobId}`);
  }

  /** Poll until the evaluation job settles; throws on failure. */
  async waitForJob(jobId: string, intervalMs = 100, timeoutMs = 120_000): Promise<Job> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.job(jobId);
      if (job.state === "done") return job;
      if (job.state === "failed") {
        throw new EngineError(500, "job_failed", job.error ?? "evaluation failed");
      }
      if (Date.now() > deadline) {
        throw new EngineError(504, "job_timeout", `job ${jobId} did not finish`);
      }
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }

  manifest(gridId: string): Promise<Manifest> {
    return this.request(Manifest, "GET", `/api/grid/${gridId}/manifest`);
  }

  async candidates(
    gridId: string,
    constraints?: Record<string, Array<number | boolean>>,
    region?: Region,
  ) {
    const params = new URLSearchParams();
    if (constraints) params.set("constraints", JSON.stringify(constraints));
    if (region) params.set("region", JSON.stringify(region));
    const query = params.size ? `?${params}` : "";
    const doc = await this.request(
      resultsEnvelope, "GET", `/api/grid/${gridId}/candidates${query}`,
    );
    return doc.results;
  }

  profile(gridId: string, candidateId: number): Promise<Profile> {
    return this.request(
      Profile, "GET", `/api/candidates/${gridId}/${candidateId}/profile`,
    );
  }

  compareGroups(gridId: string, groupA: number[], groupB: number[]) {
    return this.request(compareEnvelope, "POST", "/api/groups/compare", {
      grid_id: gridId,
      group_a: groupA,
      group_b: groupB,
    });
  }

  createSession(specHash: string): Promise<Session> {
    return this.request(Session, "POST", "/api/sessions", { spec_hash: specHash });
  }

  session(sessionId: string): Promise<Session> {
    return this.request(Session, "GET", `/api/sessions/${sessionId}`);
  }

  createStage(
    sessionId: string,
    opts: { importance?: number; keywords?: string[]; description?: string } = {},
  ): Promise<Stage> {
    return this.request(Stage, "POST", `/api/sessions/${sessionId}/stages`, opts);
  }

  updateStage(
    sessionId: string,
    stageId: number,
    patch: { importance?: number; keywords?: string[]; description?: string },
  ): Promise<Stage> {
    return this.request(
      Stage, "PATCH", `/api/sessions/${sessionId}/stages/${stageId}`, patch,
    );
  }

  appendRecord(
    sessionId: string,
    stageId: number,
    record: {
      grid_id: string;
      kind: "criterion_adjust" | "lasso_select" | "axis_change";
      bindings_constraints?: Record<string, Array<number | boolean>>;
      selected_candidates?: number[];
      axes?: [string, string];
      viewport?: Record<string, unknown>;
    },
  ): Promise<ExplorationRecord> {
    return this.request(
      ExplorationRecord, "POST",
      `/api/sessions/${sessionId}/stages/${stageId}/records`, record,
    );
  }

  matrix(sessionId: string, stageId: number, gridId: string) {
    return this.request(
      matrixEnvelope, "GET",
      `/api/sessions/${sessionId}/stages/${stageId}/matrix?grid_id=${gridId}`,
    );
  }
}
