/**
 * Typed client for the auditing service. One method per endpoint, no
 * interpretation of the payloads beyond JSON parsing; the fetch
 * implementation is injectable so tests can answer with canned payloads.
 */

import type {
  AccountantRequestBody,
  AccountantResponse,
  AttackRequestBody,
  AttackResponse,
  DatasetEntry,
  JobView,
  PriorEntry,
  SweepReport,
} from "./types.js";

export interface FetchResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<FetchResponseLike>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ServiceError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchLike: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    path: string,
    init?: { method?: string; headers?: Record<string, string>; body?: string },
  ): Promise<T> {
    const res = await this.fetchLike(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = `HTTP ${res.status}`;
      try {
        const body = (await res.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) {
          detail =
            typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ServiceError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  async datasets(): Promise<DatasetEntry[]> {
    const data = await this.request<{ datasets: DatasetEntry[] }>("/datasets");
    return data.datasets;
  }

  async priors(): Promise<PriorEntry[]> {
    const data = await this.request<{ priors: PriorEntry[] }>("/priors");
    return data.priors;
  }

  accountant(body: AccountantRequestBody): Promise<AccountantResponse> {
    return this.post("/accountant", body);
  }

  attack(body: AttackRequestBody): Promise<AttackResponse> {
    return this.post("/attack", body);
  }

  async submitSweep(config: unknown): Promise<string> {
    const data = await this.post<{ job_id: string }>("/sweep", config);
    return data.job_id;
  }

  job(jobId: string): Promise<JobView> {
    return this.request(`/jobs/${jobId}`);
  }

  report(jobId: string): Promise<SweepReport> {
    return this.request(`/report/${jobId}`);
  }
}
