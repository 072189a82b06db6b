import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike, ServiceError } from "../src/api.js";
import { ACCOUNTANT_LADDER, NOISELESS_ATTACK } from "./fixtures.js";

interface Route {
  status?: number;
  body: unknown;
  /** When set, res.json() rejects, as it would for a non-JSON error page. */
  unparseable?: boolean;
}

interface RecordedCall {
  url: string;
  init?: { method?: string; headers?: Record<string, string>; body?: string };
}

function canned(routes: Record<string, Route>) {
  const calls: RecordedCall[] = [];
  const fetchLike: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const route = routes[url];
    if (!route) {
      throw new Error(`unexpected request ${url}`);
    }
    const status = route.status ?? 200;
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => {
        if (route.unparseable) {
          throw new SyntaxError("not json");
        }
        return route.body;
      },
    };
  };
  return { calls, fetchLike };
}

describe("ApiClient", () => {
  it("unwraps catalog envelopes", async () => {
    const entry = {
      name: "builtin:blobs_a",
      family: "blobs_a",
      height: 16,
      width: 16,
      channels: 1,
      n: 64,
      builtin: true,
    };
    const { fetchLike } = canned({ "/datasets": { body: { datasets: [entry] } } });
    const api = new ApiClient("", fetchLike);
    expect(await api.datasets()).toEqual([entry]);
  });

  it("posts attack requests as JSON and returns the payload untouched", async () => {
    const { calls, fetchLike } = canned({ "/attack": { body: NOISELESS_ATTACK } });
    const api = new ApiClient("", fetchLike);
    const body = {
      dataset: "builtin:blobs_a",
      index: 0,
      prior: "builtin:isotropic",
      clip_norm: 100,
      sigma: 0,
      mode: "single" as const,
      k: 5,
      lambda_known: true,
      seed: 1,
    };
    const result = await api.attack(body);
    expect(result).toEqual(NOISELESS_ATTACK);
    expect(calls).toHaveLength(1);
    expect(calls[0].init?.method).toBe("POST");
    expect(calls[0].init?.headers?.["Content-Type"]).toBe("application/json");
    expect(JSON.parse(calls[0].init?.body ?? "")).toEqual(body);
  });

  it("prefixes the base url and addresses job routes by id", async () => {
    const { calls, fetchLike } = canned({
      "http://lab:8000/jobs/job-0007": {
        body: { id: "job-0007", status: "running", error: null },
      },
    });
    const api = new ApiClient("http://lab:8000", fetchLike);
    const view = await api.job("job-0007");
    expect(view.status).toBe("running");
    expect(calls[0].url).toBe("http://lab:8000/jobs/job-0007");
  });

  it("returns accountant payloads verbatim", async () => {
    const { fetchLike } = canned({ "/accountant": { body: ACCOUNTANT_LADDER[0] } });
    const api = new ApiClient("", fetchLike);
    const res = await api.accountant({ mu: 1, T: 1000, p: 0.01, delta: 1e-5 });
    expect(res).toEqual(ACCOUNTANT_LADDER[0]);
  });

  it("unwraps sweep submissions to the job id", async () => {
    const { fetchLike } = canned({ "/sweep": { body: { job_id: "job-0001" } } });
    const api = new ApiClient("", fetchLike);
    expect(await api.submitSweep({ grid: [{ mu: 5 }] })).toBe("job-0001");
  });

  it("raises ServiceError with the service's detail string", async () => {
    const { fetchLike } = canned({
      "/attack": { status: 400, body: { detail: "mu must be positive" } },
    });
    const api = new ApiClient("", fetchLike);
    const err = await api
      .attack({
        dataset: "x",
        index: 0,
        prior: "p",
        clip_norm: 1,
        mu: -1,
        mode: "single",
        k: 5,
        lambda_known: true,
        seed: 0,
      })
      .then(
        () => null,
        (e: unknown) => e,
      );
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(400);
    expect((err as ServiceError).message).toBe("mu must be positive");
  });

  it("stringifies structured validation details", async () => {
    const detail = [{ loc: ["body", "mu"], msg: "mu must be positive" }];
    const { fetchLike } = canned({ "/accountant": { status: 422, body: { detail } } });
    const api = new ApiClient("", fetchLike);
    const err = await api.accountant({ mu: -1, T: 1, p: 1, delta: 1e-5 }).then(
      () => null,
      (e: unknown) => e,
    );
    expect((err as ServiceError).message).toBe(JSON.stringify(detail));
  });

  it("falls back to the status line for non-JSON error bodies", async () => {
    const { fetchLike } = canned({
      "/health": { status: 502, body: null, unparseable: true },
    });
    const api = new ApiClient("", fetchLike);
    const err = await api.health().then(
      () => null,
      (e: unknown) => e,
    );
    expect((err as ServiceError).message).toBe("HTTP 502");
  });
});
