/**
 * Client-side state of one auditing session and its pure transitions.
 *
 * The session mirrors server results verbatim: attack payloads, epsilon
 * read-outs and job reports are stored exactly as received, and every
 * number the panels show is formatted straight from these fields. User
 * inputs are kept as raw strings so validation happens in one place.
 */

import type {
  AccountantResponse,
  AttackRequestBody,
  AttackResponse,
  DatasetEntry,
  JobView,
  PriorEntry,
  SweepReport,
} from "./types.js";

export type ParamMode = "mu" | "cs";

export interface ParamState {
  mode: ParamMode;
  sliderIndex: number;
  clipNorm: string;
  sigma: string;
  index: string;
  consensus: boolean;
  k: string;
  lambdaKnown: boolean;
  seed: string;
}

export interface AccountantState {
  T: string;
  p: string;
  delta: string;
}

export interface JobEntry {
  view: JobView;
  report: SweepReport | null;
}

export interface AuditSession {
  datasets: DatasetEntry[];
  priors: PriorEntry[];
  dataset: string;
  prior: string;
  params: ParamState;
  accountant: AccountantState;
  epsilon: AccountantResponse | null;
  epsilonPending: boolean;
  result: AttackResponse | null;
  hideTarget: boolean;
  chosenLambdaRow: number | null;
  jobs: JobEntry[];
  sweepConfig: string;
  busy: boolean;
  error: string | null;
}

/** Slider stops: a geometric mu ladder from 0.5 to 100, 40 positions. */
export const MU_STOPS: number[] = Array.from({ length: 40 }, (_, i) =>
  Number((0.5 * Math.pow(200, i / 39)).toPrecision(3)),
);

export const DEFAULT_SWEEP_CONFIG = JSON.stringify(
  {
    dataset: { family: "blobs_a", height: 8, width: 8, channels: 1, seed: 2 },
    prior: { kind: "gmm_fit", k: 4, n_train: 64 },
    grid: [{ mu: 5 }, { mu: 10 }, { mu: 20 }],
    metrics: ["mse"],
    trials: 10,
    seed: 0,
  },
  null,
  2,
);

export function initialSession(): AuditSession {
  return {
    datasets: [],
    priors: [],
    dataset: "builtin:blobs_a",
    prior: "builtin:isotropic",
    params: {
      mode: "mu",
      sliderIndex: 26,
      clipNorm: "1.0",
      sigma: "0.1",
      index: "0",
      consensus: false,
      k: "5",
      lambdaKnown: true,
      seed: "0",
    },
    accountant: { T: "1000", p: "0.01", delta: "1e-5" },
    epsilon: null,
    epsilonPending: false,
    result: null,
    hideTarget: false,
    chosenLambdaRow: null,
    jobs: [],
    sweepConfig: DEFAULT_SWEEP_CONFIG,
    busy: false,
    error: null,
  };
}

export function currentMu(session: AuditSession): number {
  const i = Math.min(Math.max(session.params.sliderIndex, 0), MU_STOPS.length - 1);
  return MU_STOPS[i];
}

function parsePositive(text: string): number | null {
  const v = Number(text);
  return Number.isFinite(v) && v > 0 ? v : null;
}

function parseIndex(text: string): number | null {
  const v = Number(text);
  return Number.isInteger(v) && v >= 0 ? v : null;
}

/**
 * One validation message or null when the parameters are submittable.
 * A noiseless release (sigma exactly 0) is valid; only negative or
 * non-numeric noise multipliers are rejected.
 */
export function validateParams(session: AuditSession): string | null {
  const p = session.params;
  if (parsePositive(p.clipNorm) === null) {
    return "clip norm must be a positive number";
  }
  if (p.mode === "cs") {
    const sigma = Number(p.sigma);
    if (!Number.isFinite(sigma) || sigma < 0) {
      return "noise multiplier must be a nonnegative number";
    }
  }
  const index = parseIndex(p.index);
  if (index === null) {
    return "target index must be a nonnegative integer";
  }
  const entry = session.datasets.find((d) => d.name === session.dataset);
  if (entry && index >= entry.n) {
    return `target index outside dataset of ${entry.n}`;
  }
  if (p.consensus) {
    const k = Number(p.k);
    if (!Number.isInteger(k) || k < 2) {
      return "consensus needs at least 2 samples";
    }
  }
  if (parseIndex(p.seed) === null) {
    return "seed must be a nonnegative integer";
  }
  return null;
}

/** Attack request for the current parameters, or null while invalid. */
export function attackBody(session: AuditSession): AttackRequestBody | null {
  if (validateParams(session) !== null) {
    return null;
  }
  const p = session.params;
  const body: AttackRequestBody = {
    dataset: session.dataset,
    index: Number(p.index),
    prior: session.prior,
    clip_norm: Number(p.clipNorm),
    mode: p.consensus ? "consensus" : "single",
    k: p.consensus ? Number(p.k) : 5,
    lambda_known: p.lambdaKnown,
    seed: Number(p.seed),
  };
  if (p.mode === "mu") {
    body.mu = currentMu(session);
  } else {
    body.sigma = Number(p.sigma);
  }
  return body;
}

/**
 * The mu to ask the accountant about for the live epsilon read-out:
 * the slider value in mu mode, C / sigma in (C, sigma) mode. A noiseless
 * release has no finite budget, so "noiseless" short-circuits the
 * request and the read-out shows the infinity the attack payload would
 * carry.
 */
export function epsilonQuery(session: AuditSession): number | "noiseless" | null {
  const p = session.params;
  if (p.mode === "mu") {
    return currentMu(session);
  }
  const clip = parsePositive(p.clipNorm);
  const sigma = Number(p.sigma);
  if (clip === null || !Number.isFinite(sigma) || sigma < 0) {
    return null;
  }
  if (sigma === 0) {
    return "noiseless";
  }
  return clip / sigma;
}

export function accountantConfig(
  session: AuditSession,
): { T: number; p: number; delta: number } | null {
  const T = Number(session.accountant.T);
  const p = Number(session.accountant.p);
  const delta = Number(session.accountant.delta);
  if (!Number.isInteger(T) || T < 1) {
    return null;
  }
  if (!(p > 0 && p <= 1) || !(delta > 0 && delta < 1)) {
    return null;
  }
  return { T, p, delta };
}

// --- transitions, all returning a fresh session ---------------------------

export function withCatalog(
  session: AuditSession,
  datasets: DatasetEntry[],
  priors: PriorEntry[],
): AuditSession {
  const dataset = datasets.some((d) => d.name === session.dataset)
    ? session.dataset
    : (datasets[0]?.name ?? session.dataset);
  const prior = priors.some((p) => p.name === session.prior)
    ? session.prior
    : (priors[0]?.name ?? session.prior);
  return { ...session, datasets, priors, dataset, prior };
}

export function withParam<K extends keyof ParamState>(
  session: AuditSession,
  key: K,
  value: ParamState[K],
): AuditSession {
  return { ...session, params: { ...session.params, [key]: value } };
}

export function withAccountantField(
  session: AuditSession,
  key: keyof AccountantState,
  value: string,
): AuditSession {
  return { ...session, accountant: { ...session.accountant, [key]: value } };
}

export function withEpsilon(
  session: AuditSession,
  epsilon: AccountantResponse | null,
): AuditSession {
  return { ...session, epsilon, epsilonPending: false };
}

export function withEpsilonPending(session: AuditSession): AuditSession {
  return { ...session, epsilon: null, epsilonPending: true };
}

export function withResult(session: AuditSession, result: AttackResponse): AuditSession {
  return { ...session, result, chosenLambdaRow: null, error: null };
}

export function withHideTarget(session: AuditSession, hide: boolean): AuditSession {
  return { ...session, hideTarget: hide };
}

export function withChosenLambdaRow(
  session: AuditSession,
  row: number | null,
): AuditSession {
  return { ...session, chosenLambdaRow: row };
}

export function withError(session: AuditSession, error: string | null): AuditSession {
  return { ...session, error };
}

export function withBusy(session: AuditSession, busy: boolean): AuditSession {
  return { ...session, busy };
}

export function upsertJob(session: AuditSession, view: JobView): AuditSession {
  const jobs = session.jobs.slice();
  const at = jobs.findIndex((j) => j.view.id === view.id);
  if (at < 0) {
    jobs.push({ view, report: null });
  } else {
    jobs[at] = { ...jobs[at], view };
  }
  return { ...session, jobs };
}

export function attachReport(
  session: AuditSession,
  jobId: string,
  report: SweepReport,
): AuditSession {
  const jobs = session.jobs.map((j) =>
    j.view.id === jobId ? { ...j, report } : j,
  );
  return { ...session, jobs };
}
