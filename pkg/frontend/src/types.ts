/**
 * JSON payload shapes of the auditing service, mirrored field for field.
 *
 * Floats that can be non-finite arrive as the strings "inf" / "-inf" /
 * "nan" (JSON has no spelling for them); `Serialized` covers both forms.
 * The client never recomputes any of these values, it only parses and
 * formats them.
 */

export type Serialized = number | "inf" | "-inf" | "nan";

export interface DatasetEntry {
  name: string;
  family: string;
  height: number;
  width: number;
  channels: number;
  n: number;
  builtin: boolean;
}

export interface PriorEntry {
  name: string;
  kind: "isotropic" | "gmm" | "denoiser";
  builtin: boolean;
  components?: number;
  dimension?: number;
}

export interface AccountantResponse {
  mu: Serialized;
  epsilon: Serialized;
  best_order: number;
  delta: number;
}

export interface PaneMetrics {
  mse: Serialized;
  ssim: Serialized | null;
}

export interface LambdaTable {
  candidates: number[];
  scores: (Serialized | null)[];
  lambda_hat: number | null;
}

export interface AttackResponse {
  mu: Serialized;
  epsilon: Serialized;
  clip_norm: number;
  sigma: number;
  lambda_used: number;
  t_start: number;
  mode: "single" | "consensus";
  seed: number;
  original_b64: string;
  noisy_b64: string;
  reconstruction_b64: string;
  metrics: PaneMetrics;
  noisy_metrics: PaneMetrics;
  lossy: { original: boolean; noisy: boolean; reconstruction: boolean };
  lambda_table: LambdaTable | null;
  consensus_b64?: string[];
  consensus_consistency?: { metric: string; value: Serialized };
}

export interface AttackRequestBody {
  image_b64?: string;
  dataset?: string;
  index: number;
  prior: string;
  clip_norm: number;
  mu?: number;
  sigma?: number;
  mode: "single" | "consensus";
  k: number;
  lambda_known: boolean;
  seed: number;
}

export interface AccountantRequestBody {
  mu: number;
  T: number;
  p: number;
  delta: number;
}

export interface JobView {
  id: string;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
}

export interface SweepRow {
  label: string;
  mu: Serialized;
  clip_norm: number;
  sigma: Serialized;
  epsilon: Serialized;
  status: "ok" | "failed";
  error: string | null;
  stats: Record<string, Serialized>;
}

export interface SweepReport {
  rows: SweepRow[];
  reference: Record<string, Serialized>;
  manifest: Record<string, unknown>;
  csv: string;
}
