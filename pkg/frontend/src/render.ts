/**
 * Panel renderers: session in, HTML string out. No DOM access here, so
 * every visual decision is testable as a plain string assertion. All
 * numbers pass through `fmt`, which keeps the display glued to the
 * service payloads.
 */

import { fmt } from "./format.js";
import {
  AuditSession,
  JobEntry,
  MU_STOPS,
  currentMu,
  epsilonQuery,
  validateParams,
} from "./session.js";
import type { LambdaTable, PaneMetrics, SweepReport } from "./types.js";

export function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderApp(session: AuditSession): string {
  const error = session.error
    ? `<p class="error-strip">${esc(session.error)}</p>`
    : "";
  return `<header><h1>release auditing</h1></header>
${error}
${renderParameterPanel(session)}
${renderComparison(session)}
${renderJobs(session)}`;
}

export function muReadout(session: AuditSession): string {
  const q = epsilonQuery(session);
  if (q === null) {
    return "n/a";
  }
  return q === "noiseless" ? fmt("inf") : fmt(q);
}

/**
 * The epsilon next to the slider. A noiseless release shows the same
 * infinity its attack payload will carry; otherwise the last accountant
 * response is displayed and an ellipsis marks one still in flight.
 */
export function epsilonReadout(session: AuditSession): string {
  const q = epsilonQuery(session);
  if (q === null) {
    return "n/a";
  }
  if (q === "noiseless") {
    return fmt("inf");
  }
  if (session.epsilon) {
    return fmt(session.epsilon.epsilon);
  }
  return session.epsilonPending ? "…" : "n/a";
}

export function renderParameterPanel(session: AuditSession): string {
  const p = session.params;
  const err = validateParams(session);
  const datasetOptions = session.datasets
    .map(
      (d) =>
        `<option value="${esc(d.name)}"${d.name === session.dataset ? " selected" : ""}>` +
        `${esc(d.name)} (${d.height}×${d.width}, n=${d.n})</option>`,
    )
    .join("");
  const priorOptions = session.priors
    .map((pr) => {
      const detail =
        pr.kind === "gmm"
          ? ` (mixture, k=${pr.components})`
          : pr.kind === "denoiser"
            ? " (network)"
            : "";
      return (
        `<option value="${esc(pr.name)}"${pr.name === session.prior ? " selected" : ""}>` +
        `${esc(pr.name)}${detail}</option>`
      );
    })
    .join("");
  const muMode = p.mode === "mu";
  return `<section class="panel parameters">
  <div class="row">
    <label>dataset <select id="dataset-select">${datasetOptions}</select></label>
    <label>index <input id="index-input" type="number" min="0" value="${esc(p.index)}" /></label>
    <label>prior <select id="prior-select">${priorOptions}</select></label>
  </div>
  <div class="row">
    <label><input type="radio" name="param-mode" id="mode-mu" value="mu"${muMode ? " checked" : ""} /> strength μ</label>
    <label><input type="radio" name="param-mode" id="mode-cs" value="cs"${muMode ? "" : " checked"} /> explicit (C, σ)</label>
  </div>
  <div class="row slider-row">
    <input type="range" id="mu-slider" min="0" max="${MU_STOPS.length - 1}" step="1"
      value="${p.sliderIndex}"${muMode ? "" : " disabled"} />
    <p class="readout"><span id="mu-value">μ = ${muReadout(session)}</span>
      <span id="epsilon-value">ε = ${epsilonReadout(session)}</span></p>
  </div>
  <div class="row">
    <label>clip norm C <input id="clip-input" value="${esc(p.clipNorm)}" /></label>
    <label>noise σ <input id="sigma-input" value="${esc(p.sigma)}"${muMode ? " disabled" : ""} /></label>
    <label>seed <input id="seed-input" type="number" min="0" value="${esc(p.seed)}" /></label>
  </div>
  <div class="row">
    <label>T <input id="acct-T" value="${esc(session.accountant.T)}" /></label>
    <label>p <input id="acct-p" value="${esc(session.accountant.p)}" /></label>
    <label>δ <input id="acct-delta" value="${esc(session.accountant.delta)}" /></label>
  </div>
  <div class="row">
    <label><input type="checkbox" id="consensus-toggle"${p.consensus ? " checked" : ""} /> consensus</label>
    <label>k <input id="k-input" type="number" min="2" value="${esc(p.k)}"${p.consensus ? "" : " disabled"} /></label>
    <label><input type="checkbox" id="lambda-toggle"${p.lambdaKnown ? " checked" : ""} /> clip factor known</label>
    <button id="attack-submit"${err !== null || session.busy ? " disabled" : ""}>run attack</button>
  </div>
  <p id="validation-msg" class="invalid${err === null ? " hidden" : ""}">${err === null ? "" : esc(err)}</p>
</section>`;
}

function badges(metrics: PaneMetrics): string {
  return (
    `<span class="badge">MSE ${fmt(metrics.mse)}</span>` +
    `<span class="badge">SSIM ${fmt(metrics.ssim)}</span>`
  );
}

function pane(id: string, label: string, b64: string, extras: string): string {
  return `<figure class="pane" data-pane="${id}">
  <img alt="${esc(label)}" src="data:image/png;base64,${b64}" />
  <figcaption>${esc(label)}${extras}</figcaption>
</figure>`;
}

function lossyMark(lossy: boolean): string {
  return lossy
    ? ' <span class="lossy" title="PNG encoding clamped values outside [0, 1]">lossy</span>'
    : "";
}

/**
 * Side-by-side grid of the last result. Hiding the target drops the
 * original pane and every target-relative metric, which is exactly the
 * adversary's view; the consensus consistency badge survives because it
 * compares reconstructions only with each other.
 */
export function renderComparison(session: AuditSession): string {
  const r = session.result;
  if (r === null) {
    return `<section class="panel comparison"><p class="hint">no result yet; run an attack</p></section>`;
  }
  const hidden = session.hideTarget;
  const panes: string[] = [];
  if (!hidden) {
    panes.push(pane("original", "original", r.original_b64, lossyMark(r.lossy.original)));
  }
  panes.push(
    pane(
      "noisy",
      "privatized release",
      r.noisy_b64,
      lossyMark(r.lossy.noisy) + (hidden ? "" : badges(r.noisy_metrics)),
    ),
  );
  panes.push(
    pane(
      "reconstruction",
      "reconstruction",
      r.reconstruction_b64,
      lossyMark(r.lossy.reconstruction) + (hidden ? "" : badges(r.metrics)),
    ),
  );
  if (r.consensus_b64) {
    r.consensus_b64.forEach((b64, i) => {
      panes.push(pane(`consensus-${i}`, `sample ${i + 1}`, b64, ""));
    });
  }
  const consistency = r.consensus_consistency
    ? `<span class="badge consistency">pairwise ${esc(r.consensus_consistency.metric)} ` +
      `${fmt(r.consensus_consistency.value)}</span>`
    : "";
  const summary =
    `<p class="result-summary">μ = ${fmt(r.mu)} · ε = ${fmt(r.epsilon)} · ` +
    `λ used = ${fmt(r.lambda_used)} · start step ${r.t_start} · seed ${r.seed} ` +
    `${consistency}</p>`;
  const toggle = `<button id="hide-target">${hidden ? "show target" : "hide target"}</button>`;
  const lambdaTable = r.lambda_table
    ? renderLambdaTable(r.lambda_table, session.chosenLambdaRow)
    : "";
  return `<section class="panel comparison">
${summary}
<div class="pane-grid">${panes.join("\n")}</div>
${toggle}
${lambdaTable}
</section>`;
}

/** Candidate grid of the clip-factor search; the service's pick is marked. */
export function renderLambdaTable(table: LambdaTable, chosenRow: number | null): string {
  const rows = table.candidates
    .map((candidate, i) => {
      const classes = [
        candidate === table.lambda_hat ? "estimate" : "",
        i === chosenRow ? "selected" : "",
      ]
        .filter(Boolean)
        .join(" ");
      const attr = classes ? ` class="${classes}"` : "";
      return (
        `<tr${attr} data-lambda-row="${i}">` +
        `<td>${fmt(table.candidates[i])}</td><td>${fmt(table.scores[i])}</td></tr>`
      );
    })
    .join("");
  const hat = table.lambda_hat === null ? "n/a" : fmt(table.lambda_hat);
  return `<div class="lambda-table">
<h3>clip-factor candidates (λ̂ = ${hat})</h3>
<table><thead><tr><th>λ</th><th>log score</th></tr></thead><tbody>${rows}</tbody></table>
</div>`;
}

export function renderJobs(session: AuditSession): string {
  const items = session.jobs.map(renderJob).join("\n");
  return `<section class="panel jobs">
<h2>sweep jobs</h2>
<textarea id="sweep-config" rows="8" spellcheck="false">${esc(session.sweepConfig)}</textarea>
<button id="sweep-submit">submit sweep</button>
${items ? `<ul class="job-list">${items}</ul>` : '<p class="hint">no jobs yet</p>'}
</section>`;
}

function renderJob(entry: JobEntry): string {
  const { view, report } = entry;
  const chip = `<span class="status status-${view.status}">${view.status}</span>`;
  const error = view.error ? ` <span class="job-error">${esc(view.error)}</span>` : "";
  const body = report ? renderReport(report) : "";
  return `<li class="job" data-job="${esc(view.id)}">${esc(view.id)} ${chip}${error}${body}</li>`;
}

function renderReport(report: SweepReport): string {
  const keys = [...new Set(report.rows.flatMap((row) => Object.keys(row.stats)))];
  const head = ["label", "ε", ...keys, "status"]
    .map((h) => `<th>${esc(h)}</th>`)
    .join("");
  const rows = report.rows
    .map((row) => {
      const cells = [
        `<td>${esc(row.label)}</td>`,
        `<td>${fmt(row.epsilon)}</td>`,
        ...keys.map((k) => `<td>${k in row.stats ? fmt(row.stats[k]) : ""}</td>`),
        `<td>${row.status === "ok" ? "ok" : esc(row.error ?? "failed")}</td>`,
      ];
      return `<tr>${cells.join("")}</tr>`;
    })
    .join("");
  return `<table class="report"><thead><tr>${head}</tr></thead><tbody>${rows}</tbody></table>`;
}
