/**
 * Event wiring between the DOM and the session. Structural changes
 * re-render the whole app; keystrokes and slider moves only patch the
 * read-outs so inputs keep focus. The epsilon read-out is debounced and
 * generation-guarded, since slider drags fire faster than the accountant
 * answers.
 */

import { ApiClient, ServiceError } from "./api.js";
import { epsilonReadout, muReadout, renderApp } from "./render.js";
import {
  AuditSession,
  accountantConfig,
  attachReport,
  attackBody,
  epsilonQuery,
  initialSession,
  upsertJob,
  validateParams,
  withAccountantField,
  withBusy,
  withCatalog,
  withChosenLambdaRow,
  withEpsilon,
  withEpsilonPending,
  withError,
  withHideTarget,
  withParam,
  withResult,
} from "./session.js";

const EPSILON_DEBOUNCE_MS = 150;
const JOB_POLL_MS = 1000;

function describe(err: unknown): string {
  if (err instanceof ServiceError) {
    return `service error ${err.status}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export class DashboardController {
  private session: AuditSession = initialSession();
  private epsilonTimer: ReturnType<typeof setTimeout> | undefined;
  private epsilonGeneration = 0;
  private readonly polling = new Set<string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async init(): Promise<void> {
    this.root.addEventListener("input", (ev) => this.onInput(ev));
    this.root.addEventListener("change", (ev) => this.onChange(ev));
    this.root.addEventListener("click", (ev) => this.onClick(ev));
    try {
      const [datasets, priors] = await Promise.all([
        this.api.datasets(),
        this.api.priors(),
      ]);
      this.session = withCatalog(this.session, datasets, priors);
    } catch (err) {
      this.session = withError(this.session, describe(err));
    }
    this.render();
    this.refreshEpsilon();
  }

  private render(): void {
    this.root.innerHTML = renderApp(this.session);
  }

  /** Patch read-outs and validation in place, leaving input focus alone. */
  private updateReadouts(): void {
    const mu = this.root.querySelector<HTMLElement>("#mu-value");
    const eps = this.root.querySelector<HTMLElement>("#epsilon-value");
    const msg = this.root.querySelector<HTMLElement>("#validation-msg");
    const submit = this.root.querySelector<HTMLButtonElement>("#attack-submit");
    if (mu) {
      mu.textContent = `μ = ${muReadout(this.session)}`;
    }
    if (eps) {
      eps.textContent = `ε = ${epsilonReadout(this.session)}`;
    }
    const err = validateParams(this.session);
    if (msg) {
      msg.textContent = err ?? "";
      msg.classList.toggle("hidden", err === null);
    }
    if (submit) {
      submit.disabled = err !== null || this.session.busy;
    }
  }

  private onInput(ev: Event): void {
    const el = ev.target as HTMLInputElement | HTMLTextAreaElement;
    let touchesEpsilon = false;
    switch (el.id) {
      case "mu-slider":
        this.session = withParam(this.session, "sliderIndex", Number(el.value));
        touchesEpsilon = true;
        break;
      case "clip-input":
        this.session = withParam(this.session, "clipNorm", el.value);
        touchesEpsilon = true;
        break;
      case "sigma-input":
        this.session = withParam(this.session, "sigma", el.value);
        touchesEpsilon = true;
        break;
      case "index-input":
        this.session = withParam(this.session, "index", el.value);
        break;
      case "seed-input":
        this.session = withParam(this.session, "seed", el.value);
        break;
      case "k-input":
        this.session = withParam(this.session, "k", el.value);
        break;
      case "acct-T":
      case "acct-p":
      case "acct-delta":
        this.session = withAccountantField(
          this.session,
          el.id === "acct-T" ? "T" : el.id === "acct-p" ? "p" : "delta",
          el.value,
        );
        touchesEpsilon = true;
        break;
      case "sweep-config":
        this.session = { ...this.session, sweepConfig: el.value };
        return;
      default:
        return;
    }
    this.updateReadouts();
    if (touchesEpsilon) {
      this.refreshEpsilon();
    }
  }

  private onChange(ev: Event): void {
    const el = ev.target as HTMLInputElement | HTMLSelectElement;
    switch (el.id) {
      case "dataset-select":
        this.session = { ...this.session, dataset: el.value };
        break;
      case "prior-select":
        this.session = { ...this.session, prior: el.value };
        break;
      case "mode-mu":
      case "mode-cs":
        this.session = withParam(this.session, "mode", el.id === "mode-mu" ? "mu" : "cs");
        break;
      case "consensus-toggle":
        this.session = withParam(
          this.session,
          "consensus",
          (el as HTMLInputElement).checked,
        );
        break;
      case "lambda-toggle":
        this.session = withParam(
          this.session,
          "lambdaKnown",
          (el as HTMLInputElement).checked,
        );
        break;
      default:
        return;
    }
    this.render();
    this.refreshEpsilon();
  }

  private onClick(ev: Event): void {
    const el = ev.target as HTMLElement;
    if (el.id === "attack-submit") {
      void this.runAttack();
      return;
    }
    if (el.id === "hide-target") {
      this.session = withHideTarget(this.session, !this.session.hideTarget);
      this.render();
      return;
    }
    if (el.id === "sweep-submit") {
      void this.submitSweep();
      return;
    }
    const row = el.closest<HTMLElement>("[data-lambda-row]");
    if (row) {
      this.session = withChosenLambdaRow(this.session, Number(row.dataset.lambdaRow));
      this.render();
    }
  }

  private refreshEpsilon(): void {
    if (this.epsilonTimer !== undefined) {
      clearTimeout(this.epsilonTimer);
    }
    this.epsilonTimer = setTimeout(() => void this.fetchEpsilon(), EPSILON_DEBOUNCE_MS);
  }

  private async fetchEpsilon(): Promise<void> {
    const generation = ++this.epsilonGeneration;
    const query = epsilonQuery(this.session);
    const cfg = accountantConfig(this.session);
    if (typeof query !== "number" || cfg === null) {
      // nothing to ask: the read-out renders infinity or n/a on its own
      this.session = withEpsilon(this.session, null);
      this.updateReadouts();
      return;
    }
    this.session = withEpsilonPending(this.session);
    this.updateReadouts();
    try {
      const res = await this.api.accountant({
        mu: query,
        T: cfg.T,
        p: cfg.p,
        delta: cfg.delta,
      });
      if (generation !== this.epsilonGeneration) {
        return;
      }
      this.session = withEpsilon(this.session, res);
    } catch {
      if (generation !== this.epsilonGeneration) {
        return;
      }
      this.session = withEpsilon(this.session, null);
    }
    this.updateReadouts();
  }

  private async runAttack(): Promise<void> {
    const body = attackBody(this.session);
    if (body === null || this.session.busy) {
      return;
    }
    this.session = withBusy(withError(this.session, null), true);
    this.render();
    try {
      const result = await this.api.attack(body);
      this.session = withResult(this.session, result);
    } catch (err) {
      this.session = withError(this.session, describe(err));
    }
    this.session = withBusy(this.session, false);
    this.render();
    this.refreshEpsilon();
  }

  private async submitSweep(): Promise<void> {
    let config: unknown;
    try {
      config = JSON.parse(this.session.sweepConfig);
    } catch (err) {
      this.session = withError(this.session, `sweep config is not valid JSON: ${describe(err)}`);
      this.render();
      return;
    }
    try {
      const jobId = await this.api.submitSweep(config);
      this.session = upsertJob(withError(this.session, null), {
        id: jobId,
        status: "queued",
        error: null,
      });
      this.render();
      this.pollJob(jobId);
    } catch (err) {
      this.session = withError(this.session, describe(err));
      this.render();
    }
  }

  private pollJob(jobId: string): void {
    if (this.polling.has(jobId)) {
      return;
    }
    this.polling.add(jobId);
    const tick = async (): Promise<void> => {
      try {
        const view = await this.api.job(jobId);
        this.session = upsertJob(this.session, view);
        if (view.status === "done") {
          const report = await this.api.report(jobId);
          this.session = attachReport(this.session, jobId, report);
        }
        this.render();
        if (view.status === "queued" || view.status === "running") {
          setTimeout(() => void tick(), JOB_POLL_MS);
        } else {
          this.polling.delete(jobId);
        }
      } catch (err) {
        this.polling.delete(jobId);
        this.session = withError(this.session, describe(err));
        this.render();
      }
    };
    setTimeout(() => void tick(), JOB_POLL_MS);
  }
}
