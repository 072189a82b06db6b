"""Command line front end.

One subcommand per workflow stage: generate data, fit or train a prior,
attack a single release, sweep a privacy grid, run the matching baseline,
query the accountant, or host the HTTP service. Every subcommand takes a
single --seed that pins all of its randomness.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..accountant import (
    AccountantConfig,
    AccountingOverflowError,
    epsilon_to_mu,
    mu_to_epsilon,
)
from ..baselines import ReRoConfig, approximate_lambda, rero_gamma
from ..core import Metric, mse
from ..diffusion import consensus_reconstruct, linear_schedule, reconstruct
from ..priors import (
    ContainerFormatError,
    DatasetSpec,
    GmmPrior,
    TrainConfig,
    TrainingDivergedError,
    fit_gmm,
    generate_dataset,
    gmm_predictor,
    load_container,
    load_dataset,
    load_denoiser,
    load_prior,
    save_dataset,
    save_denoiser,
    save_prior,
    train_toy_denoiser,
)
from ..release import PrivacyParams, PrivatizedObservation, privatize
from .config import AttackMode, ExperimentConfig, GridPoint, PriorSource
from .imageio import read_image, write_image
from .service import jsonable, safe_ssim, serve
from .sweep import epsilon_for_mu, run_sweep

__all__ = ["build_parser", "main"]


def _dataset_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--family", default="blobs_a", help="blobs_a, blobs_b or bars")
    sub.add_argument("--height", type=int, default=8)
    sub.add_argument("--width", type=int, default=8)
    sub.add_argument("--channels", type=int, default=1, choices=(1, 3))


def _privacy_args(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--mu", type=float, help="release strength C / sigma")
    group.add_argument("--sigma", type=float, help="noise multiplier")
    sub.add_argument("--clip-norm", type=float, default=1.0)


def _params_from(args) -> PrivacyParams:
    if args.mu is not None:
        return PrivacyParams.from_mu(args.mu, clip_norm=args.clip_norm)
    return PrivacyParams(clip_norm=args.clip_norm, sigma=args.sigma)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reconlab",
        description="reconstruction attacks on differentially private releases",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset container")
    _dataset_args(p)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-prior", help="fit a mixture prior on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-denoiser", help="train the toy network prior")
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--hidden", default="128,128", help="comma-separated layer widths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack", help="reconstruct one privatized release")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--image", help="PNG/PGM/PPM target image")
    source.add_argument("--dataset", help="dataset container to draw the target from")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--prior", help="prior or denoiser container (default: isotropic)")
    _privacy_args(p)
    p.add_argument("--mode", choices=("single", "consensus"), default="single")
    p.add_argument("--k", type=int, default=5, help="consensus sample count")
    p.add_argument(
        "--unknown-lambda",
        action="store_true",
        help="withhold the clip factor and estimate it from the grid search",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("sweep", help="run a privacy grid and emit a report")
    p.add_argument("--config", help="JSON experiment config; overrides other flags")
    _dataset_args(p)
    p.add_argument("--mus", default="5,10,20", help="comma-separated mu grid")
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument(
        "--mode",
        choices=[m.value for m in AttackMode],
        default=AttackMode.SINGLE.value,
    )
    p.add_argument("--consensus-k", type=int, default=5)
    p.add_argument("--metrics", default="mse", help="comma-separated: mse,ssim")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--prior-kind", choices=("gmm_fit", "toy_denoiser", "exact_gmm"), default="gmm_fit")
    p.add_argument("--prior-k", type=int, default=8)
    p.add_argument("--prior-n-train", type=int, default=256)
    p.add_argument("--prior-steps", type=int, default=2000)
    p.add_argument("--prior-path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="reports", help="report directory")

    p = sub.add_parser("rero", help="matching-baseline success rate")
    p.add_argument("--dataset", help="candidate pool container; default: generated")
    _dataset_args(p)
    p.add_argument("--n", type=int, default=256, help="pool size when generating")
    _privacy_args(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("accountant", help="convert mu to epsilon or back")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mu", type=float)
    group.add_argument("--epsilon", type=float)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--sampling-prob", type=float, default=2e-5)
    p.add_argument("--delta", type=float, default=1e-5)

    p = sub.add_parser("serve", help="host the auditing HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", help="container directory (default $RECONLAB_DATA_DIR or ./data)")

    return parser


def _cmd_gen_data(args) -> int:
    spec = DatasetSpec(
        family=args.family,
        height=args.height,
        width=args.width,
        channels=args.channels,
        seed=args.seed,
    )
    images = generate_dataset(spec, args.n)
    save_dataset(args.out, spec, images)
    print(f"wrote {args.n} {spec.family} images to {args.out}")
    return 0


def _cmd_fit_prior(args) -> int:
    spec, images = load_dataset(args.dataset)
    data = np.stack([im.data for im in images])
    prior = fit_gmm(data, k=args.k, seed=args.seed)
    save_prior(args.out, prior, meta={"k": args.k, "seed": args.seed, "family": spec.family})
    print(f"fit {args.k}-component prior on {len(images)} images -> {args.out}")
    return 0


def _cmd_train_denoiser(args) -> int:
    _, images = load_dataset(args.dataset)
    hidden = tuple(int(h) for h in args.hidden.split(","))
    if len(hidden) != 2:
        raise ValueError(f"--hidden needs two widths, got {args.hidden!r}")
    config = TrainConfig(steps=args.steps, hidden=hidden, seed=args.seed)
    net, history = train_toy_denoiser(images, linear_schedule(), config)
    save_denoiser(args.out, net, meta={"seed": args.seed})
    print(f"trained {args.steps} steps, final loss {history[-1]:.6f} -> {args.out}")
    return 0


def _load_predictor(path: str | None, schedule, dimension: int):
    if path is None:
        prior = GmmPrior(
            weights=np.array([1.0]),
            means=np.full((1, dimension), 0.5),
            variances=np.array([0.05]),
        )
        return gmm_predictor(prior, schedule)
    kind, _, _ = load_container(path)
    if kind == "gmm_prior":
        prior, _ = load_prior(path)
        return gmm_predictor(prior, schedule)
    return load_denoiser(path)


def _cmd_attack(args) -> int:
    if args.image is not None:
        target = read_image(args.image)
    else:
        _, images = load_dataset(args.dataset)
        if not 0 <= args.index < len(images):
            raise ValueError(f"--index {args.index} outside dataset of {len(images)}")
        target = images[args.index]
    params = _params_from(args)
    schedule = linear_schedule()
    predictor = _load_predictor(args.prior, schedule, target.size)
    obs = privatize(target, params, seed=args.seed)
    lambda_table = None
    attack_obs = obs
    if args.unknown_lambda:
        search = approximate_lambda(obs.without_lambda(), schedule, predictor)
        lambda_table = {
            "candidates": list(search.candidates),
            "scores": list(search.scores),
            "lambda_hat": search.lambda_hat,
        }
        if search.lambda_hat is None:
            raise ValueError(
                "prior cannot score clip-factor candidates; use a mixture prior"
            )
        attack_obs = PrivatizedObservation(
            x_priv=obs.x_priv, params=params, lam=search.lambda_hat
        )
    result = reconstruct(attack_obs, schedule, predictor, seed=args.seed)
    if args.mode == "consensus":
        image = consensus_reconstruct(
            attack_obs, schedule, predictor, k=args.k, seed=args.seed
        ).image
    else:
        image = result.image

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "original.png", target)
    noisy = obs.x_priv.with_data(obs.x_priv.data * result.lambda_used)
    noisy_lossy = write_image(out / "noisy.png", noisy)
    write_image(out / "reconstruction.png", image)
    mu_equiv = params.clip_norm / params.sigma if params.sigma > 0 else float("inf")
    summary = jsonable(
        {
            "mu": mu_equiv,
            "epsilon": epsilon_for_mu(mu_equiv),
            "lambda_used": result.lambda_used,
            "t_start": result.t_start,
            "mse": mse(image, target),
            "ssim": safe_ssim(image, target),
            "noisy_mse": mse(noisy, target),
            "noisy_lossy": noisy_lossy,
            "lambda_table": lambda_table,
        }
    )
    (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        grid = tuple(
            GridPoint(mu=float(m), clip_norm=args.clip_norm)
            for m in args.mus.split(",")
        )
        cfg = ExperimentConfig(
            dataset=DatasetSpec(
                family=args.family,
                height=args.height,
                width=args.width,
                channels=args.channels,
                seed=args.seed,
            ),
            prior=PriorSource(
                kind=args.prior_kind,
                k=args.prior_k,
                n_train=args.prior_n_train,
                steps=args.prior_steps,
                path=args.prior_path,
            ),
            grid=grid,
            mode=AttackMode(args.mode),
            consensus_k=args.consensus_k,
            metrics=tuple(Metric(m) for m in args.metrics.split(",")),
            trials=args.trials,
            seed=args.seed,
            output_dir=args.out,
        )
    report = run_sweep(cfg)
    for row in report.rows:
        if row.status == "ok":
            first = next(iter(row.stats.items()))
            print(f"{row.label}: eps={row.epsilon:.4g} {first[0]}={first[1]:.6g}")
        else:
            print(f"{row.label}: FAILED {row.error}")
    print(f"report written to {cfg.output_dir}/report.csv")
    return 0


def _cmd_rero(args) -> int:
    if args.dataset:
        _, pool = load_dataset(args.dataset)
    else:
        spec = DatasetSpec(
            family=args.family,
            height=args.height,
            width=args.width,
            channels=args.channels,
            seed=args.seed,
        )
        pool = generate_dataset(spec, args.n)
    config = ReRoConfig(candidates=tuple(pool), target_index=0, params=_params_from(args))
    gamma = rero_gamma(config, trials=args.trials, seed=args.seed)
    print(
        json.dumps(
            {"gamma": gamma, "kappa": config.kappa, "n": config.n, "trials": args.trials},
            sort_keys=True,
        )
    )
    return 0


def _cmd_accountant(args) -> int:
    config = AccountantConfig(
        steps=args.steps, sampling_prob=args.sampling_prob, delta=args.delta
    )
    if args.mu is not None:
        result = mu_to_epsilon(args.mu, config)
        payload = {
            "mu": args.mu,
            "epsilon": result.epsilon,
            "best_order": result.best_order,
            "delta": result.delta,
        }
    else:
        mu = epsilon_to_mu(args.epsilon, config)
        payload = {"epsilon": args.epsilon, "mu": mu, "delta": args.delta}
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    serve(f"{args.host}:{args.port}", data_dir=args.data_dir)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "fit-prior": _cmd_fit_prior,
    "train-denoiser": _cmd_train_denoiser,
    "attack": _cmd_attack,
    "sweep": _cmd_sweep,
    "rero": _cmd_rero,
    "accountant": _cmd_accountant,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (
        ValueError,
        OSError,
        ContainerFormatError,
        TrainingDivergedError,
        AccountingOverflowError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
