"""Command-line interface: fit, simulate, replicate, oracle-check.

Option precedence is command-line flags over config-file entries (plain
``key=value`` lines, ``#`` comments) over built-in defaults.  Exit codes:
0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .core import NonFiniteLogLik
from .engine import (
    HyperMode,
    SamplerConfig,
    SimSpec,
    model1_spec,
    model2_spec,
    replicate,
    run_chain,
    simulate,
    summarize,
)
from .io import (
    DatasetError,
    RunManifest,
    ensure_out_dir,
    fmt,
    load_dataset,
    sha256_file,
    write_cp_pmf,
    write_k_distribution,
    write_k_frequencies,
    write_manifest,
    write_param_summary,
    write_series,
    write_state_prob,
    write_tv_report,
)
from .obs_models import Ar2, DataError, NormalMeanShift, PoissonCount
from .oracle import MAX_EXACT_N, enumerate_posterior, state_marginal_tv, tv_distance
from .special_math import RngStream

MODEL_NAMES = ("normal-known", "normal-unknown", "poisson", "ar2")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Option resolution
# ---------------------------------------------------------------------------

def read_config_file(path: str) -> dict:
    opts = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}: line {ln}: expected key=value")
                key, value = line.split("=", 1)
                opts[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    return opts


def resolve(args, key: str, cast, default):
    """Flag > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    config = getattr(args, "_config", {})
    if key in config:
        try:
            return cast(config[key])
        except ValueError:
            raise UsageError(f"config value {key}={config[key]!r} is not a valid {cast.__name__}") from None
    return default


def parse_hyper(spec: str) -> HyperMode:
    if spec in ("map", "mh"):
        return HyperMode(spec)
    if spec.startswith("fixed:"):
        parts = spec[len("fixed:"):].split(",")
        if len(parts) == 2:
            try:
                return HyperMode("fixed", float(parts[0]), float(parts[1]))
            except ValueError:
                pass
    raise UsageError(f"--hyper must be 'fixed:A,B', 'map', or 'mh'; got {spec!r}")


def build_sampler_config(args, n: int, default_burn_in: int, default_thin: int = 50) -> SamplerConfig:
    hyper = parse_hyper(resolve(args, "hyper", str, "mh"))
    try:
        return SamplerConfig(
            sweeps=resolve(args, "sweeps", int, 5000),
            burn_in=resolve(args, "burn_in", int, default_burn_in),
            thin=resolve(args, "thin", int, default_thin),
            init_regimes=min(resolve(args, "init_regimes", int, 10), n),
            hyper_mode=hyper,
            seed=resolve(args, "seed", int, 0),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_model(name: str, args, for_oracle: bool = False):
    if name == "poisson":
        return PoissonCount(g1=resolve(args, "g1", float, 2.0), g2=resolve(args, "g2", float, 1.0))
    if name == "ar2":
        if for_oracle:
            raise UsageError("oracle-check supports poisson and normal-known only")
        return Ar2()
    if name == "normal-unknown":
        if for_oracle:
            raise UsageError("oracle-check supports poisson and normal-known only")
        return NormalMeanShift(sigma2=None)
    if name == "normal-known":
        sigma2 = resolve(args, "sigma2", float, None)
        if sigma2 is None:
            raise UsageError("--model normal-known requires --sigma2")
        if not for_oracle:
            return NormalMeanShift(sigma2=sigma2)
        mu = resolve(args, "mu", float, None)
        upsilon2 = resolve(args, "upsilon2", float, None)
        if mu is None or upsilon2 is None:
            raise UsageError("oracle-check with normal-known requires --mu, --upsilon2, and --sigma2")
        return NormalMeanShift(sigma2=sigma2, mu=mu, upsilon2=upsilon2, learn_shared=False)
    raise UsageError(f"unknown model {name!r}")


def config_dict(cfg: SamplerConfig, **extra) -> dict:
    mode = cfg.hyper_mode
    out = {
        "sweeps": cfg.sweeps,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "init_regimes": cfg.init_regimes,
        "hyper": {"kind": mode.kind, "alpha": mode.alpha, "beta": mode.beta},
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    y = load_dataset(args.data, gdp_transform=args.gdp_transform)
    model = build_model(args.model, args)
    cfg = build_sampler_config(args, len(y), default_burn_in=1000)
    out_dir = ensure_out_dir(resolve(args, "out_dir", str, "."))

    t0 = time.perf_counter()
    out = run_chain(y, model, cfg)
    summ = summarize(out, model)
    wall = time.perf_counter() - t0

    write_state_prob(os.path.join(out_dir, "state_prob.csv"), summ.state_prob)
    write_cp_pmf(os.path.join(out_dir, "cp_pmf.csv"), summ.cp_pmf)
    write_param_summary(os.path.join(out_dir, "param_summary.csv"), summ.param_table)
    write_k_distribution(os.path.join(out_dir, "k_distribution.csv"), summ.k_pmf)
    manifest = RunManifest(
        command="fit",
        package_version=__version__,
        config=config_dict(cfg, model=args.model, gdp_transform=bool(args.gdp_transform)),
        seed=cfg.seed,
        dataset_digest=sha256_file(args.data),
        wall_seconds=wall,
    )
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)

    print(f"n = {len(y)}; retained {len(out.draws)} draws; "
          f"modal k = {summ.modal_k} (probability {summ.k_pmf[summ.modal_k]:.4f})")
    for i in range(summ.modal_k):
        t_mode = int(np.argmax(summ.cp_pmf[i])) + 1
        print(f"tau_{i + 1} mode at t = {t_mode} "
              f"(probability {summ.cp_pmf[i, t_mode - 1]:.4f} given k = {summ.modal_k})")
    print(f"result files written to {out_dir}")
    return 0


def _parse_float_list(text: str, flag: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated list of numbers, got {text!r}") from None


def _build_sim_spec(args) -> SimSpec:
    if args.model1 and args.model2:
        raise UsageError("--model1 and --model2 are mutually exclusive")
    if args.model1:
        return model1_spec()
    if args.model2:
        return model2_spec()
    if args.kind is None:
        raise UsageError("simulate needs --model1, --model2, or --kind with --theta/--tau/--n")
    if args.theta is None or args.n is None:
        raise UsageError("--kind requires --theta and --n")
    tau = _parse_float_list(args.tau or "", "--tau")
    try:
        tau = tuple(int(t) for t in tau)
        if args.kind == "ar2":
            theta = tuple(
                tuple(float(v) for v in row.split(",")) for row in args.theta.split(";")
            )
            if any(len(row) != 3 for row in theta):
                raise UsageError("--theta for ar2 takes ';'-separated rows of 3 coefficients")
            if args.sigma2_list is None:
                raise UsageError("ar2 simulation requires --sigma2-list (one variance per regime)")
            sigma2 = _parse_float_list(args.sigma2_list, "--sigma2-list")
        else:
            theta = _parse_float_list(args.theta, "--theta")
            sigma2 = args.sigma2 if args.sigma2 is not None else 3.0
        return SimSpec(args.kind, theta=theta, tau=tau, n=args.n, sigma2=sigma2)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    spec = _build_sim_spec(args)
    seed = resolve(args, "seed", int, 0)
    out_dir = ensure_out_dir(resolve(args, "out_dir", str, "."))
    y = simulate(spec, RngStream(seed, 0))
    data_path = os.path.join(out_dir, "simulated.csv")
    write_series(data_path, y)
    manifest = RunManifest(
        command="simulate",
        package_version=__version__,
        config={
            "kind": spec.kind,
            "theta": [list(t) if isinstance(t, tuple) else t for t in spec.theta],
            "tau": list(spec.tau),
            "n": spec.n,
            "sigma2": list(spec.sigma2) if isinstance(spec.sigma2, tuple) else spec.sigma2,
        },
        seed=seed,
        dataset_digest=sha256_file(data_path),
    )
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    print(f"wrote {spec.n}-row series to {data_path}")
    return 0


def cmd_replicate(args) -> int:
    preset = args.model1 or args.model2
    if preset and args.data:
        raise UsageError("give either --data or a simulation preset, not both")
    if args.model1 and args.model2:
        raise UsageError("--model1 and --model2 are mutually exclusive")

    if preset:
        source = model1_spec() if args.model1 else model2_spec()
        n = source.n
        default_burn_in = 5000
        model_name = args.model or "normal-known"
        if model_name == "normal-known" and args.sigma2 is None:
            args.sigma2 = source.sigma2
    else:
        if not args.data:
            raise UsageError("replicate needs --data or --model1/--model2")
        source = load_dataset(args.data, gdp_transform=args.gdp_transform)
        n = len(source)
        default_burn_in = 1000
        if not args.model:
            raise UsageError("replicate with --data requires --model")
        model_name = args.model

    model = build_model(model_name, args)
    cfg = build_sampler_config(args, n, default_burn_in=default_burn_in)
    n_replications = resolve(args, "replications", int, 200)
    parallelism = resolve(args, "parallelism", int, 1)
    if n_replications < 1 or parallelism < 1:
        raise UsageError("--replications and --parallelism must be >= 1")
    out_dir = ensure_out_dir(resolve(args, "out_dir", str, "."))

    t0 = time.perf_counter()
    result = replicate(source, model, cfg, n_replications, parallelism)
    wall = time.perf_counter() - t0

    write_k_frequencies(os.path.join(out_dir, "k_frequency.csv"), result.counts, n_replications)
    manifest = RunManifest(
        command="replicate",
        package_version=__version__,
        config=config_dict(
            cfg,
            model=model_name,
            replications=n_replications,
            parallelism=parallelism,
            source="model1" if args.model1 else ("model2" if args.model2 else "data"),
        ),
        seed=cfg.seed,
        dataset_digest=None if preset else sha256_file(args.data),
        replication_streams=[[r, r + 1] for r in range(n_replications)],
        wall_seconds=wall,
    )
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)

    for k, freq in result.frequencies().items():
        print(f"k = {k}: frequency {fmt(freq)} ({result.counts[k]}/{n_replications})")
    if result.failures:
        for rep, stream, message in result.failures:
            print(f"replication {rep} (stream {stream}) failed: {message}", file=sys.stderr)
        return 4
    return 0


def cmd_oracle_check(args) -> int:
    y = load_dataset(args.data)
    if len(y) > MAX_EXACT_N:
        raise UsageError(
            f"oracle-check supports at most {MAX_EXACT_N} observations "
            f"(exact enumeration is 2^(n-1) sequences); got n = {len(y)}"
        )
    hyper = parse_hyper(resolve(args, "hyper", str, ""))
    if hyper.kind != "fixed":
        raise UsageError("oracle-check requires fixed concentrations: --hyper fixed:A,B")
    model = build_model(args.model, args, for_oracle=True)
    cfg = build_sampler_config(args, len(y), default_burn_in=1000, default_thin=1)
    out_dir = ensure_out_dir(resolve(args, "out_dir", str, "."))

    exact = enumerate_posterior(y, model, hyper.alpha, hyper.beta)
    out = run_chain(y, model, cfg)
    summ = summarize(out, model)

    tv = state_marginal_tv(exact.state_prob, summ.state_prob)
    width = max(len(exact.k_pmf), len(summ.k_pmf))
    k_tv = tv_distance(
        np.pad(exact.k_pmf, (0, width - len(exact.k_pmf))),
        np.pad(summ.k_pmf, (0, width - len(summ.k_pmf))),
    )
    write_tv_report(os.path.join(out_dir, "oracle_tv.csv"), tv)
    manifest = RunManifest(
        command="oracle-check",
        package_version=__version__,
        config=config_dict(cfg, model=args.model),
        seed=cfg.seed,
        dataset_digest=sha256_file(args.data),
    )
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)

    print("t,tv")
    for t, value in enumerate(tv, 1):
        print(f"{t},{fmt(value)}")
    print(f"max state-marginal TV = {fmt(tv.max())}")
    print(f"k-distribution TV = {fmt(k_tv)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common_flags(p: argparse.ArgumentParser, replication_flags: bool = False) -> None:
    p.add_argument("--sweeps", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--init-regimes", dest="init_regimes", type=int, default=None)
    p.add_argument("--hyper", default=None, help="fixed:A,B | map | mh (default mh)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--config", default=None, help="key=value config file")
    if replication_flags:
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--parallelism", type=int, default=None)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma2", type=float, default=None,
                   help="known observation variance (normal-known)")
    p.add_argument("--g1", type=float, default=None, help="Poisson rate prior shape")
    p.add_argument("--g2", type=float, default=None, help="Poisson rate prior rate")
    p.add_argument("--mu", type=float, default=None,
                   help="fixed regime-mean prior location (oracle-check)")
    p.add_argument("--upsilon2", type=float, default=None,
                   help="fixed regime-mean prior variance (oracle-check)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dphmm",
        description="Nonparametric Bayesian multiple change-point detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_fit = sub.add_parser("fit", help="fit one chain and write posterior summaries")
    p_fit.add_argument("--model", required=True, choices=MODEL_NAMES)
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--gdp-transform", dest="gdp_transform", action="store_true",
                       help="read (quantity, deflator) levels and fit the growth series")
    _add_common_flags(p_fit)
    _add_model_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="write a simulated dataset")
    p_sim.add_argument("--model1", action="store_true", help="150 points, means (1,3), break at 50")
    p_sim.add_argument("--model2", action="store_true", help="150 points, means (1,3,5), breaks at 50,100")
    p_sim.add_argument("--kind", choices=("normal", "poisson", "ar2"), default=None)
    p_sim.add_argument("--theta", default=None, help="per-regime means/rates, e.g. 1,3 (ar2: b0,b1,b2;b0,b1,b2)")
    p_sim.add_argument("--tau", default=None, help="change-point locations, e.g. 50,100")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--sigma2", type=float, default=None, help="noise variance (normal)")
    p_sim.add_argument("--sigma2-list", dest="sigma2_list", default=None,
                       help="per-regime noise variances (ar2), e.g. 1.4,0.27")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out-dir", dest="out_dir", default=None)
    p_sim.add_argument("--config", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("replicate", help="repeat fits on fresh data and tabulate k")
    p_rep.add_argument("--model1", action="store_true")
    p_rep.add_argument("--model2", action="store_true")
    p_rep.add_argument("--data", default=None)
    p_rep.add_argument("--model", choices=MODEL_NAMES, default=None)
    p_rep.add_argument("--gdp-transform", dest="gdp_transform", action="store_true")
    _add_common_flags(p_rep, replication_flags=True)
    _add_model_flags(p_rep)
    p_rep.set_defaults(func=cmd_replicate)

    p_oc = sub.add_parser("oracle-check", help="compare sampler marginals with exact enumeration")
    p_oc.add_argument("--model", required=True, choices=("poisson", "normal-known"))
    p_oc.add_argument("--data", required=True)
    _add_common_flags(p_oc)
    _add_model_flags(p_oc)
    p_oc.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = read_config_file(args.config) if getattr(args, "config", None) else {}
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NonFiniteLogLik, np.linalg.LinAlgError, FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
