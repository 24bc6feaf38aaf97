"""Sampler orchestration: full Gibbs chains, burn-in/thinning, posterior
summaries, data simulation, and the replication harness.

Per sweep the chain executes, in order: (1) the localized state sweep,
(2) regime-parameter and shared-parameter conjugate draws, (3) the
concentration-parameter update selected by ``hyper_mode``.  Post-burn-in
sweeps are thinned by keeping every ``thin``-th one, so the number of
retained draws is ``sweeps // thin``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import DphmmHyper, change_points, gibbs_sweep, init_equidistant, self_transition_counts
from .hyper_learn import HyperPosteriorContext, map_update, mh_update
from .special_math import RngStream


@dataclass(frozen=True)
class HyperMode:
    """Concentration-parameter treatment: fixed values, per-sweep MAP, or M-H.

    For ``kind="fixed"`` the values are held at (alpha, beta); for the
    learning modes they are the starting values.
    """

    kind: str = "mh"
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "map", "mh"):
            raise ValueError(f"unknown hyper mode {self.kind!r}")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


@dataclass(frozen=True)
class SamplerConfig:
    sweeps: int = 5000
    burn_in: int = 5000
    thin: int = 50
    init_regimes: int = 10
    hyper_mode: HyperMode = field(default_factory=HyperMode)
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.burn_in < 0:
            raise ValueError("need sweeps >= 1 and burn_in >= 0")
        if not (1 <= self.thin <= self.sweeps):
            raise ValueError("need 1 <= thin <= sweeps")
        if self.init_regimes < 1:
            raise ValueError("init_regimes must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass
class Draw:
    states: np.ndarray
    params: dict
    alpha: float
    beta: float

    @property
    def k(self) -> int:
        return int(self.states[-1]) - 1


@dataclass
class ChainOutput:
    draws: list
    mh_alpha_accepts: int = 0
    mh_beta_accepts: int = 0
    mh_steps: int = 0
    map_warnings: int = 0
    sweep_seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _snapshot(params: dict) -> dict:
    return {k: (np.array(v) if isinstance(v, np.ndarray) else v) for k, v in params.items()}


def run_chain(data, model, config: SamplerConfig, rng: RngStream | None = None) -> ChainOutput:
    """Run one Gibbs chain; deterministic given (data, model, config, seed)."""
    y = np.asarray(data, dtype=float)
    model.validate_data(y)
    n = len(y)
    if rng is None:
        rng = RngStream(config.seed, 0)

    s = init_equidistant(n, min(config.init_regimes, n))
    params = model.init_params(y, s, rng)
    mode = config.hyper_mode
    hyper = DphmmHyper(mode.alpha, mode.beta)

    out = ChainOutput(draws=[])
    total = config.burn_in + config.sweeps
    timings = np.empty(total)
    for sweep in range(1, total + 1):
        t0 = time.perf_counter()
        s = gibbs_sweep(s, model.loglik_fn(y, params), hyper, rng)
        params = model.draw_regime_params(y, s, params, rng)
        params = model.draw_shared_params(y, s, params, rng)
        if mode.kind != "fixed":
            ctx = HyperPosteriorContext.from_hyper(self_transition_counts(s), hyper)
            if mode.kind == "map":
                res = map_update(ctx, init=(hyper.alpha, hyper.beta))
                if not res.converged:
                    out.map_warnings += 1
                hyper = hyper.with_concentrations(res.alpha, res.beta)
            else:
                a, b, acc_a, acc_b = mh_update(hyper.alpha, hyper.beta, ctx, rng)
                out.mh_steps += 1
                out.mh_alpha_accepts += int(acc_a)
                out.mh_beta_accepts += int(acc_b)
                hyper = hyper.with_concentrations(a, b)
        timings[sweep - 1] = time.perf_counter() - t0
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            out.draws.append(Draw(s.copy(), _snapshot(params), hyper.alpha, hyper.beta))
    out.sweep_seconds = timings
    return out


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

@dataclass
class PosteriorSummary:
    state_prob: np.ndarray      # (n, K_max); P(s_t = i)
    cp_pmf: np.ndarray          # (modal_k, n-1); P(tau_i = t | k = modal_k)
    k_pmf: np.ndarray           # index k -> probability
    modal_k: int
    param_table: list           # (name, mean, sd, lag-1 serial correlation)


def _serial_corr(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    a, b = x[:-1], x[1:]
    sa, sb = np.std(a), np.std(b)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean((a - np.mean(a)) * (b - np.mean(b))) / (sa * sb))


def summarize(out: ChainOutput, model) -> PosteriorSummary:
    """Monte Carlo summary over retained draws.

    Change-point pmfs and parameter moments are computed over the draws
    sharing the modal change-point count (ties resolved to the smaller k);
    the k distribution reports the full spread.
    """
    if not out.draws:
        raise ValueError("summarize requires at least one retained draw")
    n = len(out.draws[0].states)
    n_draws = len(out.draws)

    k_values = np.array([d.k for d in out.draws])
    k_max = int(k_values.max())
    k_pmf = np.bincount(k_values, minlength=k_max + 1) / n_draws
    modal_k = int(np.argmax(k_pmf))

    state_prob = np.zeros((n, k_max + 1))
    for d in out.draws:
        state_prob[np.arange(n), d.states - 1] += 1.0
    state_prob /= n_draws

    modal_draws = [d for d in out.draws if d.k == modal_k]
    cp_pmf = np.zeros((modal_k, n - 1))
    for d in modal_draws:
        for ordinal, tau in enumerate(change_points(d.states)):
            cp_pmf[ordinal, tau - 1] += 1.0
    if modal_draws and modal_k > 0:
        cp_pmf /= len(modal_draws)

    series: dict[str, list] = {}
    for d in modal_draws:
        for name, value in model.param_entries(d.params) + [("alpha", d.alpha), ("beta", d.beta)]:
            series.setdefault(name, []).append(value)
    table = []
    for name, values in series.items():
        x = np.array(values)
        sd = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
        table.append((name, float(np.mean(x)), sd, _serial_corr(x)))

    return PosteriorSummary(state_prob, cp_pmf, k_pmf, modal_k, table)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimSpec:
    """Piecewise data-generating description.

    ``theta`` holds the per-regime main parameters: means (normal), rates
    (poisson), or (intercept, lag1, lag2) rows (ar2).  ``sigma2`` is the
    common noise variance for normal, or the per-regime variances for ar2.
    ``tau`` are the 1-based change-point locations.
    """

    kind: str
    theta: tuple
    tau: tuple
    n: int
    sigma2: float | tuple | None = None
    init_lags: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("normal", "poisson", "ar2"):
            raise ValueError(f"unknown simulation kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        taus = tuple(self.tau)
        if any(not (1 <= t <= self.n - 1) for t in taus):
            raise ValueError("change-point locations must lie in [1, n-1]")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("change-point locations must be strictly increasing")
        n_regimes = len(taus) + 1
        if len(self.theta) != n_regimes:
            raise ValueError("need one theta entry per regime")

    def states(self) -> np.ndarray:
        s = np.ones(self.n, dtype=np.int64)
        for tau in self.tau:
            s[tau:] += 1
        return s


def model1_spec() -> SimSpec:
    return SimSpec("normal", theta=(1.0, 3.0), tau=(50,), n=150, sigma2=3.0)


def model2_spec() -> SimSpec:
    return SimSpec("normal", theta=(1.0, 3.0, 5.0), tau=(50, 100), n=150, sigma2=3.0)


def simulate(spec: SimSpec, rng: RngStream) -> np.ndarray:
    s = spec.states()
    y = np.empty(spec.n)
    if spec.kind == "normal":
        sd = math.sqrt(float(spec.sigma2))
        for t in range(spec.n):
            y[t] = spec.theta[s[t] - 1] + (rng.normal(0.0, sd) if sd > 0 else 0.0)
    elif spec.kind == "poisson":
        for t in range(spec.n):
            y[t] = rng.poisson(spec.theta[s[t] - 1])
    else:
        lag1, lag2 = float(spec.init_lags[0]), float(spec.init_lags[1])
        for t in range(spec.n):
            b0, b1, b2 = spec.theta[s[t] - 1]
            sd = math.sqrt(float(spec.sigma2[s[t] - 1]))
            y[t] = b0 + b1 * lag1 + b2 * lag2 + (rng.normal(0.0, sd) if sd > 0 else 0.0)
            lag1, lag2 = y[t], lag1
    return y


# ---------------------------------------------------------------------------
# Replication harness
# ---------------------------------------------------------------------------

@dataclass
class ReplicationResult:
    counts: dict                # k -> number of replications ending at k
    n_replications: int
    failures: list              # (replication index, stream id, message)

    def frequencies(self) -> dict:
        return {k: c / self.n_replications for k, c in sorted(self.counts.items())}


def _run_replication(args):
    rep, data, spec, model, config = args
    rng = RngStream(config.seed, rep + 1)
    try:
        y = simulate(spec, rng) if spec is not None else data
        out = run_chain(y, model, config, rng=rng)
        return rep, out.draws[-1].k, None
    except Exception as exc:  # noqa: BLE001 - reported per replication
        return rep, -1, f"{type(exc).__name__}: {exc}"


def replicate(source, model, config: SamplerConfig, n_replications: int,
              parallelism: int = 1) -> ReplicationResult:
    """Run independent chains and tabulate the final draw's change-point count.

    ``source`` is a SimSpec (fresh data per replication) or a fixed data
    array.  Replication r uses the dedicated stream (seed, r+1), so the table
    does not depend on worker scheduling; failures are reported per
    replication, never dropped.
    """
    if n_replications < 1:
        raise ValueError("need at least one replication")
    spec = source if isinstance(source, SimSpec) else None
    data = None if spec is not None else np.asarray(source, dtype=float)
    tasks = [(r, data, spec, model, config) for r in range(n_replications)]
    if parallelism > 1:
        import multiprocessing

        with multiprocessing.Pool(parallelism) as pool:
            results = pool.map(_run_replication, tasks)
    else:
        results = [_run_replication(t) for t in tasks]

    counts: dict[int, int] = {}
    failures = []
    for rep, k, err in sorted(results):
        if err is not None:
            failures.append((rep, rep + 1, err))
        else:
            counts[k] = counts.get(k, 0) + 1
    return ReplicationResult(counts, n_replications, failures)
