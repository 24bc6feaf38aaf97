"""Learning the concentration parameters (alpha, beta).

Given the per-regime self-transition counts of the current state sequence,
the posterior over (alpha, beta) factorizes into Gamma priors times one
linger/innovate term per regime.  Two updates are provided: a
maximum-a-posteriori solve (Newton-Raphson on the analytic gradients, with
the analytic trigamma Hessian) and a Metropolis-Hastings random walk with
positive support (truncated standard-normal steps; the Phi factors in the
acceptance ratio are exactly the truncation correction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DphmmHyper
from .special_math import digamma, ln_gamma, std_normal_cdf, trigamma


@dataclass(frozen=True)
class HyperPosteriorContext:
    """Self-transition counts plus the four Gamma prior parameters."""

    counts: np.ndarray
    prior_a_alpha: float = 1.0
    prior_b_alpha: float = 1.0
    prior_a_beta: float = 1.0
    prior_b_beta: float = 1.0

    @classmethod
    def from_hyper(cls, counts: np.ndarray, hyper: DphmmHyper) -> "HyperPosteriorContext":
        return cls(np.asarray(counts, dtype=float), hyper.prior_a_alpha,
                   hyper.prior_b_alpha, hyper.prior_a_beta, hyper.prior_b_beta)


def log_posterior_alpha_beta(alpha: float, beta: float, ctx: HyperPosteriorContext) -> float:
    """Log posterior density of (alpha, beta), up to an additive constant."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    lp = ((ctx.prior_a_alpha - 1.0) * math.log(alpha) - ctx.prior_b_alpha * alpha
          + (ctx.prior_a_beta - 1.0) * math.log(beta) - ctx.prior_b_beta * beta)
    lg_ab = ln_gamma(alpha + beta)
    lg_a = ln_gamma(alpha)
    log_b = math.log(beta)
    for n in ctx.counts:
        lp += (log_b + lg_ab - lg_a
               + ln_gamma(n + alpha) - ln_gamma(n + 1.0 + alpha + beta))
    return lp


def grad_log_posterior(alpha: float, beta: float, ctx: HyperPosteriorContext) -> tuple[float, float]:
    """Analytic gradient of the log posterior."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    g_a = (ctx.prior_a_alpha - 1.0) / alpha - ctx.prior_b_alpha
    g_b = (ctx.prior_a_beta - 1.0) / beta - ctx.prior_b_beta
    psi_ab = digamma(alpha + beta)
    psi_a = digamma(alpha)
    for n in ctx.counts:
        psi_tail = digamma(n + 1.0 + alpha + beta)
        g_a += psi_ab + digamma(n + alpha) - psi_a - psi_tail
        g_b += 1.0 / beta + psi_ab - psi_tail
    return g_a, g_b


def _hessian(alpha: float, beta: float, ctx: HyperPosteriorContext) -> np.ndarray:
    h_aa = -(ctx.prior_a_alpha - 1.0) / alpha ** 2
    h_bb = -(ctx.prior_a_beta - 1.0) / beta ** 2
    h_ab = 0.0
    t_ab = trigamma(alpha + beta)
    t_a = trigamma(alpha)
    for n in ctx.counts:
        t_tail = trigamma(n + 1.0 + alpha + beta)
        h_aa += t_ab + trigamma(n + alpha) - t_a - t_tail
        h_ab += t_ab - t_tail
        h_bb += -1.0 / beta ** 2 + t_ab - t_tail
    return np.array([[h_aa, h_ab], [h_ab, h_bb]])


@dataclass(frozen=True)
class MapResult:
    alpha: float
    beta: float
    converged: bool
    iterations: int


_POSITIVITY_FLOOR = 1e-8


def map_update(ctx: HyperPosteriorContext, init: tuple[float, float] = (1.0, 1.0),
               tol: float = 1e-8, max_iter: int = 100) -> MapResult:
    """Newton-Raphson MAP solve for (alpha, beta).

    The Newton direction is used while the Hessian is negative definite;
    otherwise the step falls back to gradient ascent.  Either way the step is
    halved until both coordinates stay above a positivity floor and the log
    posterior does not decrease.  Non-convergence within ``max_iter`` returns
    the last iterate flagged ``converged=False``.
    """
    x = np.array(init, dtype=float)
    if np.any(x <= 0):
        raise ValueError("init must be positive")
    lp = log_posterior_alpha_beta(x[0], x[1], ctx)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = np.array(grad_log_posterior(x[0], x[1], ctx))
        if np.max(np.abs(g)) <= tol:
            return MapResult(float(x[0]), float(x[1]), True, iterations - 1)
        hess = _hessian(x[0], x[1], ctx)
        directions = []
        neg_definite = hess[0, 0] < 0 and np.linalg.det(hess) > 0
        if neg_definite:
            directions.append(np.linalg.solve(hess, -g))
        directions.append(g)  # gradient-ascent fallback
        moved = False
        for d in directions:
            step = 1.0
            while step > 1e-14:
                cand = x + step * d
                if np.all(cand > _POSITIVITY_FLOOR):
                    lp_cand = log_posterior_alpha_beta(cand[0], cand[1], ctx)
                    if lp_cand >= lp - 1e-12 * (1.0 + abs(lp)):
                        x, lp, moved = cand, lp_cand, True
                        break
                step *= 0.5
            if moved:
                break
        if not moved:
            break
    g = np.array(grad_log_posterior(x[0], x[1], ctx))
    return MapResult(float(x[0]), float(x[1]), bool(np.max(np.abs(g)) <= tol), iterations)


def mh_update(alpha: float, beta: float, ctx: HyperPosteriorContext, rng
              ) -> tuple[float, float, bool, bool]:
    """One Metropolis-Hastings update of alpha then beta.

    Proposals are standard-normal random-walk steps resampled until positive;
    the acceptance ratio carries the Phi normalization of that truncation.
    Returns (alpha, beta, alpha_accepted, beta_accepted).
    """
    lp_cur = log_posterior_alpha_beta(alpha, beta, ctx)

    def propose(cur: float) -> float:
        while True:
            cand = rng.normal(cur, 1.0)
            if cand > 0.0:
                return cand

    acc_a = acc_b = False
    cand = propose(alpha)
    lp_cand = log_posterior_alpha_beta(cand, beta, ctx)
    log_ratio = (lp_cand + math.log(std_normal_cdf(alpha))
                 - lp_cur - math.log(std_normal_cdf(cand)))
    if log_ratio >= 0.0 or rng.uniform() < math.exp(log_ratio):
        alpha, lp_cur, acc_a = cand, lp_cand, True

    cand = propose(beta)
    lp_cand = log_posterior_alpha_beta(alpha, cand, ctx)
    log_ratio = (lp_cand + math.log(std_normal_cdf(beta))
                 - lp_cur - math.log(std_normal_cdf(cand)))
    if log_ratio >= 0.0 or rng.uniform() < math.exp(log_ratio):
        beta, acc_b = cand, True

    return alpha, beta, acc_a, acc_b
