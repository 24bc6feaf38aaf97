"""Observation-model plug-ins: per-time log-likelihoods plus the conjugate
full-conditional draws for regime-level and shared parameters.

Each model works on a canonical state sequence and a parameter dict.  The
engine calls, per sweep: ``loglik_fn`` (used inside the state sweep),
``draw_regime_params`` and ``draw_shared_params``.  Parameter dicts hold
numpy arrays indexed by regime (0-based array index = regime label - 1).

Inverse-Gamma(a, b) throughout means 1/Gamma(shape=a, rate=b); scaled
Inv-chi2(nu, s2) means Inverse-Gamma(nu/2, nu*s2/2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from .core import change_points

_LOG_2PI = math.log(2.0 * math.pi)


class DataError(ValueError):
    """Dataset does not satisfy the model's constraints."""


def segment_bounds(s: np.ndarray) -> list[tuple[int, int]]:
    """Half-open (lo, hi) index ranges of each regime of a canonical s."""
    n = len(s)
    cps = change_points(s)
    edges = [0] + [int(c) for c in cps] + [n]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + math.log(var)) - 0.5 * (x - mean) ** 2 / var


class ObservationModel:
    """Interface shared by the three concrete models."""

    name = "abstract"

    def validate_data(self, y: np.ndarray) -> None:
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or len(y) < 2:
            raise DataError("need a 1-D series of length >= 2")
        if not np.all(np.isfinite(y)):
            raise DataError("series contains non-finite values")

    def init_params(self, y: np.ndarray, s: np.ndarray, rng) -> dict:
        raise NotImplementedError

    def loglik_fn(self, y: np.ndarray, params: dict):
        """Return callable (t, regime_label) -> log p(y_t | regime params)."""
        raise NotImplementedError

    def draw_regime_params(self, y: np.ndarray, s: np.ndarray, params: dict, rng) -> dict:
        raise NotImplementedError

    def draw_shared_params(self, y: np.ndarray, s: np.ndarray, params: dict, rng) -> dict:
        return params

    def param_entries(self, params: dict) -> list[tuple[str, float]]:
        """Flatten a draw into named scalars for posterior summaries."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Normal mean-shift
# ---------------------------------------------------------------------------

class NormalMeanShift(ObservationModel):
    """Piecewise-constant mean with common variance.

    ``sigma2=None`` activates the unknown-variance variant with an
    Inv-Gamma(c, d) prior on sigma^2.  Regime means are exchangeable draws
    from N(mu, upsilon2); mu is flat a priori and upsilon2 carries an
    Inv-Gamma(a, b) prior.  ``learn_shared=False`` freezes (mu, upsilon2)
    — and sigma2 — at their given values, which is what makes the model
    comparable to the exact enumeration oracle.
    """

    name = "normal"

    def __init__(self, sigma2: float | None = 3.0, a: float = 1.0, b: float = 1.0,
                 c: float = 1.0, d: float = 1.0, mu: float | None = None,
                 upsilon2: float | None = None, learn_shared: bool = True):
        if sigma2 is not None and not sigma2 > 0:
            raise ValueError("sigma2 must be positive (or None for unknown)")
        for nm, v in (("a", a), ("b", b), ("c", c), ("d", d)):
            if not v > 0:
                raise ValueError(f"{nm} must be positive")
        self.known_variance = sigma2 is not None
        self.sigma2_fixed = sigma2
        self.a, self.b, self.c, self.d = a, b, c, d
        self.mu0 = mu
        self.upsilon20 = upsilon2
        self.learn_shared = learn_shared
        if not learn_shared:
            if mu is None or upsilon2 is None or sigma2 is None:
                raise ValueError("fixed-shared mode needs explicit mu, upsilon2, sigma2")

    def init_params(self, y, s, rng):
        var = float(np.var(y)) or 1.0
        params = {
            "mu": float(np.mean(y)) if self.mu0 is None else float(self.mu0),
            "upsilon2": var if self.upsilon20 is None else float(self.upsilon20),
            "sigma2": float(self.sigma2_fixed) if self.known_variance else var,
        }
        return self.draw_regime_params(y, s, params, rng)

    def loglik_fn(self, y, params):
        theta = params["theta"]
        sig2 = params["sigma2"]
        const = -0.5 * (_LOG_2PI + math.log(sig2))
        inv2 = 0.5 / sig2

        def ll(t, regime):
            return const - inv2 * (y[t] - theta[regime - 1]) ** 2

        return ll

    def draw_regime_params(self, y, s, params, rng):
        mu, ups2, sig2 = params["mu"], params["upsilon2"], params["sigma2"]
        theta = []
        for lo, hi in segment_bounds(s):
            d_i = hi - lo
            ybar = float(np.mean(y[lo:hi]))
            prec = d_i / sig2 + 1.0 / ups2
            mean = (ybar * d_i / sig2 + mu / ups2) / prec
            theta.append(rng.normal(mean, math.sqrt(1.0 / prec)))
        out = dict(params)
        out["theta"] = np.array(theta)
        return out

    def draw_shared_params(self, y, s, params, rng):
        out = dict(params)
        theta = params["theta"]
        n_regimes = len(theta)
        if self.learn_shared:
            ups2 = params["upsilon2"]
            mu = rng.normal(float(np.mean(theta)), math.sqrt(ups2 / n_regimes))
            ss = float(np.sum((theta - mu) ** 2))
            out["mu"] = mu
            out["upsilon2"] = rng.inv_gamma(self.a + 0.5 * n_regimes, self.b + 0.5 * ss)
            if not self.known_variance:
                resid = y - theta[s - 1]
                rss = float(np.sum(resid ** 2))
                out["sigma2"] = rng.inv_gamma(self.c + 0.5 * len(y), self.d + 0.5 * rss)
        return out

    def param_entries(self, params):
        entries = [(f"theta_{i+1}", float(v)) for i, v in enumerate(params["theta"])]
        if self.learn_shared:
            entries += [("mu", float(params["mu"])),
                        ("upsilon2", float(params["upsilon2"]))]
            if not self.known_variance:
                entries.append(("sigma2", float(params["sigma2"])))
        return entries

    def segment_log_marginal(self, y, lo, hi):
        """log m(y_seg) with theta integrated out — fixed-shared mode only."""
        if self.learn_shared:
            raise ValueError("segment marginals need fixed (mu, upsilon2, sigma2)")
        mu, ups2, sig2 = self.mu0, self.upsilon20, self.sigma2_fixed
        seg = y[lo:hi]
        d = len(seg)
        ybar = float(np.mean(seg))
        ss = float(np.sum((seg - ybar) ** 2))
        return (-0.5 * d * (_LOG_2PI + math.log(sig2)) - 0.5 * ss / sig2
                + 0.5 * (_LOG_2PI + math.log(sig2 / d))
                + _normal_logpdf(ybar, mu, sig2 / d + ups2))


# ---------------------------------------------------------------------------
# Poisson counts
# ---------------------------------------------------------------------------

class PoissonCount(ObservationModel):
    """Per-regime Poisson rates with a Gamma(g1, g2) prior."""

    name = "poisson"

    def __init__(self, g1: float = 2.0, g2: float = 1.0):
        if not (g1 > 0 and g2 > 0):
            raise ValueError("g1 and g2 must be positive")
        self.g1, self.g2 = g1, g2

    def validate_data(self, y):
        super().validate_data(y)
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise DataError("Poisson model requires nonnegative integer counts")

    def init_params(self, y, s, rng):
        return self.draw_regime_params(y, s, {}, rng)

    def loglik_fn(self, y, params):
        lam = params["lam"]
        log_lam = np.log(lam)
        lgam = np.array([math.lgamma(v + 1.0) for v in y])

        def ll(t, regime):
            return y[t] * log_lam[regime - 1] - lam[regime - 1] - lgam[t]

        return ll

    def draw_regime_params(self, y, s, params, rng):
        lam = []
        for lo, hi in segment_bounds(s):
            u_i = float(np.sum(y[lo:hi]))
            n_i = hi - lo
            lam.append(rng.gamma(self.g1 + u_i, self.g2 + n_i))
        out = dict(params)
        out["lam"] = np.array(lam)
        return out

    def param_entries(self, params):
        return [(f"lambda_{i+1}", float(v)) for i, v in enumerate(params["lam"])]

    def segment_log_marginal(self, y, lo, hi):
        seg = y[lo:hi]
        u = float(np.sum(seg))
        n_i = hi - lo
        return (self.g1 * math.log(self.g2) - math.lgamma(self.g1)
                + math.lgamma(self.g1 + u) - (self.g1 + u) * math.log(self.g2 + n_i)
                - float(sum(math.lgamma(v + 1.0) for v in seg)))


# ---------------------------------------------------------------------------
# AR(2) with structural change
# ---------------------------------------------------------------------------

class Ar2(ObservationModel):
    """AR(2) with per-regime coefficients and innovation variances.

    Coefficient vectors beta_i = (intercept, lag1, lag2) are exchangeable
    N(mu, V) with V = diag(v_j^2), flat mu and Inv-Gamma(a, b) on each v_j^2;
    sigma_i^2 carries the noninformative 1/sigma^2 prior, yielding a scaled
    Inv-chi2 conditional whose degrees of freedom equal the full segment
    duration.  The likelihood conditions on the first two observations
    (t = 1, 2 contribute no density; lags are the raw observed values even
    across a regime boundary).
    """

    name = "ar2"

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if not (a > 0 and b > 0):
            raise ValueError("a and b must be positive")
        self.a, self.b = a, b

    def validate_data(self, y):
        super().validate_data(y)
        if len(y) < 3:
            raise DataError("AR(2) model needs at least 3 observations")

    def _design_rows(self, y, lo, hi):
        """Design matrix and response for a segment's usable rows (t >= 2)."""
        ts = np.arange(max(lo, 2), hi)
        if len(ts) == 0:
            return np.zeros((0, 3)), np.zeros(0)
        x = np.column_stack([np.ones(len(ts)), y[ts - 1], y[ts - 2]])
        return x, y[ts]

    def init_params(self, y, s, rng):
        params = {"mu": np.zeros(3), "v2": np.ones(3)}
        sig2 = []
        for lo, hi in segment_bounds(s):
            v = float(np.var(y[lo:hi]))
            sig2.append(v if v > 1e-12 else 1.0)
        params["sig2"] = np.array(sig2)
        return self.draw_regime_params(y, s, params, rng)

    def loglik_fn(self, y, params):
        beta = params["beta"]
        sig2 = params["sig2"]

        def ll(t, regime):
            if t < 2:
                return 0.0
            b0, b1, b2 = beta[regime - 1]
            resid = y[t] - b0 - b1 * y[t - 1] - b2 * y[t - 2]
            return _normal_logpdf(resid, 0.0, sig2[regime - 1])

        return ll

    def draw_beta(self, y, s, params, rng):
        mu, v2, sig2 = params["mu"], params["v2"], params["sig2"]
        v_inv = 1.0 / v2
        betas = []
        for idx, (lo, hi) in enumerate(segment_bounds(s)):
            x, resp = self._design_rows(y, lo, hi)
            prec = x.T @ x / sig2[idx] + np.diag(v_inv)
            prec = 0.5 * (prec + prec.T)
            rhs = x.T @ resp / sig2[idx] + v_inv * mu
            # Factor the precision rather than the covariance: the posterior
            # can be extremely sharp when a transient short regime draws a
            # tiny sigma^2, and inverting first loses definiteness.
            scale = float(np.max(np.diag(prec)))
            chol = None
            for jitter in (0.0, 1e-12, 1e-9, 1e-6):
                try:
                    chol = np.linalg.cholesky(prec + (jitter * scale) * np.eye(3))
                    break
                except np.linalg.LinAlgError:
                    continue
            if chol is None:
                raise RuntimeError(f"singular coefficient posterior in regime {idx + 1}")
            mean = solve_triangular(chol.T, solve_triangular(chol, rhs, lower=True), lower=False)
            z = solve_triangular(chol.T, rng.standard_normal(3), lower=False)
            betas.append(mean + z)
        return np.array(betas)

    def draw_sigma2(self, y, s, beta, rng):
        sig2 = []
        for idx, (lo, hi) in enumerate(segment_bounds(s)):
            x, resp = self._design_rows(y, lo, hi)
            omega2 = float(np.sum((resp - x @ beta[idx]) ** 2))
            dur = hi - lo
            sig2.append(rng.scaled_inv_chi2(dur, max(omega2, 1e-12) / dur))
        return np.array(sig2)

    def draw_regime_params(self, y, s, params, rng):
        out = dict(params)
        out["beta"] = self.draw_beta(y, s, params, rng)
        out["sig2"] = self.draw_sigma2(y, s, out["beta"], rng)
        return out

    def draw_shared_params(self, y, s, params, rng):
        out = dict(params)
        beta = params["beta"]
        n_regimes = beta.shape[0]
        mu = np.empty(3)
        v2 = np.empty(3)
        for j in range(3):
            mu[j] = rng.normal(float(np.mean(beta[:, j])),
                               math.sqrt(params["v2"][j] / n_regimes))
            ss = float(np.sum((beta[:, j] - mu[j]) ** 2))
            v2[j] = rng.inv_gamma(self.a + 0.5 * n_regimes, self.b + 0.5 * ss)
        out["mu"], out["v2"] = mu, v2
        return out

    def param_entries(self, params):
        entries = []
        for i, row in enumerate(params["beta"]):
            entries += [(f"beta0_{i+1}", float(row[0])),
                        (f"beta1_{i+1}", float(row[1])),
                        (f"beta2_{i+1}", float(row[2])),
                        (f"sigma2_{i+1}", float(params["sig2"][i]))]
        entries += [(f"mu_{j}", float(params["mu"][j])) for j in range(3)]
        entries += [(f"v2_{j}", float(params["v2"][j])) for j in range(3)]
        return entries
