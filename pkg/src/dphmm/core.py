"""Left-to-right Dirichlet-process hidden Markov state prior and the
change-point-localized Gibbs sweep over state sequences.

State sequences are numpy integer arrays of 1-based regime labels
``s_1..s_n``.  A sequence is *canonical* when ``s_1 = 1`` and consecutive
differences are 0 or 1; the number of change-points is then ``k = s_n - 1``.

The sweep resamples a position only where a change-point might move:

* interior ``s_t`` iff its neighbors ``s_{t-1}`` and ``s_{t+1}`` differ,
* ``s_1`` iff ``s_2 != s_1`` (its regime is the singleton {1}),
* ``s_n`` iff ``s_n != s_{n-1}``.

With these rules a sweep can merge regimes but never create one, so the
number of regimes is non-increasing along a chain (and a single-regime
sequence is a fixed point).  Chains are therefore initialized with more
regimes than plausibly present and pruned down (see ``init_equidistant``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NonFiniteLogLik(RuntimeError):
    """Raised when a likelihood callback returns a non-finite value."""

    def __init__(self, t: int, regime: int, value: float):
        super().__init__(
            f"log-likelihood callback returned {value!r} at t={t} (1-based), regime={regime}"
        )
        self.t = t
        self.regime = regime


@dataclass(frozen=True)
class DphmmHyper:
    """Concentration parameters and their Gamma(shape, rate) priors.

    ``alpha`` is the self-transition prior mass (tendency to linger in the
    current regime), ``beta`` the innovation concentration (tendency to open
    a new regime).
    """

    alpha: float
    beta: float
    prior_a_alpha: float = 1.0
    prior_b_alpha: float = 1.0
    prior_a_beta: float = 1.0
    prior_b_beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "prior_a_alpha", "prior_b_alpha",
                     "prior_a_beta", "prior_b_beta"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"DphmmHyper.{name} must be finite and > 0, got {v!r}")

    def with_concentrations(self, alpha: float, beta: float) -> "DphmmHyper":
        return DphmmHyper(alpha, beta, self.prior_a_alpha, self.prior_b_alpha,
                          self.prior_a_beta, self.prior_b_beta)


def is_canonical(s: np.ndarray) -> bool:
    s = np.asarray(s)
    if s.ndim != 1 or len(s) == 0:
        return False
    if s[0] != 1:
        return False
    d = np.diff(s)
    return bool(np.all((d == 0) | (d == 1)))


def _require_canonical(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.int64)
    if not is_canonical(s):
        raise ValueError("state sequence is not canonical")
    return s


def self_transition_counts(s: np.ndarray) -> np.ndarray:
    """Per-regime self-transition counts n_ii = duration_i - 1."""
    s = _require_canonical(s)
    _, durations = np.unique(s, return_counts=True)
    return durations - 1


def state_prior_transition(n_ii: int, hyper: DphmmHyper) -> tuple[float, float]:
    """One-step prior (p_stay, p_new) given the regime's self-transition count."""
    if n_ii < 0:
        raise ValueError("n_ii must be nonnegative")
    denom = n_ii + hyper.alpha + hyper.beta
    return (n_ii + hyper.alpha) / denom, hyper.beta / denom


def sequence_log_prior(s: np.ndarray, hyper: DphmmHyper) -> float:
    """Log prior of a canonical sequence: the product of one-step factors
    accumulated left to right (counts grow as the chain lingers)."""
    s = _require_canonical(s)
    a, b = hyper.alpha, hyper.beta
    lp = 0.0
    dur = 1  # positions of the current regime seen so far
    for u in range(len(s) - 1):
        c = dur - 1
        if s[u + 1] == s[u]:
            lp += math.log(c + a) - math.log(c + a + b)
            dur += 1
        else:
            lp += math.log(b) - math.log(c + a + b)
            dur = 1
    return lp


def init_equidistant(n: int, num_regimes: int) -> np.ndarray:
    """Equidistant initialization: regime i covers (i-1)*n/R < t <= i*n/R."""
    if not (1 <= num_regimes <= n):
        raise ValueError(f"need 1 <= num_regimes <= n, got {num_regimes} regimes for n={n}")
    s = np.empty(n, dtype=np.int64)
    prev = 0
    for i in range(1, num_regimes + 1):
        end = (i * n) // num_regimes
        s[prev:end] = i
        prev = end
    return s


def relabel(s: np.ndarray) -> np.ndarray:
    """Map non-decreasing labels to canonical 1,2,... preserving blocks."""
    s = np.asarray(s, dtype=np.int64)
    if np.any(np.diff(s) < 0):
        raise ValueError("relabel requires non-decreasing labels")
    uniq = np.unique(s)
    return np.searchsorted(uniq, s).astype(np.int64) + 1


def change_points(s: np.ndarray) -> np.ndarray:
    """1-based locations tau_i = last index of regime i, for i = 1..k."""
    s = _require_canonical(s)
    return np.nonzero(np.diff(s))[0] + 1


def _label_count(s: np.ndarray, label: int, lo: int, hi: int) -> int:
    """Occurrences of `label` in s[lo:hi] (s non-decreasing)."""
    seg = s[lo:hi]
    return int(np.searchsorted(seg, label, side="right")
               - np.searchsorted(seg, label, side="left"))


def gibbs_sweep(s: np.ndarray, loglik, hyper: DphmmHyper, rng) -> np.ndarray:
    """One localized Gibbs sweep over the state sequence.

    ``loglik(t, regime)`` must return the log-likelihood of observation t
    (0-based) under the given regime label's current parameters.  Positions
    are scanned left to right; each mandate and every transition count is
    recomputed from the freshest labels.  The result is relabeled to
    canonical form (abandoned singleton labels are pruned by the relabeling).
    """
    s = _require_canonical(s).copy()
    n = len(s)
    a, b = hyper.alpha, hyper.beta

    def ll(t: int, regime: int) -> float:
        v = loglik(t, regime)
        if not math.isfinite(v):
            raise NonFiniteLogLik(t + 1, regime, v)
        return v

    def pick(cand0: int, cand1: int, lw0: float, lw1: float) -> int:
        m = max(lw0, lw1)
        w0, w1 = math.exp(lw0 - m), math.exp(lw1 - m)
        return cand0 if rng.uniform() * (w0 + w1) < w0 else cand1

    for t in range(n):
        if t == 0:
            if n < 2 or s[1] == s[0]:
                continue
            own, right = int(s[0]), int(s[1])
            n_r = _label_count(s, right, 1, n) - 1
            lw_own = (math.log(a) - math.log(a + b)
                      + math.log(b) - math.log(a + b) + ll(0, own))
            lw_join = (math.log(b) - math.log(a + b)
                       + math.log(n_r + a) - math.log(n_r + a + b) + ll(0, right))
            s[0] = pick(own, right, lw_own, lw_join)
        elif t == n - 1:
            if s[t] == s[t - 1]:
                continue
            left, own = int(s[t - 1]), int(s[t])
            n_l = _label_count(s, left, 0, n - 1) - 1
            lw_join = math.log(n_l + a) - math.log(n_l + a + b) + ll(t, left)
            lw_own = math.log(b) - math.log(n_l + a + b) + ll(t, own)
            s[t] = pick(left, own, lw_join, lw_own)
        else:
            i, j = int(s[t - 1]), int(s[t + 1])
            if i == j:
                continue
            # Counts exclude the two transitions adjacent to t: left regime
            # pairs lie within s_1..s_{t-1}, right regime pairs within
            # s_{t+1}..s_n (both contiguous runs, hence count-1 pairs each).
            n_l = _label_count(s, i, 0, t) - 1
            n_r = _label_count(s, j, t + 1, n) - 1
            lw_left = (math.log(n_l + a) - math.log(n_l + a + b)
                       + math.log(b) - math.log(n_l + 1 + a + b) + ll(t, i))
            lw_right = (math.log(b) - math.log(n_l + a + b)
                        + math.log(n_r + a) - math.log(n_r + a + b) + ll(t, j))
            s[t] = pick(i, j, lw_left, lw_right)

    return relabel(s)
