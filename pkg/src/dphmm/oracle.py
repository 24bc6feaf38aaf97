"""Exact posterior enumeration for short series.

With n observations the break structure is a subset of the n - 1 boundary
positions, so for small n the full posterior is a sum over 2^(n-1)
canonical state sequences.  Models whose regime parameters integrate out in
closed form (``segment_log_marginal``) admit this exact computation, which
serves as the reference the sampler is checked against.  Enumeration is
refused above ``MAX_EXACT_N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DphmmHyper, sequence_log_prior

MAX_EXACT_N = 12


def states_from_mask(mask: int, n: int) -> np.ndarray:
    """Canonical state sequence with a break after 1-based t iff bit t-1 is set."""
    s = np.ones(n, dtype=np.int64)
    for u in range(n - 1):
        if (mask >> u) & 1:
            s[u + 1:] += 1
    return s


@dataclass
class ExactPosterior:
    n: int
    probs: np.ndarray           # (2^(n-1),) posterior mass per break subset
    state_prob: np.ndarray      # (n, n); column i is P(s_t = i+1)
    k_pmf: np.ndarray           # (n,); P(k breaks), k = 0..n-1
    cp_pmf_by_k: dict           # k -> (k, n-1) matrix of P(tau_ordinal = t | k)

    def sequence_prob(self, states) -> float:
        """Posterior probability of one canonical sequence."""
        s = np.asarray(states)
        mask = 0
        for u in range(self.n - 1):
            if s[u + 1] != s[u]:
                mask |= 1 << u
        return float(self.probs[mask])


def enumerate_posterior(data, model, alpha: float, beta: float) -> ExactPosterior:
    y = np.asarray(data, dtype=float)
    model.validate_data(y)
    n = len(y)
    if n > MAX_EXACT_N:
        raise ValueError(
            f"exact enumeration supports n <= {MAX_EXACT_N} "
            f"(it visits 2^(n-1) sequences); got n = {n}"
        )
    hyper = DphmmHyper(alpha, beta)

    seg = np.full((n, n + 1), np.nan)
    for lo in range(n):
        for hi in range(lo + 1, n + 1):
            seg[lo, hi] = model.segment_log_marginal(y, lo, hi)

    n_masks = 1 << (n - 1)
    log_w = np.empty(n_masks)
    for mask in range(n_masks):
        s = states_from_mask(mask, n)
        lw = sequence_log_prior(s, hyper)
        lo = 0
        for u in range(n - 1):
            if (mask >> u) & 1:
                lw += seg[lo, u + 1]
                lo = u + 1
        lw += seg[lo, n]
        log_w[mask] = lw

    probs = np.exp(log_w - log_w.max())
    probs /= probs.sum()

    state_prob = np.zeros((n, n))
    k_pmf = np.zeros(n)
    cp_raw: dict[int, np.ndarray] = {}
    for mask in range(n_masks):
        p = probs[mask]
        taus = [u + 1 for u in range(n - 1) if (mask >> u) & 1]
        k = len(taus)
        k_pmf[k] += p
        regime = 0
        prev = 0
        for tau in taus + [n]:
            state_prob[prev:tau, regime] += p
            prev = tau
            regime += 1
        if k > 0:
            if k not in cp_raw:
                cp_raw[k] = np.zeros((k, n - 1))
            for ordinal, tau in enumerate(taus):
                cp_raw[k][ordinal, tau - 1] += p
    cp_pmf_by_k = {k: m / k_pmf[k] for k, m in cp_raw.items()}

    return ExactPosterior(n, probs, state_prob, k_pmf, cp_pmf_by_k)


def tv_distance(p, q) -> float:
    """Total variation distance between two pmfs on the same support."""
    a, b = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"pmf shapes differ: {a.shape} vs {b.shape}")
    return float(0.5 * np.abs(a - b).sum())


def state_marginal_tv(exact_sp: np.ndarray, approx_sp: np.ndarray) -> np.ndarray:
    """Per-index TV between two state-marginal matrices, padding columns."""
    if exact_sp.shape[0] != approx_sp.shape[0]:
        raise ValueError("state-marginal matrices cover different series lengths")
    width = max(exact_sp.shape[1], approx_sp.shape[1])

    def pad(m):
        out = np.zeros((m.shape[0], width))
        out[:, : m.shape[1]] = m
        return out

    diff = pad(exact_sp) - pad(approx_sp)
    return 0.5 * np.abs(diff).sum(axis=1)
