"""Synthetic datasets with known ground truth.

Set 1 plants one informative covariate per cluster (identity slope block),
anchor categories exclusive to one cluster, and single-cluster instances.
Set 2 generates counts the same way but hands out independent noise
covariates, so every true slope is zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .model import CountData, CovariateMatrix, theta_matrix


@dataclass
class SimTruth:
    phi_true: np.ndarray        # K x S
    beta_true: np.ndarray       # K x d, columns aligned with X
    theta_true: np.ndarray      # L x K
    counts_true: np.ndarray     # L x S x K
    X: CovariateMatrix
    data: CountData
    seed: int
    n_disp: float
    anchors: list = field(default_factory=list)
    pure_mask: Optional[np.ndarray] = None
    generator_beta: Optional[np.ndarray] = None   # mechanism that produced the counts
    generator_X: Optional[np.ndarray] = None

    @property
    def expected_counts(self) -> np.ndarray:
        """``E[w[l, s]]`` under the generating mechanism."""
        lam = np.exp(self.generator_X @ self.generator_beta.T)
        return lam @ self.phi_true


def _check_dims(L, S, K):
    if L < 1 or K < 1 or S < K:
        raise ConfigError(f"infeasible dimensions L={L}, S={S}, K={K}; need S >= K")


def _make_phi(S, K, rng, shared_frac=0.2, anchor_mass=0.8, concentration=0.5):
    """Compositions over disjoint anchor blocks plus a pool shared by all clusters.

    Each cluster puts ``anchor_mass`` of its weight on its own anchor block.
    """
    n_shared = int(round(shared_frac * S))
    n_anchor = (S - n_shared) // K
    if n_anchor < 1:
        raise ConfigError("too few categories for one anchor per cluster")
    perm = rng.permutation(S)
    anchors = [np.sort(perm[k * n_anchor:(k + 1) * n_anchor]) for k in range(K)]
    shared = perm[K * n_anchor:]
    phi = np.zeros((K, S))
    for k in range(K):
        if shared.size:
            phi[k, anchors[k]] = anchor_mass * rng.dirichlet(np.full(n_anchor, concentration))
            phi[k, shared] = (1 - anchor_mass) * rng.dirichlet(np.full(shared.size, concentration))
        else:
            phi[k, anchors[k]] = rng.dirichlet(np.full(n_anchor, concentration))
    return phi, anchors


def _planted_covariates(L, K, rng, absent_prob, pure_frac, absent_value, high):
    """Covariates in which a low value switches a cluster (nearly) off."""
    x = rng.uniform(0.0, high, size=(L, K))
    absent = rng.random((L, K)) < absent_prob
    pure = rng.random(L) < pure_frac
    only = rng.integers(0, K, size=L)
    absent[pure] = True
    absent[pure, only[pure]] = False
    # every instance keeps at least one active cluster
    none = absent.all(axis=1)
    absent[none, only[none]] = False
    x[absent] = absent_value
    return x, pure


def _generate_counts(lam, phi, n_disp, rng):
    L, K = lam.shape
    n_lk = rng.negative_binomial(n_disp, n_disp / (n_disp + lam))
    counts_true = np.zeros((L, phi.shape[1], K), dtype=np.int64)
    for k in range(K):
        counts_true[:, :, k] = rng.multinomial(n_lk[:, k], phi[k])
    return counts_true


def simulate_set1(L: int = 200, S: int = 50, K: int = 4, seed: int = 0, n_disp: float = 1000.0,
                  intercept_range=(1.5, 2.0), absent_prob: float = 0.4, pure_frac: float = 0.2,
                  absent_value: float = -4.0, high: float = 2.0) -> SimTruth:
    """Informative-covariate design: ``d = K + 1`` with an identity slope block."""
    _check_dims(L, S, K)
    rng = np.random.default_rng(seed)
    phi, anchors = _make_phi(S, K, rng)
    intercepts = rng.uniform(*intercept_range, size=K)
    beta = np.column_stack([intercepts, np.eye(K)])
    x, pure = _planted_covariates(L, K, rng, absent_prob, pure_frac, absent_value, high)
    X = CovariateMatrix.with_intercept(x, [f"var{k + 1}" for k in range(K)])
    counts_true = _generate_counts(np.exp(X.design @ beta.T), phi, n_disp, rng)
    n_lk = counts_true.sum(1)
    theta = theta_matrix(n_lk)
    unit = (n_lk > 0).sum(1) == 1
    data = CountData(counts_true.sum(2), [f"cat{s + 1}" for s in range(S)],
                     [f"inst{l + 1}" for l in range(L)])
    return SimTruth(phi, beta, theta, counts_true, X, data, seed, n_disp, anchors,
                    pure & unit, beta, X.design)


def simulate_set2(L: int = 200, S: int = 50, K: int = 4, seed: int = 0, n_disp: float = 1000.0,
                  **kwargs) -> SimTruth:
    """Counts from the set-1 mechanism, paired with independent N(0, 1) covariates.

    ``beta_true`` slopes are zero; its intercepts are the log mean abundance
    of each cluster, the value an intercept-only fit targets.
    """
    hidden = simulate_set1(L, S, K, seed, n_disp, **kwargs)
    rng = np.random.default_rng([seed, 2])
    noise = rng.standard_normal((L, K))
    X = CovariateMatrix.with_intercept(noise, [f"var{k + 1}" for k in range(K)])
    n_lk = hidden.counts_true.sum(1)
    beta = np.zeros((K, K + 1))
    beta[:, 0] = np.log(np.maximum(n_lk.mean(0), np.finfo(float).tiny))
    return SimTruth(hidden.phi_true, beta, hidden.theta_true, hidden.counts_true, X, hidden.data,
                    seed, n_disp, hidden.anchors, hidden.pure_mask, hidden.beta_true,
                    hidden.X.design)


def simulate_holdout(truth: SimTruth, L: int, seed: int, **kwargs) -> SimTruth:
    """Fresh instances from the same set-1 mechanism (same compositions and coefficients)."""
    K, S = truth.phi_true.shape
    rng = np.random.default_rng([seed, 1])
    opts = {"absent_prob": 0.4, "pure_frac": 0.2, "absent_value": -4.0, "high": 2.0}
    opts.update(kwargs)
    x, pure = _planted_covariates(L, K, rng, **opts)
    X = CovariateMatrix.with_intercept(x, truth.X.column_names[1:])
    counts_true = _generate_counts(np.exp(X.design @ truth.beta_true.T), truth.phi_true,
                                   truth.n_disp, rng)
    n_lk = counts_true.sum(1)
    data = CountData(counts_true.sum(2), truth.data.category_names,
                     [f"hold{l + 1}" for l in range(L)])
    return SimTruth(truth.phi_true, truth.beta_true, theta_matrix(n_lk), counts_true, X, data,
                    seed, truth.n_disp, truth.anchors, pure & ((n_lk > 0).sum(1) == 1),
                    truth.beta_true, X.design)
