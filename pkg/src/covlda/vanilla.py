"""Collapsed Gibbs sampler for LDA without covariates.

Used as the first stage of the two-stage fit (compositions and latent
abundances) and, with a generous ``K_max``, to guide the choice of ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .exceptions import ConfigError
from .model import CountData, LatentState
from .samplers import make_rng, sample_phi


@dataclass
class VanillaConfig:
    K_max: int
    alpha: float = 0.1
    gamma: object = 0.1
    iters: int = 1000
    burnin: int = 500
    thin: int = 5
    seed: int = 0
    random_scan: bool = False

    def __post_init__(self):
        for name in ("K_max", "iters", "thin"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.burnin < 0 or self.burnin >= self.iters:
            raise ConfigError("burnin must lie in [0, iters)")
        if not self.alpha > 0 or np.any(np.asarray(self.gamma) <= 0):
            raise ConfigError("alpha and gamma must be positive")

    def gamma_vector(self, S: int) -> np.ndarray:
        g = np.asarray(self.gamma, dtype=float)
        return np.full(S, float(g)) if g.ndim == 0 else g


@dataclass
class OccupancyReport:
    fractions: np.ndarray   # descending
    order: np.ndarray       # cluster index of each entry in ``fractions``
    suggested_k: int
    threshold: float


@dataclass
class VanillaResult:
    phi_draws: np.ndarray    # R x K x S
    n_lk_draws: np.ndarray   # R x L x K, latent abundances at each retained sweep
    state: LatentState
    occupancy: OccupancyReport
    logdens: np.ndarray


def vanilla_z_weights(l: int, s: int, state: LatentState, alpha: float, gamma) -> np.ndarray:
    """Cluster probabilities of one (already removed) token under plain LDA."""
    gamma = np.asarray(gamma, dtype=float)
    g_s = float(gamma if gamma.ndim == 0 else gamma[s])
    g_sum = float(g_s * state.n_sk.shape[0] if gamma.ndim == 0 else gamma.sum())
    logw = np.empty(state.K)
    _kernels.vanilla_log_weights(state.n_lk[l].astype(float), state.n_sk[s].astype(float),
                                 state.n_k.astype(float), float(alpha), g_s, g_sum, logw)
    prob = np.empty(state.K)
    _kernels.normalize_log(logw, prob)
    return prob


def vanilla_log_joint(state: LatentState, alpha: float, gamma) -> float:
    """``log p(tokens, z)`` with cluster proportions and compositions integrated out."""
    K = state.K
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (state.n_sk.shape[0],))
    n_lk, n_sk, n_k = state.n_lk, state.n_sk, state.n_k
    docs = (gammaln(K * alpha) - gammaln(n_lk.sum(1) + K * alpha)
            + np.sum(gammaln(n_lk + alpha), axis=1) - K * gammaln(alpha))
    g_sum = gamma.sum()
    clusters = (gammaln(g_sum) - gammaln(n_k + g_sum)
                + np.sum(gammaln(n_sk + gamma[:, None]), axis=0) - gammaln(gamma).sum())
    return float(docs.sum() + clusters.sum())


def occupancy_report(state, threshold: float = 0.01) -> OccupancyReport:
    """Share of all tokens held by each cluster, largest first.

    ``state`` may be a :class:`LatentState` or a vector of cluster totals.
    The suggested ``K`` counts clusters whose share exceeds ``threshold``.
    """
    n_k = state.n_k if isinstance(state, LatentState) else np.asarray(state)
    frac = n_k / n_k.sum()
    order = np.argsort(-frac, kind="stable")
    return OccupancyReport(frac[order], order, int(np.sum(frac > threshold)), threshold)


def run_vanilla(data: CountData, cfg: VanillaConfig, rng: Optional[np.random.Generator] = None,
                callback: Optional[Callable[[int, float], None]] = None) -> VanillaResult:
    rng = make_rng(cfg.seed) if rng is None else rng
    K = cfg.K_max
    gamma = cfg.gamma_vector(data.S)
    g_sum = float(gamma.sum())
    state = LatentState.random(data, K, rng)
    n_tok = state.z.size

    phi_draws, n_lk_draws = [], []
    logdens = np.empty(cfg.iters)
    for it in range(1, cfg.iters + 1):
        order = rng.permutation(n_tok) if cfg.random_scan else np.arange(n_tok)
        u = rng.random(n_tok)
        _kernels.sweep_vanilla(order, state.doc, state.cat, state.z, state.n_lsk, state.n_lk,
                               state.n_sk, state.n_k, float(cfg.alpha), gamma, g_sum, u)
        logdens[it - 1] = vanilla_log_joint(state, cfg.alpha, gamma)
        if it > cfg.burnin and (it - cfg.burnin) % cfg.thin == 0:
            state.check(data.counts)
            phi_draws.append(sample_phi(state.n_sk, gamma, rng))
            n_lk_draws.append(state.n_lk.copy())
        if callback is not None:
            callback(it, logdens[it - 1])

    return VanillaResult(np.array(phi_draws), np.array(n_lk_draws), state,
                         occupancy_report(state), logdens)
