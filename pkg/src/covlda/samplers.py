"""Full-conditional updates and the univariate slice sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .exceptions import ConfigError, NumericalError
from .model import CovariateMatrix, Hyperparams, LatentState, nb_log_pmf

# cap on x'beta inside slice targets; larger values are clamped and counted
ETA_CLAMP = 700.0


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def branch_rng(rng: np.random.Generator, n: int) -> list:
    """Independent child streams, e.g. one per chain or per beta row."""
    return rng.spawn(n)


@dataclass
class SliceConfig:
    width: float = 1.0
    max_expansions: int = 100
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError("slice width must be positive")
        if int(self.max_expansions) != self.max_expansions or self.max_expansions < 1:
            raise ConfigError("max_expansions must be a positive integer")
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise ConfigError("slice bounds require lower < upper")


class ClampCounter:
    """Counts linear predictors clamped at :data:`ETA_CLAMP`."""

    def __init__(self):
        self.events = 0

    def clamp(self, eta: np.ndarray) -> np.ndarray:
        over = eta > ETA_CLAMP
        if over.any():
            self.events += int(over.sum())
            eta = np.where(over, ETA_CLAMP, eta)
        return eta


def slice_sample(log_target: Callable[[float], float], x0: float, cfg: SliceConfig,
                 rng: np.random.Generator) -> float:
    """One univariate slice-sampling update.

    Uses stepping out from a randomly positioned bracket of ``cfg.width`` and
    shrinks toward ``x0`` on rejection.  Points outside ``[lower, upper]``
    have zero density; ``lower`` itself is excluded.
    """
    lo = -math.inf if cfg.lower is None else cfg.lower
    hi = math.inf if cfg.upper is None else cfg.upper

    def logf(x):
        if x <= lo or x > hi:
            return -math.inf
        v = log_target(x)
        return -math.inf if math.isnan(v) else v

    f0 = logf(x0)
    if not math.isfinite(f0):
        raise NumericalError(f"slice sampler started at a point of zero density ({x0})")
    log_y = f0 + math.log1p(-rng.random())

    w = cfg.width
    left = x0 - w * rng.random()
    right = left + w
    j = int(math.floor(cfg.max_expansions * rng.random()))
    k = cfg.max_expansions - 1 - j
    while j > 0 and left > lo and logf(left) > log_y:
        left -= w
        j -= 1
    while k > 0 and right < hi and logf(right) > log_y:
        right += w
        k -= 1
    left = max(left, lo)
    right = min(right, hi)

    while True:
        x1 = left + rng.random() * (right - left)
        if logf(x1) > log_y:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-12:
            raise NumericalError("slice bracket collapsed without finding an acceptable point")


def sample_phi_row(n_sk_col, gamma, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet draw with concentration ``n_sk_col + gamma``.

    Gamma variates are formed in log space (``G(a) = G(a + 1) * U**(1/a)``)
    so that tiny concentrations never produce an all-zero row.
    """
    a = np.asarray(n_sk_col, dtype=float) + np.asarray(gamma, dtype=float)
    log_g = np.log(rng.standard_gamma(a + 1.0)) + np.log1p(-rng.random(a.shape)) / a
    log_g -= log_g.max()
    phi = np.exp(log_g)
    return phi / phi.sum()


def sample_phi(n_sk, gamma, rng: np.random.Generator) -> np.ndarray:
    """All cluster compositions, ``K x S``."""
    n_sk = np.asarray(n_sk)
    return np.stack([sample_phi_row(n_sk[:, k], gamma, rng) for k in range(n_sk.shape[1])])


def _n_lk(counts) -> np.ndarray:
    if isinstance(counts, LatentState):
        return counts.n_lk
    return np.asarray(counts)


def beta_log_fcd(beta_k, coord: int, value: float, n_lk_col, X: CovariateMatrix,
                 n_disp: float, prior_var: float) -> float:
    """Log full conditional of one coefficient of ``beta_k`` (up to a constant)."""
    b = np.array(beta_k, dtype=float)
    b[coord] = value
    n = np.asarray(n_lk_col, dtype=float)
    prior = -value ** 2 / (2.0 * prior_var)
    if n.size == 0:
        return prior
    lam = np.exp(X.design @ b)
    out = float(np.sum(nb_log_pmf(n, lam, n_disp))) + prior
    if not math.isfinite(out):
        raise NumericalError("non-finite beta full conditional")
    return out


def _beta_coord_target(n, eta_rest, x_j, n_disp, prior_var, clamp):
    # kernel of sum_l log NB(n_l | exp(eta_l), N) in eta; drops terms free of beta
    log_n = math.log(n_disp)
    ntot = n + n_disp

    def target(v):
        eta = clamp.clamp(eta_rest + x_j * v)
        return float(n @ eta - ntot @ np.logaddexp(log_n, eta)) - v * v / (2.0 * prior_var)

    return target


def sample_beta(counts, beta, n_disp: float, X: CovariateMatrix, hp: Hyperparams,
                cfg: SliceConfig, rng: np.random.Generator, random_scan: bool = False,
                clamp: Optional[ClampCounter] = None) -> np.ndarray:
    """Coordinate-wise slice update of every regression coefficient.

    ``counts`` is a :class:`LatentState` or an ``L x K`` abundance matrix.
    Returns a new ``K x d`` array.
    """
    n_lk = _n_lk(counts).astype(float)
    clamp = clamp or ClampCounter()
    beta = np.array(beta, dtype=float)
    K, d = beta.shape
    design = X.design
    for k in range(K):
        n = n_lk[:, k]
        eta = design @ beta[k]
        coords = rng.permutation(d) if random_scan else range(d)
        for j in coords:
            x_j = design[:, j]
            eta_rest = eta - x_j * beta[k, j]
            target = _beta_coord_target(n, eta_rest, x_j, n_disp, hp.prior_var, clamp)
            beta[k, j] = slice_sample(target, beta[k, j], cfg, rng)
            eta = eta_rest + x_j * beta[k, j]
    return beta


def overdispersion_log_target(n_lk, eta, clamp: Optional[ClampCounter] = None):
    """Log target for the overdispersion, ``N -> sum_{l,k} log NB(n | exp(eta), N)``.

    Terms that do not depend on ``N`` are dropped.
    """
    n = np.asarray(n_lk, dtype=float).ravel()
    eta = np.asarray(eta, dtype=float).ravel()
    if clamp is not None:
        eta = clamp.clamp(eta)

    def target(N):
        log_n = math.log(N)
        return float(np.sum(gammaln(n + N)) - n.size * math.lgamma(N)
                     + n.size * N * log_n - (n + N) @ np.logaddexp(log_n, eta))

    return target


def sample_overdispersion(counts, beta, X: CovariateMatrix, hp: Hyperparams, cfg: SliceConfig,
                          rng: np.random.Generator, n_disp: float,
                          clamp: Optional[ClampCounter] = None) -> float:
    """Slice update of the overdispersion on ``(0, n_upper]``."""
    n_lk = _n_lk(counts)
    eta = X.design @ np.asarray(beta, dtype=float).T
    target = overdispersion_log_target(n_lk, eta, clamp or ClampCounter())
    cfg_n = SliceConfig(cfg.width, cfg.max_expansions, lower=0.0, upper=hp.n_upper)
    return slice_sample(target, float(n_disp), cfg_n, rng)


def log_one_minus_p(X: CovariateMatrix, beta, n_disp: float) -> np.ndarray:
    """``log(1 - p[l, k])`` with ``p = N / (N + lambda)``, shape ``L x K``."""
    eta = X.design @ np.asarray(beta, dtype=float).T
    return eta - np.logaddexp(math.log(n_disp), eta)


def z_fcd_weights(l: int, s: int, state: LatentState, p_lk, n_disp: float,
                  hp: Hyperparams) -> np.ndarray:
    """Cluster probabilities for one token of category ``s`` in instance ``l``.

    ``state`` must already exclude the token.  ``p_lk`` is the row of
    negative binomial success probabilities for instance ``l``.
    """
    p = np.asarray(p_lk, dtype=float)
    with np.errstate(divide="ignore"):
        log1mp = np.log1p(-p)
    logw = np.empty(state.K)
    _kernels.covariate_log_weights(state.n_lk[l].astype(float), state.n_sk[s].astype(float),
                                   state.n_lsk[l, s].astype(float), state.n_k.astype(float),
                                   float(n_disp), log1mp, float(hp.gamma[s]), hp.gamma_sum, logw)
    if not np.any(np.isfinite(logw)):
        raise NumericalError("all cluster weights vanished")
    prob = np.empty(state.K)
    _kernels.normalize_log(logw, prob)
    return prob


def sample_z_sweep(state: LatentState, beta, n_disp: float, X: CovariateMatrix, hp: Hyperparams,
                   rng: np.random.Generator, random_scan: bool = False) -> LatentState:
    """Resample every token's cluster once, in place."""
    n_tok = state.z.size
    order = rng.permutation(n_tok) if random_scan else np.arange(n_tok)
    u = rng.random(n_tok)
    log1mp = log_one_minus_p(X, beta, n_disp)
    bad = _kernels.sweep_covariate(order, state.doc, state.cat, state.z, state.n_lsk, state.n_lk,
                                   state.n_sk, state.n_k, float(n_disp), log1mp, hp.gamma,
                                   hp.gamma_sum, u)
    if bad >= 0:
        raise NumericalError(f"cluster weights underflowed at token {bad}")
    return state
