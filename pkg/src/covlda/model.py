"""Core data structures and densities for the covariate LDA model.

Each instance ``l`` carries a count vector over ``S`` categories.  Every token
belongs to one of ``K`` latent clusters; the cluster abundance ``n[l, k]``
follows a negative binomial regression on the instance covariates, and the
category split within a cluster is multinomial with composition ``phi[k]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import ConfigError, ConstraintError, DataError, NumericalError

_TINY = np.finfo(float).tiny


@dataclass
class Hyperparams:
    """Prior settings.

    ``gamma`` is the Dirichlet concentration on each cluster composition,
    ``prior_var`` the variance of the independent normal prior on every
    regression coefficient and ``n_upper`` the upper end of the uniform prior
    on the overdispersion.
    """

    gamma: np.ndarray
    K: int
    prior_var: float = 10.0
    n_upper: float = 1000.0
    ci_level: float = 0.95

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.ndim != 1 or self.gamma.size == 0 or np.any(self.gamma <= 0):
            raise ConfigError("gamma must be a non-empty vector of positive reals")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError("K must be a positive integer")
        self.K = int(self.K)
        if not self.prior_var > 0:
            raise ConfigError("prior_var must be positive")
        if not self.n_upper > 0:
            raise ConfigError("n_upper must be positive")
        if not 0 < self.ci_level < 1:
            raise ConfigError("ci_level must lie in (0, 1)")

    @classmethod
    def default(cls, S: int, K: int, gamma: float = 0.1, **kwargs) -> "Hyperparams":
        return cls(gamma=np.full(S, float(gamma)), K=K, **kwargs)

    @property
    def gamma_sum(self) -> float:
        return float(self.gamma.sum())


@dataclass
class CountData:
    """Instance-by-category abundance matrix."""

    counts: np.ndarray
    category_names: list = field(default_factory=list)
    instance_ids: list = field(default_factory=list)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise DataError("counts must be a 2-d matrix")
        if counts.size and not np.all(np.equal(np.mod(counts, 1), 0)):
            raise DataError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise DataError("counts must be non-negative")
        if counts.sum() == 0:
            raise DataError("counts contain no tokens")
        self.counts = counts
        L, S = counts.shape
        if not self.category_names:
            self.category_names = [f"cat{s + 1}" for s in range(S)]
        if not self.instance_ids:
            self.instance_ids = [f"inst{l + 1}" for l in range(L)]
        if len(self.category_names) != S or len(self.instance_ids) != L:
            raise DataError("label lengths do not match the count matrix")

    @property
    def L(self) -> int:
        return self.counts.shape[0]

    @property
    def S(self) -> int:
        return self.counts.shape[1]

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def tokens(self):
        """Flatten the counts into a token stream.

        Returns ``(doc, cat, offsets)``: instance and category of every token,
        instance-major with categories in ascending order, and the start
        offset of each instance (length ``L + 1``).
        """
        flat = self.counts.ravel()
        doc = np.repeat(np.repeat(np.arange(self.L), self.S), flat)
        cat = np.repeat(np.tile(np.arange(self.S), self.L), flat)
        offsets = np.concatenate([[0], np.cumsum(self.totals)])
        return doc.astype(np.int64), cat.astype(np.int64), offsets.astype(np.int64)


@dataclass
class CovariateMatrix:
    """Design matrix, one row per instance."""

    design: np.ndarray
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        if design.ndim == 1:
            design = design[:, None]
        if design.ndim != 2:
            raise DataError("design must be a 2-d matrix")
        if not np.all(np.isfinite(design)):
            raise DataError("design contains non-finite values")
        self.design = design
        if not self.column_names:
            self.column_names = [f"x{j + 1}" for j in range(design.shape[1])]
        if len(self.column_names) != design.shape[1]:
            raise DataError("column_names length does not match design")

    @classmethod
    def with_intercept(cls, values, names: Optional[Sequence[str]] = None) -> "CovariateMatrix":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(values.shape[1])]
        design = np.column_stack([np.ones(values.shape[0]), values])
        return cls(design, ["Intercept"] + names)

    @property
    def L(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]


@dataclass
class LatentState:
    """Token cluster assignments and their count caches.

    Tokens are stored flat (see :meth:`CountData.tokens`); ``offsets[l]`` is
    the first token of instance ``l``.
    """

    doc: np.ndarray
    cat: np.ndarray
    z: np.ndarray
    offsets: np.ndarray
    n_lsk: np.ndarray
    n_lk: np.ndarray
    n_sk: np.ndarray
    n_k: np.ndarray

    @classmethod
    def from_assignments(cls, data: CountData, z, K: int) -> "LatentState":
        doc, cat, offsets = data.tokens()
        z = np.asarray(z, dtype=np.int64).copy()
        if z.shape != doc.shape:
            raise DataError("one assignment per token is required")
        if z.size and (z.min() < 0 or z.max() >= K):
            raise DataError("assignments out of range")
        n_lsk = np.zeros((data.L, data.S, K), dtype=np.int64)
        np.add.at(n_lsk, (doc, cat, z), 1)
        return cls(doc, cat, z, offsets, n_lsk, n_lsk.sum(1), n_lsk.sum(0), n_lsk.sum((0, 1)))

    @classmethod
    def random(cls, data: CountData, K: int, rng: np.random.Generator) -> "LatentState":
        z = rng.integers(0, K, size=int(data.counts.sum()))
        return cls.from_assignments(data, z, K)

    @property
    def K(self) -> int:
        return self.n_k.shape[0]

    @property
    def L(self) -> int:
        return self.n_lk.shape[0]

    def assignments(self, l: int) -> np.ndarray:
        return self.z[self.offsets[l]:self.offsets[l + 1]]

    def copy(self) -> "LatentState":
        return LatentState(*(getattr(self, f).copy() for f in
                             ("doc", "cat", "z", "offsets", "n_lsk", "n_lk", "n_sk", "n_k")))

    def recount(self) -> np.ndarray:
        n_lsk = np.zeros_like(self.n_lsk)
        np.add.at(n_lsk, (self.doc, self.cat, self.z), 1)
        return n_lsk

    def check(self, counts: Optional[np.ndarray] = None) -> None:
        """Raise :class:`ConstraintError` unless all caches agree with ``z``."""
        n_lsk = self.recount()
        ok = (np.array_equal(n_lsk, self.n_lsk)
              and np.array_equal(n_lsk.sum(1), self.n_lk)
              and np.array_equal(n_lsk.sum(0), self.n_sk)
              and np.array_equal(n_lsk.sum((0, 1)), self.n_k))
        if not ok:
            raise ConstraintError("count caches disagree with assignments")
        if counts is not None and not np.array_equal(self.n_lsk.sum(2), counts):
            raise ConstraintError("latent counts do not sum to the observed counts")


@dataclass
class ModelParams:
    phi: np.ndarray
    beta: np.ndarray
    n_disp: float

    def validate(self, n_upper: float = np.inf) -> None:
        phi = np.asarray(self.phi)
        if np.any(phi < 0) or not np.allclose(phi.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise NumericalError("phi rows must lie on the simplex")
        if not np.all(np.isfinite(self.beta)):
            raise NumericalError("beta contains non-finite values")
        if not 0 < self.n_disp <= n_upper:
            raise NumericalError(f"overdispersion {self.n_disp} outside (0, {n_upper}]")


@dataclass
class Trace:
    """Retained posterior draws of one chain.

    ``logdens`` has one entry per sweep (burn-in included); the draw arrays
    have one leading entry per retained iteration.
    """

    phi_draws: np.ndarray
    beta_draws: np.ndarray
    n_draws: np.ndarray
    theta_draws: np.ndarray
    logdens: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_retained(self) -> int:
        return self.phi_draws.shape[0]

    def phi_mean(self) -> np.ndarray:
        return self.phi_draws.mean(axis=0)

    def beta_mean(self) -> np.ndarray:
        return self.beta_draws.mean(axis=0)

    def theta_mean(self) -> np.ndarray:
        return self.theta_draws.mean(axis=0)


def compute_lambda(x, beta_k) -> float:
    """Mean abundance ``exp(x . beta_k)``."""
    x = np.asarray(x, dtype=float)
    beta_k = np.asarray(beta_k, dtype=float)
    if x.shape != beta_k.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {beta_k.shape}")
    with np.errstate(over="ignore"):
        lam = float(np.exp(np.dot(x, beta_k)))
    if not np.isfinite(lam) or lam <= 0:
        raise NumericalError(f"lambda is not a positive finite number ({lam})")
    return lam


def nb_log_pmf(n, lam, n_disp):
    """Negative binomial log pmf with mean ``lam`` and size ``n_disp``.

    Success probability is ``p = n_disp / (n_disp + lam)``.  Broadcasts over
    array arguments.
    """
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n_disp = np.asarray(n_disp, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        log_denom = np.logaddexp(np.log(n_disp), np.log(lam))
        out = (gammaln(n + n_disp) - gammaln(n_disp) - gammaln(n + 1)
               + n_disp * (np.log(n_disp) - log_denom)
               + xlogy(n, lam) - n * log_denom)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite negative binomial log pmf")
    return out if out.ndim else float(out)


def theta_from_counts(n_lk_row):
    """Cluster proportions of one instance.

    Returns ``(theta, degenerate)``; an all-zero row maps to the uniform
    vector with ``degenerate=True``.
    """
    row = np.asarray(n_lk_row, dtype=float)
    total = row.sum()
    if total <= 0:
        return np.full(row.shape, 1.0 / row.size), True
    return row / total, False


def theta_matrix(n_lk) -> np.ndarray:
    """Row-wise :func:`theta_from_counts` for an ``L x K`` matrix."""
    n_lk = np.asarray(n_lk, dtype=float)
    totals = n_lk.sum(axis=1, keepdims=True)
    K = n_lk.shape[1]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, n_lk / safe, 1.0 / K)


def joint_log_density_terms(state: LatentState, params: ModelParams, data: CountData,
                            X: CovariateMatrix, hp: Hyperparams) -> dict:
    """The joint log density split into its five factors."""
    if not np.array_equal(state.n_lsk.sum(2), data.counts):
        raise ConstraintError("latent counts do not sum to the observed counts")
    if X.L != data.L:
        raise DataError("covariates and counts have different numbers of rows")
    phi = np.asarray(params.phi, dtype=float)
    beta = np.asarray(params.beta, dtype=float)
    log_phi = np.log(np.maximum(phi, _TINY))
    n_lsk = state.n_lsk
    n_lk = n_lsk.sum(1)

    # n_lsk[l, s, k] * log phi[k, s]
    multinomial = (gammaln(n_lk + 1.0).sum() - gammaln(n_lsk + 1.0).sum()
                   + np.einsum("lsk,ks->", n_lsk, log_phi))
    lam = np.exp(X.design @ beta.T)
    negbin = float(np.sum(nb_log_pmf(n_lk, lam, params.n_disp)))
    g = hp.gamma
    dirichlet = float(np.sum(gammaln(g.sum()) - gammaln(g).sum() + log_phi @ (g - 1.0)))
    tau2 = hp.prior_var
    normal = float(-0.5 * beta.size * np.log(2 * np.pi * tau2) - np.sum(beta ** 2) / (2 * tau2))
    if not 0 < params.n_disp <= hp.n_upper:
        raise NumericalError("overdispersion outside its prior support")
    uniform = -np.log(hp.n_upper)
    return {"multinomial": float(multinomial), "negbin": negbin, "dirichlet": dirichlet,
            "normal": normal, "uniform": float(uniform)}


def joint_log_density(state: LatentState, params: ModelParams, data: CountData,
                      X: CovariateMatrix, hp: Hyperparams) -> float:
    """Log of the unnormalized joint density of latent counts and parameters."""
    total = sum(joint_log_density_terms(state, params, data, X, hp).values())
    if not np.isfinite(total):
        raise NumericalError("non-finite joint log density")
    return total


def apply_token_move(state: LatentState, l: int, s: int, from_k: int, to_k: int) -> LatentState:
    """Reassign one token of category ``s`` in instance ``l``, in place."""
    if state.n_lsk[l, s, from_k] < 1:
        raise ConstraintError(f"no token of category {s} in cluster {from_k} at instance {l}")
    if from_k == to_k:
        return state
    lo, hi = state.offsets[l], state.offsets[l + 1]
    idx = lo + np.flatnonzero((state.cat[lo:hi] == s) & (state.z[lo:hi] == from_k))[0]
    state.z[idx] = to_k
    state.n_lsk[l, s, from_k] -= 1
    state.n_lsk[l, s, to_k] += 1
    state.n_lk[l, from_k] -= 1
    state.n_lk[l, to_k] += 1
    state.n_sk[s, from_k] -= 1
    state.n_sk[s, to_k] += 1
    state.n_k[from_k] -= 1
    state.n_k[to_k] += 1
    return state
