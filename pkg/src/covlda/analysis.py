"""Posterior summaries and model evaluation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import DataError, NumericalError
from .model import CountData


@dataclass
class SummaryTable:
    """Per-coefficient posterior mean and equal-tailed credible interval.

    Arrays are ``K x d``; ``significant`` marks intervals excluding zero.
    """

    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    significant: np.ndarray
    level: float
    cluster_names: list
    covariate_names: list

    def rows(self):
        for k, c in enumerate(self.cluster_names):
            for j, v in enumerate(self.covariate_names):
                yield (c, v, float(self.mean[k, j]), float(self.lower[k, j]),
                       float(self.upper[k, j]), bool(self.significant[k, j]))


@dataclass
class CoherenceReport:
    scores: np.ndarray
    total: float
    M: int
    skipped_pairs: np.ndarray
    whole_corpus: bool


def posterior_summary(draws, level: float = 0.95, cluster_names: Optional[Sequence[str]] = None,
                      covariate_names: Optional[Sequence[str]] = None) -> SummaryTable:
    """Summarize draws of shape ``R x K x d`` (or ``R`` / ``R x P``).

    Interval endpoints are linear-interpolation quantiles at
    ``(1 - level) / 2`` and ``(1 + level) / 2``.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 0 or draws.shape[0] == 0:
        raise ValueError("no draws to summarize")
    if draws.shape[0] < 2:
        raise ValueError("at least two draws are needed for an interval")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if draws.ndim == 1:
        draws = draws[:, None, None]
    elif draws.ndim == 2:
        draws = draws[:, None, :]
    alpha = (1.0 - level) / 2.0
    mean = draws.mean(axis=0)
    lower, upper = np.quantile(draws, [alpha, 1.0 - alpha], axis=0, method="linear")
    significant = (lower > 0) | (upper < 0)
    K, d = mean.shape
    cluster_names = list(cluster_names) if cluster_names is not None else [f"cluster{k + 1}" for k in range(K)]
    covariate_names = list(covariate_names) if covariate_names is not None else [f"x{j + 1}" for j in range(d)]
    return SummaryTable(mean, lower, upper, significant, level, cluster_names, covariate_names)


def relevant_categories(phi_mean, min_ratio: float = 2.0) -> list:
    """Categories at least ``min_ratio`` times more frequent in a cluster than in any other.

    Returns one list of category indices per cluster, most frequent first.
    With a single cluster every category of positive weight qualifies.
    """
    phi = np.asarray(phi_mean, dtype=float)
    K = phi.shape[0]
    out = []
    for k in range(K):
        others = np.delete(phi, k, axis=0)
        rival = others.max(axis=0) if K > 1 else np.zeros(phi.shape[1])
        keep = (phi[k] >= min_ratio * rival) & (phi[k] > 0)
        idx = np.flatnonzero(keep)
        out.append(idx[np.argsort(-phi[k, idx], kind="stable")].tolist())
    return out


def probabilistic_coherence(phi_mean, data, theta_mean=None, M: int = 5,
                            whole_corpus: bool = False) -> CoherenceReport:
    """Mean of ``P(a | b) - P(a)`` over the top-``M`` category pairs of each cluster.

    ``a`` is the more probable category of the pair within the cluster.
    Probabilities are document frequencies (presence, not counts).  By
    default a cluster's instances are those whose largest ``theta_mean``
    entry is that cluster; ``whole_corpus=True`` uses every instance.  Pairs
    with no instance containing ``b`` are skipped and counted.
    """
    phi = np.asarray(phi_mean, dtype=float)
    counts = data.counts if isinstance(data, CountData) else np.asarray(data)
    K, S = phi.shape
    if M > S or M < 2:
        raise DataError(f"M must lie in [2, {S}]")
    present = counts > 0
    if whole_corpus:
        members = [np.ones(counts.shape[0], dtype=bool)] * K
    else:
        if theta_mean is None:
            raise DataError("theta_mean is required unless whole_corpus is set")
        label = np.argmax(np.asarray(theta_mean), axis=1)
        members = [label == k for k in range(K)]

    scores = np.zeros(K)
    skipped = np.zeros(K, dtype=int)
    for k in range(K):
        pres = present[members[k]]
        top = np.argsort(-phi[k], kind="stable")[:M]
        n_inst = pres.shape[0]
        vals = []
        for i, j in itertools.combinations(range(M), 2):
            a, b = top[i], top[j]
            n_b = pres[:, b].sum()
            if n_inst == 0 or n_b == 0:
                skipped[k] += 1
                continue
            vals.append((pres[:, a] & pres[:, b]).sum() / n_b - pres[:, a].sum() / n_inst)
        scores[k] = float(np.mean(vals)) if vals else 0.0
    return CoherenceReport(scores, float(scores.sum()), M, skipped, whole_corpus)


def predict_abundance(beta_mean, phi_mean, X_new) -> np.ndarray:
    """Expected counts ``sum_k exp(x . beta_k) * phi[k, s]`` for new instances."""
    design = getattr(X_new, "design", X_new)
    beta = np.asarray(beta_mean, dtype=float)
    phi = np.asarray(phi_mean, dtype=float)
    if design.shape[1] != beta.shape[1] or beta.shape[0] != phi.shape[0]:
        raise DataError("dimension mismatch between coefficients, compositions and covariates")
    with np.errstate(over="ignore"):
        lam = np.exp(design @ beta.T)
    if not np.all(np.isfinite(lam)):
        raise NumericalError("predicted abundance overflowed")
    return lam @ phi


def _corr_matrix(a, b):
    # corr[i, j] = corr(a[i], b[j]); constant rows get 0
    a = a - a.mean(1, keepdims=True)
    b = b - b.mean(1, keepdims=True)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (a @ b.T) / denom
    return np.where(denom > 0, c, 0.0)


def align_clusters(phi_est, phi_true) -> np.ndarray:
    """Permutation ``perm`` such that ``phi_est[perm]`` lines up with ``phi_true``.

    Maximizes the summed row correlation; exhaustive search up to K = 8,
    an assignment solver beyond.
    """
    phi_est = np.asarray(phi_est, dtype=float)
    phi_true = np.asarray(phi_true, dtype=float)
    if phi_est.shape != phi_true.shape:
        raise DataError("phi_est and phi_true differ in shape")
    K = phi_true.shape[0]
    corr = _corr_matrix(phi_est, phi_true)   # corr[est, true]
    if K > 8:
        rows, cols = linear_sum_assignment(-corr)
        perm = np.empty(K, dtype=int)
        perm[cols] = rows
        return perm
    best, best_score = None, -np.inf
    for p in itertools.permutations(range(K)):
        score = corr[list(p), range(K)].sum()
        if score > best_score + 1e-15:
            best, best_score = p, score
    return np.array(best)
