"""Naive reference computations used as independent oracles.

Plain loops over ``math.lgamma``; nothing here calls into ``covlda``.
"""
import itertools
import math

import numpy as np


def nb_logpmf_naive(n, lam, size):
    p = size / (size + lam)
    out = math.lgamma(n + size) - math.lgamma(size) - math.lgamma(n + 1) + size * math.log(p)
    if n > 0:
        out += n * math.log(1 - p)
    return out


def collapsed_log_joint(n_lsk, lam, size, gamma):
    """Log joint of latent counts with compositions integrated out.

    ``prod_{l,k} NB(n_lk | lam_lk, size) * n_lk! / prod_s n_lsk!`` times
    ``prod_k prod_s Gamma(n_sk + gamma_s) / Gamma(n_k + sum gamma)``.
    """
    L, S, K = n_lsk.shape
    total = 0.0
    for l in range(L):
        for k in range(K):
            n_lk = int(sum(n_lsk[l, s, k] for s in range(S)))
            total += nb_logpmf_naive(n_lk, lam[l][k], size)
            total += math.lgamma(n_lk + 1)
            for s in range(S):
                total -= math.lgamma(n_lsk[l, s, k] + 1)
    g_sum = sum(gamma)
    for k in range(K):
        n_k = 0
        for s in range(S):
            n_sk = int(sum(n_lsk[l, s, k] for l in range(L)))
            n_k += n_sk
            total += math.lgamma(n_sk + gamma[s])
        total -= math.lgamma(n_k + g_sum)
    return total


def vanilla_log_joint_naive(n_lsk, alpha, gamma):
    L, S, K = n_lsk.shape
    total = 0.0
    for l in range(L):
        n_l = 0
        for k in range(K):
            n_lk = int(sum(n_lsk[l, s, k] for s in range(S)))
            n_l += n_lk
            total += math.lgamma(n_lk + alpha)
        total -= math.lgamma(n_l + K * alpha)
    g_sum = sum(gamma)
    for k in range(K):
        n_k = 0
        for s in range(S):
            n_sk = int(sum(n_lsk[l, s, k] for l in range(L)))
            n_k += n_sk
            total += math.lgamma(n_sk + gamma[s])
        total -= math.lgamma(n_k + g_sum)
    return total


def brute_force_weights(log_joint, n_lsk_minus, l, s):
    """Normalize ``log_joint`` over the K ways of adding one token at (l, s)."""
    K = n_lsk_minus.shape[2]
    logs = []
    for k in range(K):
        trial = n_lsk_minus.copy()
        trial[l, s, k] += 1
        logs.append(log_joint(trial))
    m = max(logs)
    w = [math.exp(v - m) for v in logs]
    tot = sum(w)
    return np.array([v / tot for v in w])


def best_permutation_exhaustive(est, true):
    """Permutation maximizing the summed Pearson correlation, by enumeration."""
    K = true.shape[0]
    best, score = None, -math.inf
    for perm in itertools.permutations(range(K)):
        sc = sum(np.corrcoef(est[perm[k]], true[k])[0, 1] for k in range(K))
        if sc > score:
            best, score = perm, sc
    return np.array(best)


def random_tiny_instance(rng, max_tokens=12):
    """Random minus-one-token count cube with L <= 2, S <= 3, K <= 3.

    Returns ``(n_lsk_minus, l, s, lam, size, gamma)`` where ``(l, s)`` is the
    removed token's position and ``lam`` is an ``L x K`` rate matrix.
    """
    L, S, K = (int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    n_tok = int(rng.integers(1, max_tokens + 1))
    n_lsk = np.zeros((L, S, K), dtype=np.int64)
    for _ in range(n_tok):
        n_lsk[rng.integers(L), rng.integers(S), rng.integers(K)] += 1
    nz = np.argwhere(n_lsk > 0)
    l, s, k = nz[rng.integers(len(nz))]
    n_lsk[l, s, k] -= 1
    lam = np.exp(rng.normal(0.5, 1.5, size=(L, K)))
    size = float(np.exp(rng.uniform(np.log(0.2), np.log(500))))
    gamma = rng.uniform(0.05, 2.0, S)
    return n_lsk, int(l), int(s), lam, size, gamma
