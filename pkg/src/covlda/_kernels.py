"""Compiled inner loops for the token-level Gibbs sweeps."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def covariate_log_weights(n_lk_l, n_sk_s, n_lsk_ls, n_k, n_disp, log1mp_l, gamma_s, gamma_sum, out):
    # counts must already exclude the token being resampled
    for k in range(out.shape[0]):
        out[k] = (math.log(n_lk_l[k] + n_disp) + math.log(n_sk_s[k] + gamma_s)
                  - math.log(n_lsk_ls[k] + 1.0) - math.log(n_k[k] + gamma_sum)
                  + log1mp_l[k])


@njit(cache=True)
def vanilla_log_weights(n_lk_l, n_sk_s, n_k, alpha, gamma_s, gamma_sum, out):
    for k in range(out.shape[0]):
        out[k] = (math.log(n_lk_l[k] + alpha) + math.log(n_sk_s[k] + gamma_s)
                  - math.log(n_k[k] + gamma_sum))


@njit(cache=True)
def normalize_log(logw, out):
    m = logw[0]
    for k in range(1, logw.shape[0]):
        if logw[k] > m:
            m = logw[k]
    total = 0.0
    for k in range(logw.shape[0]):
        out[k] = math.exp(logw[k] - m)
        total += out[k]
    for k in range(logw.shape[0]):
        out[k] /= total
    return total


@njit(cache=True)
def _draw(prob, u):
    acc = 0.0
    K = prob.shape[0]
    for k in range(K):
        acc += prob[k]
        if u < acc:
            return k
    # u landed in the rounding gap above the final cumulative sum
    for k in range(K - 1, -1, -1):
        if prob[k] > 0:
            return k
    return K - 1


@njit(cache=True)
def _move(l, s, k, n_lsk, n_lk, n_sk, n_k, sign):
    n_lsk[l, s, k] += sign
    n_lk[l, k] += sign
    n_sk[s, k] += sign
    n_k[k] += sign


@njit(cache=True)
def sweep_covariate(order, doc, cat, z, n_lsk, n_lk, n_sk, n_k, n_disp, log1mp, gamma, gamma_sum, u):
    K = n_k.shape[0]
    logw = np.empty(K)
    prob = np.empty(K)
    for t in range(order.shape[0]):
        i = order[t]
        l = doc[i]
        s = cat[i]
        _move(l, s, z[i], n_lsk, n_lk, n_sk, n_k, -1)
        covariate_log_weights(n_lk[l], n_sk[s], n_lsk[l, s], n_k, n_disp, log1mp[l],
                              gamma[s], gamma_sum, logw)
        total = normalize_log(logw, prob)
        if not total > 0:
            return i
        k = _draw(prob, u[t])
        z[i] = k
        _move(l, s, k, n_lsk, n_lk, n_sk, n_k, 1)
    return -1


@njit(cache=True)
def sweep_vanilla(order, doc, cat, z, n_lsk, n_lk, n_sk, n_k, alpha, gamma, gamma_sum, u):
    K = n_k.shape[0]
    logw = np.empty(K)
    prob = np.empty(K)
    for t in range(order.shape[0]):
        i = order[t]
        l = doc[i]
        s = cat[i]
        _move(l, s, z[i], n_lsk, n_lk, n_sk, n_k, -1)
        vanilla_log_weights(n_lk[l], n_sk[s], n_k, alpha, gamma[s], gamma_sum, logw)
        normalize_log(logw, prob)
        k = _draw(prob, u[t])
        z[i] = k
        _move(l, s, k, n_lsk, n_lk, n_sk, n_k, 1)
    return -1
