"""Numba kernels: random-walk posterior samplers and isotonic regression.

The samplers run component-wise adaptive random-walk Metropolis on the log
scale of each positive parameter.  Step sizes adapt in windows of 50 during
burn-in toward a 0.25-0.45 acceptance band and are frozen afterwards, so the
retained chain is a fixed-kernel Markov chain.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _softplus(x):
    # log(1 + exp(x)) without overflow
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


@njit(cache=True)
def _expit(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _tox_logpost(z, d_eff, n_j, x_j, alpha0):
    # Exponential(1) prior on alpha, z = log(alpha), Jacobian included
    alpha = math.exp(z)
    lp = -alpha + z
    for j in range(d_eff.shape[0]):
        if n_j[j] == 0:
            continue
        lin = alpha0 + alpha * d_eff[j]
        lp += x_j[j] * (-_softplus(-lin)) + (n_j[j] - x_j[j]) * (-_softplus(lin))
    return lp


@njit(cache=True)
def tox_rw(d_eff, n_j, x_j, alpha0, burn_in, n_draws, thin, seed):
    """Sample the toxicity-slope posterior; returns (draws, acceptance rate)."""
    np.random.seed(seed)
    z = 0.0
    lp = _tox_logpost(z, d_eff, n_j, x_j, alpha0)
    step = 0.5
    acc_win = 0
    acc_kept = 0
    draws = np.empty(n_draws)
    k = 0
    total = burn_in + n_draws * thin
    for it in range(total):
        zp = z + step * np.random.normal()
        lpp = _tox_logpost(zp, d_eff, n_j, x_j, alpha0)
        if math.log(np.random.random()) < lpp - lp:
            z = zp
            lp = lpp
            if it < burn_in:
                acc_win += 1
            else:
                acc_kept += 1
        if it < burn_in and (it + 1) % 50 == 0:
            rate = acc_win / 50.0
            if rate > 0.45:
                step *= 1.25
            elif rate < 0.25:
                step *= 0.8
            acc_win = 0
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            draws[k] = math.exp(z)
            k += 1
    return draws, acc_kept / max(1, n_draws * thin)


@njit(cache=True)
def _fill_f(log_d, log_beta, gamma, f):
    # f_j = d^g / (b^g + d^g) = expit(g * (log d - log b)), safe for d = 0
    for j in range(log_d.shape[0]):
        if log_d[j] == -np.inf:
            f[j] = 0.0
        else:
            f[j] = _expit(gamma * (log_d[j] - log_beta))


@njit(cache=True)
def _emax_loglik(eta, tau, sigma, f, n_j, s1_j, s2_j):
    ll = 0.0
    inv2s2 = 0.5 / (sigma * sigma)
    logsig = math.log(sigma)
    for j in range(n_j.shape[0]):
        if n_j[j] == 0:
            continue
        mu = eta + tau * f[j]
        ll -= n_j[j] * logsig + (s2_j[j] - 2.0 * mu * s1_j[j] + n_j[j] * mu * mu) * inv2s2
    return ll


@njit(cache=True)
def _emax_logprior(z, pa, pb, sigma_scale):
    # Gamma(a,b) priors in log space for the first four, half-normal for sigma
    lp = 0.0
    for c in range(4):
        lp += pa[c] * z[c] - pb[c] * math.exp(z[c])
    lp += -math.exp(2.0 * z[4]) / (2.0 * sigma_scale * sigma_scale) + z[4]
    return lp


@njit(cache=True)
def emax_rw(log_d, n_j, s1_j, s2_j, pa, pb, sigma_scale,
            burn_in, n_draws, thin, seed):
    """Sample the five-parameter saturating-curve posterior.

    Parameter order: baseline, span, midpoint, slope, noise sd.
    Returns (draw matrix n_draws x 5, per-component acceptance rates).
    """
    np.random.seed(seed)
    n_par = 5
    z = np.empty(n_par)
    for c in range(4):
        z[c] = math.log(pa[c] / pb[c])
    z[4] = math.log(sigma_scale * 0.8)
    nd = log_d.shape[0]
    f = np.empty(nd)
    f_prop = np.empty(nd)
    _fill_f(log_d, z[2], math.exp(z[3]), f)
    lp = _emax_loglik(math.exp(z[0]), math.exp(z[1]), math.exp(z[4]),
                      f, n_j, s1_j, s2_j) + _emax_logprior(z, pa, pb, sigma_scale)
    steps = np.full(n_par, 0.5)
    acc_win = np.zeros(n_par)
    acc_kept = np.zeros(n_par)
    draws = np.empty((n_draws, n_par))
    k = 0
    total = burn_in + n_draws * thin
    for it in range(total):
        for c in range(n_par):
            z_old = z[c]
            z[c] = z_old + steps[c] * np.random.normal()
            if c == 2 or c == 3:
                _fill_f(log_d, z[2], math.exp(z[3]), f_prop)
                fc = f_prop
            else:
                fc = f
            lpp = _emax_loglik(math.exp(z[0]), math.exp(z[1]), math.exp(z[4]),
                               fc, n_j, s1_j, s2_j) \
                + _emax_logprior(z, pa, pb, sigma_scale)
            if math.log(np.random.random()) < lpp - lp:
                lp = lpp
                if c == 2 or c == 3:
                    for j in range(nd):
                        f[j] = f_prop[j]
                if it < burn_in:
                    acc_win[c] += 1
                else:
                    acc_kept[c] += 1
            else:
                z[c] = z_old
        if it < burn_in and (it + 1) % 50 == 0:
            for c in range(n_par):
                rate = acc_win[c] / 50.0
                if rate > 0.45:
                    steps[c] *= 1.25
                elif rate < 0.25:
                    steps[c] *= 0.8
                acc_win[c] = 0.0
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            for c in range(n_par):
                draws[k, c] = math.exp(z[c])
            k += 1
    kept_total = max(1, n_draws * thin)
    rates = np.empty(n_par)
    for c in range(n_par):
        rates[c] = acc_kept[c] / kept_total
    return draws, rates


@njit(cache=True)
def pava_fit(y, w, out):
    """Weighted least-squares non-decreasing fit via pooled adjacent violators."""
    n = y.shape[0]
    mean = np.empty(n)
    wt = np.empty(n)
    size = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        mean[m] = y[i]
        wt[m] = w[i]
        size[m] = 1
        m += 1
        while m > 1 and mean[m - 2] > mean[m - 1]:
            tw = wt[m - 2] + wt[m - 1]
            mean[m - 2] = (wt[m - 2] * mean[m - 2] + wt[m - 1] * mean[m - 1]) / tw
            wt[m - 2] = tw
            size[m - 2] += size[m - 1]
            m -= 1
    k = 0
    for b in range(m):
        for _ in range(size[b]):
            out[k] = mean[b]
            k += 1


@njit(cache=True)
def pava_rows(mat, w):
    """Row-wise PAVA over a draw matrix (shared weights)."""
    out = np.empty_like(mat)
    for r in range(mat.shape[0]):
        pava_fit(mat[r], w, out[r])
    return out
