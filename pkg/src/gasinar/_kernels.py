"""Compiled inner loops.

Every routine takes precomputed tables: ``logpe[x] = log p_e(x)`` for the
error term and ``lfact[n] = log n!``. Tables must cover the largest count
passed in.
"""

import math

import numpy as np
from numba import njit

LOGIT_BOUND = 35.0


@njit(cache=True)
def clip_logit(lam):
    if lam > LOGIT_BOUND:
        return LOGIT_BOUND
    if lam < -LOGIT_BOUND:
        return -LOGIT_BOUND
    return lam


@njit(cache=True)
def log_alpha_pair(lam):
    """Return (log alpha, log(1 - alpha)) for alpha = logistic(lam)."""
    if lam >= 0.0:
        e = math.exp(-lam)
        la = -math.log1p(e)
        return la, la - lam
    e = math.exp(lam)
    l1a = -math.log1p(e)
    return l1a + lam, l1a


@njit(cache=True)
def predictive(y, yp, lam, logpe, lfact):
    """Log predictive pmf, score and score derivative in logit alpha.

    The weights ``p_k`` of the thinning/error convolution are accumulated
    with a running max shift, so large ``yp`` cannot overflow.
    """
    la, l1a = log_alpha_pair(lam)
    m = y if y < yp else yp
    base = lfact[yp]
    shift = -np.inf
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for k in range(m + 1):
        lt = base - lfact[k] - lfact[yp - k] + k * la + (yp - k) * l1a + logpe[y - k]
        if lt > shift:
            scale = math.exp(shift - lt)
            s0 *= scale
            s1 *= scale
            s2 *= scale
            shift = lt
        w = math.exp(lt - shift)
        s0 += w
        s1 += w * k
        s2 += w * k * k
    mean_k = s1 / s0
    var_k = s2 / s0 - mean_k * mean_k
    if var_k < 0.0:
        var_k = 0.0
    alpha = math.exp(la)
    a1a = math.exp(la + l1a)
    return shift + math.log(s0), mean_k - yp * alpha, var_k - a1a * yp


@njit(cache=True)
def gas_filter(y, omega, beta, tau, init, logpe, lfact, lam_out, score_out, ll_out):
    """Run the score recursion over ``y``; fills the per-step outputs.

    ``lam_out[t - 1]`` is the logit survival probability used for ``y[t]``.
    Returns (logit for the step after the last observation, saturation count).
    """
    n = y.shape[0]
    lam = init
    nsat = 0
    if lam > LOGIT_BOUND or lam < -LOGIT_BOUND:
        lam = clip_logit(lam)
        nsat += 1
    for t in range(1, n):
        lam_out[t - 1] = lam
        ll, s, _ = predictive(y[t], y[t - 1], lam, logpe, lfact)
        ll_out[t - 1] = ll
        score_out[t - 1] = s
        nxt = omega + beta * lam + tau * s
        if nxt > LOGIT_BOUND or nxt < -LOGIT_BOUND:
            nxt = clip_logit(nxt)
            nsat += 1
        lam = nxt
    return lam, nsat


@njit(cache=True)
def gas_loglik(y, omega, beta, tau, init, logpe, lfact):
    n = y.shape[0]
    lam = clip_logit(init)
    total = 0.0
    for t in range(1, n):
        ll, s, _ = predictive(y[t], y[t - 1], lam, logpe, lfact)
        total += ll
        lam = clip_logit(omega + beta * lam + tau * s)
    return total


@njit(cache=True)
def path_loglik(y, lam_path, logpe, lfact, ll_out):
    """Log-likelihood contributions for a given logit path (static, rc)."""
    n = y.shape[0]
    total = 0.0
    for t in range(1, n):
        ll, _, _ = predictive(y[t], y[t - 1], lam_path[t - 1], logpe, lfact)
        ll_out[t - 1] = ll
        total += ll
    return total


@njit(cache=True)
def score_batch(y, yp, lam, logpe, lfact, out):
    for i in range(y.shape[0]):
        _, s, _ = predictive(y[i], yp[i], lam[i], logpe, lfact)
        out[i] = s


@njit(cache=True)
def predictive_pmf_row(yp, lam, logpe, lfact, out):
    """Fill ``out[x] = p(x | yp, alpha)`` for x in range(len(out))."""
    for x in range(out.shape[0]):
        ll, _, _ = predictive(x, yp, lam, logpe, lfact)
        out[x] = math.exp(ll)


@njit(cache=True)
def contraction_terms(y, beta, tau, grid, logpe, lfact, suff_out, emp_out):
    """Per-step log contraction bounds: analytic-bound version and grid sup."""
    n = y.shape[0]
    for t in range(1, n):
        yp = y[t - 1]
        m = y[t] if y[t] < yp else yp
        a = abs(beta - tau * yp / 4.0)
        b = abs(beta + tau * m * m)
        suff_out[t - 1] = math.log(max(a, b))
        best = 0.0
        if yp == 0:
            best = abs(beta)
        else:
            for j in range(grid.shape[0]):
                _, _, sd = predictive(y[t], yp, grid[j], logpe, lfact)
                v = abs(beta + tau * sd)
                if v > best:
                    best = v
        emp_out[t - 1] = math.log(best)


@njit(cache=True)
def mixture_pmf(yp, lam, logpe, lfact, out):
    """Average of the conditional pmfs ``p(x | yp[i], lam[i])`` over paths."""
    n = yp.shape[0]
    for x in range(out.shape[0]):
        out[x] = 0.0
    for i in range(n):
        for x in range(out.shape[0]):
            ll, _, _ = predictive(x, yp[i], lam[i], logpe, lfact)
            out[x] += math.exp(ll)
    for x in range(out.shape[0]):
        out[x] /= n


@njit(cache=True)
def mixture_at(x, yp, lam, logpe, lfact):
    """Average over paths of ``p(x | yp[i], lam[i])``."""
    total = 0.0
    for i in range(yp.shape[0]):
        ll, _, _ = predictive(x, yp[i], lam[i], logpe, lfact)
        total += math.exp(ll)
    return total / yp.shape[0]


@njit(cache=True)
def kl_path(y, lam_true, lam_model, logpe_true, logpe_model, lfact, sizes, out):
    """Per-step KL divergence between two conditional pmfs sharing ``y[t-1]``."""
    for t in range(1, y.shape[0]):
        yp = y[t - 1]
        acc = 0.0
        for x in range(sizes[t - 1]):
            lt, _, _ = predictive(x, yp, lam_true[t - 1], logpe_true, lfact)
            lm, _, _ = predictive(x, yp, lam_model[t - 1], logpe_model, lfact)
            acc += math.exp(lt) * (lt - lm)
        out[t - 1] = acc
