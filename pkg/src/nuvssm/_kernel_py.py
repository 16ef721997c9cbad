"""Pure-numpy twin of the compiled smoother kernel.

Same signature and semantics as ``nuvssm._mbf.mbf_scalar``; used as the
fallback when the extension is unavailable and as the reference in the
kernel-equivalence tests.  Scalar output, diagonal per-step input variances,
proper (or deterministic) Gaussian initial state.
"""

from __future__ import annotations

import math

import numpy as np

_LOG2PI = math.log(2.0 * math.pi)


def mbf_scalar(A, B, c, y, r, d, m0, V0):
    """One full smoothing sweep for a scalar-output model.

    Args:
        A: state transition, (n, n).
        B: input matrix, (n, m).
        c: output row, (n,).
        y: observations, (K,).
        r: per-step observation noise variance, (K,), strictly positive.
        d: per-step diagonal input variances, (K, m), entries >= 0.
        m0, V0: initial state mean (n,) and covariance (n, n).

    Returns:
        Tuple (state_mean, state_cov, dual_xi, dual_prec, input_mean,
        input_cov, input_bwd_mean, input_bwd_var, loglik).
    """
    n = A.shape[0]
    m = B.shape[1]
    K = y.shape[0]

    m_fwd = np.empty((K, n))
    V_fwd = np.empty((K, n, n))

    mk = m0.copy()
    Vk = V0.copy()
    loglik = 0.0
    for k in range(K):
        mk = A @ mk
        Vk = A @ Vk @ A.T + (B * d[k]) @ B.T
        Vk = 0.5 * (Vk + Vk.T)
        Vc = Vk @ c
        v_in = float(c @ Vc) + r[k]
        if v_in <= 0.0:
            raise ValueError(f"singular innovation variance at step {k}")
        e = y[k] - float(c @ mk)
        loglik += -0.5 * (_LOG2PI + math.log(v_in) + e * e / v_in)
        mk = mk + Vc * (e / v_in)
        Vk = Vk - np.outer(Vc, Vc) / v_in
        Vk = 0.5 * (Vk + Vk.T)
        m_fwd[k] = mk
        V_fwd[k] = Vk

    state_mean = np.empty((K, n))
    state_cov = np.empty((K, n, n))
    dual_xi = np.empty((K, n))
    dual_prec = np.empty((K, n, n))
    input_mean = np.empty((K, m))
    input_cov = np.empty((K, m, m))
    input_bwd_mean = np.empty((K, m))
    input_bwd_var = np.empty((K, m))

    eye = np.eye(n)
    dxi = np.zeros(n)
    dW = np.zeros((n, n))
    for k in range(K - 1, -1, -1):
        dual_xi[k] = dxi
        dual_prec[k] = dW
        state_mean[k] = m_fwd[k] - V_fwd[k] @ dxi
        Sc = V_fwd[k] - V_fwd[k] @ dW @ V_fwd[k]
        state_cov[k] = 0.5 * (Sc + Sc.T)

        cc_r = np.outer(c, c) / r[k]
        F = eye - V_fwd[k] @ cc_r
        dxi = F.T @ dxi + c * ((float(c @ m_fwd[k]) - y[k]) / r[k])
        dW = F.T @ dW @ F + cc_r @ F
        dW = 0.5 * (dW + dW.T)

        xi_u = B.T @ dxi
        W_u = B.T @ dW @ B
        dk = d[k]
        input_mean[k] = -dk * xi_u
        ic = np.diag(dk) - dk[:, None] * W_u * dk[None, :]
        input_cov[k] = 0.5 * (ic + ic.T)
        w = np.diag(W_u)
        bm = np.full(m, np.nan)
        bv = np.full(m, np.nan)
        pos = w > 0.0
        bm[pos] = -xi_u[pos] / w[pos]
        bv[pos] = 1.0 / w[pos] - dk[pos]
        input_bwd_mean[k] = bm
        input_bwd_var[k] = bv

        dxi = A.T @ dxi
        dW = A.T @ dW @ A
        dW = 0.5 * (dW + dW.T)

    return (state_mean, state_cov, dual_xi, dual_prec, input_mean, input_cov,
            input_bwd_mean, input_bwd_var, loglik)
