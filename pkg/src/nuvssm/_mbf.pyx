# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled smoothing kernel for scalar-output models.

Mirrors nuvssm._kernel_py.mbf_scalar exactly; kept to plain nested loops so
the two implementations can be diffed side by side.
"""

from libc.math cimport log, NAN

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF LOG2PI = 1.8378770664093453


def mbf_scalar(double[:, ::1] A, double[:, ::1] B, double[::1] c,
               double[::1] y, double[::1] r, double[:, ::1] d,
               double[::1] m0, double[:, ::1] V0):
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t m = B.shape[1]
    cdef Py_ssize_t K = y.shape[0]
    cdef Py_ssize_t i, j, l, k, bad_step = -1

    m_fwd_np = np.empty((K, n))
    V_fwd_np = np.empty((K, n, n))
    state_mean_np = np.empty((K, n))
    state_cov_np = np.empty((K, n, n))
    dual_xi_np = np.empty((K, n))
    dual_prec_np = np.empty((K, n, n))
    input_mean_np = np.empty((K, m))
    input_cov_np = np.empty((K, m, m))
    input_bwd_mean_np = np.empty((K, m))
    input_bwd_var_np = np.empty((K, m))

    cdef double[:, ::1] m_fwd = m_fwd_np
    cdef double[:, :, ::1] V_fwd = V_fwd_np
    cdef double[:, ::1] state_mean = state_mean_np
    cdef double[:, :, ::1] state_cov = state_cov_np
    cdef double[:, ::1] dual_xi = dual_xi_np
    cdef double[:, :, ::1] dual_prec = dual_prec_np
    cdef double[:, ::1] input_mean = input_mean_np
    cdef double[:, :, ::1] input_cov = input_cov_np
    cdef double[:, ::1] input_bwd_mean = input_bwd_mean_np
    cdef double[:, ::1] input_bwd_var = input_bwd_var_np

    # scratch
    cdef double[::1] mk = np.empty(n)
    cdef double[::1] tmpv = np.empty(n)
    cdef double[::1] Vc = np.empty(n)
    cdef double[:, ::1] Vk = np.empty((n, n))
    cdef double[:, ::1] T1 = np.empty((n, n))
    cdef double[:, ::1] T2 = np.empty((n, n))
    cdef double[:, ::1] F = np.empty((n, n))
    cdef double[::1] dxi = np.zeros(n)
    cdef double[:, ::1] dW = np.zeros((n, n))
    cdef double[::1] xi_u = np.empty(m)
    cdef double[:, ::1] W_u = np.empty((m, m))
    cdef double[:, ::1] BW = np.empty((m, n))

    cdef double acc, v_in, e, loglik = 0.0, s, w

    for i in range(n):
        mk[i] = m0[i]
        for j in range(n):
            Vk[i, j] = V0[i, j]

    # forward pass
    for k in range(K):
        # mk <- A mk
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * mk[j]
            tmpv[i] = acc
        for i in range(n):
            mk[i] = tmpv[i]
        # Vk <- A Vk A^T + B diag(d_k) B^T  (symmetrized)
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += A[i, l] * Vk[l, j]
                T1[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += T1[i, l] * A[j, l]
                for l in range(m):
                    acc += B[i, l] * d[k, l] * B[j, l]
                T2[i, j] = acc
        for i in range(n):
            for j in range(n):
                Vk[i, j] = 0.5 * (T2[i, j] + T2[j, i])
        # observation update
        v_in = r[k]
        e = y[k]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Vk[i, j] * c[j]
            Vc[i] = acc
            v_in += c[i] * acc
            e -= c[i] * mk[i]
        if v_in <= 0.0:
            bad_step = k
            break
        loglik += -0.5 * (LOG2PI + log(v_in) + e * e / v_in)
        s = e / v_in
        for i in range(n):
            mk[i] += Vc[i] * s
            for j in range(n):
                Vk[i, j] -= Vc[i] * Vc[j] / v_in
        for i in range(n):
            m_fwd[k, i] = mk[i]
            for j in range(i, n):
                acc = 0.5 * (Vk[i, j] + Vk[j, i])
                V_fwd[k, i, j] = acc
                V_fwd[k, j, i] = acc

    if bad_step >= 0:
        raise ValueError(f"singular innovation variance at step {bad_step}")

    # backward pass
    for k in range(K - 1, -1, -1):
        for i in range(n):
            dual_xi[k, i] = dxi[i]
            for j in range(n):
                dual_prec[k, i, j] = dW[i, j]
        # posterior state moments from the forward message and the dual
        for i in range(n):
            acc = m_fwd[k, i]
            for j in range(n):
                acc -= V_fwd[k, i, j] * dxi[j]
            state_mean[k, i] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += dW[i, l] * V_fwd[k, l, j]
                T1[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = V_fwd[k, i, j]
                for l in range(n):
                    acc -= V_fwd[k, i, l] * T1[l, j]
                T2[i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.5 * (T2[i, j] + T2[j, i])
                state_cov[k, i, j] = acc
                state_cov[k, j, i] = acc
        # dual update through the observation:  F = I - V_fwd c c^T / r
        e = -y[k]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += V_fwd[k, i, j] * c[j]
            Vc[i] = acc
            e += c[i] * m_fwd[k, i]
        for i in range(n):
            for j in range(n):
                F[i, j] = (1.0 if i == j else 0.0) - Vc[i] * c[j] / r[k]
        for i in range(n):
            acc = c[i] * e / r[k]
            for j in range(n):
                acc += F[j, i] * dxi[j]
            tmpv[i] = acc
        for i in range(n):
            dxi[i] = tmpv[i]
        # dW <- F^T dW F + (c c^T / r) F
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += dW[i, l] * F[l, j]
                T1[i, j] = acc
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += F[l, i] * T1[l, j]
                T2[i, j] = s
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += c[l] * F[l, j]
                T2[i, j] += c[i] * acc / r[k]
        for i in range(n):
            for j in range(i, n):
                acc = 0.5 * (T2[i, j] + T2[j, i])
                dW[i, j] = acc
                dW[j, i] = acc
        # input posteriors with diagonal step variances
        for i in range(m):
            acc = 0.0
            for j in range(n):
                acc += B[j, i] * dxi[j]
            xi_u[i] = acc
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += B[l, i] * dW[l, j]
                BW[i, j] = acc
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for l in range(n):
                    acc += BW[i, l] * B[l, j]
                W_u[i, j] = acc
        for i in range(m):
            input_mean[k, i] = -d[k, i] * xi_u[i]
            for j in range(m):
                input_cov[k, i, j] = -d[k, i] * W_u[i, j] * d[k, j]
            input_cov[k, i, i] += d[k, i]
            w = W_u[i, i]
            if w > 0.0:
                input_bwd_mean[k, i] = -xi_u[i] / w
                input_bwd_var[k, i] = 1.0 / w - d[k, i]
            else:
                input_bwd_mean[k, i] = NAN
                input_bwd_var[k, i] = NAN
        # dxi <- A^T dxi ; dW <- A^T dW A
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[j, i] * dxi[j]
            tmpv[i] = acc
        for i in range(n):
            dxi[i] = tmpv[i]
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += dW[i, l] * A[l, j]
                T1[i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                s = 0.0
                for l in range(n):
                    acc += A[l, i] * T1[l, j]
                    s += A[l, j] * T1[l, i]
                acc = 0.5 * (acc + s)
                dW[i, j] = acc
                dW[j, i] = acc

    return (state_mean_np, state_cov_np, dual_xi_np, dual_prec_np,
            input_mean_np, input_cov_np, input_bwd_mean_np, input_bwd_var_np,
            loglik)
