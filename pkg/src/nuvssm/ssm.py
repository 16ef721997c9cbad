"""Linear state space models and the two preferred Gaussian smoothers.

The model is ``X_k = A X_{k-1} + B U_k``, ``Y_k = C X_k + Z_k`` with white
Gaussian inputs ``U_k`` and observation noise ``Z_k``.  Two smoothing
algorithms are provided:

* :func:`mbf_smooth` -- forward Kalman pass in moment form, backward pass in
  the dual parameterization (a Modified Bryson-Frazier smoother augmented
  with input estimation);
* :func:`bifm_smooth` -- backward pass with a time-reversed information
  filter, forward pass directly in posterior marginals.

Both produce identical posteriors.  With scalar input and output neither
algorithm factorizes any matrix of dimension > 1 (asserted via
``linalg.count_factorizations``).  :func:`dense_joint_solve` is an
independent brute-force oracle that conditions the full joint Gaussian.

Per-step unknown-variance (NUV) attachments enter through
:class:`NuvOverrides`: per-step input variances and, for the outlier model,
per-step additions to the observation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian import GaussianMoment
from .linalg import inv_psd, logdet_psd, solve_psd, solve_square, symmetrize

_LOG2PI = math.log(2.0 * math.pi)


@dataclass
class StateSpaceModel:
    """Time-invariant linear state space model over a finite horizon.

    ``initial_state=None`` means a non-informative prior on X_0 (supported by
    :func:`bifm_smooth` and :func:`dense_joint_solve`; :func:`mbf_smooth`
    needs a proper or deterministic initial message).  A deterministic start
    is a :class:`GaussianMoment` with zero covariance.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    obs_noise_var: float | np.ndarray
    horizon: int
    input_cov: np.ndarray | None = None
    initial_state: GaussianMoment | None = None
    nuv_input_components: tuple[int, ...] = ()
    nuv_output: bool = False
    # steps whose sparse input variances stay pinned at exactly 0; used by
    # builders whose step-0 input is redundant with a diffuse initial state
    nuv_frozen_input_steps: tuple[int, ...] = ()

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        L = self.C.shape[0]
        if np.ndim(self.obs_noise_var) == 0:
            if L != 1:
                raise ValueError("scalar obs_noise_var requires a single output row")
            self.obs_noise_var = float(self.obs_noise_var)
            if self.obs_noise_var <= 0.0:
                raise ValueError("obs_noise_var must be strictly positive")
        else:
            R = np.atleast_2d(np.asarray(self.obs_noise_var, dtype=float))
            if R.shape != (L, L):
                raise ValueError(f"obs_noise_var has shape {R.shape}, expected ({L}, {L})")
            if np.any(np.linalg.eigvalsh(symmetrize(R)) <= 0.0):
                raise ValueError("obs_noise_var matrix must be positive definite")
            self.obs_noise_var = symmetrize(R)
        if self.input_cov is None:
            self.input_cov = np.eye(self.m)
        else:
            self.input_cov = np.atleast_2d(np.asarray(self.input_cov, dtype=float))
            if self.input_cov.shape != (self.m, self.m):
                raise ValueError(f"input_cov has shape {self.input_cov.shape}, expected ({self.m}, {self.m})")
            self.input_cov = symmetrize(self.input_cov)
        if self.initial_state is not None and self.initial_state.dim != n:
            raise ValueError("initial_state dimension does not match the state dimension")
        self.nuv_input_components = tuple(int(j) for j in self.nuv_input_components)
        self.nuv_frozen_input_steps = tuple(int(k) for k in self.nuv_frozen_input_steps)
        for k in self.nuv_frozen_input_steps:
            if not 0 <= k < self.horizon:
                raise ValueError(f"frozen input step {k} out of range for horizon {self.horizon}")
        for j in self.nuv_input_components:
            if not 0 <= j < self.m:
                raise ValueError(f"NUV input component {j} out of range for m={self.m}")
        if self.nuv_output and self.L != 1:
            raise ValueError("the sparse output-noise attachment needs a scalar output")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def L(self) -> int:
        return self.C.shape[0]

    @property
    def K(self) -> int:
        return self.horizon


@dataclass
class NuvOverrides:
    """Per-step variance assignments for the NUV attachment points.

    ``input_var`` (K, m): per-step diagonal input variances replacing the
    diagonal of ``input_cov`` (requires a diagonal base ``input_cov``).
    ``obs_var_extra`` (K,): per-step additive observation-noise variance
    (scalar output only).  Entries may be exactly zero (deterministic-zero
    input / no outlier).
    """

    input_var: np.ndarray | None = None
    obs_var_extra: np.ndarray | None = None

    def validate(self, model: StateSpaceModel):
        if self.input_var is not None:
            self.input_var = np.asarray(self.input_var, dtype=float)
            if self.input_var.shape != (model.K, model.m):
                raise ValueError(f"input_var has shape {self.input_var.shape}, expected ({model.K}, {model.m})")
            if np.any(self.input_var < 0.0):
                raise ValueError("input variances must be >= 0")
            off_diag = model.input_cov - np.diag(np.diag(model.input_cov))
            if np.any(off_diag != 0.0):
                raise ValueError("per-step input variances require a diagonal input_cov")
        if self.obs_var_extra is not None:
            if model.L != 1:
                raise ValueError("obs_var_extra requires a scalar output")
            self.obs_var_extra = np.asarray(self.obs_var_extra, dtype=float)
            if self.obs_var_extra.shape != (model.K,):
                raise ValueError(f"obs_var_extra has shape {self.obs_var_extra.shape}, expected ({model.K},)")
            if np.any(self.obs_var_extra < 0.0):
                raise ValueError("obs_var_extra must be >= 0")


@dataclass
class SmoothingResult:
    """Per-step posteriors produced by a smoother.

    Arrays are indexed 0..K-1 for time steps 1..K.  ``input_bwd_mean`` /
    ``input_bwd_var`` hold the moments of the backward (likelihood) message
    on each input component; entries are NaN where that message is
    non-informative.  The ``outlier_*`` fields are populated only for models
    with a sparse output-noise attachment.  ``dual_xi`` / ``dual_prec`` are
    None for the dense oracle, which does not form messages.
    """

    state_mean: np.ndarray
    state_cov: np.ndarray
    input_mean: np.ndarray
    input_cov: np.ndarray
    output_mean: np.ndarray
    output_cov: np.ndarray
    loglik: float
    dual_xi: np.ndarray | None = None
    dual_prec: np.ndarray | None = None
    input_bwd_mean: np.ndarray | None = None
    input_bwd_var: np.ndarray | None = None
    outlier_mean: np.ndarray | None = None
    outlier_var: np.ndarray | None = None
    outlier_bwd_mean: np.ndarray | None = None
    outlier_bwd_var: np.ndarray | None = None

    @property
    def smoothed(self) -> np.ndarray:
        """Scalar smoothed output sequence (K,)."""
        return self.output_mean[:, 0]


# ---------------------------------------------------------------------------
# shared plumbing


def _check_observations(model: StateSpaceModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if model.L == 1:
        y = y.reshape(-1, 1) if y.ndim == 1 else y
    if y.shape != (model.K, model.L):
        raise ValueError(f"observations have shape {y.shape}, expected ({model.K}, {model.L})")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations contain non-finite values")
    return y


def _step_input_cov(model: StateSpaceModel, overrides: NuvOverrides | None, k: int) -> np.ndarray:
    if overrides is not None and overrides.input_var is not None:
        return np.diag(overrides.input_var[k])
    return model.input_cov


def _step_obs_noise(model: StateSpaceModel, overrides: NuvOverrides | None, k: int):
    """Per-step observation noise: scalar for L=1, (L, L) matrix otherwise."""
    if model.L == 1:
        r = model.obs_noise_var
        if overrides is not None and overrides.obs_var_extra is not None:
            r = r + overrides.obs_var_extra[k]
        return r
    return model.obs_noise_var


def _obs_noise_is_diagonal(model: StateSpaceModel) -> bool:
    if model.L == 1:
        return True
    R = model.obs_noise_var
    return bool(np.all(R - np.diag(np.diag(R)) == 0.0))


def _forward_pass(model: StateSpaceModel, y: np.ndarray, overrides: NuvOverrides | None):
    """Kalman forward pass in moment form.

    Returns (m_pred, V_pred, m_fwd, V_fwd, row_cache, loglik) where row_cache
    holds the intermediate message before each scalar observation row
    (needed by the sequential multi-output dual backward pass).
    """
    if model.initial_state is None:
        raise ValueError(
            "mbf_smooth needs a proper or deterministic initial state; "
            "use bifm_smooth for a non-informative start"
        )
    n, K, L = model.n, model.K, model.L
    A, B, C = model.A, model.B, model.C
    diagonal = _obs_noise_is_diagonal(model)

    m_pred = np.empty((K, n))
    V_pred = np.empty((K, n, n))
    m_fwd = np.empty((K, n))
    V_fwd = np.empty((K, n, n))
    row_means = np.empty((K, L, n)) if diagonal else None
    row_covs = np.empty((K, L, n, n)) if diagonal else None

    m = model.initial_state.mean.copy()
    V = model.initial_state.cov.copy()
    loglik = 0.0
    for k in range(K):
        D = _step_input_cov(model, overrides, k)
        m = A @ m
        V = symmetrize(A @ V @ A.T + B @ D @ B.T)
        m_pred[k] = m
        V_pred[k] = V
        R = _step_obs_noise(model, overrides, k)
        if diagonal:
            r_diag = np.array([R]) if L == 1 else np.diag(R)
            for i in range(L):
                row_means[k, i] = m
                row_covs[k, i] = V
                c = C[i]
                Vc = V @ c
                v_in = float(c @ Vc) + float(r_diag[i])
                if v_in <= 0.0:
                    raise ValueError(f"singular innovation variance at step {k}, row {i}")
                e = y[k, i] - float(c @ m)
                loglik += -0.5 * (_LOG2PI + math.log(v_in) + e * e / v_in)
                m = m + Vc * (e / v_in)
                V = symmetrize(V - np.outer(Vc, Vc) / v_in)
        else:
            S = symmetrize(C @ V @ C.T + R)
            gain = solve_psd(S, C @ V).T
            e = y[k] - C @ m
            loglik += -0.5 * (L * _LOG2PI + logdet_psd(S) + float(e @ solve_psd(S, e)))
            m = m + gain @ e
            V = symmetrize(V - gain @ C @ V)
        m_fwd[k] = m
        V_fwd[k] = V
    return m_pred, V_pred, m_fwd, V_fwd, (row_means, row_covs), loglik


def _input_posteriors(D: np.ndarray, dxi_s: np.ndarray, dprec_s: np.ndarray, B: np.ndarray):
    """Posterior and backward-message moments of U_k from the dual at the adder."""
    xi_u = B.T @ dxi_s
    W_u = B.T @ dprec_s @ B
    mean = -D @ xi_u
    cov = symmetrize(D - D @ W_u @ D)
    d = np.diag(D)
    w = np.diag(W_u)
    bwd_mean = np.full_like(d, np.nan)
    bwd_var = np.full_like(d, np.nan)
    pos = w > 0.0
    bwd_mean[pos] = -xi_u[pos] / w[pos]
    bwd_var[pos] = 1.0 / w[pos] - d[pos]
    return mean, cov, bwd_mean, bwd_var


def _outlier_posteriors(model, overrides, y, out_mean, out_cov):
    """Posterior and backward moments of the sparse output-noise terms."""
    K = model.K
    extra = overrides.obs_var_extra if (overrides is not None and overrides.obs_var_extra is not None) else np.zeros(K)
    r_tot = model.obs_noise_var + extra
    my = out_mean[:, 0]
    vy = out_cov[:, 0, 0]
    dxi = (my - y[:, 0]) / r_tot
    dprec = 1.0 / r_tot - vy / r_tot**2
    zt_mean = -extra * dxi
    zt_var = extra - extra**2 * dprec
    bwd_mean = np.full(K, np.nan)
    bwd_var = np.full(K, np.nan)
    pos = dprec > 0.0
    bwd_mean[pos] = -dxi[pos] / dprec[pos]
    bwd_var[pos] = 1.0 / dprec[pos] - extra[pos]
    return zt_mean, zt_var, bwd_mean, bwd_var


def _finalize(model, overrides, y, state_mean, state_cov, **kwargs) -> SmoothingResult:
    K = model.K
    C = model.C
    out_mean = state_mean @ C.T
    out_cov = np.einsum("ij,kjl,ml->kim", C, state_cov, C)
    res = SmoothingResult(
        state_mean=state_mean,
        state_cov=state_cov,
        output_mean=out_mean,
        output_cov=out_cov,
        **kwargs,
    )
    if model.nuv_output:
        zt = _outlier_posteriors(model, overrides, y, out_mean, out_cov)
        res.outlier_mean, res.outlier_var, res.outlier_bwd_mean, res.outlier_bwd_var = zt
    return res


# ---------------------------------------------------------------------------
# MBF


def mbf_smooth(
    model: StateSpaceModel,
    y,
    nuv_overrides: NuvOverrides | None = None,
    *,
    variant: str = "F",
    backend: str = "auto",
) -> SmoothingResult:
    """Modified Bryson-Frazier smoothing with input estimation.

    Forward Kalman pass in moment form, backward pass in the dual
    parameterization initialized with a zero dual at the end of the horizon.
    ``variant`` selects between the two published forms of the backward
    observation update ("F" or "G"); they agree to round-off.

    ``backend="auto"`` dispatches eligible models (scalar output, proper
    Gaussian initial state, F-variant) to the fast kernel selected at import
    time (compiled extension or its pure-numpy twin); ``backend="reference"``
    forces the table-by-table implementation below; ``backend="kernel"``
    requires kernel eligibility.
    """
    if nuv_overrides is not None:
        nuv_overrides.validate(model)
    y = _check_observations(model, y)
    if variant not in ("F", "G"):
        raise ValueError(f"unknown variant {variant!r}, expected 'F' or 'G'")
    if backend not in ("auto", "kernel", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend != "reference":
        eligible = _kernel_eligible(model, variant)
        if eligible:
            return _mbf_via_kernel(model, y, nuv_overrides)
        if backend == "kernel":
            raise ValueError("model is not eligible for the fast kernel (needs scalar output, "
                             "Gaussian initial state, diagonal input covariance and variant='F')")
    return _mbf_reference(model, y, nuv_overrides, variant)


def _mbf_reference(model, y, overrides, variant):
    n, m, K, L = model.n, model.m, model.K, model.L
    A, B, C = model.A, model.B, model.C
    m_pred, V_pred, m_fwd, V_fwd, (row_means, row_covs), loglik = _forward_pass(model, y, overrides)
    diagonal = row_means is not None

    dual_xi = np.empty((K, n))
    dual_prec = np.empty((K, n, n))
    state_mean = np.empty((K, n))
    state_cov = np.empty((K, n, n))
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
        state_cov[k] = symmetrize(V_fwd[k] - V_fwd[k] @ dW @ V_fwd[k])

        # dual backward through the observation block(s)
        R = _step_obs_noise(model, overrides, k)
        if diagonal:
            r_diag = np.array([R]) if L == 1 else np.diag(R)
            for i in range(L - 1, -1, -1):
                c = C[i]
                cc = np.outer(c, c)
                if variant == "F":
                    Vz = row_covs[k, i + 1] if i + 1 < L else V_fwd[k]
                    mz = row_means[k, i + 1] if i + 1 < L else m_fwd[k]
                    F = eye - Vz @ cc / r_diag[i]
                    dxi = F.T @ dxi + c * ((float(c @ mz) - y[k, i]) / r_diag[i])
                    dW = symmetrize(F.T @ dW @ F + (cc / r_diag[i]) @ F)
                else:
                    Vx = row_covs[k, i]
                    mx = row_means[k, i]
                    g = 1.0 / (r_diag[i] + float(c @ Vx @ c))
                    F = eye - Vx @ cc * g
                    dxi = F.T @ dxi + c * (g * (float(c @ mx) - y[k, i]))
                    dW = symmetrize(F.T @ dW @ F + cc * g)
        else:
            Rinv = inv_psd(R)
            F = eye - V_fwd[k] @ C.T @ Rinv @ C
            dxi = F.T @ dxi + C.T @ Rinv @ (C @ m_fwd[k] - y[k])
            dW = symmetrize(F.T @ dW @ F + C.T @ Rinv @ C @ F)

        D = _step_input_cov(model, overrides, k)
        input_mean[k], input_cov[k], input_bwd_mean[k], input_bwd_var[k] = _input_posteriors(D, dxi, dW, B)

        dxi = A.T @ dxi
        dW = symmetrize(A.T @ dW @ A)

    return _finalize(
        model, overrides, y, state_mean, state_cov,
        input_mean=input_mean, input_cov=input_cov,
        input_bwd_mean=input_bwd_mean, input_bwd_var=input_bwd_var,
        dual_xi=dual_xi, dual_prec=dual_prec, loglik=loglik,
    )


def _kernel_eligible(model: StateSpaceModel, variant: str) -> bool:
    if variant != "F" or model.L != 1:
        return False
    if model.initial_state is None:
        return False
    off_diag = model.input_cov - np.diag(np.diag(model.input_cov))
    return not np.any(off_diag != 0.0)


def _mbf_via_kernel(model, y, overrides):
    from . import kernels

    K, m = model.K, model.m
    if overrides is not None and overrides.input_var is not None:
        d = np.ascontiguousarray(overrides.input_var)
    else:
        d = np.tile(np.diag(model.input_cov), (K, 1))
    r = np.full(K, float(model.obs_noise_var))
    if overrides is not None and overrides.obs_var_extra is not None:
        r = r + overrides.obs_var_extra
    out = kernels.mbf_scalar(
        np.ascontiguousarray(model.A),
        np.ascontiguousarray(model.B),
        np.ascontiguousarray(model.C[0]),
        np.ascontiguousarray(y[:, 0]),
        r,
        d,
        np.ascontiguousarray(model.initial_state.mean),
        np.ascontiguousarray(model.initial_state.cov),
    )
    (state_mean, state_cov, dual_xi, dual_prec, input_mean, input_cov,
     input_bwd_mean, input_bwd_var, loglik) = out
    return _finalize(
        model, overrides, y, state_mean, state_cov,
        input_mean=input_mean, input_cov=input_cov,
        input_bwd_mean=input_bwd_mean, input_bwd_var=input_bwd_var,
        dual_xi=dual_xi, dual_prec=dual_prec, loglik=float(loglik),
    )


# ---------------------------------------------------------------------------
# BIFM


def bifm_smooth(
    model: StateSpaceModel,
    y,
    nuv_overrides: NuvOverrides | None = None,
    *,
    variant: str = "F",
) -> SmoothingResult:
    """Backward information filter, forward marginal smoothing.

    The backward pass runs a time-reversed information filter; the forward
    pass propagates posterior marginals directly.  Handles a non-informative
    initial state exactly (the backward precision at X_0 must then be
    positive definite).  ``variant`` selects between the two published forms
    of the marginal step across the input block ("F" or "H").

    The log-likelihood is taken from a forward innovation recursion and is
    NaN for a non-informative initial state (improper prior).
    """
    if nuv_overrides is not None:
        nuv_overrides.validate(model)
    y = _check_observations(model, y)
    if variant not in ("F", "H"):
        raise ValueError(f"unknown variant {variant!r}, expected 'F' or 'H'")
    overrides = nuv_overrides
    n, m, K, L = model.n, model.m, model.K, model.L
    A, B, C = model.A, model.B, model.C
    eye = np.eye(n)

    # backward information pass; cache messages on the X_k edge (before the
    # local observation is absorbed) and on the S_k edge (after).
    xi_x = np.empty((K, n))
    W_x = np.empty((K, n, n))
    xi_s = np.empty((K, n))
    W_s = np.empty((K, n, n))
    xi_ax = np.empty((K, n))
    W_ax = np.empty((K, n, n))

    xi = np.zeros(n)
    W = np.zeros((n, n))
    for k in range(K - 1, -1, -1):
        xi_x[k] = xi
        W_x[k] = W
        R = _step_obs_noise(model, overrides, k)
        if L == 1:
            c = C[0]
            xi = xi + c * (y[k, 0] / R)
            W = symmetrize(W + np.outer(c, c) / R)
        elif _obs_noise_is_diagonal(model):
            r_diag = np.diag(R)
            xi = xi + C.T @ (y[k] / r_diag)
            W = symmetrize(W + (C.T / r_diag) @ C)
        else:
            Rinv = inv_psd(R)
            xi = xi + C.T @ Rinv @ y[k]
            W = symmetrize(W + C.T @ Rinv @ C)
        xi_s[k] = xi
        W_s[k] = W
        # reverse input block: absorb the zero-mean input of covariance D
        D = _step_input_cov(model, overrides, k)
        sqrt_d = _chol_cov(D)
        WB = W @ B @ sqrt_d
        M = np.eye(m) + sqrt_d @ B.T @ W @ B @ sqrt_d
        gain = _solve_small(M, WB.T).T          # W B H' with H' = sqrt_d M^-1 sqrt_d
        W = symmetrize(W - gain @ WB.T)
        xi = xi - gain @ (sqrt_d @ (B.T @ xi))
        xi_ax[k] = xi
        W_ax[k] = W
        xi = A.T @ xi
        W = symmetrize(A.T @ W @ A)

    # marginal at X_0
    init = model.initial_state
    if init is None:
        try:
            V0_post = inv_psd(W)
        except np.linalg.LinAlgError:
            raise ValueError("non-informative initial state and singular backward precision: "
                             "the model is not identifiable from these observations") from None
        m_cur = V0_post @ xi
        V_cur = V0_post
    elif np.all(init.cov == 0.0):
        m_cur = init.mean.copy()
        V_cur = np.zeros((n, n))
    else:
        S = eye + init.cov @ W
        m_cur = solve_square(S, init.mean + init.cov @ xi)
        V_cur = symmetrize(solve_square(S, init.cov))

    state_mean = np.empty((K, n))
    state_cov = np.empty((K, n, n))
    dual_xi = np.empty((K, n))
    dual_prec = np.empty((K, n, n))
    input_mean = np.empty((K, m))
    input_cov = np.empty((K, m, m))
    input_bwd_mean = np.empty((K, m))
    input_bwd_var = np.empty((K, m))

    for k in range(K):
        mp = A @ m_cur
        Vp = symmetrize(A @ V_cur @ A.T)
        D = _step_input_cov(model, overrides, k)
        if variant == "F":
            BD = B @ D
            F = eye - W_ax[k] @ BD @ B.T
            m_cur = F.T @ mp + BD @ (B.T @ xi_ax[k])
            V_cur = symmetrize(F.T @ Vp @ F + BD @ B.T @ F)
        else:
            d = np.diag(D)
            if np.any(d <= 0.0):
                raise ValueError("the H-variant marginal step needs strictly positive input variances")
            H = _solve_small(np.diag(1.0 / d) + B.T @ W_s[k] @ B, np.eye(m))
            BH = B @ H
            F = eye - W_s[k] @ BH @ B.T
            m_cur = F.T @ mp + BH @ (B.T @ xi_s[k])
            V_cur = symmetrize(F.T @ Vp @ F + BH @ B.T)
        state_mean[k] = m_cur
        state_cov[k] = V_cur
        dual_xi[k] = W_x[k] @ m_cur - xi_x[k]
        dual_prec[k] = symmetrize(W_x[k] - W_x[k] @ V_cur @ W_x[k])
        dxi_s = W_s[k] @ m_cur - xi_s[k]
        dW_s = symmetrize(W_s[k] - W_s[k] @ V_cur @ W_s[k])
        input_mean[k], input_cov[k], input_bwd_mean[k], input_bwd_var[k] = _input_posteriors(D, dxi_s, dW_s, B)

    if init is not None:
        loglik = _forward_pass(model, y, overrides)[-1]
    else:
        loglik = float("nan")

    return _finalize(
        model, overrides, y, state_mean, state_cov,
        input_mean=input_mean, input_cov=input_cov,
        input_bwd_mean=input_bwd_mean, input_bwd_var=input_bwd_var,
        dual_xi=dual_xi, dual_prec=dual_prec, loglik=loglik,
    )


def _chol_cov(D: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD input covariance (diagonal fast path)."""
    d = np.diag(D)
    if not np.any(D - np.diag(d) != 0.0):
        return np.diag(np.sqrt(d))
    vals, vecs = np.linalg.eigh(D)
    vals = np.clip(vals, 0.0, None)
    return symmetrize(vecs @ np.diag(np.sqrt(vals)) @ vecs.T)


def _solve_small(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return solve_psd(M, rhs)


# ---------------------------------------------------------------------------
# dense joint-Gaussian oracle


def dense_joint_solve(
    model: StateSpaceModel,
    y,
    nuv_overrides: NuvOverrides | None = None,
) -> SmoothingResult:
    """Exact posteriors by one dense linear solve over all states and inputs.

    Assembles the joint Gaussian over (X_0, U_1..U_K) and conditions on the
    observations.  Independent of the message-passing code; intended as a
    test oracle and for the CLI's ``oracle-check``.  Guarded to desk scale.
    """
    if nuv_overrides is not None:
        nuv_overrides.validate(model)
    y = _check_observations(model, y)
    overrides = nuv_overrides
    n, m, K, L = model.n, model.m, model.K, model.L
    A, B, C = model.A, model.B, model.C
    if n * K > 2000:
        raise ValueError(f"dense_joint_solve size guard exceeded: n*K = {n * K} > 2000")

    init = model.initial_state
    deterministic_init = init is not None and np.all(init.cov == 0.0)
    include_x0 = not deterministic_init

    # active input components per step (zero-variance inputs are fixed at 0)
    step_cov = [np.atleast_2d(_step_input_cov(model, overrides, k)) for k in range(K)]
    active: list[np.ndarray] = []
    for k in range(K):
        d = np.diag(step_cov[k])
        off = step_cov[k] - np.diag(d)
        if np.any(off != 0.0):
            active.append(np.arange(m))
        else:
            active.append(np.flatnonzero(d > 0.0))

    blocks = []  # (offset, size) per unknown block; block 0 is x0 when present
    p = 0
    if include_x0:
        blocks.append((0, n))
        p += n
    u_offsets = []
    for k in range(K):
        u_offsets.append(p)
        p += len(active[k])

    prior_prec = np.zeros((p, p))
    prior_mean = np.zeros(p)
    if include_x0 and init is not None:
        W0 = inv_psd(init.cov)
        prior_prec[:n, :n] = W0
        prior_mean[:n] = init.mean
    for k in range(K):
        idx = active[k]
        if len(idx) == 0:
            continue
        o = u_offsets[k]
        sub = step_cov[k][np.ix_(idx, idx)]
        prior_prec[o:o + len(idx), o:o + len(idx)] = inv_psd(sub)

    # propagate x_k = Phi_k theta + off_k
    Phi = np.zeros((n, p))
    off = np.zeros(n)
    if include_x0:
        Phi[:, :n] = np.eye(n)
    else:
        off = init.mean.copy()
    H_rows = np.empty((K * L, p))
    h_off = np.empty(K * L)
    Phis = np.empty((K, n, p))
    offs = np.empty((K, n))
    for k in range(K):
        Phi = A @ Phi
        off = A @ off
        idx = active[k]
        if len(idx):
            o = u_offsets[k]
            Phi = Phi.copy()
            Phi[:, o:o + len(idx)] += B[:, idx]
        Phis[k] = Phi
        offs[k] = off
        H_rows[k * L:(k + 1) * L] = C @ Phi
        h_off[k * L:(k + 1) * L] = C @ off

    # observation noise (block diagonal)
    r_list = []
    for k in range(K):
        R = _step_obs_noise(model, overrides, k)
        r_list.append(np.atleast_2d(R))
    Rfull = np.zeros((K * L, K * L))
    for k in range(K):
        Rfull[k * L:(k + 1) * L, k * L:(k + 1) * L] = r_list[k]
    Rinv = np.linalg.inv(Rfull)

    post_prec = prior_prec + H_rows.T @ Rinv @ H_rows
    rhs = prior_prec @ prior_mean + H_rows.T @ Rinv @ (y.reshape(-1) - h_off)
    try:
        post_cov = np.linalg.inv(symmetrize(post_prec))
    except np.linalg.LinAlgError:
        raise ValueError("singular joint covariance: the model is not identifiable") from None
    post_cov = symmetrize(post_cov)
    theta = post_cov @ rhs

    state_mean = np.einsum("knp,p->kn", Phis, theta) + offs
    state_cov = np.einsum("knp,pq,kmq->knm", Phis, post_cov, Phis)
    input_mean = np.zeros((K, m))
    input_cov = np.zeros((K, m, m))
    for k in range(K):
        idx = active[k]
        if len(idx) == 0:
            continue
        o = u_offsets[k]
        sl = slice(o, o + len(idx))
        input_mean[k, idx] = theta[sl]
        input_cov[k][np.ix_(idx, idx)] = post_cov[sl, sl]

    # marginal likelihood of y (proper prior only)
    if init is None:
        loglik = float("nan")
    else:
        prior_cov_blocks = np.zeros((p, p))
        if include_x0:
            prior_cov_blocks[:n, :n] = init.cov
        for k in range(K):
            idx = active[k]
            if len(idx):
                o = u_offsets[k]
                prior_cov_blocks[o:o + len(idx), o:o + len(idx)] = step_cov[k][np.ix_(idx, idx)]
        mean_y = H_rows @ prior_mean + h_off
        cov_y = symmetrize(H_rows @ prior_cov_blocks @ H_rows.T + Rfull)
        e = y.reshape(-1) - mean_y
        sign, logdet = np.linalg.slogdet(cov_y)
        if sign <= 0:
            raise ValueError("singular joint covariance of the observations")
        loglik = -0.5 * (K * L * _LOG2PI + logdet + float(e @ np.linalg.solve(cov_y, e)))

    return _finalize(
        model, overrides, y, state_mean, state_cov,
        input_mean=input_mean, input_cov=input_cov, loglik=loglik,
    )
