"""Sum-of-Gaussians dictionary model with closed-form NUV machinery.

The observation is ``y = sum_k U_k b_k + Z`` with independent zero-mean
inputs ``U_k ~ N(0, sigma2_k)`` and white noise ``Z ~ N(0, noise_var I)``.
Everything here is closed form: the MAP coefficients, the posterior and
backward-message moments of each ``U_k``, and a stationarity check for a
candidate variance vector.  These functions double as oracles for the
message-passing smoothers (the model is a K-step chain with a single
terminal observation).

``wtilde_recursive`` computes the central matrix

    Wt = (sum_k sigma2_k b_k b_k^T + noise_var I)^{-1}

by a backward rank-one recursion using only scalar divisions; it is the
production path and scales as O(n^2 K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import inv_psd, symmetrize

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class DictionaryModel:
    """Atoms b_k (rows of ``atoms``, shape (K, n)), noise variance, observation y."""

    atoms: np.ndarray
    noise_var: float
    y: np.ndarray

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.atoms.shape[1] != self.y.shape[0]:
            raise ValueError(f"atoms have dimension {self.atoms.shape[1]}, y has {self.y.shape[0]}")
        if self.noise_var <= 0.0:
            raise ValueError("noise_var must be strictly positive")
        norms = np.linalg.norm(self.atoms, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("every atom must be nonzero")

    @property
    def K(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]


@dataclass
class StationarityReport:
    """Per-index stationarity conditions for a candidate variance vector.

    ``condition_value[k]`` is (b_k^T W_k y)^2 - b_k^T W_k b_k, which must be
    <= 0 (within tolerance) at any stationary point; for active indices
    (sigma2_k > 0) it must vanish.  ``equality_residual`` holds the relative
    residual of the active-index equality in its Wt form.
    """

    condition_value: np.ndarray
    equality_residual: np.ndarray
    sigmas: np.ndarray
    satisfied: np.ndarray
    all_satisfied: bool
    tolerance: float


def _check_sigmas(model: DictionaryModel, sigmas) -> np.ndarray:
    sigmas = np.asarray(sigmas, dtype=float).reshape(-1)
    if sigmas.shape[0] != model.K:
        raise ValueError(f"expected {model.K} variances, got {sigmas.shape[0]}")
    if np.any(sigmas < 0.0):
        raise ValueError("variances must be >= 0")
    return sigmas


def wtilde_recursive(model: DictionaryModel, sigmas) -> np.ndarray:
    """Inverse of the output covariance, computed without matrix inversion.

    Backward rank-one downdates starting from noise_var^{-1} I; one scalar
    division per atom, O(n^2) work each.
    """
    sigmas = _check_sigmas(model, sigmas)
    n = model.n
    W = np.eye(n) / model.noise_var
    for k in range(model.K - 1, -1, -1):
        if sigmas[k] == 0.0:
            continue
        b = model.atoms[k]
        Wb = W @ b
        denom = 1.0 / sigmas[k] + float(b @ Wb)
        W = W - np.outer(Wb, Wb) / denom
    return symmetrize(W)


def output_covariance(model: DictionaryModel, sigmas) -> np.ndarray:
    """sum_k sigma2_k b_k b_k^T + noise_var I (the inverse of wtilde)."""
    sigmas = _check_sigmas(model, sigmas)
    S = model.noise_var * np.eye(model.n)
    S += (model.atoms.T * sigmas) @ model.atoms
    return symmetrize(S)


def solve_map(model: DictionaryModel, sigmas) -> np.ndarray:
    """MAP estimate of all coefficients: u_k = sigma2_k b_k^T Wt y."""
    sigmas = _check_sigmas(model, sigmas)
    Wty = wtilde_recursive(model, sigmas) @ model.y
    return sigmas * (model.atoms @ Wty)


def posterior_moments(model: DictionaryModel, sigmas, k: int):
    """Posterior mean and variance of U_k.  (0, 0) when sigma2_k = 0."""
    sigmas = _check_sigmas(model, sigmas)
    s = sigmas[k]
    if s == 0.0:
        return 0.0, 0.0
    Wt = wtilde_recursive(model, sigmas)
    b = model.atoms[k]
    mean = s * float(b @ Wt @ model.y)
    var = s - s * float(b @ Wt @ b) * s
    return mean, max(var, 0.0)


def _wk_matrix(model: DictionaryModel, sigmas, k: int) -> np.ndarray:
    """Output precision with atom k's own variance removed (test-side O(n^3))."""
    S = output_covariance(model, sigmas)
    b = model.atoms[k]
    S = S - sigmas[k] * np.outer(b, b)
    return inv_psd(symmetrize(S))


def backward_message_moments(model: DictionaryModel, sigmas, k: int):
    """Moments of the likelihood message on U_k (independent of sigma2_k).

    Computed from the leave-one-out precision W_k; the equivalent Wt-based
    form is exercised in the tests.
    """
    sigmas = _check_sigmas(model, sigmas)
    Wk = _wk_matrix(model, sigmas, k)
    b = model.atoms[k]
    bWb = float(b @ Wk @ b)
    var = 1.0 / bWb
    mean = var * float(b @ Wk @ model.y)
    return mean, var


def loglik(model: DictionaryModel, sigmas) -> float:
    """Marginal log-likelihood of y under the variance vector."""
    sigmas = _check_sigmas(model, sigmas)
    S = output_covariance(model, sigmas)
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise ValueError("singular output covariance")
    e = model.y
    return -0.5 * (model.n * _LOG2PI + logdet + float(e @ np.linalg.solve(S, e)))


def check_stationarity(model: DictionaryModel, sigmas, tolerance: float = 1e-6) -> StationarityReport:
    """Evaluate the local-maximum conditions for a candidate variance vector.

    Inactive indices must satisfy (b_k^T W_k y)^2 <= b_k^T W_k b_k; active
    indices must additionally meet the corresponding equality, checked here
    in its Wt form (b_k^T Wt y)^2 = b_k^T Wt b_k.
    """
    sigmas = _check_sigmas(model, sigmas)
    K = model.K
    Wt = wtilde_recursive(model, sigmas)
    condition = np.empty(K)
    residual = np.zeros(K)
    satisfied = np.empty(K, dtype=bool)
    for k in range(K):
        b = model.atoms[k]
        Wk = _wk_matrix(model, sigmas, k)
        lhs = float(b @ Wk @ model.y) ** 2
        rhs = float(b @ Wk @ b)
        condition[k] = lhs - rhs
        if sigmas[k] > 0.0:
            lhs_t = float(b @ Wt @ model.y) ** 2
            rhs_t = float(b @ Wt @ b)
            residual[k] = abs(lhs_t - rhs_t) / max(abs(rhs_t), 1e-300)
            satisfied[k] = residual[k] <= tolerance
        else:
            satisfied[k] = condition[k] <= tolerance * max(rhs, 1.0)
    return StationarityReport(
        condition_value=condition,
        equality_residual=residual,
        sigmas=sigmas,
        satisfied=satisfied,
        all_satisfied=bool(np.all(satisfied)),
        tolerance=tolerance,
    )
