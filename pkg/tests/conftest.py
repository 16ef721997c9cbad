"""Shared generators for randomized tests.

All randomness is seeded numpy; no test depends on global RNG state.
"""

from __future__ import annotations

import numpy as np

from nuvssm import GaussianMoment, StateSpaceModel


def random_transition(rng: np.random.Generator, n: int) -> np.ndarray:
    """Well-conditioned, generally non-normal A with singular values in [0.3, 1]."""
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = rng.uniform(0.3, 1.0, size=n)
    return U @ np.diag(s) @ V.T


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    M = rng.standard_normal((n, n))
    return scale * (M @ M.T / n + 0.5 * np.eye(n))


def random_model(
    rng: np.random.Generator,
    n_max: int = 6,
    m_max: int = 2,
    K_max: int = 50,
    L: int = 1,
    init: str = "gaussian",
    diagonal_input: bool = True,
) -> StateSpaceModel:
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    K = int(rng.integers(2, K_max + 1))
    A = random_transition(rng, n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((L, n))
    if L == 1:
        R = float(rng.uniform(0.1, 1.0))
    else:
        R = random_spd(rng, L, 0.5)
    input_cov = (np.diag(rng.uniform(0.2, 1.5, size=m)) if diagonal_input
                 else random_spd(rng, m))
    if init == "gaussian":
        state0 = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
    elif init == "deterministic":
        state0 = GaussianMoment(rng.standard_normal(n), np.zeros((n, n)))
    elif init == "none":
        state0 = None
    else:
        raise ValueError(init)
    return StateSpaceModel(A, B, C, R, K, input_cov=input_cov, initial_state=state0)


def simulate_from(model: StateSpaceModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one observation sequence from the model."""
    n, K, L = model.n, model.K, model.L
    if model.initial_state is not None:
        cov = model.initial_state.cov
        x = model.initial_state.mean + (np.linalg.cholesky(cov + 1e-15 * np.eye(n))
                                        @ rng.standard_normal(n) if np.any(cov) else 0.0)
    else:
        x = rng.standard_normal(n)
    Lu = np.linalg.cholesky(model.input_cov + 1e-15 * np.eye(model.m))
    if L == 1:
        Lr = np.sqrt(float(model.obs_noise_var)) * np.ones((1, 1))
    else:
        Lr = np.linalg.cholesky(model.obs_noise_var)
    y = np.empty((K, L))
    for k in range(K):
        x = model.A @ x + model.B @ (Lu @ rng.standard_normal(model.m))
        y[k] = model.C @ x + Lr @ rng.standard_normal(L)
    return y[:, 0] if L == 1 else y
