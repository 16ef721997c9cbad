"""Small dense linear algebra helpers.

All matrix factorizations performed by the library go through this module so
that tests can assert structural claims about the smoothers (in particular:
with scalar inputs and outputs, neither smoother factorizes a matrix of
dimension > 1).  1x1 "solves" are plain scalar divisions and are not counted.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np


@dataclass
class Tolerances:
    """Library-wide numerical tolerances."""

    sym_rtol: float = 1e-12       # relative Frobenius asymmetry allowed on construction
    identity_rtol: float = 1e-10  # relative tolerance for table-identity checks
    psd_rtol: float = 1e-10       # eigenvalues may undershoot zero by psd_rtol * lambda_max


tolerances = Tolerances()

_local = threading.local()


class FactorizationCounter:
    """Counts matrix factorizations of dimension > 1."""

    def __init__(self):
        self.count = 0


def _active_counters():
    return getattr(_local, "counters", ())


@contextmanager
def count_factorizations():
    """Context manager yielding a :class:`FactorizationCounter`.

    Every Cholesky/LU factorization of a matrix with dimension > 1 performed
    while the context is active increments ``counter.count``.
    """
    counter = FactorizationCounter()
    stack = getattr(_local, "counters", ())
    _local.counters = stack + (counter,)
    try:
        yield counter
    finally:
        _local.counters = stack


def _record_factorization(dim: int):
    if dim > 1:
        for c in _active_counters():
            c.count += 1


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def solve_psd(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mat @ x = rhs`` for symmetric positive definite ``mat``.

    1x1 systems are solved by scalar division; larger systems by Cholesky.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 1:
        return np.asarray(rhs, dtype=float) / mat[0, 0]
    _record_factorization(n)
    L = np.linalg.cholesky(mat)
    z = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, z)


def inv_psd(mat: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix (Cholesky based)."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 1:
        return np.array([[1.0 / mat[0, 0]]])
    return symmetrize(solve_psd(mat, np.eye(n)))


def solve_square(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a general (not necessarily symmetric) square system via LU."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 1:
        return np.asarray(rhs, dtype=float) / mat[0, 0]
    _record_factorization(n)
    return np.linalg.solve(mat, rhs)


def logdet_psd(mat: np.ndarray) -> float:
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 1:
        return float(np.log(mat[0, 0]))
    _record_factorization(n)
    L = np.linalg.cholesky(mat)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def check_symmetric(mat: np.ndarray, what: str = "matrix"):
    scale = max(float(np.linalg.norm(mat)), 1.0)
    asym = float(np.linalg.norm(mat - mat.T))
    if asym > 1e-8 * scale:
        raise ValueError(f"{what} is not symmetric (relative asymmetry {asym / scale:.2e})")


def check_psd(mat: np.ndarray, what: str = "matrix"):
    if mat.shape[0] == 0:
        return
    eigs = np.linalg.eigvalsh(mat)
    lam_max = max(float(eigs[-1]), 0.0)
    floor = -tolerances.psd_rtol * max(lam_max, 1e-300)
    if eigs[0] < floor:
        raise ValueError(
            f"{what} is not positive semidefinite "
            f"(min eigenvalue {eigs[0]:.3e}, max {lam_max:.3e})"
        )
