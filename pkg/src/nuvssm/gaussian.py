"""Gaussian message algebra for cycle-free linear-Gaussian factor graphs.

Messages come in two parameterizations:

* moment form -- mean vector and covariance matrix (:class:`GaussianMoment`);
* information form -- precision matrix ``W`` and precision-weighted mean
  ``xi = W m`` (:class:`GaussianInfo`).

Posteriors on an edge are either the plain marginal ``(m, V)``
(:class:`Marginal`) or the dual pair ``(dxi, dprec)`` with
``dprec = (V_fwd + V_bwd)^-1`` and ``dxi = dprec (m_fwd - m_bwd)``
(:class:`DualMarginal`).  The node-local computation rules below cover the
equality constraint, the adder, the matrix multiplier, single-edge marginals,
the observation block (equality + multiplier + additive noise) and the input
block (adder fed through a multiplier).

Degenerate messages have exactly one canonical encoding:

* a non-informative message is a :class:`GaussianInfo` with ``prec = 0``
  (an "infinite covariance" moment message is rejected at construction);
* a deterministic message is a :class:`GaussianMoment` with ``cov = 0``
  (conversion to information form raises).

Combining two degenerate messages of the same kind on one edge is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    check_psd,
    check_symmetric,
    inv_psd,
    solve_psd,
    solve_square,
    symmetrize,
)


def _as_vector(x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _as_sym_matrix(m, dim: int, what: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.shape != (dim, dim):
        raise ValueError(f"{what} has shape {a.shape}, expected ({dim}, {dim})")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} has non-finite entries")
    check_symmetric(a, what)
    return symmetrize(a)


@dataclass(frozen=True)
class GaussianMoment:
    """Gaussian message in moment form: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean)
        cov = _as_sym_matrix(self.cov, mean.size, "cov")
        check_psd(cov, "cov")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_info(self) -> "GaussianInfo":
        """Convert to information form; fails for singular covariance."""
        if np.linalg.matrix_rank(self.cov) < self.dim:
            raise ValueError("deterministic (singular-covariance) message has no information form")
        prec = inv_psd(self.cov)
        return GaussianInfo(prec @ self.mean, prec)


@dataclass(frozen=True)
class GaussianInfo:
    """Gaussian message in information form: ``xi = W m`` and precision ``W``.

    ``prec = 0`` is the non-informative message.
    """

    xi: np.ndarray
    prec: np.ndarray

    def __post_init__(self):
        xi = _as_vector(self.xi)
        prec = _as_sym_matrix(self.prec, xi.size, "prec")
        check_psd(prec, "prec")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "prec", prec)

    @property
    def dim(self) -> int:
        return self.xi.size

    @property
    def informative(self) -> bool:
        return bool(np.any(self.prec != 0.0))

    @classmethod
    def non_informative(cls, dim: int) -> "GaussianInfo":
        return cls(np.zeros(dim), np.zeros((dim, dim)))

    def to_moment(self) -> GaussianMoment:
        if not self.informative or np.linalg.matrix_rank(self.prec) < self.dim:
            raise ValueError("singular-precision message has no moment form")
        cov = inv_psd(self.prec)
        return GaussianMoment(cov @ self.xi, cov)


@dataclass(frozen=True)
class Marginal:
    """Posterior mean and covariance on an edge."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean)
        cov = _as_sym_matrix(self.cov, mean.size, "cov")
        check_psd(cov, "cov")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class DualMarginal:
    """Dual posterior parameterization on an edge."""

    dxi: np.ndarray
    dprec: np.ndarray

    def __post_init__(self):
        dxi = _as_vector(self.dxi)
        dprec = _as_sym_matrix(self.dprec, dxi.size, "dprec")
        object.__setattr__(self, "dxi", dxi)
        object.__setattr__(self, "dprec", dprec)

    @property
    def dim(self) -> int:
        return self.dxi.size

    @classmethod
    def zero(cls, dim: int) -> "DualMarginal":
        return cls(np.zeros(dim), np.zeros((dim, dim)))


def _check_same_dim(a, b, what: str):
    if a.dim != b.dim:
        raise ValueError(f"{what}: dimension mismatch ({a.dim} vs {b.dim})")


# ---------------------------------------------------------------------------
# equality constraint (X = Y = Z)

def equality_node(a: GaussianInfo, b: GaussianInfo) -> GaussianInfo:
    """Combine two information-form messages through an equality constraint."""
    _check_same_dim(a, b, "equality_node")
    return GaussianInfo(a.xi + b.xi, a.prec + b.prec)


def equality_marginal(mar: Marginal) -> Marginal:
    """Marginals are identical on all edges of an equality constraint."""
    return mar


def equality_dual(a: DualMarginal, b: DualMarginal) -> DualMarginal:
    """Dual means add across an equality constraint: branch duals sum into the trunk."""
    _check_same_dim(a, b, "equality_dual")
    return DualMarginal(a.dxi + b.dxi, a.dprec + b.dprec)


# ---------------------------------------------------------------------------
# adder (Z = X + Y)

def adder_node_forward(x: GaussianMoment, y: GaussianMoment) -> GaussianMoment:
    """Sum of independent Gaussians: means and covariances add."""
    _check_same_dim(x, y, "adder_node_forward")
    return GaussianMoment(x.mean + y.mean, x.cov + y.cov)


def adder_node_backward(z_bwd: GaussianMoment, y_fwd: GaussianMoment) -> GaussianMoment:
    """Backward message on X of ``Z = X + Y``: subtract the mean, add the covariance."""
    _check_same_dim(z_bwd, y_fwd, "adder_node_backward")
    return GaussianMoment(z_bwd.mean - y_fwd.mean, z_bwd.cov + y_fwd.cov)


def adder_dual(dual: DualMarginal) -> DualMarginal:
    """Dual marginals are identical on all three edges of an adder."""
    return dual


# ---------------------------------------------------------------------------
# matrix multiplier (Y = A X)

def _check_cols(A: np.ndarray, dim: int, what: str):
    if A.ndim != 2:
        raise ValueError(f"{what}: A must be a matrix, got shape {A.shape}")
    if A.shape[1] != dim:
        raise ValueError(f"{what}: A has {A.shape[1]} columns, message has dimension {dim}")


def matmul_node(x_fwd: GaussianMoment, A) -> GaussianMoment:
    """Push a moment-form message through ``Y = A X``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_cols(A, x_fwd.dim, "matmul_node")
    return GaussianMoment(A @ x_fwd.mean, symmetrize(A @ x_fwd.cov @ A.T))


def matmul_backward(y_bwd: GaussianInfo, A) -> GaussianInfo:
    """Pull an information-form message back through ``Y = A X``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != y_bwd.dim:
        raise ValueError(f"matmul_backward: A has {A.shape[0]} rows, message has dimension {y_bwd.dim}")
    return GaussianInfo(A.T @ y_bwd.xi, symmetrize(A.T @ y_bwd.prec @ A))


def matmul_dual(y_dual: DualMarginal, A) -> DualMarginal:
    """Pull a dual marginal back through ``Y = A X``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != y_dual.dim:
        raise ValueError(f"matmul_dual: A has {A.shape[0]} rows, dual has dimension {y_dual.dim}")
    return DualMarginal(A.T @ y_dual.dxi, symmetrize(A.T @ y_dual.dprec @ A))


def matmul_marginal(x_marginal: Marginal, A) -> Marginal:
    """Push a posterior marginal through ``Y = A X``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_cols(A, x_marginal.dim, "matmul_marginal")
    return Marginal(A @ x_marginal.mean, symmetrize(A @ x_marginal.cov @ A.T))


# ---------------------------------------------------------------------------
# single-edge marginals

def edge_marginal(fwd, bwd) -> tuple[Marginal, DualMarginal]:
    """Combine the forward and backward message on one edge.

    Accepts any mix of moment- and information-form messages, including the
    degenerate encodings.  Raises if neither message is informative.
    """
    _check_same_dim(fwd, bwd, "edge_marginal")
    dim = fwd.dim
    eye = np.eye(dim)

    fwd_info = isinstance(fwd, GaussianInfo)
    bwd_info = isinstance(bwd, GaussianInfo)

    if fwd_info and bwd_info:
        if not (fwd.informative or bwd.informative):
            raise ValueError("edge_marginal: both messages are non-informative")
        prec = fwd.prec + bwd.prec
        cov = inv_psd(prec)
        mean = cov @ (fwd.xi + bwd.xi)
        dxi = fwd.xi - fwd.prec @ mean
        dprec = symmetrize(fwd.prec @ cov @ bwd.prec)
        return Marginal(mean, cov), DualMarginal(dxi, dprec)

    if fwd_info and not bwd_info:
        # mirror case: swap roles, flip the sign convention of dxi afterwards
        mar, dual = edge_marginal(bwd, fwd)
        return mar, DualMarginal(-dual.dxi, dual.dprec)

    if not fwd_info and bwd_info:
        if not bwd.informative:
            return Marginal(fwd.mean, fwd.cov), DualMarginal.zero(dim)
        # (I + V W_bwd) m = m_fwd + V xi_bwd ; cov = (I + V W_bwd)^-1 V
        S = eye + fwd.cov @ bwd.prec
        mean = solve_square(S, fwd.mean + fwd.cov @ bwd.xi)
        cov = symmetrize(solve_square(S, fwd.cov))
        dxi = bwd.prec @ mean - bwd.xi
        dprec = symmetrize(bwd.prec - bwd.prec @ cov @ bwd.prec)
        return Marginal(mean, cov), DualMarginal(dxi, dprec)

    # both moment form
    dprec = inv_psd(fwd.cov + bwd.cov)
    dxi = dprec @ (fwd.mean - bwd.mean)
    mean = fwd.mean - fwd.cov @ dxi
    cov = symmetrize(fwd.cov - fwd.cov @ dprec @ fwd.cov)
    return Marginal(mean, cov), DualMarginal(dxi, dprec)


# ---------------------------------------------------------------------------
# observation block:  X --(=)-- Z  with branch  A X --(+ noise)--> Y observed

def _bwd_moment_parts(y_bwd):
    """(mean, cov) of a backward message given in either form; None if non-informative."""
    if isinstance(y_bwd, GaussianInfo):
        if not y_bwd.informative:
            return None
        mom = y_bwd.to_moment()
        return mom.mean, mom.cov
    return y_bwd.mean, y_bwd.cov


def observation_block_forward(x_fwd: GaussianMoment, A, y_bwd) -> GaussianMoment:
    """Moment-form Kalman measurement update through an observation block.

    ``y_bwd`` is the backward message on the observed branch (moment form, or
    information form with ``prec = 0`` for "no measurement").  Scalar
    observations use scalar division only.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_cols(A, x_fwd.dim, "observation_block_forward")
    parts = _bwd_moment_parts(y_bwd)
    if parts is None:
        return x_fwd
    my, Vy = parts
    denom = Vy + A @ x_fwd.cov @ A.T
    gain = solve_psd(denom, A @ x_fwd.cov).T  # V A^T G
    mean = x_fwd.mean + gain @ (my - A @ x_fwd.mean)
    cov = symmetrize(x_fwd.cov - gain @ A @ x_fwd.cov)
    return GaussianMoment(mean, cov)


def observation_block_dual_backward(
    z_dual: DualMarginal,
    A,
    y_bwd,
    *,
    z_fwd: GaussianMoment | None = None,
    x_fwd: GaussianMoment | None = None,
    variant: str = "F",
) -> DualMarginal:
    """Propagate the dual marginal backward through an observation block.

    Two algebraically identical variants are published; ``variant="F"`` needs
    the cached forward message *after* the block (``z_fwd``), ``variant="G"``
    the one *before* it (``x_fwd``).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = z_dual.dim
    eye = np.eye(n)
    parts = _bwd_moment_parts(y_bwd)
    if parts is None:
        return z_dual
    my, Vy = parts

    if variant == "F":
        if z_fwd is None:
            raise ValueError("F-variant needs the cached forward message after the block (z_fwd)")
        Wy = inv_psd(Vy)
        F = eye - z_fwd.cov @ A.T @ Wy @ A
        dxi = F.T @ z_dual.dxi + A.T @ Wy @ (A @ z_fwd.mean - my)
        dprec = symmetrize(F.T @ z_dual.dprec @ F + A.T @ Wy @ A @ F)
        return DualMarginal(dxi, dprec)
    if variant == "G":
        if x_fwd is None:
            raise ValueError("G-variant needs the cached forward message before the block (x_fwd)")
        denom = Vy + A @ x_fwd.cov @ A.T
        GA = solve_psd(denom, A)  # G A
        F = eye - x_fwd.cov @ A.T @ GA
        dxi = F.T @ z_dual.dxi + GA.T @ (A @ x_fwd.mean - my)
        dprec = symmetrize(F.T @ z_dual.dprec @ F + A.T @ GA)
        return DualMarginal(dxi, dprec)
    raise ValueError(f"unknown variant {variant!r}, expected 'F' or 'G'")


# ---------------------------------------------------------------------------
# input block:  Z = X + A Y  (information-form pass and marginal pass)

def input_block_forward_info(
    x_info: GaussianInfo, A, u_fwd: GaussianInfo, *, reverse: bool = False
) -> GaussianInfo:
    """Absorb an additive input ``A Y`` in information form.

    With ``reverse=True`` the same rule maps the backward message on Z to the
    backward message on X (the direction the time-reversed information filter
    uses); the only change is a sign flip on the input's ``xi``.  Scalar
    inputs require scalar division only.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != x_info.dim:
        raise ValueError(f"input_block_forward_info: A has {A.shape[0]} rows, expected {x_info.dim}")
    if A.shape[1] != u_fwd.dim:
        raise ValueError(f"input_block_forward_info: A has {A.shape[1]} columns, input has dimension {u_fwd.dim}")
    xi_u = -u_fwd.xi if reverse else u_fwd.xi
    denom = u_fwd.prec + A.T @ x_info.prec @ A
    WAH = solve_psd(denom, (x_info.prec @ A).T).T  # W A H
    xi = x_info.xi + WAH @ (xi_u - A.T @ x_info.xi)
    prec = symmetrize(x_info.prec - WAH @ A.T @ x_info.prec)
    return GaussianInfo(xi, prec)


def input_block_marginal_forward(
    mar: Marginal,
    A,
    u_fwd,
    *,
    bwd_near: GaussianInfo | None = None,
    bwd_far: GaussianInfo | None = None,
    variant: str = "F",
) -> Marginal:
    """Propagate a posterior marginal across an input block ``Z = X + A Y``.

    ``mar`` is the marginal on the X side; the result is the marginal on the
    Z side.  The two published variants use different caches from the
    information-form sweep that ran against this direction:

    * ``variant="F"`` needs ``bwd_near``, the (backward) information message
      on the X edge, and ``u_fwd`` in moment form (handles zero-variance
      inputs);
    * ``variant="H"`` needs ``bwd_far``, the information message on the Z
      edge, and ``u_fwd`` in information form.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = mar.dim
    eye = np.eye(n)

    if variant == "F":
        if bwd_near is None:
            raise ValueError("F-variant needs the cached information message on the near (X) edge")
        if not isinstance(u_fwd, GaussianMoment):
            u_fwd = u_fwd.to_moment()
        AVy = A @ u_fwd.cov
        xi_term = A @ u_fwd.cov @ (A.T @ bwd_near.xi + _input_xi(u_fwd))
        F = eye - bwd_near.prec @ AVy @ A.T
        mean = F.T @ mar.mean + xi_term
        cov = symmetrize(F.T @ mar.cov @ F + AVy @ A.T @ F)
        return Marginal(mean, cov)
    if variant == "H":
        if bwd_far is None:
            raise ValueError("H-variant needs the cached information message on the far (Z) edge")
        if not isinstance(u_fwd, GaussianInfo):
            u_fwd = u_fwd.to_info()
        denom = u_fwd.prec + A.T @ bwd_far.prec @ A
        AH = solve_psd(denom, A.T).T
        F = eye - bwd_far.prec @ AH @ A.T
        mean = F.T @ mar.mean + AH @ (A.T @ bwd_far.xi + u_fwd.xi)
        cov = symmetrize(F.T @ mar.cov @ F + AH @ A.T)
        return Marginal(mean, cov)
    raise ValueError(f"unknown variant {variant!r}, expected 'F' or 'H'")


def _input_xi(u_fwd: GaussianMoment) -> np.ndarray:
    # xi of a moment-form input; only the zero-mean case is needed in closed form
    if np.any(u_fwd.mean != 0.0):
        return solve_psd(u_fwd.cov, u_fwd.mean)
    return np.zeros(u_fwd.dim)
