"""Outer loop learning sparse variances by alternating inference and updates.

Each NUV attachment point carries an unknown variance sigma2.  The loop
alternates exact Gaussian inference at the current variances with a
per-point variance update, until the variances stop moving.  Three update
rules are available:

* ``em``      -- sigma2 <- m^2 + v (posterior moments); the log-likelihood is
                 guaranteed non-decreasing;
* ``mackay``  -- sigma2 <- m^2 / (1 - v/sigma2); usually much faster, no
                 guarantee; guarded with a fallback to ``em`` per index when
                 the denominator is not safely positive;
* ``em_then_ml`` -- ``em`` to convergence, then one final pass of the
                 closed-form update sigma2 <- max{0, mb^2 - vb} from the
                 backward-message moments.  The ML rule is deliberately not
                 offered as the parallel inner-loop rule.

Variances that fall below ``variance_floor`` are clamped to exactly 0 and
frozen for the rest of the run; the nonzero survivors form the active set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import batch as _batch
from .ssm import NuvOverrides, SmoothingResult, StateSpaceModel, bifm_smooth, mbf_smooth


@dataclass
class NuvConfig:
    update_rule: str = "mackay"
    max_iters: int = 500
    rel_tol: float = 1e-6
    variance_floor: float | None = None  # None: 1e-9 * mean(y^2)
    init_variance: float = 1.0
    smoother: str = "mbf"  # "mbf" | "bifm"
    keep_trace: bool = False

    def __post_init__(self):
        if self.update_rule not in ("em", "mackay", "em_then_ml"):
            raise ValueError(f"unknown update_rule {self.update_rule!r}")
        if self.smoother not in ("mbf", "bifm"):
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if self.rel_tol <= 0.0:
            raise ValueError("rel_tol must be > 0")
        if self.variance_floor is not None and self.variance_floor < 0.0:
            raise ValueError("variance_floor must be >= 0")
        if self.init_variance <= 0.0:
            raise ValueError("init_variance must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class TraceRecord:
    iteration: int
    loglik: float
    active_size: int
    max_rel_change: float
    em_fallbacks: int


@dataclass
class NuvState:
    """Converged (or stopped) variances and run diagnostics.

    ``variances`` has shape (K, P): one column per NUV attachment point per
    step (input components first, then the sparse output-noise column if
    present; a dictionary model has P = 1).  ``active_set`` lists the (step,
    column) pairs with a strictly positive variance.
    """

    variances: np.ndarray
    iteration: int
    loglik_history: list[float]
    converged: bool
    variance_floor: float
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def active_set(self) -> np.ndarray:
        return np.argwhere(self.variances > 0.0)

    @property
    def active_size(self) -> int:
        return int(np.count_nonzero(self.variances > 0.0))


def em_update(m: float, v: float) -> float:
    """New variance from the posterior moments of the attached variable."""
    if v < 0.0:
        raise ValueError("posterior variance must be >= 0")
    return m * m + v


_MACKAY_GUARD = 1e-12


def mackay_update(m: float, v: float, sigma2: float) -> tuple[float, bool]:
    """Fixed-point variance update; returns (value, used_em_fallback).

    Falls back to :func:`em_update` when the denominator 1 - v/sigma2 is not
    safely positive (the rule comes with no guarantees and can fail).
    """
    if sigma2 <= 0.0:
        raise ValueError("mackay_update needs a strictly positive current variance")
    denom = 1.0 - v / sigma2
    if denom <= _MACKAY_GUARD:
        return em_update(m, v), True
    return m * m / denom, False


def ml_update(mb: float, vb: float) -> float:
    """Closed-form update from the backward-message moments, clamped at 0.

    Exact in one step, but only safe applied to one variance at a time (or
    as a final pass); never used as the parallel inner-loop rule here.
    """
    if not (np.isfinite(mb) and np.isfinite(vb)):
        raise ValueError("backward message moments must be finite")
    if vb <= 0.0:
        raise ValueError("backward message variance must be > 0")
    return max(0.0, mb * mb - vb)


def run_nuv(model, y, config: NuvConfig | None = None) -> tuple[NuvState, SmoothingResult]:
    """Learn the NUV variances of ``model`` from observations ``y``.

    ``model`` is a :class:`StateSpaceModel` with declared NUV attachment
    points or a :class:`~nuvssm.batch.DictionaryModel` (every coefficient is
    an attachment point; ``y`` must then be None or equal to ``model.y``).
    Returns the final state and the inference result at the learned
    variances.  Non-convergence within ``max_iters`` is reported through
    ``converged=False``, not an error.
    """
    if config is None:
        config = NuvConfig()
    if isinstance(model, _batch.DictionaryModel):
        if y is not None and not np.array_equal(np.asarray(y, dtype=float).reshape(-1), model.y):
            raise ValueError("y must be None or equal to model.y for a dictionary model")
        return _run_batch(model, config)
    if isinstance(model, StateSpaceModel):
        return _run_ssm(model, y, config)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def write_trace(path, trace: list[TraceRecord]):
    """Write the per-iteration log as CSV (schema documented in the header row)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loglik", "active_set_size", "max_rel_change", "em_fallbacks"])
        for rec in trace:
            w.writerow([rec.iteration, repr(float(rec.loglik)), rec.active_size,
                        repr(float(rec.max_rel_change)), rec.em_fallbacks])


# ---------------------------------------------------------------------------


def _resolve_floor(config: NuvConfig, y: np.ndarray) -> float:
    if config.variance_floor is not None:
        return config.variance_floor
    power = float(np.mean(np.square(y)))
    return 1e-9 * power if power > 0.0 else 1e-12


class _Loop:
    """Shared iteration skeleton; subclasses supply inference and moments."""

    def __init__(self, config: NuvConfig, floor: float, shape):
        self.config = config
        self.floor = floor
        self.var = np.full(shape, config.init_variance, dtype=float)
        self.frozen = np.zeros(shape, dtype=bool)
        self.trace: list[TraceRecord] = []
        self.loglik_history: list[float] = []

    def infer(self):  # -> object with whatever posterior_of needs
        raise NotImplementedError

    def posterior_of(self, result, idx) -> tuple[float, float]:
        raise NotImplementedError

    def backward_of(self, result, idx) -> tuple[float, float]:
        raise NotImplementedError

    def loglik_of(self, result) -> float:
        raise NotImplementedError

    def run(self) -> tuple[NuvState, object]:
        cfg = self.config
        base_rule = "em" if cfg.update_rule == "em_then_ml" else cfg.update_rule
        converged = False
        it = 0
        result = None
        for it in range(1, cfg.max_iters + 1):
            result = self.infer()
            self.loglik_history.append(self.loglik_of(result))
            max_rel = 0.0
            fallbacks = 0
            for idx in np.ndindex(self.var.shape):
                if self.frozen[idx]:
                    continue
                old = self.var[idx]
                m, v = self.posterior_of(result, idx)
                if base_rule == "em":
                    new = em_update(m, v)
                else:
                    new, fb = mackay_update(m, v, old)
                    fallbacks += fb
                if new < self.floor:
                    new = 0.0
                    self.frozen[idx] = True
                self.var[idx] = new
                max_rel = max(max_rel, abs(new - old) / max(old, self.floor, 1e-300))
            if cfg.keep_trace:
                self.trace.append(TraceRecord(it, self.loglik_history[-1],
                                              int(np.count_nonzero(self.var > 0.0)),
                                              max_rel, fallbacks))
            if max_rel < cfg.rel_tol or not np.any(self.var > 0.0):
                converged = True
                break
        # the final closed-form pass is applied even after an iteration-count
        # stop: it is exact per index and rescues the slow tail of EM near 0
        if cfg.update_rule == "em_then_ml":
            result = self.infer()
            for idx in np.ndindex(self.var.shape):
                if self.frozen[idx]:
                    continue
                mb, vb = self.backward_of(result, idx)
                if not (np.isfinite(mb) and np.isfinite(vb)) or vb <= 0.0:
                    continue  # non-informative likelihood message; keep the EM value
                new = ml_update(mb, vb)
                if new < self.floor:
                    new = 0.0
                    self.frozen[idx] = True
                self.var[idx] = new
        result = self.infer()
        self.loglik_history.append(self.loglik_of(result))
        state = NuvState(
            variances=self.var,
            iteration=it,
            loglik_history=self.loglik_history,
            converged=converged,
            variance_floor=self.floor,
            trace=self.trace,
        )
        return state, result


class _SsmLoop(_Loop):
    def __init__(self, model: StateSpaceModel, y: np.ndarray, config: NuvConfig, floor: float):
        self.model = model
        self.y = y
        self.comps = model.nuv_input_components
        ncols = len(self.comps) + (1 if model.nuv_output else 0)
        if ncols == 0:
            raise ValueError("the model declares no NUV attachment points")
        super().__init__(config, floor, (model.K, ncols))
        self.base_diag = np.diag(model.input_cov).copy()
        off = model.input_cov - np.diag(self.base_diag)
        if self.comps and np.any(off != 0.0):
            raise ValueError("NUV input attachments require a diagonal input_cov")
        for k in model.nuv_frozen_input_steps:
            for col in range(len(self.comps)):
                self.var[k, col] = 0.0
                self.frozen[k, col] = True
        self.smooth = mbf_smooth if config.smoother == "mbf" else bifm_smooth

    def overrides(self) -> NuvOverrides:
        input_var = np.tile(self.base_diag, (self.model.K, 1))
        for col, j in enumerate(self.comps):
            input_var[:, j] = self.var[:, col]
        extra = self.var[:, -1].copy() if self.model.nuv_output else None
        return NuvOverrides(input_var=input_var, obs_var_extra=extra)

    def infer(self) -> SmoothingResult:
        return self.smooth(self.model, self.y, self.overrides())

    def posterior_of(self, result: SmoothingResult, idx):
        k, col = idx
        if col < len(self.comps):
            j = self.comps[col]
            return float(result.input_mean[k, j]), float(result.input_cov[k, j, j])
        return float(result.outlier_mean[k]), float(result.outlier_var[k])

    def backward_of(self, result: SmoothingResult, idx):
        k, col = idx
        if col < len(self.comps):
            j = self.comps[col]
            return float(result.input_bwd_mean[k, j]), float(result.input_bwd_var[k, j])
        return float(result.outlier_bwd_mean[k]), float(result.outlier_bwd_var[k])

    def loglik_of(self, result: SmoothingResult) -> float:
        return result.loglik


@dataclass
class BatchResult:
    """Inference output for a dictionary model at fixed variances."""

    coef_mean: np.ndarray
    coef_var: np.ndarray
    fitted: np.ndarray
    loglik: float


class _BatchLoop(_Loop):
    def __init__(self, model: _batch.DictionaryModel, config: NuvConfig, floor: float):
        self.model = model
        super().__init__(config, floor, (model.K, 1))

    def infer(self) -> BatchResult:
        model = self.model
        sigmas = self.var[:, 0]
        Wt = _batch.wtilde_recursive(model, sigmas)
        bWty = model.atoms @ (Wt @ model.y)
        bWtb = np.einsum("kn,nm,km->k", model.atoms, Wt, model.atoms)
        mean = sigmas * bWty
        var = np.clip(sigmas - sigmas * bWtb * sigmas, 0.0, None)
        fitted = model.atoms.T @ mean
        return BatchResult(mean, var, fitted, _batch.loglik(model, sigmas))

    def posterior_of(self, result: BatchResult, idx):
        k = idx[0]
        return float(result.coef_mean[k]), float(result.coef_var[k])

    def backward_of(self, result: BatchResult, idx):
        return _batch.backward_message_moments(self.model, self.var[:, 0], idx[0])

    def loglik_of(self, result: BatchResult) -> float:
        return result.loglik


def _run_ssm(model: StateSpaceModel, y, config: NuvConfig):
    y_arr = np.asarray(y, dtype=float)
    floor = _resolve_floor(config, y_arr)
    return _SsmLoop(model, y_arr, config, floor).run()


def _run_batch(model: _batch.DictionaryModel, config: NuvConfig):
    floor = _resolve_floor(config, model.y)
    return _BatchLoop(model, config, floor).run()
