"""Ready-made models for scalar signals, fitting wrappers, simulators.

The builders assemble state space models whose sparse NUV inputs encode the
structure of interest: level jumps (step model), jumps on top of a random
walk, slope changes of piecewise straight lines or low-degree polynomials,
and impulsive observation outliers.  :func:`fit` runs the variance-learning
loop and converts the result into events and segments.

All step indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .nuv import NuvConfig, NuvState, run_nuv
from .ssm import SmoothingResult, StateSpaceModel
from .gaussian import GaussianMoment

# diffuse initial-state variance, relative to the observation noise; large
# enough that the prior never biases the first segment at desk scale while
# keeping the forward pass in proper moment form
_DIFFUSE_FACTOR = 1e8


def _diffuse_init(n: int, sigma2: float) -> GaussianMoment:
    return GaussianMoment(np.zeros(n), _DIFFUSE_FACTOR * sigma2 * np.eye(n))


def build_step_model(K: int, sigma2: float) -> StateSpaceModel:
    """Piecewise-constant signal: a held level with one sparse jump input per step."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return StateSpaceModel(
        A=[[1.0]], B=[[1.0]], C=[[1.0]],
        obs_noise_var=sigma2, horizon=K,
        input_cov=[[0.0]],
        initial_state=_diffuse_init(1, sigma2),
        nuv_input_components=(0,),
        nuv_frozen_input_steps=(0,),
    )


def build_walk_model(K: int, sigma2: float, walk_var: float) -> StateSpaceModel:
    """Random walk with sparse additional jumps.

    Input component 0 is the persistent white walk noise (variance
    ``walk_var``), component 1 the sparse jump input.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if walk_var < 0.0:
        raise ValueError("walk_var must be >= 0")
    return StateSpaceModel(
        A=[[1.0]], B=[[1.0, 1.0]], C=[[1.0]],
        obs_noise_var=sigma2, horizon=K,
        input_cov=np.diag([walk_var, 0.0]),
        initial_state=_diffuse_init(1, sigma2),
        nuv_input_components=(1,),
        nuv_frozen_input_steps=(0,),
    )


def build_line_model(K: int, sigma2: float, continuity: bool = True) -> StateSpaceModel:
    """Piecewise-straight-line signal via a position/slope integrator.

    With ``continuity`` only the slope input remains, so segments join
    continuously; without it a level input allows jumps as well (the level
    input is component 0, the slope input component 1).
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    A = [[1.0, 1.0], [0.0, 1.0]]
    C = [[1.0, 0.0]]
    if continuity:
        B = [[0.0], [1.0]]
        comps = (0,)
    else:
        B = [[1.0, 0.0], [0.0, 1.0]]
        comps = (0, 1)
    return StateSpaceModel(
        A=A, B=B, C=C,
        obs_noise_var=sigma2, horizon=K,
        input_cov=np.zeros((len(comps),) * 2),
        initial_state=_diffuse_init(2, sigma2),
        nuv_input_components=comps,
        # step 0 is redundant with the diffuse start; the slope input of the
        # final step never reaches any observation
        nuv_frozen_input_steps=(0, K - 1),
    )


def build_poly_model(K: int, sigma2: float, degree: int, continuity: bool = True) -> StateSpaceModel:
    """Piecewise-polynomial signal of the given degree (<= 2).

    Integrator chain of length degree+1; with ``continuity`` the sparse
    input acts only on the highest derivative, otherwise on every state
    component.
    """
    if not 0 <= degree <= 2:
        raise ValueError("degree must be 0, 1 or 2")
    if K < degree + 1:
        raise ValueError("K too small for the requested degree")
    n = degree + 1
    A = np.eye(n)
    for i in range(n - 1):
        A[i, i + 1] = 1.0
    C = np.zeros((1, n))
    C[0, 0] = 1.0
    if continuity and degree > 0:
        B = np.zeros((n, 1))
        B[n - 1, 0] = 1.0
        comps = (0,)
    else:
        B = np.eye(n)
        comps = tuple(range(n))
    return StateSpaceModel(
        A=A, B=B, C=C,
        obs_noise_var=sigma2, horizon=K,
        input_cov=np.zeros((len(comps),) * 2),
        initial_state=_diffuse_init(n, sigma2),
        nuv_input_components=comps,
        # highest-derivative inputs of the last `degree` steps never reach an
        # observation; step 0 is redundant with the diffuse start
        nuv_frozen_input_steps=tuple(sorted({0, *range(K - degree, K)})),
    )


def build_outlier_model(base_model: StateSpaceModel, sigma2: float) -> StateSpaceModel:
    """Attach a sparse per-step output-noise term to a scalar-output model."""
    if base_model.L != 1:
        raise ValueError("the outlier attachment needs a scalar output")
    return replace(base_model, obs_noise_var=sigma2, nuv_output=True)


# ---------------------------------------------------------------------------
# events and segments


@dataclass
class Event:
    index: int
    kind: str  # "jump" | "slope-change" | "outlier"
    magnitude: float


@dataclass
class Segment:
    start: int  # inclusive
    end: int    # inclusive
    level: float | None = None


@dataclass
class FitResult:
    smoothed: np.ndarray
    events: list[Event]
    segments: list[Segment]
    state: NuvState
    result: SmoothingResult


def _column_kinds(model: StateSpaceModel, model_kind: str) -> list[str]:
    kinds: list[str] = []
    for col, j in enumerate(model.nuv_input_components):
        if model_kind in ("step", "walk"):
            kinds.append("jump")
        elif model_kind in ("line", "poly"):
            # without continuity the first sparse input moves the level
            kinds.append("jump" if (len(model.nuv_input_components) > 1 and j == 0) else "slope-change")
        else:
            kinds.append("jump")
    if model.nuv_output:
        kinds.append("outlier")
    return kinds


def extract_events(
    model: StateSpaceModel,
    state: NuvState,
    result: SmoothingResult,
    model_kind: str,
) -> FitResult:
    """Convert learned variances and posteriors into events and segments.

    Events sit at the active-set indices; magnitudes are the corresponding
    posterior means.  Segments are the maximal index runs between
    level-affecting events (outliers do not split segments); for the step
    model each segment carries the mean smoothed level over its run.
    """
    kinds = _column_kinds(model, model_kind)
    ncomps = len(model.nuv_input_components)
    events: list[Event] = []
    for k, col in state.active_set:
        kind = kinds[col]
        if col < ncomps:
            mag = float(result.input_mean[k, model.nuv_input_components[col]])
        else:
            mag = float(result.outlier_mean[k])
        events.append(Event(int(k), kind, mag))
    events.sort(key=lambda e: (e.index, e.kind))

    K = model.K
    smoothed = result.output_mean[:, 0]
    breaks = sorted({e.index for e in events if e.kind != "outlier"})
    bounds = [0] + [b for b in breaks if b > 0] + [K]
    segments = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        level = float(np.mean(smoothed[a:b])) if model_kind == "step" else None
        segments.append(Segment(a, b - 1, level))
    return FitResult(smoothed=smoothed, events=events, segments=segments,
                     state=state, result=result)


def fit(model: StateSpaceModel, y, model_kind: str, config: NuvConfig | None = None) -> FitResult:
    """Learn the sparse variances of ``model`` from ``y`` and post-process."""
    state, result = run_nuv(model, y, config)
    return extract_events(model, state, result, model_kind)


# ---------------------------------------------------------------------------
# simulators (seed-fixed ground truth for tests and the CLI)


@dataclass
class Simulation:
    y: np.ndarray
    truth: np.ndarray
    event_indices: list[int]
    event_magnitudes: list[float]
    kind: str
    extra: dict = field(default_factory=dict)


def simulate_steps(K: int, jumps: list[tuple[int, float]], noise_std: float,
                   rng: np.random.Generator, base_level: float = 0.0) -> Simulation:
    """Piecewise-constant signal with level jumps at the given (index, size) pairs."""
    truth = np.full(K, base_level)
    for idx, size in jumps:
        truth[idx:] += size
    y = truth + noise_std * rng.standard_normal(K)
    return Simulation(y, truth, [i for i, _ in jumps], [s for _, s in jumps], "step")


def simulate_walk(K: int, walk_std: float, jumps: list[tuple[int, float]],
                  noise_std: float, rng: np.random.Generator) -> Simulation:
    """Random walk plus sparse jumps, observed in white noise."""
    steps = walk_std * rng.standard_normal(K)
    for idx, size in jumps:
        steps[idx] += size
    truth = np.cumsum(steps)
    y = truth + noise_std * rng.standard_normal(K)
    return Simulation(y, truth, [i for i, _ in jumps], [s for _, s in jumps], "walk",
                      extra={"walk_std": walk_std})


def simulate_lines(K: int, knots: list[tuple[int, float]], noise_std: float,
                   rng: np.random.Generator, init_level: float = 0.0,
                   init_slope: float = 0.0) -> Simulation:
    """Continuous piecewise-linear signal with slope changes at the knots."""
    slope = np.full(K, init_slope)
    for idx, change in knots:
        slope[idx:] += change
    truth = init_level + np.cumsum(slope)
    y = truth + noise_std * rng.standard_normal(K)
    return Simulation(y, truth, [i for i, _ in knots], [c for _, c in knots], "line")


def oscillator_matrix(rho: float, omega: float) -> np.ndarray:
    """Damped rotation in the plane: rho * R(omega)."""
    c, s = np.cos(omega), np.sin(omega)
    return rho * np.array([[c, -s], [s, c]])


def simulate_outliers(K: int, outliers: list[tuple[int, float]], noise_std: float,
                      rng: np.random.Generator, rho: float = 0.998,
                      omega: float = 2.0 * np.pi / 40.0,
                      process_std: float = 0.01) -> Simulation:
    """Oscillatory 2-state signal with sparse additive observation outliers."""
    A = oscillator_matrix(rho, omega)
    x = np.array([1.0, 0.0])
    truth = np.empty(K)
    for k in range(K):
        x = A @ x + process_std * rng.standard_normal(2)
        truth[k] = x[0]
    y = truth + noise_std * rng.standard_normal(K)
    for idx, mag in outliers:
        y[idx] += mag
    return Simulation(y, truth, [i for i, _ in outliers], [m for _, m in outliers],
                      "outlier", extra={"rho": rho, "omega": omega, "process_std": process_std})


def build_oscillator_model(K: int, sigma2: float, rho: float = 0.998,
                           omega: float = 2.0 * np.pi / 40.0,
                           process_var: float = 1e-4) -> StateSpaceModel:
    """Known oscillatory model matching :func:`simulate_outliers`."""
    return StateSpaceModel(
        A=oscillator_matrix(rho, omega),
        B=np.eye(2), C=[[1.0, 0.0]],
        obs_noise_var=sigma2, horizon=K,
        input_cov=process_var * np.eye(2),
        initial_state=_diffuse_init(2, sigma2),
    )
