"""Shared problem/state abstractions, RNG streams, and step-size schedules.

Randomness is counter-based and fully reproducible: every run owns Philox
streams keyed by ``SeedSequence((seed, stream_id))``, so trajectories are a
pure function of (seed, config) and independent streams never interact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Stream ids for the per-run Philox substreams.
TRAIN_STREAM = 0
INIT_STREAM = 1
EVAL_STREAM = 2


def run_rng(seed: int, stream: int = TRAIN_STREAM) -> np.random.Generator:
    """Counter-based generator for one substream of one run.

    Philox4x64 keyed by ``SeedSequence((seed, stream))``; both primitives have
    published definitions, so a reimplementation can match draws exactly.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


class _InfiniteAlpha:
    """Distinguished infinite dual step size (never a float inf in arithmetic)."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "ALPHA_INF"


ALPHA_INF = _InfiniteAlpha()


def is_infinite_alpha(alpha) -> bool:
    return isinstance(alpha, _InfiniteAlpha)


SCHEDULE_KINDS = ("constant", "inv_sqrt_T", "cosine", "erm_rate", "sox_rate", "infinite")


@dataclass(frozen=True)
class StepSchedule:
    """Rule producing per-iteration step sizes.

    kind:
      constant    -- base for all t
      inv_sqrt_T  -- base / sqrt(horizon) for all t
      cosine      -- base * (1 + cos(pi * t / horizon)) / 2
      erm_rate    -- infinite at t=1, exp(-nu_prev)/(t-1) afterwards
      sox_rate    -- gamma_prime * exp(-nu_prev), per coordinate
      infinite    -- the distinguished infinite value at every t
    """

    kind: str
    base: float = 1.0
    gamma_prime: float = 1.0
    horizon: int | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        # constant admits base 0 (frozen-coordinate variants); the decaying
        # kinds need a positive scale to be meaningful
        if self.kind == "constant" and self.base < 0:
            raise ConfigError("schedule base must be nonnegative")
        if self.kind in ("inv_sqrt_T", "cosine") and not self.base > 0:
            raise ConfigError("schedule base must be positive")
        if self.kind == "sox_rate" and not self.gamma_prime > 0:
            raise ConfigError("gamma_prime must be positive")
        if self.kind in ("inv_sqrt_T", "cosine"):
            if self.horizon is None or self.horizon < 1:
                raise ConfigError(f"{self.kind} schedule needs a positive horizon")


def schedule_alpha(schedule: StepSchedule, t: int, nu_prev=None):
    """Step size at iteration t (1-based).

    Returns a float, an array matching ``nu_prev``, or ``ALPHA_INF``.
    ``nu_prev`` is required for the state-dependent kinds.
    """
    if t < 1:
        raise ValueError("iterations are 1-based")
    kind = schedule.kind
    if kind == "constant":
        return schedule.base
    if kind == "inv_sqrt_T":
        return schedule.base / math.sqrt(schedule.horizon)
    if kind == "cosine":
        return schedule.base * (1.0 + math.cos(math.pi * t / schedule.horizon)) / 2.0
    if kind == "infinite":
        return ALPHA_INF
    if nu_prev is None:
        raise ValueError(f"{kind} schedule needs nu_prev")
    if kind == "erm_rate":
        if t == 1:
            return ALPHA_INF
        return np.exp(-np.asarray(nu_prev, dtype=float)) / (t - 1)
    # sox_rate
    return schedule.gamma_prime * np.exp(-np.asarray(nu_prev, dtype=float))


@dataclass
class DualState:
    """Dual vector nu with its companion pi = exp(-nu)."""

    nu: np.ndarray

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        if not np.all(np.isfinite(self.nu)):
            raise ValueError("dual state must be finite")

    @property
    def pi(self) -> np.ndarray:
        return np.exp(-self.nu)


@dataclass
class RunRecord:
    """Per-iteration metric log of one run, keyed by (seed, config_id).

    Rows are (iteration, wall_clock_seconds, metric_name, metric_value);
    wall clock is excluded from all equality/reproducibility comparisons.
    """

    seed: int
    config_id: str
    rows: list = field(default_factory=list)

    def add(self, iteration: int, metric: str, value: float, wall: float = 0.0) -> None:
        self.rows.append((int(iteration), float(wall), str(metric), float(value)))

    def series(self, metric: str):
        """(iterations, values) arrays for one metric, in recorded order."""
        its = [r[0] for r in self.rows if r[2] == metric]
        vals = [r[3] for r in self.rows if r[2] == metric]
        return np.asarray(its, dtype=int), np.asarray(vals, dtype=float)

    def last(self, metric: str) -> float:
        for it, _, name, value in reversed(self.rows):
            if name == metric:
                return value
        raise KeyError(metric)

    def comparable_rows(self):
        """Rows with wall clock dropped, for determinism checks."""
        return [(r[0], r[2], r[3]) for r in self.rows]


@dataclass(frozen=True)
class ConvergenceBound:
    """Constants entering the dual convergence bounds.

    big_c is (1 + rho) * (1 + c1 - c0) for the problem's loss range and the
    step-size safety factor rho; kappa is the second-order moment ratio
    E[z^2] / (E[z])^2 of z = exp(s), always >= 1 by Cauchy-Schwarz.
    """

    rho: float
    big_c: float
    kappa: float
    m: float
    var_z: float

    def __post_init__(self):
        if self.kappa < 1.0 - 1e-12:
            raise ValueError("kappa must be >= 1")

    @classmethod
    def from_range(cls, rho: float, c0: float, c1: float, m: float, kappa: float) -> "ConvergenceBound":
        big_c = (1.0 + rho) * (1.0 + c1 - c0)
        return cls(rho=rho, big_c=big_c, kappa=kappa, m=m, var_z=(kappa - 1.0) * m * m)


class CermProblem:
    """A compositional entropic-risk instance.

    Subclasses describe n_anchors outer terms, each with an inner sample
    space, a loss s_i(w; zeta), and its w-gradient.  ``bounds`` is the
    declared range of s (None when unknown); ``projection_radius`` defines
    the feasible set as an origin-centered Euclidean ball (None = all of R^d).

    Inner sample identifiers are integers whose meaning is problem-specific;
    ``population_size`` is the size of the finite inner population used for
    exact full-batch evaluation.  The reported experiment metric is
    ``objective_scale * F + objective_offset`` where F is the mean-form
    full objective.
    """

    n_anchors: int
    dim: int
    bounds: tuple[float, float] | None = None
    projection_radius: float | None = None
    population_size: int
    objective_scale: float = 1.0
    objective_offset: float = 0.0

    # -- sampling ---------------------------------------------------------
    def inner_sample(self, rng: np.random.Generator, anchors: np.ndarray, m: int) -> np.ndarray:
        """(len(anchors), m) array of inner sample ids for each anchor."""
        raise NotImplementedError

    def init_inner_sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """(n_anchors, m) inner ids used only for dual initialization."""
        return rng.integers(0, self.population_size, size=(self.n_anchors, m))

    # -- loss and gradient -------------------------------------------------
    def loss_values(self, w: np.ndarray, anchors: np.ndarray, inner: np.ndarray) -> np.ndarray:
        """s_i(w; zeta) for every (anchor, inner) pair, shape = inner.shape."""
        raise NotImplementedError

    def weighted_grad(self, w, anchors, inner, coef) -> np.ndarray:
        """sum_ij coef[i, j] * grad_w s_i(w; zeta_ij), a dim-vector."""
        raise NotImplementedError

    def grad_sq_norms(self, w, anchors, inner) -> np.ndarray:
        """||grad_w s_i(w; zeta_ij)||^2 per pair, shape = inner.shape."""
        raise NotImplementedError

    # -- full population ----------------------------------------------------
    def population_inner(self) -> np.ndarray:
        """(n_anchors, population_size) ids enumerating every inner sample."""
        return np.tile(np.arange(self.population_size), (self.n_anchors, 1))

    def population_values(self, w) -> np.ndarray:
        """s over the whole inner population, shape (n_anchors, population_size)."""
        return self.loss_values(w, np.arange(self.n_anchors), self.population_inner())

    def steps_per_epoch(self, batch_anchors: int, batch_inner: int) -> int:
        return max(1, -(-self.n_anchors // batch_anchors))

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)


def sample_batch(problem: CermProblem, batch_size: int, rng: np.random.Generator,
                 batch_inner: int = 1, reuse_inner_sample: bool = False):
    """Draw one stochastic block: distinct anchors plus paired inner batches.

    Anchors are uniform without replacement; zeta (dual update) and
    zeta_prime (primal update) are independent unless reuse_inner_sample,
    in which case zeta_prime is zeta and no extra randomness is consumed.
    """
    if batch_size > problem.n_anchors:
        raise ValueError(f"batch_size {batch_size} exceeds n_anchors {problem.n_anchors}")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    anchors = rng.choice(problem.n_anchors, size=batch_size, replace=False)
    zeta = problem.inner_sample(rng, anchors, batch_inner)
    zeta_prime = zeta if reuse_inner_sample else problem.inner_sample(rng, anchors, batch_inner)
    return anchors, zeta, zeta_prime


def project_primal(w: np.ndarray, radius: float | None) -> np.ndarray:
    """Euclidean projection onto the origin-centered ball (None = identity)."""
    if radius is None:
        return w
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w
    if norm == 0.0:
        return w
    return w * (radius / norm)
