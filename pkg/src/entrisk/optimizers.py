"""Full optimization loops for the min-min objective and its baselines.

CERM-side methods: scent (proximal mirror dual step), bsgd (mini-batch
softmax weights, no dual state), asgd / asgd_softplus (alternating SGD),
umax (alternating SGD with reset-to-batch-logmeanexp), sox (log-domain
moving average).  Dual-only methods iterate a scalar dual variable on i.i.d.
draws and track suboptimality against the analytic optimum.

Every run is a pure function of (seed, config): sampling, dual init, and
metric evaluation each own an independent Philox substream.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import oracle
from .core import (ALPHA_INF, EVAL_STREAM, INIT_STREAM, TRAIN_STREAM, CermProblem,
                   RunRecord, StepSchedule, is_infinite_alpha, project_primal, run_rng,
                   sample_batch, schedule_alpha)
from .dual import (dual_sgd_step_batch, logmeanexp, softplus_dual_grad, sox_log_average,
                   spmd_step_batch)
from .errors import ConfigError, NumericalError
from .problems import DualOnlyProblem

CERM_METHODS = ("scent", "bsgd", "asgd", "asgd_softplus", "umax", "sox")
DUAL_METHODS = ("dual_spmd", "dual_sgd")


@dataclass
class OptimizerConfig:
    method: str
    eta_schedule: StepSchedule | None = None
    alpha_schedule: StepSchedule | None = None
    batch_anchors: int = 1
    batch_inner: int = 1
    momentum: float = 0.0
    epochs: int | None = None
    total_steps: int | None = None
    softplus_rho: float | None = None
    umax_delta: float | None = None
    sox_gamma: float | None = None
    nu_init: float | str = "from_first_batch"
    reuse_inner_sample: bool = False
    clamp_dual: bool = True
    rho_safety: float | None = None
    record_every: int | None = None
    record_final_nu: bool = False
    w_init: np.ndarray | None = None
    config_id: str = ""

    def __post_init__(self):
        if not self.config_id:
            self.config_id = self.method

    def validate(self, problem: CermProblem | None = None) -> None:
        if self.method not in CERM_METHODS + DUAL_METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.batch_anchors < 1 or self.batch_inner < 1:
            raise ConfigError("batch sizes must be positive")
        if (self.epochs is None) == (self.total_steps is None):
            raise ConfigError("set exactly one of epochs / total_steps")
        for name, value in (("epochs", self.epochs), ("total_steps", self.total_steps)):
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be positive")
        if isinstance(self.nu_init, str) and self.nu_init != "from_first_batch":
            raise ConfigError(f"unknown nu_init {self.nu_init!r}")

        needs_alpha = self.method in ("scent", "asgd", "asgd_softplus", "umax", "dual_spmd", "dual_sgd")
        if needs_alpha and self.alpha_schedule is None:
            raise ConfigError(f"{self.method} needs an alpha_schedule")
        if self.method in ("bsgd", "sox") and self.alpha_schedule is not None:
            raise ConfigError(f"{self.method} does not take an alpha_schedule")
        if self.method in ("asgd", "asgd_softplus", "umax", "dual_sgd"):
            if self.alpha_schedule.kind not in ("constant", "inv_sqrt_T", "cosine"):
                raise ConfigError(f"{self.method} needs a numeric alpha schedule")
        if self.method == "scent" and self.alpha_schedule.kind == "constant" \
                and self.alpha_schedule.base <= 0:
            raise ConfigError("scent needs a strictly positive alpha")

        if self.method in CERM_METHODS:
            if self.eta_schedule is None:
                raise ConfigError("CERM methods need an eta_schedule")
            if self.eta_schedule.kind not in ("constant", "inv_sqrt_T", "cosine"):
                raise ConfigError("eta must follow a numeric schedule")
            if self.eta_schedule.base < 0:
                raise ConfigError("eta must be nonnegative")
        # method-specific fields present exactly when required
        if (self.softplus_rho is not None) != (self.method == "asgd_softplus"):
            raise ConfigError("softplus_rho is required by asgd_softplus and only by it")
        if self.method == "asgd_softplus" and not self.softplus_rho > 0:
            raise ConfigError("softplus_rho must be positive")
        if (self.umax_delta is not None) != (self.method == "umax"):
            raise ConfigError("umax_delta is required by umax and only by it")
        if self.method == "umax" and self.umax_delta < 0:
            raise ConfigError("umax_delta must be nonnegative")
        if (self.sox_gamma is not None) != (self.method == "sox"):
            raise ConfigError("sox_gamma is required by sox and only by it")
        if self.method == "sox" and not 0.0 < self.sox_gamma <= 1.0:
            raise ConfigError("sox_gamma must lie in (0, 1]")

        if problem is not None:
            if self.method in DUAL_METHODS:
                raise ConfigError("dual-only methods do not take a CERM problem")
            if self.batch_anchors > problem.n_anchors:
                raise ConfigError("batch_anchors exceeds n_anchors")
            if self.method in ("asgd", "asgd_softplus", "umax") and self.clamp_dual \
                    and problem.bounds is None:
                raise ConfigError("dual clamping needs declared bounds; set clamp_dual=False")
            if getattr(problem, "in_batch", False) and self.batch_anchors < 2:
                raise ConfigError("in-batch negatives need batch_anchors >= 2")

    def resolve_steps(self, problem: CermProblem) -> tuple[int, int]:
        """(total_steps, steps_per_epoch) for this problem."""
        per_epoch = problem.steps_per_epoch(self.batch_anchors, self.batch_inner)
        total = self.total_steps if self.total_steps is not None else self.epochs * per_epoch
        return total, per_epoch


def _eta_at(config: OptimizerConfig, t: int) -> float:
    eta = schedule_alpha(config.eta_schedule, t)
    if is_infinite_alpha(eta) or not np.isfinite(eta) or eta < 0:
        raise ConfigError("eta schedule produced an invalid step size")
    return float(eta)


def _init_dual(problem: CermProblem, config: OptimizerConfig, seed: int, w) -> np.ndarray:
    if not isinstance(config.nu_init, str):
        return np.full(problem.n_anchors, float(config.nu_init))
    rng = run_rng(seed, INIT_STREAM)
    inner = problem.init_inner_sample(rng, config.batch_inner)
    s = problem.loss_values(w, np.arange(problem.n_anchors), inner)
    return np.asarray(logmeanexp(s, axis=1), dtype=float).reshape(problem.n_anchors)


def _run_cerm(problem, config, seed, dual_update, primal_coef, uses_dual=True) -> RunRecord:
    config.validate(problem)
    total_steps, per_epoch = config.resolve_steps(problem)
    eval_every = config.record_every if config.record_every is not None else per_epoch

    rng = run_rng(seed, TRAIN_STREAM)
    w = problem.initial_point() if config.w_init is None else np.array(config.w_init, dtype=float)
    if w.shape != (problem.dim,):
        raise ConfigError(f"w_init must have shape ({problem.dim},)")
    velocity = np.zeros_like(w)
    nu = _init_dual(problem, config, seed, w) if uses_dual else None

    record = RunRecord(seed=seed, config_id=config.config_id)
    t0 = time.perf_counter()
    nu_lo = float(nu.min()) if uses_dual else math.nan
    nu_hi = float(nu.max()) if uses_dual else math.nan
    safety_ratio = 0.0

    def emit(t: int) -> None:
        if not np.all(np.isfinite(w)) or (uses_dual and not np.all(np.isfinite(nu))):
            raise NumericalError(f"non-finite state at iteration {t}")
        wall = time.perf_counter() - t0
        record.add(t, "objective", oracle.reported_objective(problem, w), wall)
        if uses_dual:
            record.add(t, "nu_min", nu_lo, wall)
            record.add(t, "nu_max", nu_hi, wall)
        if config.method == "scent":
            record.add(t, "alpha_exp_nu_max", safety_ratio, wall)
            if config.rho_safety is not None:
                record.add(t, "alpha_safety_violated", float(safety_ratio > config.rho_safety), wall)

    emit(0)
    for t in range(1, total_steps + 1):
        anchors, zeta, zeta_p = sample_batch(problem, config.batch_anchors, rng,
                                             config.batch_inner, config.reuse_inner_sample)
        s_dual = problem.loss_values(w, anchors, zeta)
        if uses_dual:
            nu_prev = nu[anchors]
            alpha_t, nu_new = dual_update(t, nu_prev, s_dual)
            nu[anchors] = nu_new
            nu_lo = min(nu_lo, float(nu_new.min()))
            nu_hi = max(nu_hi, float(nu_new.max()))
            if config.method == "scent" and not is_infinite_alpha(alpha_t):
                safety_ratio = max(safety_ratio, float(np.max(alpha_t * np.exp(nu_prev))))
        else:
            nu_new = None
        s_prim = s_dual if zeta_p is zeta else problem.loss_values(w, anchors, zeta_p)
        u = primal_coef(s_prim, nu_new)
        m_actual = s_prim.shape[1]
        coef = u * (problem.objective_scale / (config.batch_anchors * m_actual))
        z = problem.weighted_grad(w, anchors, zeta_p, coef)
        velocity = config.momentum * velocity + z
        w = project_primal(w - _eta_at(config, t) * velocity, problem.projection_radius)
        if t % eval_every == 0 or t == total_steps:
            emit(t)
    if uses_dual and config.record_final_nu:
        wall = time.perf_counter() - t0
        for i, value in enumerate(nu):
            record.add(total_steps, f"nu_final_{i}", value, wall)
    return record


def scent_run(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Block-coordinate proximal mirror descent on nu plus projected SGD on w."""
    if config.method != "scent":
        raise ConfigError("scent_run needs method='scent'")

    def dual_update(t, nu_prev, s_dual):
        alpha_t = schedule_alpha(config.alpha_schedule, t, nu_prev)
        return alpha_t, spmd_step_batch(nu_prev, s_dual, alpha_t, axis=1)

    def primal_coef(s_prim, nu_new):
        return np.exp(s_prim - nu_new[:, None])

    return _run_cerm(problem, config, seed, dual_update, primal_coef)


def bsgd_run(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Mini-batch approximation: softmax weights over the inner batch, no dual."""
    if config.method != "bsgd":
        raise ConfigError("bsgd_run needs method='bsgd'")

    def primal_coef(s_prim, _nu):
        weights = np.exp(s_prim - logsumexp(s_prim, axis=1, keepdims=True))
        return weights * s_prim.shape[1]

    return _run_cerm(problem, config, seed, None, primal_coef, uses_dual=False)


def _asgd_runs(problem, config, seed, rho):
    clamp = problem.bounds if config.clamp_dual else None

    if rho is None:
        def dual_update(t, nu_prev, s_dual):
            alpha_p = schedule_alpha(config.alpha_schedule, t)
            if alpha_p == 0.0:
                return alpha_p, nu_prev
            return alpha_p, dual_sgd_step_batch(nu_prev, s_dual, alpha_p, clamp, axis=1)

        def primal_coef(s_prim, nu_new):
            return np.exp(s_prim - nu_new[:, None])
    else:
        def dual_update(t, nu_prev, s_dual):
            alpha_p = schedule_alpha(config.alpha_schedule, t)
            if alpha_p == 0.0:
                return alpha_p, nu_prev
            grad = 1.0 - softplus_dual_grad(s_dual - nu_prev[:, None], rho).mean(axis=1)
            nu_new = nu_prev - alpha_p * grad
            if clamp is not None:
                nu_new = np.clip(nu_new, clamp[0], clamp[1])
            return alpha_p, nu_new

        def primal_coef(s_prim, nu_new):
            return softplus_dual_grad(s_prim - nu_new[:, None], rho)

    return _run_cerm(problem, config, seed, dual_update, primal_coef)


def asgd_run(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Alternating SGD on (nu, w); the softplus variant substitutes the
    surrogate's derivative for the exponential throughout."""
    if config.method not in ("asgd", "asgd_softplus"):
        raise ConfigError("asgd_run needs method='asgd' or 'asgd_softplus'")
    return _asgd_runs(problem, config, seed, config.softplus_rho)


def umax_run(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """asgd with a lag reset: when the batch logmeanexp exceeds nu_i + delta the
    coordinate is set to that logmeanexp instead of taking the SGD step.

    delta = 0 means zero lag tolerance, i.e. the reset fires on every visited
    coordinate and the primal step coincides with the mini-batch softmax one.
    """
    if config.method != "umax":
        raise ConfigError("umax_run needs method='umax'")
    clamp = problem.bounds if config.clamp_dual else None
    delta = config.umax_delta

    def dual_update(t, nu_prev, s_dual):
        lme = np.asarray(logmeanexp(s_dual, axis=1))
        if delta == 0.0:
            return None, lme
        alpha_p = schedule_alpha(config.alpha_schedule, t)
        if alpha_p == 0.0:
            stepped = nu_prev
        else:
            stepped = dual_sgd_step_batch(nu_prev, s_dual, alpha_p, clamp, axis=1)
        return alpha_p, np.where(lme > nu_prev + delta, lme, stepped)

    def primal_coef(s_prim, nu_new):
        return np.exp(s_prim - nu_new[:, None])

    return _run_cerm(problem, config, seed, dual_update, primal_coef)


def sox_run(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Coordinate-wise moving average of exp(s), kept in log domain."""
    if config.method != "sox":
        raise ConfigError("sox_run needs method='sox'")
    gamma = config.sox_gamma

    def dual_update(t, nu_prev, s_dual):
        return None, sox_log_average(nu_prev, logmeanexp(s_dual, axis=1), gamma)

    def primal_coef(s_prim, nu_new):
        return np.exp(s_prim - nu_new[:, None])

    return _run_cerm(problem, config, seed, dual_update, primal_coef)


RUNNERS = {
    "scent": scent_run,
    "bsgd": bsgd_run,
    "asgd": asgd_run,
    "asgd_softplus": asgd_run,
    "umax": umax_run,
    "sox": sox_run,
}


def run_method(problem: CermProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Dispatch a CERM run by config.method."""
    try:
        runner = RUNNERS[config.method]
    except KeyError as exc:
        raise ConfigError(f"unknown CERM method {config.method!r}") from exc
    return runner(problem, config, seed)


# ---------------------------------------------------------------------------
# dual-only runs (fixed primal, scalar dual)
# ---------------------------------------------------------------------------

_DUAL_CHUNK = 16384


def dual_only_run(problem: DualOnlyProblem, config: OptimizerConfig, seed: int) -> RunRecord:
    """Iterate the scalar dual update on i.i.d. draws of s.

    Records instantaneous and running-average suboptimality (against the
    analytic F(nu) = m exp(-nu) + nu, nu* = log m) and squared dual error.
    """
    return dual_only_runs(problem, config, [seed])[0]


def dual_only_runs(problem: DualOnlyProblem, config: OptimizerConfig, seeds) -> list[RunRecord]:
    """dual_only_run over several seeds, advanced in lockstep for speed."""
    return run_dual_cells([problem] * len(seeds), config, list(seeds))


def run_dual_cells(problems, config: OptimizerConfig, seeds, alphas=None,
                   config_ids=None, nu_inits=None) -> list[RunRecord]:
    """Advance one dual-only cell per (problem, seed) pair in lockstep.

    All cells share the method, schedule kind, and step count; ``alphas``,
    ``nu_inits``, and ``config_ids`` optionally override the step size, the
    dual init, and the record label per cell (the grid runner uses these to
    batch cells whose configs differ only in those).  Each cell's draws come
    from its own seed-keyed stream, so results are identical to running the
    cells one at a time.
    """
    config.validate()
    if config.method not in DUAL_METHODS:
        raise ConfigError("run_dual_cells needs a dual-only method")
    if config.total_steps is None:
        raise ConfigError("dual-only runs need total_steps")
    if isinstance(config.nu_init, str):
        raise ConfigError("dual-only runs need a numeric nu_init")
    total = config.total_steps
    every = config.record_every if config.record_every is not None else max(1, total // 100)
    n_cells = len(problems)
    if len(seeds) != n_cells:
        raise ConfigError("one seed per cell")

    sched = config.alpha_schedule
    kind = sched.kind
    if config.method == "dual_sgd" and kind not in ("constant", "inv_sqrt_T"):
        raise ConfigError("dual_sgd supports constant or inv_sqrt_T alpha")
    if config.method == "dual_spmd" and kind == "cosine":
        raise ConfigError("dual_spmd does not support a cosine alpha")
    if alphas is None:
        if kind == "constant":
            alphas = np.full(n_cells, sched.base)
        elif kind == "inv_sqrt_T":
            alphas = np.full(n_cells, sched.base / math.sqrt(sched.horizon))
        else:
            alphas = None
    else:
        alphas = np.asarray(alphas, dtype=float)
        if kind not in ("constant", "inv_sqrt_T"):
            raise ConfigError("per-cell alphas need a constant-like schedule")

    nu_star = np.array([p.stats.nu_star for p in problems])
    if nu_inits is None:
        nu = np.full(n_cells, float(config.nu_init))
    else:
        nu = np.asarray(nu_inits, dtype=float).copy()
        if nu.shape != (n_cells,):
            raise ConfigError("nu_inits needs one value per cell")
    if config.method == "dual_sgd":
        if config.clamp_dual:
            c0 = np.array([p.clamp_bounds[0] for p in problems])
            c1 = np.array([p.clamp_bounds[1] for p in problems])
        else:
            c0 = c1 = None
        if np.any(alphas <= 0):
            raise ConfigError("dual_sgd needs positive alpha")
    spmd_log_alpha = None
    if config.method == "dual_spmd" and alphas is not None:
        if np.any(alphas <= 0):
            raise ConfigError("dual_spmd needs positive alpha")
        spmd_log_alpha = np.log(alphas)

    if config_ids is None:
        config_ids = [config.config_id] * n_cells
    records = [RunRecord(seed=s, config_id=cid) for s, cid in zip(seeds, config_ids)]
    t0 = time.perf_counter()
    gap_sum = np.zeros(n_cells)
    sq_sum = np.zeros(n_cells)

    def emit(t):
        wall = time.perf_counter() - t0
        u = nu - nu_star
        gap = np.expm1(-u) + u
        for c, rec in enumerate(records):
            rec.add(t, "nu_err_sq", u[c] * u[c], wall)
            rec.add(t, "obj_gap", gap[c], wall)
            if t > 0:
                rec.add(t, "avg_nu_err_sq", sq_sum[c] / t, wall)
                rec.add(t, "avg_obj_gap", gap_sum[c] / t, wall)

    emit(0)
    rngs = [run_rng(s, TRAIN_STREAM) for s in seeds]
    t = 0
    while t < total:
        chunk = min(_DUAL_CHUNK, total - t)
        draws = np.empty((chunk, n_cells))
        for c in range(n_cells):
            draws[:, c] = problems[c].sample_s(rngs[c], chunk)
        for k in range(chunk):
            t += 1
            s = draws[k]
            if config.method == "dual_spmd":
                if kind == "infinite" or (kind == "erm_rate" and t == 1):
                    nu = s.copy()
                else:
                    if spmd_log_alpha is not None:
                        la = spmd_log_alpha
                    elif kind == "erm_rate":
                        la = -nu - math.log(t - 1)
                    else:  # sox_rate
                        la = math.log(sched.gamma_prime) - nu
                    nu = nu + np.logaddexp(0.0, la + s) - np.logaddexp(0.0, la + nu)
            else:
                nu = nu - alphas * (1.0 - np.exp(s - nu))
                if c0 is not None:
                    nu = np.clip(nu, c0, c1)
            u = nu - nu_star
            gap_sum += np.expm1(-u) + u
            sq_sum += u * u
            if t % every == 0 or t == total:
                emit(t)
    for rec in records:
        if not all(np.isfinite(r[3]) for r in rec.rows):
            raise NumericalError("dual-only run diverged to a non-finite state")
    return records
