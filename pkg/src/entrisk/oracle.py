"""Ground-truth evaluators: exact full-batch objectives/gradients over the
finite inner population, analytic dual optima, a bisection solve of the
proximal first-order condition, Monte Carlo variance diagnostics, and the
theoretical rate-bound evaluators used by the benchmark checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CermProblem, ConvergenceBound, run_rng
from .dual import logmeanexp
from .problems import DistributionStats


def full_objective(problem: CermProblem, w) -> float:
    """(1/n) sum_i log mean_pop exp(s_i); exact over the finite population."""
    s = problem.population_values(w)
    return float(np.mean(logmeanexp(s, axis=1)))


def reported_objective(problem: CermProblem, w) -> float:
    """The experiment metric: objective_scale * full_objective + objective_offset."""
    return problem.objective_scale * full_objective(problem, w) + problem.objective_offset


def full_joint_objective(problem: CermProblem, w, nu) -> float:
    """(1/n) sum_i [mean_pop exp(s_i - nu_i) + nu_i], exact."""
    s = problem.population_values(w)
    nu = np.asarray(nu, dtype=float)
    return float(np.mean(np.exp(s - nu[:, None]).mean(axis=1) + nu))


def full_joint_gradient(problem: CermProblem, w, nu) -> np.ndarray:
    """Primal gradient (1/n) sum_i mean_pop exp(s_i - nu_i) grad s_i, exact."""
    pop = problem.population_inner()
    anchors = np.arange(problem.n_anchors)
    s = problem.loss_values(w, anchors, pop)
    nu = np.asarray(nu, dtype=float)
    coef = np.exp(s - nu[:, None]) / (problem.n_anchors * problem.population_size)
    return problem.weighted_grad(w, anchors, pop, coef)


def dual_optimum(problem: CermProblem, w) -> np.ndarray:
    """Per-anchor argmin over nu: log of the population mean of exp(s_i)."""
    s = problem.population_values(w)
    return np.asarray(logmeanexp(s, axis=1), dtype=float).reshape(problem.n_anchors)


def prox_bruteforce(nu_prev: float, s_value: float, alpha: float,
                    tol: float = 1e-12) -> float:
    """Bisection on the first-order condition of the proximal dual step.

    Solves f(nu) = 1 - exp(s - nu) + (exp(-nu_prev) - exp(-nu)) / alpha = 0;
    f is strictly increasing and the minimizer lies between nu_prev and
    s_value, so [min-1, max+1] always brackets the root.  Test oracle for
    the closed-form step; independent of it by construction.
    """
    def foc(nu):
        return 1.0 - math.exp(s_value - nu) + (math.exp(-nu_prev) - math.exp(-nu)) / alpha

    lo = min(nu_prev, s_value) - 1.0
    hi = max(nu_prev, s_value) + 1.0
    if foc(lo) > 0 or foc(hi) < 0:
        raise ValueError("bracket does not contain the root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if foc(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Diagnostics:
    """Monte Carlo estimates of the two per-iteration variance terms."""

    sigma_sq: float
    delta_sq: float
    n_samples: int


def estimate_diagnostics(problem: CermProblem, w, nu, n_samples: int, seed: int) -> Diagnostics:
    """Anchor-averaged sigma_t^2 = E||exp(s - nu) grad s||^2 and
    delta_t^2 = exp(-nu) E|exp(s) - E exp(s)|^2 (inner mean exact)."""
    if n_samples < 100:
        raise ValueError("need n_samples >= 100")
    rng = run_rng(seed, 0)
    anchors = np.arange(problem.n_anchors)
    nu = np.asarray(nu, dtype=float)
    inner = problem.init_inner_sample(rng, n_samples)
    s = problem.loss_values(w, anchors, inner)
    gn = problem.grad_sq_norms(w, anchors, inner)
    sigma_sq = float(np.mean(np.mean(np.exp(2.0 * (s - nu[:, None])) * gn, axis=1)))
    m_exact = np.exp(dual_optimum(problem, w))
    delta_sq = float(np.mean(np.exp(-nu) * np.mean((np.exp(s) - m_exact[:, None]) ** 2, axis=1)))
    return Diagnostics(sigma_sq=sigma_sq, delta_sq=delta_sq, n_samples=n_samples)


# ---------------------------------------------------------------------------
# rate-bound evaluators (constants exactly as printed, no tuning)
# ---------------------------------------------------------------------------

def _gap_at(r0: float) -> float:
    # F(nu0) - F(nu*) expressed through r0 = exp(nu* - nu0).
    return r0 - math.log(r0) - 1.0


def spmd_bound(bound: ConvergenceBound, nu0: float, T: int) -> float:
    """Averaged-gap upper bound for the proximal mirror dual update:

    4*sqrt(2) * sqrt(C (kappa-1) (1 - r0 + r0 log r0) / T) + (F(nu0)-F(nu*))/T
    with r0 = exp(nu* - nu0).
    """
    r0 = bound.m * math.exp(-nu0)
    breg = 1.0 - r0 + r0 * math.log(r0)
    return 4.0 * math.sqrt(2.0) * math.sqrt(bound.big_c * (bound.kappa - 1.0) * breg / T) \
        + _gap_at(r0) / T


def sgd_bound(stats: DistributionStats, c0: float, nu0: float, T: int) -> float:
    """Averaged-gap upper bound for projected SGD on the dual:

    sqrt(2) |nu0 - nu*| exp(nu* - c0) sqrt((kappa - 1) / T).
    """
    return math.sqrt(2.0) * abs(nu0 - stats.nu_star) * math.exp(stats.nu_star - c0) \
        * math.sqrt((stats.kappa - 1.0) / T)


def erm_gap_bound(stats: DistributionStats, sigma_subg: float, T: int) -> float:
    """Final-iterate bound for the running-mean step-size rule:

    2 (kappa - 1) / T + exp(3 sigma^2 / 2 - T / (16 kappa)).
    """
    return 2.0 * (stats.kappa - 1.0) / T \
        + math.exp(1.5 * sigma_subg**2 - T / (16.0 * stats.kappa))
