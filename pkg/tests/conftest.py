import numpy as np
import pytest

from entrisk.core import CermProblem
from entrisk.problems import (kldro_problem, multiclass_ce_problem, pauc_problem,
                              synth_multiclass, synth_pauc, synth_regression)


def random_w_in_ball(rng, dim, radius):
    v = rng.normal(size=dim)
    v /= np.linalg.norm(v)
    return v * radius * rng.uniform() ** (1.0 / dim)


def fd_gradient(problem, w, anchor, inner_id, step):
    grad = np.zeros(problem.dim)
    anchors = np.array([anchor])
    inner = np.array([[inner_id]])
    for j in range(problem.dim):
        e = np.zeros(problem.dim)
        e[j] = step
        plus = problem.loss_values(w + e, anchors, inner)[0, 0]
        minus = problem.loss_values(w - e, anchors, inner)[0, 0]
        grad[j] = (plus - minus) / (2 * step)
    return grad


def check_gradients(problem, rng, n_points=10, skip=None, rel_tol=1e-5):
    """Loss gradient vs central finite differences at random (w, anchor, zeta)."""
    for _ in range(n_points):
        radius = problem.projection_radius or 1.0
        w = random_w_in_ball(rng, problem.dim, radius)
        anchor = int(rng.integers(problem.n_anchors))
        inner_id = int(rng.integers(problem.population_size))
        if skip is not None and skip(problem, w, anchor, inner_id):
            continue
        step = 1e-5 * (1.0 + np.abs(w).max())
        fd = fd_gradient(problem, w, anchor, inner_id, step)
        analytic = problem.weighted_grad(w, np.array([anchor]), np.array([[inner_id]]),
                                         np.ones((1, 1)))
        scale = max(1.0, np.linalg.norm(fd))
        assert np.linalg.norm(analytic - fd) / scale <= rel_tol


def check_midpoint_convexity(problem, rng, n_pairs=200):
    radius = problem.projection_radius or 1.0
    anchors = np.arange(problem.n_anchors)
    pop = problem.population_inner()
    for _ in range(n_pairs):
        w1 = random_w_in_ball(rng, problem.dim, radius)
        w2 = random_w_in_ball(rng, problem.dim, radius)
        mid = problem.loss_values(0.5 * (w1 + w2), anchors, pop)
        avg = 0.5 * (problem.loss_values(w1, anchors, pop) + problem.loss_values(w2, anchors, pop))
        assert np.all(mid <= avg + 1e-12)


def check_bounds_coverage(problem, rng, n_samples=100_000):
    c0, c1 = problem.bounds
    per_round = 1000
    for _ in range(n_samples // per_round):
        w = random_w_in_ball(rng, problem.dim, problem.projection_radius)
        anchors = rng.integers(0, problem.n_anchors, size=per_round // 10)
        inner = rng.integers(0, problem.population_size, size=(anchors.size, 10))
        s = problem.loss_values(w, anchors, inner)
        assert np.all(s >= c0 - 1e-12) and np.all(s <= c1 + 1e-12)


class StubProblem(CermProblem):
    """Minimal problem for the sampling/schedule contracts: s is identically 0."""

    def __init__(self, n_anchors, population_size=5, dim=2):
        self.n_anchors = n_anchors
        self.population_size = population_size
        self.dim = dim
        self.bounds = (0.0, 0.0)
        self.projection_radius = None

    def inner_sample(self, rng, anchors, m):
        return rng.integers(0, self.population_size, size=(len(anchors), m))

    def loss_values(self, w, anchors, inner):
        return np.zeros(inner.shape)

    def weighted_grad(self, w, anchors, inner, coef):
        return np.zeros(self.dim)

    def grad_sq_norms(self, w, anchors, inner):
        return np.zeros(inner.shape)


@pytest.fixture(scope="session")
def xc_small():
    data = synth_multiclass(60, 6, 8, 0.4, seed=3)
    return multiclass_ce_problem(data, 8, projection_radius=1.0)


@pytest.fixture(scope="session")
def xc_free():
    data = synth_multiclass(60, 6, 8, 0.4, seed=3)
    return multiclass_ce_problem(data, 8)


@pytest.fixture(scope="session")
def pauc_small():
    data = synth_pauc(20, 90, 5, 1.0, 0.7, seed=5)
    return pauc_problem(data, tau=0.5, margin=0.5, projection_radius=1.5)


@pytest.fixture(scope="session")
def dro_small():
    data = synth_regression(120, 4, 0.5, seed=9)
    return kldro_problem(data, tau=1.0, projection_radius=3.0)
