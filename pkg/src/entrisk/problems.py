"""Concrete problem instances: multiclass CE, partial-AUC, KL-DRO regression,
scalar dual-only distributions, synthetic generators, and the two-point
hard-instance construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CermProblem, run_rng
from .dataio import FeatureDataset
from .errors import DataError

DATA_STREAM = 3
# Effective support half-width, in standard deviations, used when a Gaussian
# exponent needs a finite [c0, c1] (clamping, bound constants).
GAUSSIAN_SUPPORT_SIGMAS = 4.0


# ---------------------------------------------------------------------------
# dual-only problems (fixed primal)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionStats:
    """Moments of z = exp(s): mean m, variance, kappa = E[z^2]/m^2, nu* = log m."""

    m: float
    var_z: float
    kappa: float
    nu_star: float

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.kappa < 1.0 - 1e-12:
            raise ValueError("kappa must be >= 1 (Cauchy-Schwarz)")


class DualOnlyProblem:
    """Scalar dual problem F(nu) = m * exp(-nu) + nu over i.i.d. draws of s."""

    stats: DistributionStats
    clamp_bounds: tuple[float, float]

    def sample_s(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def objective_gap(self, nu):
        """F(nu) - F(nu*) = expm1(-u) + u with u = nu - nu*; exact and >= 0."""
        u = np.asarray(nu, dtype=float) - self.stats.nu_star
        return np.expm1(-u) + u


@dataclass(frozen=True)
class GaussianDual(DualOnlyProblem):
    """s ~ Normal(mu, sigma^2), so z = exp(s) is lognormal with kappa = exp(sigma^2)."""

    mu: float
    sigma: float
    stats: DistributionStats = field(init=False)
    clamp_bounds: tuple = field(init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        m = math.exp(self.mu + self.sigma**2 / 2.0)
        kappa = math.exp(self.sigma**2)
        object.__setattr__(self, "stats", DistributionStats(m, (kappa - 1.0) * m * m, kappa, math.log(m)))
        half = GAUSSIAN_SUPPORT_SIGMAS * self.sigma
        object.__setattr__(self, "clamp_bounds", (self.mu - half, self.mu + half))

    def sample_s(self, rng, size):
        return rng.normal(self.mu, self.sigma, size=size)


@dataclass(frozen=True)
class TwoPointDual(DualOnlyProblem):
    """z supported on {low, high} with P(z = high) = p."""

    low: float
    high: float
    p: float
    stats: DistributionStats = field(init=False)
    clamp_bounds: tuple = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError("p must lie strictly in (0, 1)")
        if not (0.0 < self.low <= self.high):
            raise ValueError("need 0 < low <= high")
        m = (1.0 - self.p) * self.low + self.p * self.high
        ez2 = (1.0 - self.p) * self.low**2 + self.p * self.high**2
        kappa = ez2 / (m * m)
        object.__setattr__(self, "stats", DistributionStats(m, ez2 - m * m, kappa, math.log(m)))
        object.__setattr__(self, "clamp_bounds", (math.log(self.low), math.log(self.high)))

    def sample_s(self, rng, size):
        hit = rng.random(size=size) < self.p
        return np.where(hit, math.log(self.high), math.log(self.low))


def gaussian_dual(mu: float, sigma: float) -> GaussianDual:
    return GaussianDual(mu, sigma)


def two_point_dual(low: float, high: float, p: float) -> TwoPointDual:
    return TwoPointDual(low, high, p)


def hard_instance_pair(kappa: float, T: int, eps: float = 1.0):
    """The two nearby two-point instances behind the kappa/T difficulty floor.

    Supports {eps, kappa} with P(z = kappa) equal to p0 = 1/kappa and
    p1 = p0 + 1/(8 sqrt(kappa T)); both satisfy E[z^2]/E[z]^2 <= kappa and
    their optima separate by at least (kappa - 1) / (32 sqrt(kappa T)).
    """
    if kappa < 2:
        raise ValueError("kappa must be >= 2")
    if T < kappa:
        raise ValueError("need T >= kappa")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    p0 = 1.0 / kappa
    h = 1.0 / (8.0 * math.sqrt(kappa * T))
    return two_point_dual(eps, kappa, p0), two_point_dual(eps, kappa, p0 + h)


def hard_instance_separation(kappa: float, T: int) -> float:
    """Analytic lower bound (kappa-1)/(32 sqrt(kappa T)) on |nu1* - nu0*|."""
    return (kappa - 1.0) / (32.0 * math.sqrt(kappa * T))


# ---------------------------------------------------------------------------
# multiclass cross-entropy over fixed features
# ---------------------------------------------------------------------------

class MulticlassCeProblem(CermProblem):
    """Cross-entropy via pairwise logits s = x_i.(w_zeta - w_{y_i}).

    The parameter is the K x d weight matrix flattened row-major; an inner
    sample id is a class index.  With in_batch sampling the inner draws are
    the labels of the other anchors in the current batch (no rng consumed),
    otherwise classes are uniform over [0, K).  Reported metric adds log K so
    it equals the usual sum-form CE loss.
    """

    def __init__(self, data: FeatureDataset, n_classes: int,
                 projection_radius: float | None = None, in_batch: bool = False):
        if data.kind != "classification":
            raise DataError("multiclass problem needs classification labels")
        if data.labels.size and (data.labels.min() < 0 or data.labels.max() >= n_classes):
            raise DataError(f"labels must lie in [0, {n_classes})")
        self.x = data.features
        self.y = data.labels
        self.n_classes = n_classes
        self.n_anchors = data.n_rows
        self.feature_dim = data.dim
        self.dim = n_classes * data.dim
        self.population_size = n_classes
        self.projection_radius = projection_radius
        self.in_batch = in_batch
        self.objective_scale = 1.0
        self.objective_offset = math.log(n_classes)
        if projection_radius is not None:
            c1 = math.sqrt(2.0) * projection_radius * float(np.linalg.norm(self.x, axis=1).max())
            self.bounds = (-c1, c1)
        else:
            self.bounds = None

    def _weights(self, w):
        return np.asarray(w).reshape(self.n_classes, self.feature_dim)

    def inner_sample(self, rng, anchors, m):
        if self.in_batch:
            labels = self.y[anchors]
            b = len(anchors)
            if b < 2:
                raise ValueError("in-batch negatives need at least two anchors")
            tiled = np.tile(labels, (b, 1))
            keep = ~np.eye(b, dtype=bool)
            return tiled[keep].reshape(b, b - 1)
        return rng.integers(0, self.n_classes, size=(len(anchors), m))

    def loss_values(self, w, anchors, inner):
        weights = self._weights(w)
        x = self.x[anchors]
        target = np.einsum("bd,bd->b", weights[self.y[anchors]], x)
        return np.einsum("bmd,bd->bm", weights[inner], x) - target[:, None]

    def weighted_grad(self, w, anchors, inner, coef):
        coef = np.asarray(coef, dtype=float)
        x = self.x[anchors]
        row_sum = coef.sum(axis=1)
        flat_cls = inner.ravel()
        contrib = coef[:, :, None] * x[:, None, :]
        flat = contrib.reshape(-1, self.feature_dim)
        grad = np.zeros((self.n_classes, self.feature_dim))
        y = self.y[anchors]
        for j in range(self.feature_dim):
            grad[:, j] = np.bincount(flat_cls, weights=flat[:, j], minlength=self.n_classes)
            grad[:, j] -= np.bincount(y, weights=row_sum * x[:, j], minlength=self.n_classes)
        return grad.ravel()

    def grad_sq_norms(self, w, anchors, inner):
        xsq = np.einsum("bd,bd->b", self.x[anchors], self.x[anchors])
        hit = inner != self.y[anchors][:, None]
        return 2.0 * xsq[:, None] * hit

    def population_values(self, w):
        logits = self.x @ self._weights(w).T
        return logits - logits[np.arange(self.n_anchors), self.y][:, None]


def multiclass_ce_problem(data: FeatureDataset, n_classes: int,
                          projection_radius: float | None = None,
                          in_batch: bool = False) -> MulticlassCeProblem:
    return MulticlassCeProblem(data, n_classes, projection_radius, in_batch)


# ---------------------------------------------------------------------------
# one-way partial AUC with squared hinge surrogate
# ---------------------------------------------------------------------------

class PaucProblem(CermProblem):
    """Anchors are positives, inner samples are negatives.

    s_i(w; j) = max(0, margin + w.(x_j^- - x_i^+))^2 / tau; the reported
    objective carries the tau scale of the surrogate formulation, and the
    primal estimator is scaled the same way.  A step's negative batch is
    shared across the positive anchors in that batch, drawn without
    replacement whenever it fits inside the negative pool.
    """

    def __init__(self, data: FeatureDataset, tau: float, margin: float = 0.5,
                 projection_radius: float | None = None):
        if data.kind != "sign":
            raise DataError("partial-AUC problem needs +-1 labels")
        if tau <= 0:
            raise DataError("tau must be positive")
        self.pos = data.features[data.labels == 1]
        self.neg = data.features[data.labels == -1]
        if len(self.pos) == 0 or len(self.neg) == 0:
            raise DataError("need at least one positive and one negative row")
        self.tau = tau
        self.margin = margin
        self.n_anchors = len(self.pos)
        self.dim = data.dim
        self.population_size = len(self.neg)
        self.projection_radius = projection_radius
        self.objective_scale = tau
        self.objective_offset = 0.0
        if projection_radius is not None:
            spread = float(np.linalg.norm(self.neg, axis=1).max() + np.linalg.norm(self.pos, axis=1).max())
            self.bounds = (0.0, (margin + projection_radius * spread) ** 2 / tau)
        else:
            self.bounds = None

    def inner_sample(self, rng, anchors, m):
        n_neg = len(self.neg)
        if m <= n_neg:
            draw = rng.choice(n_neg, size=m, replace=False)
        else:
            draw = rng.integers(0, n_neg, size=m)
        return np.tile(draw, (len(anchors), 1))

    def _hinge(self, w, anchors, inner):
        neg_scores = self.neg @ np.asarray(w)
        pos_scores = self.pos[anchors] @ np.asarray(w)
        u = neg_scores[inner] - pos_scores[:, None]
        return np.maximum(0.0, self.margin + u)

    def loss_values(self, w, anchors, inner):
        h = self._hinge(w, anchors, inner)
        return h * h / self.tau

    def weighted_grad(self, w, anchors, inner, coef):
        g = np.asarray(coef, dtype=float) * (2.0 / self.tau) * self._hinge(w, anchors, inner)
        flat = g.ravel()
        neg_part = self.neg[inner.ravel()].T @ flat
        pos_part = self.pos[anchors].T @ g.sum(axis=1)
        return neg_part - pos_part

    def grad_sq_norms(self, w, anchors, inner):
        diff = self.neg[inner] - self.pos[anchors][:, None, :]
        dist_sq = np.einsum("bmd,bmd->bm", diff, diff)
        h = self._hinge(w, anchors, inner)
        return (2.0 * h / self.tau) ** 2 * dist_sq

    def population_values(self, w):
        u = self.neg @ np.asarray(w) - (self.pos @ np.asarray(w))[:, None]
        h = np.maximum(0.0, self.margin + u)
        return h * h / self.tau


def pauc_problem(data: FeatureDataset, tau: float, margin: float = 0.5,
                 projection_radius: float | None = None) -> PaucProblem:
    return PaucProblem(data, tau, margin, projection_radius)


# ---------------------------------------------------------------------------
# KL-regularized DRO least squares (single anchor)
# ---------------------------------------------------------------------------

class KldroProblem(CermProblem):
    """Single-anchor instance with s(w; i) = (a.x_i + b - y_i)^2 / tau.

    The parameter is (a, b) concatenated; inner sample ids are data rows,
    drawn without replacement within a batch.  An epoch is one pass over the
    rows at the configured inner batch size.
    """

    def __init__(self, data: FeatureDataset, tau: float, projection_radius: float | None = None):
        if data.kind != "regression":
            raise DataError("KL-DRO problem needs regression targets")
        if tau <= 0:
            raise DataError("tau must be positive")
        self.x = data.features
        self.y = data.labels
        self.tau = tau
        self.n_anchors = 1
        self.dim = data.dim + 1
        self.population_size = data.n_rows
        self.projection_radius = projection_radius
        self.objective_scale = tau
        self.objective_offset = 0.0
        if projection_radius is not None:
            aug = float(np.sqrt(np.einsum("nd,nd->n", self.x, self.x) + 1.0).max())
            resid_max = projection_radius * aug + float(np.abs(self.y).max())
            self.bounds = (0.0, resid_max**2 / tau)
        else:
            self.bounds = None

    def inner_sample(self, rng, anchors, m):
        n = self.population_size
        if m <= n:
            draw = rng.choice(n, size=m, replace=False)
        else:
            draw = rng.integers(0, n, size=m)
        return np.tile(draw, (len(anchors), 1))

    def _residuals(self, w, inner):
        w = np.asarray(w)
        return self.x[inner] @ w[:-1] + w[-1] - self.y[inner]

    def loss_values(self, w, anchors, inner):
        r = self._residuals(w, inner)
        return r * r / self.tau

    def weighted_grad(self, w, anchors, inner, coef):
        g = np.asarray(coef, dtype=float) * (2.0 / self.tau) * self._residuals(w, inner)
        flat = g.ravel()
        grad = np.empty(self.dim)
        grad[:-1] = self.x[inner.ravel()].T @ flat
        grad[-1] = flat.sum()
        return grad

    def grad_sq_norms(self, w, anchors, inner):
        r = self._residuals(w, inner)
        aug_sq = np.einsum("nd,nd->n", self.x, self.x)[inner] + 1.0
        return (2.0 * r / self.tau) ** 2 * aug_sq

    def population_values(self, w):
        w = np.asarray(w)
        r = self.x @ w[:-1] + w[-1] - self.y
        return (r * r / self.tau)[None, :]

    def steps_per_epoch(self, batch_anchors, batch_inner):
        return max(1, -(-self.population_size // batch_inner))


def kldro_problem(data: FeatureDataset, tau: float,
                  projection_radius: float | None = None) -> KldroProblem:
    return KldroProblem(data, tau, projection_radius)


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------

def synth_multiclass(n: int, d: int, n_classes: int, noise: float, seed: int) -> FeatureDataset:
    """Rows = unit-sphere class centroid + Gaussian noise; labels = centroid id."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    rng = run_rng(seed, DATA_STREAM)
    centroids = rng.normal(size=(n_classes, d))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    labels = rng.integers(0, n_classes, size=n)
    features = centroids[labels] + noise * rng.normal(size=(n, d))
    return FeatureDataset(features, labels, "classification")


def synth_pauc(n_pos: int, n_neg: int, d: int, separation: float, noise: float,
               seed: int) -> FeatureDataset:
    """Imbalanced two-cluster sign dataset along a random unit direction."""
    rng = run_rng(seed, DATA_STREAM)
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    pos = separation / 2.0 * direction + noise * rng.normal(size=(n_pos, d))
    neg = -separation / 2.0 * direction + noise * rng.normal(size=(n_neg, d))
    features = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_pos, dtype=int), -np.ones(n_neg, dtype=int)])
    return FeatureDataset(features, labels, "sign")


def synth_regression(n: int, d: int, noise: float, seed: int) -> FeatureDataset:
    """Linear targets plus truncated two-scale noise.

    15 percent of rows carry double the noise scale and normal draws are
    clipped at 2.5 sigma, so the squared residuals have a pronounced but
    bounded right tail: the entropic risk sits well above the mean-square
    residual without being dominated by a single sample (the housing-data
    regime the DRO benchmarks run in).
    """
    rng = run_rng(seed, DATA_STREAM)
    x = rng.normal(size=(n, d))
    coef = rng.normal(size=d) / math.sqrt(d)
    z = np.clip(rng.normal(size=n), -2.5, 2.5)
    spike = rng.random(n) < 0.15
    sigma = noise * np.where(spike, 2.0, 1.0)
    y = x @ coef + 0.25 + sigma * z
    return FeatureDataset(x, y, "regression")
