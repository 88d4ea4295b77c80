"""Distribution primitives and total-variation computations.

Environments are univariate covariate distributions (Gaussian or a finite
grid of atoms).  Labelers are conditional label mechanisms over ``C``
classes.  On top of these the module provides every total-variation (TV)
quantity the rest of the package needs: discrete TV between probability
vectors, TV between environments, pointwise and expected conditional TV
between labelers, a grid-based supremum of the conditional TV, and the
exact joint TV between two (environment, labeler) product distributions.

Conventions
-----------
* TV is half the L1 distance between densities / mass functions.
* Binary labelers use class 1 as the "positive" event (``x > theta`` for a
  threshold, ``a < x <= b`` for an interval); ties at an exact boundary
  resolve to class 0.
* All TV outputs are clamped to [0, 1]; raw pre-clamp values are emitted at
  DEBUG log level.
* Everything here is immutable and pure, so concurrent use is safe.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Union

import numpy as np
from scipy.special import expit, ndtr, ndtri

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
WEIGHT_TOL = 1e-12


class MeasureError(Exception):
    """Base error for distribution / TV computations."""


class ValidationError(MeasureError, ValueError):
    """Inputs violate a documented contract (domain, shape, simplex, ...)."""


class SupportError(MeasureError):
    """Operands live on incompatible supports (e.g. Gaussian vs. grid)."""


class QuadratureError(MeasureError):
    """Adaptive quadrature did not converge within the node budget.

    Carries ``residual``, the remaining error estimate when the budget ran
    out.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


def _require_finite(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return v


def _clip01(value: float, label: str) -> float:
    if value < 0.0 or value > 1.0:
        logger.debug("%s raw value %r clamped to [0, 1]", label, value)
    return min(1.0, max(0.0, float(value)))


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    """Normal covariate distribution N(mean, std^2)."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        _require_finite(self.mean, "mean")
        if not (math.isfinite(self.std) and self.std > 0):
            raise ValidationError(f"std must be finite and > 0, got {self.std!r}")

    def pdf(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        finite = np.isfinite(x)
        out[finite] = ndtr((x[finite] - self.mean) / self.std)
        out[x == np.inf] = 1.0
        out[x == -np.inf] = 0.0
        return out

    def ppf(self, u) -> np.ndarray:
        return self.mean + self.std * ndtri(np.asarray(u, dtype=float))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size=n)


@dataclass(frozen=True)
class DiscreteGrid:
    """Atomic covariate distribution on strictly increasing grid points."""

    points: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        wts = tuple(float(w) for w in self.weights)
        if len(pts) != len(wts) or not pts:
            raise ValidationError("points and weights must be equal-length and non-empty")
        if any(not math.isfinite(p) for p in pts):
            raise ValidationError("grid points must be finite")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValidationError("grid points must be strictly increasing")
        if any(w < 0 for w in wts):
            raise ValidationError("weights must be non-negative")
        if abs(sum(wts) - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights must sum to 1 within {WEIGHT_TOL}, got {sum(wts)!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.points), size=n, p=np.asarray(self.weights))
        return np.asarray(self.points)[idx]


Environment = Union[Gaussian, DiscreteGrid]


# ---------------------------------------------------------------------------
# Labelers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Threshold:
    """Deterministic binary labeler: class 1 iff x > theta.

    ``theta`` may be +/-inf, which realizes the constant class-0 / class-1
    labeler while staying in the threshold family.
    """

    theta: float

    def __post_init__(self) -> None:
        if math.isnan(self.theta):
            raise ValidationError("theta must not be NaN")

    @property
    def class_count(self) -> int:
        return 2

    @property
    def is_deterministic(self) -> bool:
        return True

    def breakpoints(self) -> tuple[float, ...]:
        return (self.theta,) if math.isfinite(self.theta) else ()

    def labels(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) > self.theta).astype(np.int64)

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        lab = self.labels(x)
        out = np.zeros((lab.shape[0], 2))
        out[np.arange(lab.shape[0]), lab] = 1.0
        return out


@dataclass(frozen=True)
class Interval:
    """Deterministic binary labeler: class 1 iff a < x <= b."""

    a: float
    b: float

    def __post_init__(self) -> None:
        _require_finite(self.a, "a")
        _require_finite(self.b, "b")
        if not self.a < self.b:
            raise ValidationError(f"interval needs a < b, got ({self.a}, {self.b})")

    @property
    def class_count(self) -> int:
        return 2

    @property
    def is_deterministic(self) -> bool:
        return True

    def breakpoints(self) -> tuple[float, ...]:
        return (self.a, self.b)

    def labels(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((x > self.a) & (x <= self.b)).astype(np.int64)

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        lab = self.labels(x)
        out = np.zeros((lab.shape[0], 2))
        out[np.arange(lab.shape[0]), lab] = 1.0
        return out


@dataclass(frozen=True)
class Sigmoid:
    """Stochastic binary labeler with logistic link: P(1|x) = sigma(slope*x + bias)."""

    slope: float
    bias: float

    def __post_init__(self) -> None:
        _require_finite(self.slope, "slope")
        _require_finite(self.bias, "bias")

    @property
    def class_count(self) -> int:
        return 2

    @property
    def is_deterministic(self) -> bool:
        return False

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        p1 = expit(self.slope * np.asarray(x, dtype=float) + self.bias)
        return np.column_stack([1.0 - p1, p1])


@dataclass(frozen=True)
class Probit:
    """Stochastic binary labeler with probit link: P(1|x) = Phi(kappa*x + bias)."""

    kappa: float
    bias: float

    def __post_init__(self) -> None:
        _require_finite(self.kappa, "kappa")
        _require_finite(self.bias, "bias")

    @property
    def class_count(self) -> int:
        return 2

    @property
    def is_deterministic(self) -> bool:
        return False

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        p1 = ndtr(self.kappa * np.asarray(x, dtype=float) + self.bias)
        return np.column_stack([1.0 - p1, p1])


@dataclass(frozen=True)
class SymmetricNoise:
    """Binary symmetric channel on top of a deterministic base labeler.

    With probability ``epsilon`` the base label is flipped.
    """

    base: Union[Threshold, Interval]
    epsilon: float

    def __post_init__(self) -> None:
        if not isinstance(self.base, (Threshold, Interval)):
            raise ValidationError("SymmetricNoise base must be deterministic (Threshold or Interval)")
        if not (0.0 <= self.epsilon <= 0.5):
            raise ValidationError(f"epsilon must lie in [0, 0.5], got {self.epsilon!r}")

    @property
    def class_count(self) -> int:
        return 2

    @property
    def is_deterministic(self) -> bool:
        return False

    def breakpoints(self) -> tuple[float, ...]:
        return self.base.breakpoints()

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        base = self.base.prob_matrix(x)
        return base * (1.0 - self.epsilon) + (1.0 - base) * self.epsilon


@dataclass(frozen=True)
class Tabular:
    """Labeler defined only on explicit grid points; off-grid evaluation errors.

    ``probs[i]`` is the conditional probability vector at ``grid[i]``.
    """

    grid: tuple[float, ...]
    probs: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        grid = tuple(float(g) for g in self.grid)
        probs = tuple(tuple(float(p) for p in row) for row in self.probs)
        if len(grid) != len(probs) or not grid:
            raise ValidationError("grid and probs must be equal-length and non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("tabular grid must be strictly increasing")
        widths = {len(row) for row in probs}
        if len(widths) != 1 or min(widths) < 2:
            raise ValidationError("probs rows must share one class count >= 2")
        for row in probs:
            if any(p < -WEIGHT_TOL for p in row) or abs(sum(row) - 1.0) > WEIGHT_TOL:
                raise ValidationError(f"probs row off the simplex beyond {WEIGHT_TOL}: {row!r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "probs", probs)

    @property
    def class_count(self) -> int:
        return len(self.probs[0])

    @property
    def is_deterministic(self) -> bool:
        return False

    def breakpoints(self) -> tuple[float, ...]:
        return self.grid

    def prob_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grid = np.asarray(self.grid)
        idx = np.searchsorted(grid, x)
        idx = np.clip(idx, 0, len(grid) - 1)
        # accept both exact hits and hits on the left neighbour
        left = np.clip(idx - 1, 0, len(grid) - 1)
        match_right = np.isclose(grid[idx], x, rtol=0.0, atol=1e-12)
        match_left = np.isclose(grid[left], x, rtol=0.0, atol=1e-12)
        if not np.all(match_right | match_left):
            bad = x[~(match_right | match_left)][0]
            raise SupportError(f"tabular labeler evaluated off-grid at x={bad!r}")
        use = np.where(match_right, idx, left)
        return np.asarray(self.probs, dtype=float)[use]


Labeler = Union[Threshold, Interval, Sigmoid, Probit, SymmetricNoise, Tabular]


# ---------------------------------------------------------------------------
# Quadrature configuration and engine
# ---------------------------------------------------------------------------

QuadratureMethod = Literal["gauss_hermite", "adaptive_simpson", "grid"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for 1-D numerical integration against an environment.

    ``gauss_hermite`` is used for smooth integrands under a Gaussian;
    integrands with label-boundary kinks are handled by breakpoint-split
    adaptive Simpson on a [mean +/- domain_halfwidth_sigmas * std] window.
    ``grid`` is a cheap fixed composite-Simpson rule for exploratory use.
    """

    method: QuadratureMethod = "gauss_hermite"
    node_count: int = 128
    abs_tol: float = 1e-8
    domain_halfwidth_sigmas: float = 8.0

    def __post_init__(self) -> None:
        if self.method not in ("gauss_hermite", "adaptive_simpson", "grid"):
            raise ValidationError(f"unknown quadrature method {self.method!r}")
        if self.node_count < 16:
            raise ValidationError("node_count must be >= 16")
        if not (0 < self.abs_tol <= 1e-4):
            raise ValidationError("abs_tol must be in (0, 1e-4]")
        if self.domain_halfwidth_sigmas <= 0:
            raise ValidationError("domain_halfwidth_sigmas must be > 0")

    @property
    def eval_budget(self) -> int:
        return max(200_000, self.node_count * 2_000)


DEFAULT_QUADRATURE = QuadratureConfig()


@lru_cache(maxsize=16)
def _hermite_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    return nodes, weights / math.sqrt(math.pi)


def gauss_hermite_expectation(g: Callable[[np.ndarray], np.ndarray], env: Gaussian, n: int) -> float:
    """E[g(X)] for X ~ env via n-node Gauss-Hermite (smooth integrands only)."""
    nodes, weights = _hermite_nodes(n)
    x = env.mean + math.sqrt(2.0) * env.std * nodes
    return float(np.dot(weights, g(x)))


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float,
    breakpoints: tuple[float, ...] = (),
    eval_budget: int = 200_000,
) -> float:
    """Integrate a vectorized scalar integrand over [a, b].

    The interval is pre-split at ``breakpoints`` so kinks and jumps sit at
    segment edges; each segment is then refined by standard adaptive Simpson
    with Richardson extrapolation.  Raises :class:`QuadratureError` carrying
    the remaining error estimate if the evaluation budget is exhausted.
    """
    if not (b > a):
        raise ValidationError(f"empty integration interval [{a}, {b}]")
    cuts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    lo = np.asarray(cuts[:-1], dtype=float)
    hi = np.asarray(cuts[1:], dtype=float)
    mid = 0.5 * (lo + hi)
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    coarse = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    width = b - a

    total = 0.0
    evals = lo.size * 3
    # each worklist entry: one interval with cached endpoint/middle values
    while lo.size:
        m1 = 0.5 * (lo + mid)
        m2 = 0.5 * (mid + hi)
        f_m1, f_m2 = f(m1), f(m2)
        evals += 2 * lo.size
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_m1 + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_m2 + f_hi)
        fine = left + right
        err = np.abs(fine - coarse) / 15.0
        # factor 4 guards against the Richardson estimate running optimistic
        # near kinks; the integrals here are cheap enough to over-refine
        accept = err <= 0.25 * abs_tol * np.maximum((hi - lo) / width, 1e-300)
        total += float(np.sum((fine + (fine - coarse) / 15.0)[accept]))
        keep = ~accept
        if evals > eval_budget and np.any(keep):
            residual = float(np.sum(err[keep]))
            raise QuadratureError("quadrature eval budget exhausted", residual)
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        f_lo = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi = np.concatenate([f_mid[keep], f_hi[keep]])
        mid = np.concatenate([m1[keep], m2[keep]])
        f_mid = np.concatenate([f_m1[keep], f_m2[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    return total


def _grid_simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, nodes: int) -> float:
    n = nodes if nodes % 2 == 1 else nodes + 1
    xs = np.linspace(a, b, n)
    ys = f(xs)
    h = (b - a) / (n - 1)
    return float(h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum()))


def gaussian_domain(*envs: Gaussian, halfwidth_sigmas: float) -> tuple[float, float]:
    lo = min(e.mean - halfwidth_sigmas * e.std for e in envs)
    hi = max(e.mean + halfwidth_sigmas * e.std for e in envs)
    return lo, hi


def _expectation(
    env: Environment,
    g: Callable[[np.ndarray], np.ndarray],
    cfg: QuadratureConfig,
    breakpoints: tuple[float, ...] = (),
) -> float:
    """E[g(X)] for bounded vectorized g, dispatching on env type and method."""
    if isinstance(env, DiscreteGrid):
        return float(np.dot(env.weights, g(np.asarray(env.points))))
    lo, hi = gaussian_domain(env, halfwidth_sigmas=cfg.domain_halfwidth_sigmas)
    finite_bps = tuple(p for p in breakpoints if math.isfinite(p))
    if cfg.method == "grid":
        return _grid_simpson(lambda x: g(x) * env.pdf(x), lo, hi, cfg.node_count)
    if cfg.method == "gauss_hermite" and not finite_bps:
        return gauss_hermite_expectation(g, env, cfg.node_count)
    return adaptive_simpson(
        lambda x: g(x) * env.pdf(x), lo, hi, cfg.abs_tol, finite_bps, cfg.eval_budget
    )


# ---------------------------------------------------------------------------
# Total-variation operations
# ---------------------------------------------------------------------------


def tv_discrete(p, q) -> float:
    """TV distance between two probability vectors: half the L1 distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValidationError(f"probability vectors must share one dimension, got {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < -SIMPLEX_TOL) or abs(v.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"{name} is off the simplex beyond {SIMPLEX_TOL}")
    return _clip01(0.5 * float(np.abs(p - q).sum()), "tv_discrete")


def _check_class_counts(l1: Labeler, l2: Labeler) -> int:
    if l1.class_count != l2.class_count:
        raise ValidationError(
            f"labelers disagree on class count: {l1.class_count} vs {l2.class_count}"
        )
    return l1.class_count


def conditional_tv(l1: Labeler, l2: Labeler, x: float) -> float:
    """Pointwise TV between the two conditional label distributions at x."""
    _check_class_counts(l1, l2)
    xs = np.asarray([float(x)])
    diff = np.abs(l1.prob_matrix(xs) - l2.prob_matrix(xs)).sum()
    return _clip01(0.5 * float(diff), "conditional_tv")


def _conditional_tv_vec(l1: Labeler, l2: Labeler) -> Callable[[np.ndarray], np.ndarray]:
    def g(x: np.ndarray) -> np.ndarray:
        return 0.5 * np.abs(l1.prob_matrix(x) - l2.prob_matrix(x)).sum(axis=1)

    return g


def _deterministic_disagreement_mass(env: Gaussian, l1, l2) -> float:
    # piecewise-constant disagreement indicator: integrate exactly via the CDF
    cuts = sorted(set(l1.breakpoints()) | set(l2.breakpoints()))
    edges = np.asarray([-np.inf, *cuts, np.inf])
    inner = np.where(
        np.isfinite(edges[:-1]) & np.isfinite(edges[1:]),
        0.5 * (edges[:-1] + edges[1:]),
        np.where(np.isfinite(edges[:-1]), edges[:-1] + 1.0, edges[1:] - 1.0),
    )
    inner = np.where(np.isfinite(inner), inner, 0.0)
    disagree = l1.labels(inner) != l2.labels(inner)
    mass = env.cdf(edges[1:]) - env.cdf(edges[:-1])
    return float(mass[disagree].sum())


def expected_conditional_tv(
    env: Environment, l1: Labeler, l2: Labeler, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """E_{X~env}[ TV(l1(.|X), l2(.|X)) ].

    Deterministic labeler pairs under a Gaussian reduce to exact CDF
    arithmetic over the disagreement region (the quadrature-free value that
    smooth-pair quadrature is cross-checked against in the test suite).
    """
    _check_class_counts(l1, l2)
    if (
        isinstance(env, Gaussian)
        and getattr(l1, "is_deterministic", False)
        and getattr(l2, "is_deterministic", False)
        and cfg.method != "grid"
    ):
        return _clip01(_deterministic_disagreement_mass(env, l1, l2), "expected_conditional_tv")
    bps = tuple(l1.breakpoints()) + tuple(l2.breakpoints())
    value = _expectation(env, _conditional_tv_vec(l1, l2), cfg, bps)
    return _clip01(value, "expected_conditional_tv")


def sup_conditional_tv(
    l1: Labeler, l2: Labeler, domain: tuple[float, float], grid_n: int = 512
) -> float:
    """Max pointwise conditional TV over a uniform grid, plus one refinement pass.

    This is a lower estimate of the true supremum: features finer than the
    grid resolution can be missed.  Labeler breakpoints inside the domain are
    added to the candidate set, which makes deterministic disagreement
    regions exact for the families shipped here.
    """
    _check_class_counts(l1, l2)
    lo, hi = float(domain[0]), float(domain[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValidationError(f"domain must be a finite non-degenerate interval, got {domain!r}")
    if grid_n < 256:
        raise ValidationError("grid_n must be >= 256")

    g = _conditional_tv_vec(l1, l2)
    if isinstance(l1, Tabular) or isinstance(l2, Tabular):
        tab = l1 if isinstance(l1, Tabular) else l2
        pts = np.asarray([p for p in tab.grid if lo <= p <= hi])
        if pts.size == 0:
            raise ValidationError("no tabular grid points inside the domain")
        return _clip01(float(g(pts).max()), "sup_conditional_tv")

    xs = np.linspace(lo, hi, grid_n)
    step = xs[1] - xs[0]
    bps = [p for l in (l1, l2) for p in l.breakpoints() if lo < p < hi and math.isfinite(p)]
    extra = []
    for p in bps:
        extra.extend((p, min(hi, p + 1e-9), max(lo, p - 1e-9), min(hi, p + 0.5 * step)))
    cand = np.concatenate([xs, np.asarray(extra)]) if extra else xs
    vals = g(cand)
    best_x = float(cand[int(np.argmax(vals))])
    best = float(vals.max())
    refine = np.linspace(max(lo, best_x - step), min(hi, best_x + step), 65)
    best = max(best, float(g(refine).max()))
    return _clip01(best, "sup_conditional_tv")


def _gaussian_tv_closed_form(e1: Gaussian, e2: Gaussian) -> float:
    # equal-std case only: 2*Phi(|mu1-mu2| / (2*sigma)) - 1
    return 2.0 * float(ndtr(abs(e1.mean - e2.mean) / (2.0 * e1.std))) - 1.0


def _gaussian_crossings(e1: Gaussian, e2: Gaussian) -> tuple[float, ...]:
    # density crossings; used only as split hints for adaptive quadrature
    if math.isclose(e1.std, e2.std, rel_tol=1e-12, abs_tol=0.0):
        if e1.mean == e2.mean:
            return ()
        return (0.5 * (e1.mean + e2.mean),)
    a = 0.5 / e2.std**2 - 0.5 / e1.std**2
    b = e1.mean / e1.std**2 - e2.mean / e2.std**2
    c = (
        0.5 * e2.mean**2 / e2.std**2
        - 0.5 * e1.mean**2 / e1.std**2
        + math.log(e2.std / e1.std)
    )
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return ()
    root = math.sqrt(disc)
    return tuple(sorted(((-b - root) / (2.0 * a), (-b + root) / (2.0 * a))))


def _union_grid(e1: DiscreteGrid, e2: DiscreteGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.asarray(sorted(set(e1.points) | set(e2.points)))

    def lift(env: DiscreteGrid) -> np.ndarray:
        w = np.zeros(pts.size)
        w[np.searchsorted(pts, np.asarray(env.points))] = env.weights
        return w

    return pts, lift(e1), lift(e2)


def tv_env(e1: Environment, e2: Environment, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """TV distance between two environments."""
    if isinstance(e1, DiscreteGrid) and isinstance(e2, DiscreteGrid):
        _, w1, w2 = _union_grid(e1, e2)
        return _clip01(0.5 * float(np.abs(w1 - w2).sum()), "tv_env")
    if not (isinstance(e1, Gaussian) and isinstance(e2, Gaussian)):
        raise SupportError("tv_env between a Gaussian and a DiscreteGrid is not defined")
    if math.isclose(e1.std, e2.std, rel_tol=1e-12, abs_tol=0.0):
        return _clip01(_gaussian_tv_closed_form(e1, e2), "tv_env")
    lo, hi = gaussian_domain(e1, e2, halfwidth_sigmas=cfg.domain_halfwidth_sigmas)
    value = 0.5 * adaptive_simpson(
        lambda x: np.abs(e1.pdf(x) - e2.pdf(x)),
        lo,
        hi,
        cfg.abs_tol,
        _gaussian_crossings(e1, e2),
        cfg.eval_budget,
    )
    return _clip01(value, "tv_env")


def _joint_tv_deterministic(e1: Gaussian, l1, e2: Gaussian, l2) -> float:
    # exact region arithmetic: between label boundaries and density
    # crossings, the integrand is either phi1 + phi2 (labels differ) or
    # |phi1 - phi2| with constant sign (labels agree), so every segment is a
    # difference of CDF values
    cuts = sorted(
        set(l1.breakpoints()) | set(l2.breakpoints()) | set(_gaussian_crossings(e1, e2))
    )
    edges = np.asarray([-np.inf, *cuts, np.inf])
    inner = np.where(
        np.isfinite(edges[:-1]) & np.isfinite(edges[1:]),
        0.5 * (edges[:-1] + edges[1:]),
        np.where(np.isfinite(edges[:-1]), edges[:-1] + 1.0, edges[1:] - 1.0),
    )
    inner = np.where(np.isfinite(inner), inner, 0.0)
    differ = l1.labels(inner) != l2.labels(inner)
    m1 = np.diff(e1.cdf(edges))
    m2 = np.diff(e2.cdf(edges))
    return 0.5 * float(np.where(differ, m1 + m2, np.abs(m1 - m2)).sum())


def joint_tv_exact(
    e1: Environment,
    l1: Labeler,
    e2: Environment,
    l2: Labeler,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """TV distance between the product distributions (e1, l1) and (e2, l2).

    Computes (1/2) * integral of sum_y |p1(x) p1(y|x) - p2(x) p2(y|x)| dx by
    breakpoint-split adaptive quadrature, an exact sum for grid
    environments, or exact CDF region arithmetic when both labelers are
    deterministic.  Reduces to :func:`tv_env` when l1 == l2 and to
    :func:`expected_conditional_tv` when e1 == e2.
    """
    _check_class_counts(l1, l2)
    if isinstance(e1, DiscreteGrid) and isinstance(e2, DiscreteGrid):
        pts, w1, w2 = _union_grid(e1, e2)
        m1 = l1.prob_matrix(pts) * w1[:, None]
        m2 = l2.prob_matrix(pts) * w2[:, None]
        return _clip01(0.5 * float(np.abs(m1 - m2).sum()), "joint_tv_exact")
    if not (isinstance(e1, Gaussian) and isinstance(e2, Gaussian)):
        raise SupportError("joint_tv_exact requires both environments Gaussian or both DiscreteGrid")
    if (
        getattr(l1, "is_deterministic", False)
        and getattr(l2, "is_deterministic", False)
        and cfg.method != "grid"
    ):
        return _clip01(_joint_tv_deterministic(e1, l1, e2, l2), "joint_tv_exact")

    def integrand(x: np.ndarray) -> np.ndarray:
        m1 = l1.prob_matrix(x) * e1.pdf(x)[:, None]
        m2 = l2.prob_matrix(x) * e2.pdf(x)[:, None]
        return 0.5 * np.abs(m1 - m2).sum(axis=1)

    lo, hi = gaussian_domain(e1, e2, halfwidth_sigmas=cfg.domain_halfwidth_sigmas)
    bps = (
        tuple(l1.breakpoints())
        + tuple(l2.breakpoints())
        + _gaussian_crossings(e1, e2)
    )
    value = adaptive_simpson(
        integrand, lo, hi, cfg.abs_tol, tuple(p for p in bps if math.isfinite(p)), cfg.eval_budget
    )
    return _clip01(value, "joint_tv_exact")
