"""Seeded generators for annotated samples, mixtures, and mechanism families.

All generators are pure functions of (configuration, seed).  Seeds are
derived through counter-based Philox substreams, so replication r of an
experiment draws an independent stream regardless of execution order and
identical (master, substream) pairs reproduce bit-identical samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from credal.estimation import AnnotatedSample
from credal.measures import (
    Environment,
    Gaussian,
    Interval,
    Labeler,
    SymmetricNoise,
    Threshold,
    ValidationError,
)
from credal.sets import CredalSpec


@dataclass(frozen=True)
class GenSeed:
    """Master seed plus a substream path for order-free parallel replication."""

    master: int
    substream: tuple[int, ...] = ()

    def derive(self, *indices: int) -> "GenSeed":
        return GenSeed(self.master, self.substream + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=self.substream)
        return np.random.Generator(np.random.Philox(seq))


def _draw_hard_labels(labeler: Labeler, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if getattr(labeler, "is_deterministic", False):
        return labeler.labels(xs)
    probs = labeler.prob_matrix(xs)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(xs.shape[0])
    return (u[:, None] > cdf).sum(axis=1).astype(np.int64)


def sample_hard_arrays(
    env: Environment,
    labelers: Sequence[Labeler],
    n: int,
    seed: GenSeed,
) -> tuple[np.ndarray, np.ndarray]:
    """Array form of hard annotation sampling: (covariates (n,), labels (n, k)).

    The experiment harness uses this directly for bulk replication sweeps;
    :func:`sample_annotated` wraps it in per-sample records.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    if not labelers:
        raise ValidationError("need at least one labeler")
    rng = seed.generator()
    xs = env.sample(rng, n)
    labels = np.column_stack([_draw_hard_labels(l, xs, rng) for l in labelers])
    return xs, labels


def sample_soft_arrays(
    env: Environment,
    labelers: Sequence[Labeler],
    n: int,
    seed: GenSeed,
) -> tuple[np.ndarray, np.ndarray]:
    """Array form of soft annotation sampling: (covariates (n,), beliefs (n, k, C))."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    if not labelers:
        raise ValidationError("need at least one labeler")
    if any(isinstance(l, SymmetricNoise) for l in labelers):
        raise ValidationError("soft sampling is undefined for symmetric-noise labelers")
    rng = seed.generator()
    xs = env.sample(rng, n)
    probs = np.stack([l.prob_matrix(xs) for l in labelers], axis=1)
    return xs, probs


def sample_annotated(
    env: Environment,
    labelers: Sequence[Labeler],
    n: int,
    kind: str,
    seed: GenSeed,
) -> list[AnnotatedSample]:
    """Draw n i.i.d. covariates and one observation per labeler for each.

    Hard labels are drawn independently per annotator given the covariate
    (deterministic labelers contribute their function value); soft
    observations record each labeler's belief vector exactly.  Soft mode
    rejects symmetric-noise annotators, whose belief about the latent truth
    is not what the noisy channel emits.
    """
    if kind not in ("hard", "soft"):
        raise ValidationError(f"kind must be 'hard' or 'soft', got {kind!r}")
    if kind == "hard":
        xs, labels = sample_hard_arrays(env, labelers, n, seed)
        return [
            AnnotatedSample(x=float(xs[i]), hard=tuple(int(v) for v in labels[i]))
            for i in range(n)
        ]
    xs, probs = sample_soft_arrays(env, labelers, n, seed)
    return [
        AnnotatedSample(
            x=float(xs[i]),
            soft=tuple(tuple(float(p) for p in row) for row in probs[i]),
        )
        for i in range(n)
    ]


def sample_mixture(
    spec: CredalSpec,
    pi: Sequence[float],
    n: int,
    seed: GenSeed,
) -> list[tuple[float, int]]:
    """Draw (x, y) pairs from the mixture sum_ij pi_ij * P_ij.

    ``pi`` is a simplex vector over the vertex list in row-major (i, j)
    order: per sample a vertex is drawn from pi, then x from its environment
    and y from its labeler at x.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    weights = np.asarray(pi, dtype=float)
    verts = spec.vertices()
    if weights.shape != (len(verts),):
        raise ValidationError(f"pi must have length {len(verts)}, got {weights.shape}")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValidationError("pi must lie on the simplex over the vertices")
    rng = seed.generator()
    choice = rng.choice(len(verts), size=n, p=np.clip(weights, 0.0, None) / weights.clip(0).sum())
    out: list[tuple[float, int]] = []
    for v_idx in choice:
        i, j = verts[v_idx]
        x = float(spec.environments[i].sample(rng, 1)[0])
        y = int(_draw_hard_labels(spec.labelers[j], np.asarray([x]), rng)[0])
        out.append((x, y))
    return out


def _quantile_cells(env: Environment, edges: Sequence[float]) -> list[Interval]:
    if not isinstance(env, Gaussian):
        raise ValidationError("mechanism families need an environment with a quantile function")
    xs = env.ppf(np.asarray(edges))
    cells = []
    for a, b in zip(xs[:-1], xs[1:]):
        if not a < b:
            raise ValidationError("degenerate quantile cell; mass too small to resolve")
        cells.append(Interval(float(a), float(b)))
    return cells


def interval_mechanisms(
    n_y: int,
    env: Environment,
    pinned_mass: float,
) -> tuple[list[Interval], float]:
    """Disjoint quantile-cell labelers whose max pairwise disagreement is pinned.

    Labeler j fires (class 1) exactly on its own quantile cell, so two
    labelers disagree precisely on the union of their cells and the expected
    disagreement of a pair is the sum of the two cell masses.  The first two
    cells carry ``pinned_mass / 2`` each; the remaining ``n_y - 2`` cells
    carry ``min(pinned_mass / 2, (1 - pinned_mass) / (n_y - 1))``, which
    keeps the covered mass strictly below 1 and makes the anchor pair attain
    the maximum, so the implied diameter equals ``pinned_mass`` for every
    n_y.  Returns ``(labelers, implied_eta_star)``.
    """
    if n_y < 2:
        raise ValidationError(f"need n_y >= 2 labelers, got {n_y!r}")
    if not (0.0 < pinned_mass < 1.0):
        raise ValidationError(f"pinned_mass must lie in (0, 1), got {pinned_mass!r}")
    half = pinned_mass / 2.0
    filler = min(half, (1.0 - pinned_mass) / (n_y - 1)) if n_y > 2 else 0.0
    if n_y > 2 and filler < 1e-9:
        raise ValidationError(
            f"pinned_mass {pinned_mass!r} infeasible for {n_y} blocks: filler cells degenerate"
        )
    masses = [half, half] + [filler] * (n_y - 2)
    covered = sum(masses)
    start = (1.0 - covered) / 2.0
    edges = np.concatenate([[start], start + np.cumsum(masses)])
    return _quantile_cells(env, edges), pinned_mass


def block_mechanisms(
    n_y: int,
    env: Environment,
    step: float = 0.012,
) -> tuple[list[Interval], float]:
    """Disjoint quantile-cell labelers with linearly growing cell masses.

    Cell j carries mass ``j * step``, so each added mechanism is a larger
    "outlier" block and the implied diameter
    ``eta_star = (2 n_y - 1) * step`` grows with n_y.  Total covered mass
    ``step * n_y (n_y + 1) / 2`` must stay <= 1 or the configuration is
    infeasible.  Returns ``(labelers, implied_eta_star)``.
    """
    if n_y < 2:
        raise ValidationError(f"need n_y >= 2 labelers, got {n_y!r}")
    if step <= 0:
        raise ValidationError(f"step must be > 0, got {step!r}")
    total = step * n_y * (n_y + 1) / 2.0
    if total >= 1.0 - 1e-9:
        raise ValidationError(
            f"step {step!r} infeasible for {n_y} blocks: total mass {total:.3f} must stay below 1"
        )
    masses = [step * j for j in range(1, n_y + 1)]
    start = (1.0 - sum(masses)) / 2.0
    edges = np.concatenate([[start], start + np.cumsum(masses)])
    return _quantile_cells(env, edges), (2 * n_y - 1) * step


def minimax_instance(eta: float, env: Environment) -> CredalSpec:
    """Two-labeler fixed-covariate spec whose exact diameter equals eta.

    One labeler never fires (infinite threshold, constant class 0); the
    other fires exactly on the upper-tail region of covariate mass eta.
    Any hypothesis therefore pays total risk at least eta across the two
    worlds, which is the hard instance behind the eta/2 minimax floor.
    """
    if not (0.0 < eta < 1.0):
        raise ValidationError(f"eta must lie in (0, 1), got {eta!r}")
    if not isinstance(env, Gaussian):
        raise ValidationError("minimax instance needs an environment with a quantile function")
    cut = float(env.ppf(1.0 - eta))
    return CredalSpec(environments=(env,), labelers=(Threshold(math.inf), Threshold(cut)))
