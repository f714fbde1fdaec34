"""Integer coefficient selection for collective and successive decoding.

The full min-max coefficient problems are combinatorial, so the production
path uses the two-group reduction: devices are split by their per-device
quadratic-form reliability, each group shares one integer coefficient, and the
resulting 4- (collective) or 2-variable (successive) grid is scanned
exhaustively.  A genuine brute-force oracle over all integer matrices/vectors
is kept for small instances to validate the heuristics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .receiver import EffectiveNoiseContext, sigma_e_direct

FEAS_TOL = 1e-8
ORACLE_MAX_K = 4
ORACLE_MAX_AMAX = 2


class ReconstructionInfeasibleError(ValueError):
    """The all-ones target does not lie in the column space of A."""


@dataclass(frozen=True)
class DeviceGroups:
    k1: tuple[int, ...]
    k2: tuple[int, ...]
    tau: float


@dataclass(frozen=True)
class CoefficientPlan:
    """Selected integer coefficients plus reconstruction weights and the
    predicted effective-noise variances they were scored with."""

    scheme: str                      # "direct" | "collective" | "successive"
    a_matrix: np.ndarray | None = None   # K x I integer matrix (collective)
    a0: np.ndarray | None = None         # K integer vector (successive)
    c: np.ndarray | None = None          # I reconstruction weights (collective)
    beta: float | None = None            # side-information weight (successive)
    predicted_sigmas: tuple[float, ...] = ()
    groups: DeviceGroups | None = None
    sigma_direct: float = np.nan     # sigma_e^2(1) on the same channel

    @property
    def objective(self) -> float:
        return max(self.predicted_sigmas)


def direct_plan(ctx: EffectiveNoiseContext, groups: DeviceGroups | None = None) -> CoefficientPlan:
    s1 = sigma_e_direct(ctx)
    return CoefficientPlan(
        scheme="direct", predicted_sigmas=(s1,), groups=groups, sigma_direct=s1
    )


def group_devices(ctx: EffectiveNoiseContext, quantile: float = 0.5) -> DeviceGroups:
    """Partition devices by the diagonal of Q: larger Q_kk means a less
    reliable single-device decode.  tau is the ``quantile`` order statistic of
    {Q_kk}; devices at or above it form group 1.  Degenerate splits (all-equal
    diagonals, or an empty side) fall back to an index split with the first
    ceil(K/2) devices in group 1.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    k = ctx.num_devices
    if k < 2:
        raise ValueError("grouping needs at least 2 devices")
    diag = np.diag(ctx.q)
    tau = float(np.quantile(diag, quantile))
    k1 = np.flatnonzero(diag >= tau)
    k2 = np.flatnonzero(diag < tau)
    if len(k1) == 0 or len(k2) == 0:
        half = (k + 1) // 2
        k1, k2 = np.arange(half), np.arange(half, k)
    return DeviceGroups(k1=tuple(int(i) for i in k1), k2=tuple(int(i) for i in k2), tau=tau)


def _group_quadratics(ctx: EffectiveNoiseContext, groups: DeviceGroups):
    """Reduce Q to the group-level 2x2 quadratic form plus the cross terms
    against the all-ones vector, so coefficient scans cost O(1) per tuple."""
    q = ctx.q
    i1 = np.array(groups.k1, dtype=int)
    i2 = np.array(groups.k2, dtype=int)
    s11 = float(q[np.ix_(i1, i1)].sum())
    s12 = float(q[np.ix_(i1, i2)].sum())
    s22 = float(q[np.ix_(i2, i2)].sum())
    t1 = float(q[i1, :].sum())   # sum over rows in group 1, all columns
    t2 = float(q[i2, :].sum())
    return s11, s12, s22, t1, t2


def expand_group_vector(groups: DeviceGroups, g1: int, g2: int, k: int) -> np.ndarray:
    a = np.empty(k, dtype=float)
    a[list(groups.k1)] = g1
    a[list(groups.k2)] = g2
    return a


@lru_cache(maxsize=8)
def _pair_grid(a_max: int) -> np.ndarray:
    vals = range(-a_max, a_max + 1)
    return np.array(list(itertools.product(vals, vals)), dtype=float)


@lru_cache(maxsize=8)
def _quad_grid(a_max: int) -> np.ndarray:
    vals = range(-a_max, a_max + 1)
    return np.array(list(itertools.product(vals, vals, vals, vals)), dtype=float)


def collective_two_group_search(
    ctx: EffectiveNoiseContext, groups: DeviceGroups, a_max: int
) -> CoefficientPlan:
    """Scan all (2 a_max + 1)^4 two-group coefficient pairs with nonzero
    group-level determinant, minimizing the larger of the two effective-noise
    variances.  The scan order is lexicographic in the coefficient tuple, and
    the first minimizer wins, so results are bit-reproducible."""
    if a_max < 1:
        raise ValueError(f"a_max must be >= 1, got {a_max}")
    k = ctx.num_devices
    s11, s12, s22, _, _ = _group_quadratics(ctx, groups)
    grid = _quad_grid(a_max)  # columns: a1^(1), a2^(1), a1^(2), a2^(2)
    g1, g2, h1, h2 = grid.T
    det = g1 * h2 - g2 * h1
    quad1 = ctx.power * (g1 * g1 * s11 + 2 * g1 * g2 * s12 + g2 * g2 * s22)
    quad2 = ctx.power * (h1 * h1 * s11 + 2 * h1 * h2 * s12 + h2 * h2 * s22)
    objective = np.maximum(quad1, quad2)
    objective[det == 0] = np.inf
    best = int(np.argmin(objective))
    if not np.isfinite(objective[best]):
        raise RuntimeError("no feasible two-group tuple; a_max >= 1 should always admit one")
    bg1, bg2, bh1, bh2 = (int(v) for v in grid[best])
    # Exact 2x2 solve of the group-level reconstruction system.
    d = bg1 * bh2 - bg2 * bh1
    c = np.array([(bh2 - bh1) / d, (bg1 - bg2) / d], dtype=float)
    a_matrix = np.stack(
        [expand_group_vector(groups, bg1, bg2, k), expand_group_vector(groups, bh1, bh2, k)],
        axis=1,
    )
    return CoefficientPlan(
        scheme="collective",
        a_matrix=a_matrix,
        c=c,
        predicted_sigmas=(float(quad1[best]), float(quad2[best])),
        groups=groups,
        sigma_direct=sigma_e_direct(ctx),
    )


def solve_reconstruction_weights(a_matrix: np.ndarray) -> np.ndarray:
    """Least-squares solve of A c = 1; feasible iff the residual infinity norm
    stays below 1e-8, otherwise :class:`ReconstructionInfeasibleError`."""
    a = np.asarray(a_matrix, dtype=float)
    ones = np.ones(a.shape[0])
    c, *_ = np.linalg.lstsq(a, ones, rcond=None)
    if np.max(np.abs(a @ c - ones)) >= FEAS_TOL:
        raise ReconstructionInfeasibleError(
            "all-ones target is not in the column space of the coefficient matrix"
        )
    return c


def successive_two_group_search(
    ctx: EffectiveNoiseContext, groups: DeviceGroups, a_max: int
) -> CoefficientPlan:
    """Scan two-group side-information vectors (p, q), p != q, subject to
    sigma_e^2(a0) <= sigma_e^2(1), minimizing the larger of the conditional
    target variance and the side-information variance.  Falls back to a direct
    plan when no pair satisfies the constraint."""
    if a_max < 1:
        raise ValueError(f"a_max must be >= 1, got {a_max}")
    k = ctx.num_devices
    s11, s12, s22, t1, t2 = _group_quadratics(ctx, groups)
    sigma1 = ctx.power * (s11 + 2 * s12 + s22)  # sigma_e^2(1)
    grid = _pair_grid(a_max)
    p, q = grid.T
    quad0 = ctx.power * (p * p * s11 + 2 * p * q * s12 + q * q * s22)
    cross = ctx.power * (p * t1 + q * t2)       # P * a0^T Q 1
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sigma1 - cross * cross / quad0   # P (beta a0 - 1)^T Q (beta a0 - 1)
    objective = np.maximum(cond, quad0)
    infeasible = (p == q) | (quad0 > sigma1) | (quad0 == 0)
    objective[infeasible] = np.inf
    best = int(np.argmin(objective))
    if not np.isfinite(objective[best]):
        return direct_plan(ctx, groups)
    a0 = expand_group_vector(groups, int(grid[best, 0]), int(grid[best, 1]), k)
    beta = float(cross[best] / quad0[best])
    return CoefficientPlan(
        scheme="successive",
        a0=a0,
        beta=beta,
        predicted_sigmas=(float(cond[best]), float(quad0[best])),
        groups=groups,
        sigma_direct=sigma1,
    )


def _all_columns(k: int, a_max: int) -> np.ndarray:
    vals = range(-a_max, a_max + 1)
    return np.array(list(itertools.product(*([vals] * k))), dtype=float)


def _check_oracle_size(k: int, a_max: int):
    if k > ORACLE_MAX_K or a_max > ORACLE_MAX_AMAX:
        raise ValueError(
            f"oracle limited to K <= {ORACLE_MAX_K} and a_max <= {ORACLE_MAX_AMAX}, "
            f"got K={k}, a_max={a_max}"
        )


def exhaustive_oracle(ctx: EffectiveNoiseContext, a_max: int, scheme: str) -> CoefficientPlan:
    """Global brute force over the enumerated integer family for small
    instances (K <= 4, a_max <= 2); the validation reference for the two-group
    heuristics.  Zero and pairwise-parallel columns are excluded a priori."""
    k = ctx.num_devices
    _check_oracle_size(k, a_max)
    if scheme == "collective":
        return _oracle_collective(ctx, a_max)
    if scheme == "successive":
        return _oracle_successive(ctx, a_max)
    raise ValueError(f"unknown oracle scheme {scheme!r}")


def _oracle_collective(ctx: EffectiveNoiseContext, a_max: int) -> CoefficientPlan:
    k = ctx.num_devices
    cols = _all_columns(k, a_max)
    nz = np.any(cols != 0, axis=1)
    cols = cols[nz]
    quads = ctx.power * np.einsum("ij,jk,ik->i", cols, ctx.q, cols)
    n = cols.shape[0]
    ones = np.ones(k)
    best_obj = np.inf
    best = None
    for i in range(n):
        a = cols[i]
        for j in range(n):
            b = cols[j]
            # Skip parallel columns via Cauchy-Schwarz equality (covers i == j);
            # exact for small-integer entries.
            cross = a @ b
            if cross * cross == (a @ a) * (b @ b):
                continue
            obj = max(quads[i], quads[j])
            if obj >= best_obj:
                continue
            a_matrix = np.stack([a, b], axis=1)
            try:
                c = solve_reconstruction_weights(a_matrix)
            except ReconstructionInfeasibleError:
                continue
            best_obj = obj
            best = (a_matrix, c, float(quads[i]), float(quads[j]))
    if best is None:
        raise RuntimeError("oracle found no feasible coefficient matrix")
    a_matrix, c, q1, q2 = best
    return CoefficientPlan(
        scheme="collective",
        a_matrix=a_matrix,
        c=c,
        predicted_sigmas=(q1, q2),
        sigma_direct=sigma_e_direct(ctx),
    )


def _oracle_successive(ctx: EffectiveNoiseContext, a_max: int) -> CoefficientPlan:
    k = ctx.num_devices
    cols = _all_columns(k, a_max)
    nz = np.any(cols != 0, axis=1)
    cols = cols[nz]
    # Drop integer multiples of the all-ones vector.
    ones_like = np.all(cols == cols[:, :1], axis=1)
    cols = cols[~ones_like]
    ones = np.ones(k)
    quad0 = ctx.power * np.einsum("ij,jk,ik->i", cols, ctx.q, cols)
    cross = ctx.power * (cols @ (ctx.q @ ones))
    sigma1 = sigma_e_direct(ctx)
    cond = sigma1 - cross * cross / quad0
    objective = np.maximum(cond, quad0)
    objective[quad0 > sigma1] = np.inf
    best = int(np.argmin(objective))
    if not np.isfinite(objective[best]):
        return direct_plan(ctx)
    a0 = cols[best]
    beta = float(cross[best] / quad0[best])
    return CoefficientPlan(
        scheme="successive",
        a0=a0,
        beta=beta,
        predicted_sigmas=(float(cond[best]), float(quad0[best])),
        sigma_direct=sigma1,
    )
