"""Exact Gaussian sampling on space-time grids and hitting-probability MC.

The field restricted to a finite grid is a Gaussian vector with the model's
covariance matrix; one Cholesky factor per grid serves every replicate and
component.  Randomness is counter-based (Philox) and keyed by
(seed, replicate, component), so estimates do not depend on chunking or
evaluation order, and any single replicate can be reproduced in isolation.

Hitting is decided against a target set's distance function: a replicate
hits when some grid point's field vector comes within the chosen inflation
of the set.  Raw (inflation 0) and mesh-inflated frequencies bracket the
continuum hitting probability in the intended reading; the inflation radius
is a sup-modulus heuristic, three envelope gauge increments times the usual
sqrt(2 log n) factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    FactorizationError,
    InsufficientResolutionError,
)
from .heat import HeatModel, MetricEnvelope, covariance_matrix
from .potential import PointSet, TargetSet

_MAX_GRID_POINTS = 4096
_Z95 = 1.959963984540054  # two-sided 95% normal quantile
_CHUNK = 256


# -- grids and samples -----------------------------------------------------------


@dataclass(frozen=True)
class SampleGrid:
    """Product grid times x sites, the index set of one Gaussian vector."""

    times: tuple
    site_axes: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        axes = tuple(tuple(float(v) for v in ax) for ax in self.site_axes)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "site_axes", axes)
        if not times or not axes or any(len(ax) == 0 for ax in axes):
            raise ConfigurationError("grid needs at least one time and one site")
        for seq in (times, *axes):
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ConfigurationError("grid coordinates must be strictly increasing")
        if self.n_points > _MAX_GRID_POINTS:
            raise ConfigurationError(
                f"grid has {self.n_points} points; factorization bound is {_MAX_GRID_POINTS}"
            )

    @classmethod
    def regular(cls, model: HeatModel, n_times: int, n_sites: int) -> "SampleGrid":
        """Uniform grid over the model window [t0, t1] x [-M, M]^d."""
        if n_times < 1 or n_sites < 1:
            raise ConfigurationError("grid sizes must be positive")
        times = np.linspace(model.t0, model.t1, n_times)
        if n_sites == 1:
            axis = np.zeros(1)
        else:
            axis = np.linspace(-model.box_radius, model.box_radius, n_sites)
        return cls(tuple(times), tuple(tuple(axis) for _ in range(model.space_dim)))

    @property
    def n_points(self) -> int:
        return len(self.times) * int(np.prod([len(ax) for ax in self.site_axes]))

    @property
    def sites(self) -> np.ndarray:
        mesh = np.meshgrid(*[np.asarray(ax) for ax in self.site_axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def validate_window(self, model: HeatModel) -> None:
        if min(self.times) < model.t0 - 1e-12 or max(self.times) > model.t1 + 1e-12:
            raise ConfigurationError("grid times leave the model window")
        for ax in self.site_axes:
            if min(ax) < -model.box_radius - 1e-12 or max(ax) > model.box_radius + 1e-12:
                raise ConfigurationError("grid sites leave the model box")

    def mesh_widths(self) -> tuple[float, float]:
        """Largest time spacing and largest spatial cell diagonal."""
        dt = max(np.diff(self.times)) if len(self.times) > 1 else 0.0
        dx2 = 0.0
        for ax in self.site_axes:
            dx2 += float(max(np.diff(ax))) ** 2 if len(ax) > 1 else 0.0
        return float(dt), math.sqrt(dx2)


@dataclass(frozen=True)
class FieldSample:
    """One replicate: field vectors (components x grid points)."""

    values: np.ndarray
    seed: int
    replicate_index: int


def factor_covariance(model: HeatModel, grid: SampleGrid) -> np.ndarray:
    """Cholesky factor of the grid covariance, with a tiny-jitter fallback.

    A clean factorization is attempted first; on failure the diagonal is
    lifted by 1e-10 of its largest entry, once more by 1e-9, and then the
    matrix is declared numerically singular.
    """
    grid.validate_window(model)
    cov = covariance_matrix(model, np.asarray(grid.times), grid.sites)
    scale = float(np.max(np.diag(cov)))
    for jitter in (0.0, 1e-10 * scale, 1e-9 * scale):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        "covariance factorization failed after jitter escalation; the grid is "
        "too close to degenerate"
    )


def _normals(seed: int, replicate: int, component: int, n: int) -> np.ndarray:
    key = np.array([seed, (replicate << 32) | component], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(n)


def sample_field(
    model: HeatModel,
    grid: SampleGrid,
    seed: int,
    replicate: int,
    factor: np.ndarray | None = None,
) -> FieldSample:
    """Draw one replicate of the grid field; fully determined by its key."""
    if factor is None:
        factor = factor_covariance(model, grid)
    n = grid.n_points
    values = np.empty((model.components, n))
    for comp in range(model.components):
        values[comp] = factor @ _normals(seed, replicate, comp, n)
    return FieldSample(values=values, seed=seed, replicate_index=replicate)


# -- hitting ----------------------------------------------------------------------


def hit_indicator(sample: FieldSample, target: TargetSet, inflation: float = 0.0) -> bool:
    """True when some grid point's field vector lies in the inflated target."""
    if inflation < 0.0:
        raise ConfigurationError("inflation must be nonnegative")
    dist = target.distance(sample.values.T)
    return bool(np.min(dist) <= inflation)


@dataclass(frozen=True)
class Estimate:
    """Binomial frequency with a 95% Wilson interval."""

    p_hat: float
    n: int
    ci_lo: float
    ci_hi: float


def wilson_interval(hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if not 0 <= hits <= n or n <= 0:
        raise ConfigurationError("need 0 <= hits <= n with n > 0")
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    # the bounds are exactly 0 and 1 at the edges; rounding in the
    # subtraction above would otherwise leave a stray 1e-18
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return lo, hi


def _estimate(hits: int, n: int) -> Estimate:
    lo, hi = wilson_interval(hits, n)
    return Estimate(p_hat=hits / n, n=n, ci_lo=lo, ci_hi=hi)


def mesh_inflation(model: HeatModel, grid: SampleGrid) -> float:
    """Sup-modulus bound 3 (q1(dt) + q2(dx)) sqrt(2 log n) for grid gaps."""
    env = MetricEnvelope.for_model(model)
    dt, dx = grid.mesh_widths()
    n = grid.n_points
    if n < 2:
        return 0.0
    return 3.0 * (env.q1.value(dt) + env.q2.value(dx)) * math.sqrt(2.0 * math.log(n))


@dataclass(frozen=True)
class HitProbability:
    """Raw and mesh-inflated hitting frequencies over shared replicates."""

    raw: Estimate
    inflated: Estimate
    inflation: float


def _min_distances(
    model: HeatModel,
    factor: np.ndarray,
    target: TargetSet,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Per-replicate minimum distance from the sampled field to the target."""
    n = factor.shape[0]
    comps = model.components
    out = np.empty(n_samples)
    for start in range(0, n_samples, _CHUNK):
        reps = range(start, min(start + _CHUNK, n_samples))
        z = np.empty((n, len(reps) * comps))
        for j, rep in enumerate(reps):
            for c in range(comps):
                z[:, j * comps + c] = _normals(seed, rep, c, n)
        fields = (factor @ z).reshape(n, len(reps), comps)
        pts = np.moveaxis(fields, 0, 1).reshape(len(reps) * n, comps)
        dists = target.distance(pts).reshape(len(reps), n)
        out[list(reps)] = dists.min(axis=1)
    return out


def estimate_hit_prob(
    model: HeatModel,
    grid: SampleGrid,
    target: TargetSet,
    n_samples: int = 1000,
    seed: int = 0,
    inflation_policy: float | str = "mesh",
) -> HitProbability:
    """MC hitting probability of the target, raw and inflated, shared replicates.

    ``inflation_policy`` is either the string "mesh" (use the grid-modulus
    radius) or an explicit nonnegative radius.
    """
    if n_samples < 100:
        raise ConfigurationError("need n_samples >= 100 for a meaningful interval")
    if target.dim != model.components:
        raise ConfigurationError(
            f"target lives in dimension {target.dim}, field has {model.components} components"
        )
    if inflation_policy == "mesh":
        rho = mesh_inflation(model, grid)
    else:
        rho = float(inflation_policy)
        if rho < 0.0:
            raise ConfigurationError("inflation must be nonnegative")
    factor = factor_covariance(model, grid)
    dmin = _min_distances(model, factor, target, n_samples, seed)
    raw_hits = int(np.sum(dmin <= 0.0))
    inf_hits = int(np.sum(dmin <= rho))
    return HitProbability(
        raw=_estimate(raw_hits, n_samples),
        inflated=_estimate(inf_hits, n_samples),
        inflation=rho,
    )


# -- small-ball scaling -------------------------------------------------------------


@dataclass(frozen=True)
class SmallBallReport:
    """OLS slope of log hit frequency against log ball radius."""

    slope: float
    stderr: float
    eps: np.ndarray
    p_hat: np.ndarray
    n: int


def small_ball_slope(
    model: HeatModel,
    grid: SampleGrid,
    center: Sequence[float],
    eps_ladder: Sequence[float],
    n_samples: int = 10_000,
    seed: int = 0,
) -> SmallBallReport:
    """Slope of log P(field comes within eps of a point) along an eps ladder.

    All radii share one replicate set, so the frequencies are monotone in
    eps by construction.  Every frequency must land strictly inside (0, 1);
    otherwise the ladder cannot identify a slope at this resolution.
    """
    eps = np.asarray([float(e) for e in eps_ladder])
    if len(eps) < 3 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ConfigurationError("eps_ladder must be >= 3 strictly decreasing radii")
    z = np.asarray(center, dtype=float).reshape(1, -1)
    if z.shape[1] != model.components:
        raise ConfigurationError("center must have one coordinate per field component")
    factor = factor_covariance(model, grid)
    dmin = _min_distances(model, factor, PointSet(z), n_samples, seed)
    p_hat = np.array([np.mean(dmin <= e) for e in eps])
    if np.any(p_hat <= 0.0) or np.any(p_hat >= 1.0):
        raise InsufficientResolutionError(
            f"hit frequencies {p_hat.tolist()} leave (0,1); widen the radii, "
            "refine the grid, or raise n_samples"
        )
    lx, ly = np.log(eps), np.log(p_hat)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    dof = max(len(eps) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / float(np.sum((lx - lx.mean()) ** 2)))
    return SmallBallReport(slope=float(slope), stderr=stderr, eps=eps, p_hat=p_hat, n=n_samples)


def point_trend(
    model: HeatModel,
    center: Sequence[float],
    grid_shapes: Sequence[tuple[int, int]],
    n_samples: int = 2000,
    seed: int = 0,
) -> list[HitProbability]:
    """Inflated point-hitting estimates across grid refinements.

    For polar points the mesh inflation shrinks faster than the extra grid
    points gain coverage, so the inflated estimate trends to zero.
    """
    z = np.asarray(center, dtype=float).reshape(1, -1)
    out = []
    for n_times, n_sites in grid_shapes:
        grid = SampleGrid.regular(model, n_times, n_sites)
        out.append(
            estimate_hit_prob(model, grid, PointSet(z), n_samples=n_samples, seed=seed)
        )
    return out
