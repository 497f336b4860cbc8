"""Capacities and Hausdorff-type premeasures for compact target sets.

Capacity is computed as one over the minimal quadratic energy mu' K mu of a
probability vector on a cell discretization of the set, where K applies a
radial kernel to cell distances; the diagonal takes the kernel's cell
self-energy, estimated by averaging over fixed quasi-random intra-cell pair
offsets.  The minimization runs an away-step Frank-Wolfe iteration whose
final duality gap is also a rigorous bound on the suboptimality, so every
reported capacity comes with a certificate.

The premeasure side covers the set with half-open dyadic cells exactly (no
sampling): each supported set type enumerates or counts the cells of a given
side length that meet it, and the estimate is the count times the gauge of
the covering ball diameter, minimized over a few nearby scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, KernelError
from .gauges import GaugeSystem, check_monotonicity

_MAX_COVER_CELLS = 1 << 22


# -- target sets ---------------------------------------------------------------


class TargetSet:
    """Common interface: distance queries, capacity cells, dyadic covers."""

    dim: int

    def distance(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        """Cell centers (m, dim) and widths (m,) discretizing the set."""
        raise NotImplementedError

    def dyadic_cells(self, side: float) -> np.ndarray:
        """Integer index rows of half-open dyadic cells meeting the set."""
        raise NotImplementedError

    def dyadic_count(self, side: float) -> int:
        return len(self.dyadic_cells(side))

    def _points2d(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if self.dim > 1 else pts.reshape(-1, 1)
        if pts.shape[-1] != self.dim:
            raise ConfigurationError(f"points must have {self.dim} coordinates")
        return pts


@dataclass(frozen=True, eq=False)
class Ball(TargetSet):
    """Closed Euclidean ball; in one dimension, an interval."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "center", center)
        if not self.radius >= 0.0:
            raise ConfigurationError("radius must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    def distance(self, points) -> np.ndarray:
        pts = self._points2d(points)
        return np.maximum(np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.radius, 0.0)

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        if self.radius == 0.0:
            return np.asarray([self.center]), np.zeros(1)
        per_axis = max(1, int(round(n_cells ** (1.0 / self.dim))))
        w = 2.0 * self.radius / per_axis
        axes = [c - self.radius + w * (np.arange(per_axis) + 0.5) for c in self.center]
        centers = _product_grid(axes)
        keep = np.linalg.norm(centers - np.asarray(self.center), axis=1) <= self.radius
        centers = centers[keep]
        return centers, np.full(len(centers), w)

    def dyadic_cells(self, side: float) -> np.ndarray:
        ranges = [
            _interval_cell_range(c - self.radius, c + self.radius, side) for c in self.center
        ]
        _guard_cover_size(int(np.prod([len(r) for r in ranges])))
        idx = _product_grid([r.astype(float) for r in ranges]).astype(np.int64)
        # keep cells whose closed box touches the ball
        lo = idx * side
        nearest = np.clip(np.asarray(self.center), lo, lo + side)
        keep = np.linalg.norm(nearest - np.asarray(self.center), axis=1) <= self.radius
        return idx[keep]


@dataclass(frozen=True, eq=False)
class Box(TargetSet):
    """Axis-aligned closed box [lo_1, hi_1] x ... x [lo_k, hi_k]."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lo, dtype=float)))
        hi = tuple(float(v) for v in np.atleast_1d(np.asarray(self.hi, dtype=float)))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ConfigurationError("box needs lo <= hi componentwise")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def distance(self, points) -> np.ndarray:
        pts = self._points2d(points)
        below = np.asarray(self.lo) - pts
        above = pts - np.asarray(self.hi)
        gap = np.maximum(np.maximum(below, above), 0.0)
        return np.linalg.norm(gap, axis=1)

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        edges = np.asarray(self.hi) - np.asarray(self.lo)
        positive = edges[edges > 0]
        if positive.size == 0:
            return np.asarray([self.lo]), np.zeros(1)
        w = (np.prod(positive) / n_cells) ** (1.0 / positive.size)
        axes = []
        for a, b in zip(self.lo, self.hi):
            m = max(1, int(round((b - a) / w))) if b > a else 1
            axes.append(a + (b - a) * (np.arange(m) + 0.5) / m)
        centers = _product_grid(axes)
        return centers, np.full(len(centers), float(w))

    def dyadic_cells(self, side: float) -> np.ndarray:
        ranges = [_interval_cell_range(a, b, side) for a, b in zip(self.lo, self.hi)]
        _guard_cover_size(int(np.prod([len(r) for r in ranges])))
        return _product_grid([r.astype(float) for r in ranges]).astype(np.int64)

    def dyadic_count(self, side: float) -> int:
        return int(np.prod([len(_interval_cell_range(a, b, side)) for a, b in zip(self.lo, self.hi)]))


@dataclass(frozen=True, eq=False)
class PointSet(TargetSet):
    """A finite set of points; may be empty, in which case nothing is ever hit."""

    points: np.ndarray
    ambient_dim: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            dim = pts.shape[1] if pts.ndim == 2 and pts.shape[1] > 0 else self.ambient_dim
            if dim < 1:
                raise ConfigurationError("empty point set needs an explicit ambient_dim")
            pts = pts.reshape(0, dim)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ambient_dim", pts.shape[1])

    @property
    def dim(self) -> int:
        return self.ambient_dim

    def distance(self, points) -> np.ndarray:
        pts = self._points2d(points)
        if len(self.points) == 0:
            return np.full(len(pts), math.inf)
        diffs = pts[:, None, :] - self.points[None, :, :]
        return np.min(np.linalg.norm(diffs, axis=2), axis=1)

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        return self.points.copy(), np.zeros(len(self.points))

    def dyadic_cells(self, side: float) -> np.ndarray:
        if len(self.points) == 0:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.unique(np.floor(self.points / side).astype(np.int64), axis=0)


@dataclass(frozen=True, eq=False)
class CantorDust(TargetSet):
    """Product of middle-thirds Cantor prefractals at a fixed recursion level."""

    level: int
    lo: float = 0.0
    hi: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not 0 <= self.level <= 20:
            raise ConfigurationError("cantor level must lie in [0, 20]")
        if not self.lo < self.hi:
            raise ConfigurationError("need lo < hi")
        if not 1 <= self.dim <= 3:
            raise ConfigurationError("cantor dust supports dim 1..3")

    def _intervals(self) -> tuple[np.ndarray, np.ndarray]:
        return _cantor_intervals(self.level, self.lo, self.hi)

    def distance(self, points) -> np.ndarray:
        pts = self._points2d(points)
        starts, ends = self._intervals()
        per_axis = [_interval_union_distance(pts[:, k], starts, ends) for k in range(self.dim)]
        return np.linalg.norm(np.stack(per_axis, axis=1), axis=1)

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        lvl = self.level
        while lvl > 0 and (2**lvl) ** self.dim > n_cells:
            lvl -= 1
        starts, ends = _cantor_intervals(lvl, self.lo, self.hi)
        mids = 0.5 * (starts + ends)
        centers = _product_grid([mids] * self.dim)
        width = float(ends[0] - starts[0])
        return centers, np.full(len(centers), width)

    def _axis_cells(self, side: float) -> np.ndarray:
        starts, ends = self._intervals()
        lo_idx = np.floor(starts / side).astype(np.int64)
        hi_idx = np.floor(ends / side).astype(np.int64)
        _guard_cover_size(int(np.sum(hi_idx - lo_idx + 1)))
        chunks = [np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
        return np.unique(np.concatenate(chunks))

    def dyadic_cells(self, side: float) -> np.ndarray:
        axis = self._axis_cells(side)
        _guard_cover_size(len(axis) ** self.dim)
        return _product_grid([axis.astype(float)] * self.dim).astype(np.int64)

    def dyadic_count(self, side: float) -> int:
        return len(self._axis_cells(side)) ** self.dim


@dataclass(frozen=True, eq=False)
class Union(TargetSet):
    """Union of finitely many target sets in a common ambient dimension."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ConfigurationError("union needs at least one part")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ConfigurationError("union parts must share one ambient dimension")

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def distance(self, points) -> np.ndarray:
        pts = self._points2d(points)
        return np.min(np.stack([p.distance(pts) for p in self.parts]), axis=0)

    def cells(self, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
        share = max(1, n_cells // len(self.parts))
        all_centers, all_widths = [], []
        for p in self.parts:
            c, w = p.cells(share)
            all_centers.append(c)
            all_widths.append(w)
        centers = np.concatenate(all_centers)
        widths = np.concatenate(all_widths)
        centers, keep = np.unique(np.round(centers, 12), axis=0, return_index=True)
        return centers, widths[keep]

    def dyadic_cells(self, side: float) -> np.ndarray:
        total = int(np.sum([p.dyadic_count(side) for p in self.parts]))
        _guard_cover_size(total)
        return np.unique(np.concatenate([p.dyadic_cells(side) for p in self.parts]), axis=0)


def _product_grid(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _interval_cell_range(a: float, b: float, side: float) -> np.ndarray:
    lo = math.floor(a / side)
    hi = math.floor(b / side)
    _guard_cover_size(hi - lo + 1)
    return np.arange(lo, hi + 1, dtype=np.int64)


def _guard_cover_size(count: int) -> None:
    if count > _MAX_COVER_CELLS:
        raise ConfigurationError(
            f"dyadic cover would need {count} cells (limit {_MAX_COVER_CELLS}); "
            "use a coarser resolution"
        )


@lru_cache(maxsize=32)
def _cantor_intervals(level: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    starts = np.asarray([lo])
    length = hi - lo
    for _ in range(level):
        length /= 3.0
        starts = np.concatenate([starts, starts + 2.0 * length])
    starts = np.sort(starts)
    return starts, starts + length


def _interval_union_distance(x: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance from each x to a sorted union of disjoint closed intervals."""
    idx = np.searchsorted(starts, x, side="right")
    dist_left = np.where(idx > 0, x - ends[np.maximum(idx - 1, 0)], math.inf)
    dist_left = np.maximum(dist_left, 0.0)  # inside an interval
    dist_right = np.where(idx < len(starts), starts[np.minimum(idx, len(starts) - 1)] - x, math.inf)
    return np.minimum(dist_left, np.maximum(dist_right, 0.0))


# -- kernels -------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialKernel:
    """Radial kernel with a flag for integrability of the cell self-energy."""

    radial_profile: Callable[[np.ndarray], np.ndarray]
    integrable_at_zero: bool
    name: str = ""


def riesz_kernel(beta: float, ambient_dim: int) -> PotentialKernel:
    """|z|^(-beta) with the self-energy flag relative to ambient_dim cells."""
    if beta < 0:
        raise ConfigurationError("riesz exponent must be nonnegative")

    def profile(r):
        rr = np.asarray(r, dtype=float)
        if beta == 0.0:
            return np.ones_like(rr)
        with np.errstate(divide="ignore"):
            return rr ** (-beta)

    return PotentialKernel(profile, integrable_at_zero=beta < ambient_dim, name=f"riesz-{beta:g}")


def kernel_from_gauge(system: GaugeSystem, ambient_dim: int | None = None) -> PotentialKernel:
    """1 / hausdorff_gauge(|z|), constant past diam_cap, for hitting capacities.

    Requires the gauge to be increasing near 0 (otherwise the kernel has no
    potential-theoretic meaning); the profile is frozen at the gauge's value
    where monotonicity ends.  ``ambient_dim`` defaults to the field's state
    dimension, the space where hitting targets live.
    """
    mono = check_monotonicity(system)
    if not mono.increasing_on_some_interval:
        raise ConfigurationError("hausdorff gauge is not increasing near 0; no kernel")
    r_cap = min(system.diam_cap, mono.increasing_hi)
    if ambient_dim is None:
        ambient_dim = system.state_dim

    def profile(r):
        rr = np.minimum(np.asarray(r, dtype=float), r_cap)
        out = np.full_like(rr, math.inf)
        pos = rr > 0.0
        out[pos] = 1.0 / system.hausdorff_gauge(rr[pos])
        return out

    return PotentialKernel(
        profile,
        integrable_at_zero=system.power_exponent < ambient_dim,
        name="gauge-kernel",
    )


# -- capacity ------------------------------------------------------------------


@dataclass(frozen=True)
class GridMeasure:
    """Probability weights on cell centers, the capacity minimizer."""

    atoms: np.ndarray
    weights: np.ndarray
    cell_width: float


@dataclass(frozen=True)
class CapacityReport:
    """Capacity value with its optimization certificate."""

    capacity: float
    energy: float
    gap: float
    iterations: int
    minimizer: GridMeasure | None


@lru_cache(maxsize=8)
def _unit_pair_seps(dim: int, n_pairs: int = 64) -> np.ndarray:
    """Fixed quasi-random intra-cell pair separations for a unit cell."""
    eng = qmc.Halton(d=2 * dim, scramble=False)
    eng.fast_forward(1)  # skip the all-zeros first point
    u = eng.random(n_pairs)
    seps = np.linalg.norm(u[:, :dim] - u[:, dim:], axis=1)
    return seps[seps > 0.0]


def capacity(
    kernel: PotentialKernel,
    target: TargetSet,
    n_cells: int = 256,
    tol: float = 1e-6,
    max_iter: int = 200_000,
) -> CapacityReport:
    """Generalized capacity of the target under the given kernel.

    Solves min mu' K mu over the probability simplex on a cell
    discretization with away-step Frank-Wolfe; the reported ``gap`` bounds
    energy - optimum, so ``capacity`` is exact up to gap / energy^2.
    Cells whose self-energy is infinite (points under a singular kernel)
    cannot carry mass and are dropped; if none remain the capacity is 0.
    """
    if n_cells < 2:
        raise ConfigurationError("capacity needs n_cells >= 2")
    if tol <= 0.0:
        raise ConfigurationError("capacity needs tol > 0")
    centers, widths = target.cells(n_cells)
    if len(centers) == 0:
        raise ConfigurationError("capacity of an empty set is undefined")
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    if np.any((dists == 0.0) & ~np.eye(len(centers), dtype=bool)):
        raise ConfigurationError("coincident cell centers; target parts overlap")
    with np.errstate(over="ignore"):
        K = np.asarray(kernel.radial_profile(dists), dtype=float)
    diag = np.empty(len(centers))
    for i, w in enumerate(widths):
        if w == 0.0:
            diag[i] = float(np.asarray(kernel.radial_profile(np.zeros(1)))[0])
        elif kernel.integrable_at_zero:
            diag[i] = float(np.mean(kernel.radial_profile(w * _unit_pair_seps(target.dim))))
        else:
            diag[i] = math.inf
    np.fill_diagonal(K, diag)

    keep = np.isfinite(diag)
    if not np.any(keep):
        return CapacityReport(0.0, math.inf, 0.0, 0, None)
    K = K[np.ix_(keep, keep)]
    if not np.all(np.isfinite(K)):
        raise KernelError("kernel produced non-finite values at positive distances")

    mu, energy, gap, iters = _simplex_min_quadratic(K, tol=tol, max_iter=max_iter)
    weights = np.zeros(len(centers))
    weights[keep] = mu
    measure = GridMeasure(atoms=centers, weights=weights, cell_width=float(np.max(widths)))
    return CapacityReport(
        capacity=1.0 / energy,
        energy=float(energy),
        gap=float(gap),
        iterations=iters,
        minimizer=measure,
    )


def _simplex_min_quadratic(
    K: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, float, float, int]:
    """min mu' K mu on the simplex by away-step Frank-Wolfe with exact line search."""
    n = K.shape[0]
    mu = np.full(n, 1.0 / n)
    q = K @ mu
    f = float(mu @ q)
    gap = 0.0
    refresh = 256
    for it in range(max_iter):
        if it % refresh == refresh - 1:
            q = K @ mu
            f = float(mu @ q)
        mq = float(mu @ q)
        s = int(np.argmin(q))
        gap = 2.0 * (mq - q[s])
        if gap <= tol * max(f, 1e-300):
            return mu, f, gap, it
        support = np.flatnonzero(mu > 0.0)
        v = support[int(np.argmax(q[support]))]
        away_gap = 2.0 * (q[v] - mq)
        if gap >= away_gap:
            denom = f - 2.0 * q[s] + K[s, s]
            step = 1.0 if denom <= 0.0 else min(1.0, max(0.0, (f - q[s]) / denom))
            f = (1 - step) ** 2 * f + 2 * step * (1 - step) * q[s] + step**2 * K[s, s]
            mu *= 1.0 - step
            mu[s] += step
            q = (1.0 - step) * q + step * K[:, s]
        else:
            g_max = mu[v] / (1.0 - mu[v]) if mu[v] < 1.0 else 1.0
            denom = f - 2.0 * q[v] + K[v, v]
            step = g_max if denom <= 0.0 else min(g_max, max(0.0, (q[v] - f) / denom))
            f = (1 + step) ** 2 * f - 2 * step * (1 + step) * q[v] + step**2 * K[v, v]
            mu *= 1.0 + step
            drop = step >= g_max * (1.0 - 1e-14)
            mu[v] = 0.0 if drop else mu[v] - step
            q = (1.0 + step) * q - step * K[:, v]
    q = K @ mu
    f = float(mu @ q)
    gap = 2.0 * float(mu @ q - np.min(q))
    return mu, f, gap, max_iter


# -- premeasure covers ---------------------------------------------------------


@dataclass(frozen=True)
class CoverEstimate:
    """One scale of the dyadic premeasure: count * gauge(covering diameter)."""

    eps: float
    side: float
    count: int
    value: float


def hausdorff_upper(
    gauge: Callable[[float], float], target: TargetSet, eps_ladder: Sequence[float]
) -> list[CoverEstimate]:
    """Dyadic-cover upper estimates of the gauge premeasure at each resolution.

    For each eps the set is covered by dyadic cells of side 2^-m small
    enough that a cell's circumscribed ball has radius at most eps; the
    estimate is N * gauge(ball diameter).  Two further halvings are also
    tried and the smallest estimate kept, since any finer cover remains
    a valid upper bound.
    """
    ladder = [float(e) for e in eps_ladder]
    if not ladder or any(e <= 0 for e in ladder) or any(
        b >= a for a, b in zip(ladder, ladder[1:])
    ):
        raise ConfigurationError("eps_ladder must be positive and strictly decreasing")
    root_dim = math.sqrt(target.dim)
    out = []
    for eps in ladder:
        m0 = max(0, math.ceil(math.log2(root_dim / (2.0 * eps))))
        best = None
        for m in (m0, m0 + 1, m0 + 2):
            side = 2.0**-m
            count = target.dyadic_count(side)
            value = count * float(gauge(side * root_dim))
            if best is None or value < best.value:
                best = CoverEstimate(eps=eps, side=side, count=count, value=value)
        out.append(best)
    return out
