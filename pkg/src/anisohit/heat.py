"""Second-order structure of the fractional-noise heat model.

The field is the mild solution of the heat equation on R^d driven by a
Gaussian noise that is fractional with index H in time and either white
(alpha = 0) or Riesz-correlated with spectral density |xi|^(-alpha) in
space.  Each of the ``components`` coordinates is an independent copy.

Writing the noise covariance in spectral form and integrating out the
spatial frequency leaves a single time integral: with b = (d - alpha)/2,

    cov((t, x), (s, y)) = H (2H-1)/2 * int_0^(t+s) W(p) S(t+s-p, |x-y|) dp,

where W collects the anti-diagonal mass of |tau - sigma|^(2H-2) in closed
form and S(r, rho) = (4 pi)^(-d/2) Gamma(b)/Gamma(d/2) r^(-b)
exp(-rho^2/4r) M(alpha/2, d/2, rho^2/4r) with Kummer's M.  For alpha = 0
the Kummer factor is 1 and S is the Gaussian heat profile.  The integrand
is smooth except for power kinks at p in {s, t, 2s, 2t} and integrable
endpoint singularities, so panelled Gauss rules with geometric refinement
evaluate it essentially to machine precision, vectorized over a whole
batch of spatial separations at once.  The upper half of the range is
integrated in the variable r = t + s - p directly, because near that
endpoint r is the physically meaningful quantity and forming it by
subtraction would waste every digit; the last sliver [0, r_min], where
the integrand is a bare power times a flat or asymptotic spatial factor,
is added in closed form.  Without that care the truncation error scales
like r_min^(2H - b), which for small 2H - b is not small at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special
from scipy.stats import qmc

from . import _quad
from .errors import ConfigurationError, NumericalError
from .gauges import GaugeSpec, GaugeSystem

_CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class HeatModel:
    """Model parameters and the observation window.

    The window is [t0, t1] x [-box_radius, box_radius]^space_dim and the
    field has ``components`` independent coordinates.  Well-posedness
    requires 0 < space_dim - alpha < 4 * hurst.
    """

    hurst: float
    alpha: float = 0.0
    space_dim: int = 1
    components: int = 1
    t0: float = 0.1
    t1: float = 1.0
    box_radius: float = 1.0

    def __post_init__(self) -> None:
        if not 0.5 < self.hurst < 1.0:
            raise ConfigurationError("hurst must lie in (1/2, 1)")
        if self.space_dim < 1 or self.components < 1:
            raise ConfigurationError("space_dim and components must be positive")
        if not 0.0 <= self.alpha < self.space_dim:
            raise ConfigurationError("alpha must lie in [0, space_dim)")
        gap = self.space_dim - self.alpha
        if not 0.0 < gap < 4.0 * self.hurst:
            raise ConfigurationError("need 0 < space_dim - alpha < 4 * hurst")
        if self.alpha > 0.0 and self.space_dim > 3:
            raise ConfigurationError("space_dim > 3 with alpha > 0 is not supported")
        if not 0.0 < self.t0 < self.t1:
            raise ConfigurationError("need 0 < t0 < t1")
        if not self.box_radius > 0.0:
            raise ConfigurationError("box_radius must be positive")

    # -- derived exponents ---------------------------------------------------

    @property
    def decay(self) -> float:
        """b = (space_dim - alpha)/2, the heat-profile decay exponent."""
        return 0.5 * (self.space_dim - self.alpha)

    @property
    def time_exponent(self) -> float:
        """Variance grows like t to this power."""
        return 2.0 * self.hurst - self.decay

    @property
    def temporal_order(self) -> float:
        """Metric exponent in |t - s|: hurst - (space_dim - alpha)/4."""
        return self.hurst - 0.25 * (self.space_dim - self.alpha)

    @property
    def spatial_order(self) -> float:
        """Metric exponent in |x - y| away from the critical line."""
        return min(1.0, self.time_exponent)

    @property
    def is_critical(self) -> bool:
        """Whether 4 hurst - (space_dim - alpha) = 2, the log-corrected case."""
        return abs(self.time_exponent - 1.0) <= _CRITICAL_TOL

    @property
    def noise_const(self) -> float:
        """H (2H - 1), the fractional covariance normalization."""
        return self.hurst * (2.0 * self.hurst - 1.0)

    @property
    def box_diameter(self) -> float:
        return 2.0 * math.sqrt(self.space_dim) * self.box_radius

    @cached_property
    def variance_const(self) -> float:
        """kappa with variance(t) = kappa * t**time_exponent."""
        return float(self._cov_batch(1.0, 1.0, np.zeros(1))[0])

    # -- spatial profile -----------------------------------------------------

    @property
    def _profile_const(self) -> float:
        return (
            (4.0 * math.pi) ** (-0.5 * self.space_dim)
            * math.gamma(self.decay)
            / math.gamma(0.5 * self.space_dim)
        )

    def _kummer(self, x: np.ndarray) -> np.ndarray:
        """exp(-x) M(alpha/2, d/2, x) for x >= 0, uniformly accurate."""
        if self.alpha == 0.0:
            return np.exp(-x)
        a, c = 0.5 * self.alpha, 0.5 * self.space_dim
        out = np.empty_like(x)
        small = x <= 400.0
        if np.any(small):
            out[small] = np.exp(-x[small]) * special.hyp1f1(a, c, x[small])
        if np.any(~small):
            out[~small] = _kummer_asymptotic(x[~small], a, c)
        return out

    def _kummer_deficit(self, x: np.ndarray) -> np.ndarray:
        """1 - exp(-x) M(alpha/2, d/2, x) without cancellation for small x.

        By Kummer's transformation exp(-x) M(a, c, x) = 1F1(c-a; c; -x), so
        the deficit is an alternating series starting at (c-a)/c * x; summing
        it directly keeps full relative accuracy where the direct difference
        would lose every digit.
        """
        if self.alpha == 0.0:
            return -np.expm1(-x)
        a, c = 0.5 * self.alpha, 0.5 * self.space_dim
        out = np.empty_like(x)
        big = x > 0.5
        if np.any(big):
            out[big] = 1.0 - self._kummer(x[big])
        small = ~big
        if np.any(small):
            xs = x[small]
            term = np.ones_like(xs)
            acc = np.zeros_like(xs)
            for k in range(1, 40):
                term = term * (c - a + k - 1.0) / ((c + k - 1.0) * k) * (-xs)
                acc += term
                if np.max(np.abs(term)) < 1e-18:
                    break
            out[small] = -acc
        return out

    # -- covariance ----------------------------------------------------------

    def variance(self, t):
        """Pointwise variance of one component at time t (0 for t <= 0)."""
        arr = np.asarray(t, dtype=float)
        out = np.where(arr > 0.0, self.variance_const * np.maximum(arr, 0.0) ** self.time_exponent, 0.0)
        return float(out) if arr.ndim == 0 else out

    def variance_direct(self, t: float) -> float:
        """Variance by a fresh quadrature at time t, no power-law shortcut.

        ``variance`` evaluates one quadrature at t=1 and scales; this method
        integrates at the requested time, so comparing the two exercises the
        scaling law instead of assuming it.
        """
        if t <= 0.0:
            return 0.0
        return float(self._cov_batch(t, t, np.zeros(1))[0])

    def covariance(self, t: float, x, s: float, y) -> float:
        """cov of one component between space-time points (t, x) and (s, y)."""
        rho = _separation(x, y, self.space_dim)
        if t <= 0.0 or s <= 0.0:
            return 0.0
        return float(self._cov_batch(t, s, np.asarray([rho]))[0])

    def metric(self, t: float, x, s: float, y) -> float:
        """Canonical metric sqrt(E[(u(t,x) - u(s,y))^2]) for one component.

        Equal-time pairs use a cancellation-free differenced integrand; the
        mixed case assembles variances and covariance separately and clamps
        a negative radicand within 1e-10 of the variance scale to zero.
        """
        rho = _separation(x, y, self.space_dim)
        if t == s:
            if rho == 0.0:
                return 0.0
            return math.sqrt(float(self._spatial_sq(t, np.asarray([rho]))[0]))
        va, vb = self.variance(t), self.variance(s)
        dd = va + vb - 2.0 * self.covariance(t, x, s, y)
        if dd < 0.0:
            if dd >= -1e-10 * max(va, vb):
                dd = 0.0
            else:
                raise NumericalError("metric radicand is negative beyond rounding levels")
        return math.sqrt(dd)

    def _p_half_edges(self, t: float, s: float, *, end_levels: int, kink_levels: int) -> np.ndarray:
        """Panel edges on [0, (t+s)/2] in the p coordinate.

        Geometric refinement tames the p^(2H-1) cusp at 0 and the weight
        kinks at min(t, s) and 2 min(t, s) when those fall in this half.
        The midpoint itself is an artificial seam, not a kink, unless the
        times are equal, in which case the nearest kink lands exactly there
        and panel edges on both halves already meet on it.
        """
        half = 0.5 * (t + s)
        inner = sorted({p for p in (min(t, s), 2.0 * min(t, s))
                        if 1e-14 * half < p < half * (1.0 - 1e-14)})
        pieces = []
        lo = 0.0
        for k, brk in enumerate(inner + [half]):
            levels_lo = end_levels if k == 0 else kink_levels
            levels_hi = kink_levels if brk < half else 0
            pieces.append(
                _quad.geometric_edges(
                    lo, brk, refine_lo=levels_lo > 0, refine_hi=levels_hi > 0,
                    levels=max(levels_lo, levels_hi, 1), interior=3,
                )
            )
            lo = brk
        return np.unique(np.concatenate(pieces))

    def _r_half_edges(self, t: float, s: float, r_min: float, *, kink_levels: int) -> np.ndarray:
        """Panel edges on [r_min, (t+s)/2] in the r = (t+s) - p coordinate.

        One panel per octave matches the power-law behaviour of the
        integrand over arbitrarily many decades; the anti-diagonal weight
        changes branch at r = |t - s| (an |r - w|^(2H-1) cusp) and at
        r = min(t, s), and both points get geometric refinement from each
        side.  Edges closer than a few ulps are merged.
        """
        half = 0.5 * (t + s)
        w = abs(t - s)
        inner = sorted({v for v in (w, min(t, s))
                        if r_min * (1.0 + 1e-9) < v < half * (1.0 - 1e-14)})
        brks = [r_min] + inner + [half]
        pts: set[float] = set()
        for i in range(len(brks) - 1):
            lo, hi = brks[i], brks[i + 1]
            pts.update(_quad.log_edges(lo, hi, per_octave=1.0))
            span = hi - lo
            if i + 1 < len(brks) - 1:
                pts.update(hi - span * 0.5 ** j for j in range(1, kink_levels + 1))
            if i > 0:
                pts.update(lo + span * 0.5 ** j for j in range(1, kink_levels + 1))
        edges = np.array(sorted(pts))
        keep = np.diff(edges) > 16.0 * np.finfo(float).eps * edges[1:]
        return np.concatenate([edges[:1], edges[1:][keep]])

    def _w_factor_r(self, r: np.ndarray, t: float, s: float) -> np.ndarray:
        """Anti-diagonal weight W at p = (t+s) - r, cancellation-free in r.

        Below min(t, s) both clipping branches are active and
        W = (h(w + r) - h(w - r)) / (2H - 1) with w = |t - s| and
        h(v) = sign(v) |v|^(2H-1).  For r > w that difference is a sum of
        two positive terms; for r far below w it is evaluated by its odd
        Taylor expansion, exactly where forming the difference would cancel.
        Above min(t, s) the generic clip formula is safe because every
        quantity is one subtraction away from the inputs.
        """
        e = 2.0 * self.hurst - 1.0
        w = abs(t - s)
        out = np.empty_like(r)
        generic = r >= min(t, s)
        if np.any(generic):
            rg = r[generic]
            hi = np.minimum((t + s) - rg, rg + (t - s))
            lo = np.maximum(rg - (t + s), (t - s) - rg)
            out[generic] = (np.sign(hi) * np.abs(hi) ** e - np.sign(lo) * np.abs(lo) ** e) / e
        rest = ~generic
        if np.any(rest):
            rr = r[rest]
            sub = np.empty_like(rr)
            tiny = rr <= 1e-3 * w
            if np.any(tiny):
                q = rr[tiny] / w
                sub[tiny] = 2.0 * e * w ** (e - 1.0) * rr[tiny] * (
                    1.0 + (e - 1.0) * (e - 2.0) / 6.0 * q * q
                )
            big = ~tiny
            if np.any(big):
                rb = rr[big]
                sub[big] = (w + rb) ** e - np.sign(w - rb) * np.abs(w - rb) ** e
            out[rest] = sub / e
        return out

    def _reduced_rule(
        self, t: float, s: float, rho_floor: float, *, order: int, end_levels: int, kink_levels: int
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Nodes in r = (t+s) - p with weights carrying W, plus the r cutoff.

        The time integral is split at its midpoint.  The left half is
        integrated in p, where the endpoint cusp sits at an exactly
        representable 0.  The right half is integrated in r itself, so
        nodes approach the upper endpoint without the catastrophic loss of
        forming (t+s) - p in doubles; panels stop at r_min and the callers
        add the sliver [0, r_min] in closed form.  r_min is pushed low
        enough that on the sliver the spatial factor is constant (rho = 0),
        asymptotic (rho >= rho_floor), and the weight Taylor form is valid.
        """
        total = t + s
        w = abs(t - s)
        r_min = total * 2.0 ** -16
        if w > 0.0:
            r_min = min(r_min, 1e-3 * w)
        if rho_floor > 0.0:
            r_min = min(r_min, rho_floor ** 2 / 2560.0)
        r_min = max(r_min, total * 1e-180)

        p_nodes, p_wgt = _quad.panel_rule(
            self._p_half_edges(t, s, end_levels=end_levels, kink_levels=kink_levels), order
        )
        e = 2.0 * self.hurst - 1.0
        hi = np.minimum(p_nodes, 2.0 * t - p_nodes)
        lo = np.maximum(-p_nodes, p_nodes - 2.0 * s)
        left = p_wgt * (np.sign(hi) * np.abs(hi) ** e - np.sign(lo) * np.abs(lo) ** e) / e

        r_nodes, r_wgt = _quad.panel_rule(
            self._r_half_edges(t, s, r_min, kink_levels=kink_levels), order
        )
        right = r_wgt * self._w_factor_r(r_nodes, t, s)

        r_all = np.concatenate([total - p_nodes, r_nodes])
        return r_all, np.concatenate([left, right]), r_min

    def _tail_moment(self, t: float, s: float, r_min: float, k: float) -> float:
        """int_0^r_min W(r) r^k dr in closed form.

        Equal times give the exact power integral of W = 2 r^(2H-1)/(2H-1).
        Distinct times use the odd Taylor expansion of W around r = 0,
        whose first neglected term is O((r_min/w)^4) relative; the rule
        construction keeps r_min <= w/1000, so that error is below 1e-12
        of a quantity that is itself a small correction.
        """
        e = 2.0 * self.hurst - 1.0
        w = abs(t - s)
        if w > 8.0 * r_min:
            c2 = (e - 1.0) * (e - 2.0) / 6.0
            return 2.0 * w ** (e - 1.0) * (
                r_min ** (k + 2.0) / (k + 2.0)
                + c2 * r_min ** (k + 4.0) / (w * w * (k + 4.0))
            )
        return 2.0 * r_min ** (e + k + 1.0) / (e * (e + k + 1.0))

    def _tail_cov(self, t: float, s: float, rhos: np.ndarray, r_min: float) -> np.ndarray:
        """Closed-form contribution of the unresolved sliver r in [0, r_min].

        The cutoff guarantees x = rho^2/(4 r_min) >= 640 for every separation
        at or above the rule's floor, so those columns take either nothing
        (alpha = 0, the spatial factor is exp(-x)) or the first terms of the
        large-x asymptotic series (alpha > 0).  Columns with rho = 0 use the
        exact power integral, the factor being identically 1 there.
        """
        rhos = np.asarray(rhos, dtype=float)
        out = np.zeros(rhos.shape)
        hot = rhos ** 2 >= 600.0 * 4.0 * r_min
        flat = ~hot
        if np.any(flat):
            out[flat] = self._tail_moment(t, s, r_min, -self.decay)
        if self.alpha > 0.0 and np.any(hot):
            a, c = 0.5 * self.alpha, 0.5 * self.space_dim
            inv = 4.0 / rhos[hot] ** 2
            beta = 1.0
            acc = np.zeros(inv.shape)
            for k in range(4):
                if k:
                    beta *= (c - a + k - 1.0) * (k - a) / k
                acc += beta * inv ** (self.decay + k) * self._tail_moment(t, s, r_min, float(k))
            out[hot] = math.gamma(c) / math.gamma(a) * acc
        return self._profile_const * out

    def _tail_spatial(self, t: float, rhos: np.ndarray, r_min: float) -> np.ndarray:
        """Sliver contribution for the differenced equal-time integrand."""
        rhos = np.asarray(rhos, dtype=float)
        out = np.zeros(rhos.shape)
        hot = rhos ** 2 >= 600.0 * 4.0 * r_min
        if np.any(hot):
            full = self._profile_const * self._tail_moment(t, t, r_min, -self.decay)
            out[hot] = full - self._tail_cov(t, t, rhos[hot], r_min)
        return out

    def _cov_batch(
        self,
        t: float,
        s: float,
        rhos: np.ndarray,
        *,
        order: int = 16,
        end_levels: int = 44,
        kink_levels: int = 36,
    ) -> np.ndarray:
        """Covariance of one component at time pair (t, s), batched over rho."""
        rhos = np.asarray(rhos, dtype=float)
        pos = rhos[rhos > 0.0]
        rho_floor = float(np.min(pos)) if pos.size else 0.0
        r, wgt, r_min = self._reduced_rule(
            t, s, rho_floor, order=order, end_levels=end_levels, kink_levels=kink_levels
        )
        kernel_w = wgt * self._profile_const * r ** (-self.decay)
        x = np.multiply.outer(rhos ** 2, 1.0 / (4.0 * r))
        vals = self._kummer(x) @ kernel_w
        vals += self._tail_cov(t, s, rhos, r_min)
        return 0.5 * self.noise_const * vals

    def _spatial_sq(self, t: float, rhos: np.ndarray, *, order: int = 16) -> np.ndarray:
        """Squared metric at equal times, batched over separations."""
        rhos = np.asarray(rhos, dtype=float)
        pos = rhos[rhos > 0.0]
        rho_floor = float(np.min(pos)) if pos.size else 0.0
        r, wgt, r_min = self._reduced_rule(
            t, t, rho_floor, order=order, end_levels=44, kink_levels=36
        )
        kernel_w = wgt * self._profile_const * r ** (-self.decay)
        x = np.multiply.outer(rhos ** 2, 1.0 / (4.0 * r))
        vals = self._kummer_deficit(x) @ kernel_w
        vals += self._tail_spatial(t, rhos, r_min)
        return self.noise_const * vals


def _separation(x, y, space_dim: int) -> float:
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if xv.shape != (space_dim,) or yv.shape != (space_dim,):
        raise ConfigurationError(f"spatial points must have {space_dim} coordinates")
    return float(np.linalg.norm(xv - yv))


def _kummer_asymptotic(x: np.ndarray, a: float, c: float, terms: int = 12) -> np.ndarray:
    """Large-x form of exp(-x) M(a, c, x) ~ Gamma(c)/Gamma(a) x^(a-c) series."""
    coef = math.gamma(c) / math.gamma(a)
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for k in range(terms):
        term = term * (c - a + k) * (1.0 - a + k) / ((k + 1.0) * x)
        acc = acc + term
    return coef * x ** (a - c) * acc


# -- gauges and envelope ------------------------------------------------------


def model_gauges(model: HeatModel) -> GaugeSystem:
    """The temporal/spatial gauge pair matching the model's metric behavior."""
    q1 = GaugeSpec.power(model.temporal_order)
    if model.is_critical:
        scale = math.e * model.box_diameter
        q2 = GaugeSpec.power_log(1.0, 0.5, scale)
    else:
        q2 = GaugeSpec.power(model.spatial_order)
    cap = max(q1.value(model.t1 - model.t0), q2.value(min(model.box_diameter, q2.domain_hi)))
    return GaugeSystem(
        q1=q1,
        q2=q2,
        d1=1,
        d2=model.space_dim,
        state_dim=model.components,
        diam_cap=float(cap),
    )


@dataclass(frozen=True)
class MetricEnvelope:
    """Explicit two-sided envelope for the squared canonical metric.

    ``value`` returns q1(|t-s|)^2 + q2(|x-y|)^2, with q2 carrying a square
    root of a logarithm exactly on the critical line (beta = 1).
    """

    q1: GaugeSpec
    q2: GaugeSpec
    beta: int

    @classmethod
    def for_model(cls, model: HeatModel) -> "MetricEnvelope":
        system = model_gauges(model)
        return cls(q1=system.q1, q2=system.q2, beta=1 if model.is_critical else 0)

    def value(self, dt, dx):
        dt_arr = np.abs(np.asarray(dt, dtype=float))
        dx_arr = np.abs(np.asarray(dx, dtype=float))
        out = np.asarray(self.q1.value(dt_arr)) ** 2 + np.asarray(self.q2.value(dx_arr)) ** 2
        return float(out) if np.asarray(dt).ndim == 0 and np.asarray(dx).ndim == 0 else out


# -- assembled covariance ------------------------------------------------------


def covariance_matrix(
    model: HeatModel,
    times: np.ndarray,
    sites: np.ndarray,
    *,
    order: int = 12,
    end_levels: int = 26,
    kink_levels: int = 16,
) -> np.ndarray:
    """Dense one-component covariance over the product grid times x sites.

    Rows are ordered time-major.  Each distinct time pair costs one
    quadrature rule evaluated against the distinct site separations, so a
    64 x 64 grid needs 2080 rules rather than 8.4 million kernel calls.
    """
    times = np.asarray(times, dtype=float)
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    nt, ns = len(times), len(sites)
    diffs = sites[:, None, :] - sites[None, :, :]
    seps = np.sqrt(np.sum(diffs * diffs, axis=2))
    uniq, inverse = np.unique(np.round(seps, 12), return_inverse=True)
    inverse = inverse.reshape(ns, ns)
    cov = np.empty((nt * ns, nt * ns))
    for i in range(nt):
        for j in range(i, nt):
            vals = model._cov_batch(
                times[i], times[j], uniq,
                order=order, end_levels=end_levels, kink_levels=kink_levels,
            )
            block = vals[inverse]
            cov[i * ns : (i + 1) * ns, j * ns : (j + 1) * ns] = block
            if j > i:
                cov[j * ns : (j + 1) * ns, i * ns : (i + 1) * ns] = block.T
    return cov


# -- hypothesis report ---------------------------------------------------------


@dataclass(frozen=True)
class FieldHypothesesReport:
    """Numerical audit of the standing assumptions on the field."""

    ok: bool
    sigma2_min: float
    sigma2_max: float
    sigma2_floor: float
    max_correlation: float
    holder_ratios: dict
    n_pairs: int


def check_field_hypotheses(
    model: HeatModel, n_pairs: int = 256, seed: int = 0
) -> FieldHypothesesReport:
    """Check variance positivity, non-degenerate correlation and metric Hoelder bounds.

    Point pairs are drawn quasi-randomly from the observation window.  The
    variance floor is the exact kappa * t0^a; correlations are required to
    stay below 1 - 1e-6 at separations of at least 1e-3; the increment of
    the variance is compared against powers of the canonical metric for a
    few candidate Hoelder exponents, whose worst ratios are reported.
    """
    if n_pairs < 8:
        raise ConfigurationError("need at least 8 pairs")
    dim = model.space_dim
    eng = qmc.Halton(d=2 * (1 + dim), scramble=True, seed=seed)
    u = eng.random(n_pairs)
    span = model.t1 - model.t0
    t_a = model.t0 + span * u[:, 0]
    t_b = model.t0 + span * u[:, 1 + dim]
    x_a = model.box_radius * (2.0 * u[:, 1 : 1 + dim] - 1.0)
    x_b = model.box_radius * (2.0 * u[:, 2 + dim :] - 1.0)

    sig_a = model.variance(t_a)
    sig_b = model.variance(t_b)
    candidates = {"eta=1": 2.0}
    candidates[f"eta=1/nu1-1={1.0 / model.temporal_order - 1.0:.6g}"] = 1.0 / model.temporal_order
    if model.is_critical:
        candidates["eta=0.8"] = 1.8

    max_corr = -1.0
    ratios = {name: 0.0 for name in candidates}
    for k in range(n_pairs):
        cov = model.covariance(t_a[k], x_a[k], t_b[k], x_b[k])
        dd = model.metric(t_a[k], x_a[k], t_b[k], x_b[k])
        sep = max(abs(t_a[k] - t_b[k]), float(np.linalg.norm(x_a[k] - x_b[k])))
        if sep >= 1e-3:
            max_corr = max(max_corr, abs(cov) / math.sqrt(sig_a[k] * sig_b[k]))
        if dd > 0.0:
            gap = abs(sig_a[k] - sig_b[k])
            for name, expo in candidates.items():
                ratios[name] = max(ratios[name], gap / dd**expo)

    floor = model.variance(model.t0)
    ok = (
        float(np.min(np.concatenate([sig_a, sig_b]))) >= floor * (1.0 - 1e-9)
        and max_corr <= 1.0 - 1e-6
    )
    return FieldHypothesesReport(
        ok=bool(ok),
        sigma2_min=float(min(np.min(sig_a), np.min(sig_b))),
        sigma2_max=float(max(np.max(sig_a), np.max(sig_b))),
        sigma2_floor=float(floor),
        max_correlation=float(max_corr),
        holder_ratios=ratios,
        n_pairs=n_pairs,
    )


# -- slope experiments ---------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through log-log metric data."""

    slope: float
    intercept: float
    rms_residual: float
    lags: np.ndarray
    values: np.ndarray


def temporal_slope(model: HeatModel, *, t_ref: float = 0.5, lags=None) -> SlopeFit:
    """Log-log slope of the metric along the time axis at a fixed site."""
    if lags is None:
        lags = 2.0 ** -np.arange(4, 15)
    lags = np.asarray(lags, dtype=float)
    x0 = np.zeros(model.space_dim)
    vals = np.asarray([model.metric(t_ref, x0, t_ref + h, x0) for h in lags])
    return _fit_loglog(lags, vals)


def spatial_slope(model: HeatModel, *, t_ref: float = 0.5, seps=None) -> SlopeFit:
    """Log-log slope of the metric along a spatial axis at a fixed time."""
    seps = _default_seps() if seps is None else np.asarray(seps, dtype=float)
    vals = np.sqrt(model._spatial_sq(t_ref, seps))
    return _fit_loglog(seps, vals)


def spatial_gauge_residual(model: HeatModel, gauge: GaugeSpec, *, t_ref: float = 0.5, seps=None) -> float:
    """RMS residual of log metric against log gauge with unit slope.

    Small exactly when the gauge captures the metric's spatial modulus up to
    a constant; comparing the residual for the log-corrected gauge against
    the pure power quantifies which one the data supports.
    """
    seps = _default_seps() if seps is None else np.asarray(seps, dtype=float)
    vals = np.sqrt(model._spatial_sq(t_ref, seps))
    resid = np.log(vals) - np.log(gauge.value(seps))
    resid = resid - np.mean(resid)
    return float(np.sqrt(np.mean(resid**2)))


def _default_seps() -> np.ndarray:
    return np.logspace(-4.0, -1.0, 13)


def _fit_loglog(lags: np.ndarray, vals: np.ndarray) -> SlopeFit:
    lx, ly = np.log(lags), np.log(vals)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(
        slope=float(slope),
        intercept=float(intercept),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        lags=lags,
        values=vals,
    )
