"""Capacities, the simplex optimizer, target geometry, and dyadic covers."""

import math

import numpy as np
import pytest

from anisohit.errors import ConfigurationError, KernelError
from anisohit.gauges import GaugeSpec, GaugeSystem
from anisohit.potential import (
    Ball,
    Box,
    CantorDust,
    PointSet,
    PotentialKernel,
    Union,
    _simplex_min_quadratic,
    _unit_pair_seps,
    capacity,
    hausdorff_upper,
    kernel_from_gauge,
    riesz_kernel,
)

CANTOR_DIM = math.log(2.0) / math.log(3.0)


# -- target geometry -------------------------------------------------------------


def test_ball_distance():
    ball = Ball(center=(0.0, 0.0), radius=1.0)
    assert ball.distance([[2.0, 0.0]])[0] == pytest.approx(1.0)
    assert ball.distance([[0.3, -0.4]])[0] == 0.0
    assert ball.distance([[3.0, 4.0]])[0] == pytest.approx(4.0)


def test_box_distance():
    box = Box(lo=(0.0, 0.0), hi=(1.0, 2.0))
    assert box.distance([[2.0, 3.0]])[0] == pytest.approx(math.sqrt(2.0))
    assert box.distance([[0.5, 1.0]])[0] == 0.0
    assert box.distance([[-1.0, 1.0]])[0] == pytest.approx(1.0)


def test_point_set_distance_and_empty_set():
    pts = PointSet(points=np.array([[0.0], [1.0]]))
    assert pts.distance([0.4])[0] == pytest.approx(0.4)
    empty = PointSet(points=np.zeros(0), ambient_dim=2)
    assert np.isinf(empty.distance([[0.0, 0.0]])[0])
    assert empty.dyadic_count(0.5) == 0


def test_cantor_distance():
    dust = CantorDust(level=1)
    assert dust.distance([0.5])[0] == pytest.approx(1.0 / 6.0)
    assert dust.distance([0.2])[0] == 0.0
    assert dust.distance([1.2])[0] == pytest.approx(0.2)
    plane = CantorDust(level=1, dim=2)
    assert plane.distance([[0.5, 0.5]])[0] == pytest.approx(math.sqrt(2.0) / 6.0)


def test_union_distance_is_the_minimum():
    both = Union(parts=(Ball(center=(0.0,), radius=0.1), Ball(center=(1.0,), radius=0.1)))
    assert both.distance([0.5])[0] == pytest.approx(0.4)
    assert both.distance([0.95])[0] == 0.0


def test_dyadic_cover_counts():
    line = Box(lo=(0.0,), hi=(1.0,))
    assert line.dyadic_count(0.125) == 9  # the closed endpoint touches cell 8
    square = Box(lo=(0.0, 0.0), hi=(1.0, 1.0))
    assert square.dyadic_count(0.125) == 81
    dust = CantorDust(level=1)
    # [0, 1/3] meets cells 0, 1 at side 1/4; [2/3, 1] meets 2, 3, 4
    assert dust.dyadic_count(0.25) == 5
    ball = Ball(center=(0.5,), radius=0.5)
    assert len(ball.dyadic_cells(0.5)) == 3


def test_dyadic_cells_match_counts():
    for target in (Box(lo=(0.0,), hi=(1.0,)), CantorDust(level=3), Ball(center=(0.0, 0.0), radius=0.4)):
        cells = target.dyadic_cells(1.0 / 16.0)
        assert len(cells) == target.dyadic_count(1.0 / 16.0)
        assert cells.shape[1] == target.dim


def test_oversized_cover_is_rejected():
    with pytest.raises(ConfigurationError):
        Box(lo=(0.0,), hi=(1.0,)).dyadic_cells(2.0**-24)


@pytest.mark.parametrize(
    "build",
    [
        lambda: Ball(center=(0.0,), radius=-1.0),
        lambda: Box(lo=(1.0,), hi=(0.0,)),
        lambda: PointSet(points=np.zeros(0)),
        lambda: CantorDust(level=25),
        lambda: CantorDust(level=2, lo=1.0, hi=0.0),
        lambda: CantorDust(level=2, dim=4),
        lambda: Union(parts=()),
        lambda: Union(parts=(Ball(center=(0.0,), radius=1.0), Ball(center=(0.0, 0.0), radius=1.0))),
    ],
)
def test_invalid_targets_are_rejected(build):
    with pytest.raises(ConfigurationError):
        build()


def test_distance_checks_coordinate_count():
    with pytest.raises(ConfigurationError):
        Ball(center=(0.0, 0.0), radius=1.0).distance([[1.0]])


# -- simplex optimizer --------------------------------------------------------------


def test_optimizer_finds_interior_optimum_exactly():
    K = np.array([[2.0, 1.0], [1.0, 2.0]])
    mu, f, gap, _ = _simplex_min_quadratic(K, tol=1e-12, max_iter=10_000)
    assert f == pytest.approx(1.5, rel=1e-10)
    assert mu == pytest.approx(np.array([0.5, 0.5]), abs=1e-6)
    assert gap <= 1e-12 * f


def test_optimizer_finds_vertex_optimum():
    # the minimum sits at the first vertex; reaching it requires the away
    # step to remove mass from the other coordinate entirely
    K = np.array([[1.0, 3.0], [3.0, 4.0]])
    mu, f, gap, _ = _simplex_min_quadratic(K, tol=1e-12, max_iter=10_000)
    assert f == pytest.approx(1.0, rel=1e-10)
    assert mu[0] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", [0, 1])
def test_optimizer_certificate_bounds_the_true_optimum(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(12, 8))
    K = A.T @ A + 0.1 * np.eye(8)
    mu, f, gap, _ = _simplex_min_quadratic(K, tol=1e-10, max_iter=100_000)
    assert gap <= 1e-10 * f
    assert np.all(mu >= 0.0) and np.sum(mu) == pytest.approx(1.0, abs=1e-12)
    # brute-force reference on a simplex grid can only be worse
    grid = rng.dirichlet(np.ones(8), size=4000)
    brute = float(np.min(np.einsum("ij,jk,ik->i", grid, K, grid)))
    assert f <= brute + gap + 1e-12


def test_optimizer_agrees_with_convex_solver_within_gap():
    cp = pytest.importorskip("cvxpy")
    kernel = riesz_kernel(0.4, 1)
    target = Box(lo=(0.0,), hi=(1.0,))
    report = capacity(kernel, target, n_cells=32, tol=1e-8)

    centers, widths = target.cells(32)
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    K = np.asarray(kernel.radial_profile(dists), dtype=float)
    diag = np.array(
        [float(np.mean(kernel.radial_profile(w * _unit_pair_seps(target.dim)))) for w in widths]
    )
    np.fill_diagonal(K, diag)

    mu = cp.Variable(K.shape[0], nonneg=True)
    prob = cp.Problem(cp.Minimize(cp.quad_form(mu, cp.psd_wrap(K))), [cp.sum(mu) == 1])
    prob.solve()
    assert report.energy == pytest.approx(float(prob.value), abs=report.gap + 1e-7 * report.energy)


# -- capacity ---------------------------------------------------------------------------


def test_constant_kernel_gives_capacity_one():
    # energy of any probability measure under the constant kernel is 1
    kernel = riesz_kernel(0.0, 1)
    for target in (Box(lo=(0.0,), hi=(1.0,)), Ball(center=(0.0, 0.0), radius=0.5)):
        report = capacity(kernel, target, n_cells=64, tol=1e-10)
        assert report.capacity == pytest.approx(1.0, rel=1e-9)


def test_points_are_polar_for_singular_kernels():
    kernel = riesz_kernel(0.5, 1)
    report = capacity(kernel, PointSet(points=np.array([[0.3]])), n_cells=4)
    assert report.capacity == 0.0
    assert report.minimizer is None
    two = PointSet(points=np.array([[0.3], [0.7]]))
    assert capacity(kernel, two, n_cells=4).capacity == 0.0


def test_points_carry_capacity_under_bounded_kernels():
    report = capacity(riesz_kernel(0.0, 1), PointSet(points=np.array([[0.3], [0.7]])), n_cells=4)
    assert report.capacity == pytest.approx(1.0, rel=1e-9)


def test_riesz_capacity_homogeneity():
    # scaling a set by lambda scales the beta-capacity by lambda^beta
    beta = 0.5
    kernel = riesz_kernel(beta, 2)
    small = capacity(kernel, Ball(center=(0.0, 0.0), radius=0.5), n_cells=256, tol=1e-8)
    large = capacity(kernel, Ball(center=(0.0, 0.0), radius=1.0), n_cells=256, tol=1e-8)
    assert large.capacity / small.capacity == pytest.approx(2.0**beta, rel=0.01)


def test_capacity_is_monotone_under_inclusion():
    kernel = riesz_kernel(0.3, 1)
    inner = capacity(kernel, Box(lo=(0.25,), hi=(0.75,)), n_cells=128, tol=1e-8)
    outer = capacity(kernel, Box(lo=(0.0,), hi=(1.0,)), n_cells=128, tol=1e-8)
    assert inner.capacity <= outer.capacity * (1.0 + 1e-6)


def test_union_capacity_brackets():
    kernel = riesz_kernel(0.3, 1)
    a = Ball(center=(0.0,), radius=0.25)
    b = Ball(center=(10.0,), radius=0.25)
    cap_a = capacity(kernel, a, n_cells=64, tol=1e-8).capacity
    union = capacity(kernel, Union(parts=(a, b)), n_cells=128, tol=1e-8).capacity
    assert union >= cap_a * (1.0 - 0.03)
    assert union <= 2.0 * cap_a * (1.0 + 0.03)


def test_capacity_refines_with_the_mesh():
    kernel = riesz_kernel(0.3, 1)
    target = Ball(center=(0.0,), radius=1.0)
    caps = [capacity(kernel, target, n_cells=n, tol=1e-9).capacity for n in (32, 128, 512)]
    assert abs(caps[2] - caps[1]) < abs(caps[1] - caps[0])
    assert abs(caps[2] - caps[1]) < 0.005 * caps[2]


def test_capacity_certificate_and_minimizer():
    kernel = riesz_kernel(0.4, 1)
    report = capacity(kernel, Box(lo=(0.0,), hi=(1.0,)), n_cells=64, tol=1e-8)
    assert report.gap <= 1e-8 * report.energy
    assert report.capacity == pytest.approx(1.0 / report.energy, rel=1e-14)
    w = report.minimizer.weights
    assert np.all(w >= 0.0)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
    # the equilibrium measure on an interval loads the endpoints
    assert w[0] > np.median(w[w > 0])


def test_capacity_error_contracts():
    kernel = riesz_kernel(0.3, 1)
    with pytest.raises(ConfigurationError):
        capacity(kernel, Box(lo=(0.0,), hi=(1.0,)), n_cells=1)
    with pytest.raises(ConfigurationError):
        capacity(kernel, Box(lo=(0.0,), hi=(1.0,)), tol=0.0)
    with pytest.raises(ConfigurationError):
        capacity(kernel, PointSet(points=np.zeros(0), ambient_dim=1))
    with pytest.raises(ConfigurationError):
        # coincident centers
        capacity(riesz_kernel(0.0, 1), PointSet(points=np.array([[0.5], [0.5]])))


def test_non_finite_kernel_off_diagonal_is_an_error():
    def profile(r):
        rr = np.asarray(r, dtype=float)
        return np.where(rr > 0.5, np.inf, 1.0)

    kernel = PotentialKernel(profile, integrable_at_zero=True)
    with pytest.raises(KernelError):
        capacity(kernel, Box(lo=(0.0,), hi=(1.0,)), n_cells=4)


# -- gauge kernels ------------------------------------------------------------------------


def _power_system(state_dim):
    return GaugeSystem(
        q1=GaugeSpec.power(0.5),
        q2=GaugeSpec.power(0.5),
        d1=1,
        d2=1,
        state_dim=state_dim,
        diam_cap=1.0,
    )


def test_kernel_from_gauge_inverts_the_hausdorff_gauge():
    system = _power_system(5)  # exponent 5 - 2 - 2 = 1
    kernel = kernel_from_gauge(system)
    r = np.array([0.1, 0.5])
    assert kernel.radial_profile(r) == pytest.approx(1.0 / system.hausdorff_gauge(r), rel=1e-12)
    # frozen past the cap
    far = kernel.radial_profile(np.array([3.0]))[0]
    at_cap = kernel.radial_profile(np.array([1.0]))[0]
    assert far == pytest.approx(at_cap, rel=1e-12)
    assert kernel.integrable_at_zero  # exponent 1 < state_dim 5


def test_kernel_from_gauge_integrability_tracks_ambient_dim():
    system = _power_system(5)
    assert not kernel_from_gauge(system, ambient_dim=1).integrable_at_zero


def test_kernel_from_gauge_rejects_decreasing_gauges():
    with pytest.raises(ConfigurationError):
        kernel_from_gauge(_power_system(3))  # exponent 3 - 4 < 0


# -- premeasure covers ----------------------------------------------------------------------


def test_cantor_premeasure_is_bounded_at_its_own_dimension():
    dust = CantorDust(level=10)
    ladder = [3.0**-k for k in range(2, 7)]
    estimates = hausdorff_upper(lambda d: d**CANTOR_DIM, dust, ladder)
    values = np.array([e.value for e in estimates])
    assert values.max() / values.min() <= 2.0


def test_points_are_null_for_fractional_gauges():
    pts = PointSet(points=np.array([[0.1], [0.5], [0.9]]))
    ladder = [2.0**-k for k in range(2, 18)]
    estimates = hausdorff_upper(lambda d: d**0.5, pts, ladder)
    values = [e.value for e in estimates]
    # the count saturates at 3, so the estimate decays like sqrt(side)
    assert values[-1] < 1e-2 * values[0]
    assert all(e.count <= 3 for e in estimates)


def test_cover_estimates_respect_the_resolution():
    box = Box(lo=(0.0,), hi=(1.0,))
    estimates = hausdorff_upper(lambda d: d, box, [0.1, 0.05])
    for e in estimates:
        # the covering ball of a chosen cell has radius at most eps
        assert e.side * math.sqrt(box.dim) <= 2.0 * e.eps
        assert e.value == pytest.approx(e.count * e.side, rel=1e-12)


def test_interval_length_is_recovered_by_linear_gauge():
    box = Box(lo=(0.0,), hi=(1.0,))
    estimates = hausdorff_upper(lambda d: d, box, [2.0**-k for k in range(3, 9)])
    # the closed interval meets 2^m + 1 cells of side 2^-m, so the
    # estimate approaches the length 1 from above like 1 + 2^-m
    for e in estimates:
        assert 1.0 <= e.value <= 1.07
    assert estimates[-1].value <= 1.002


def test_premeasure_ladder_validation():
    box = Box(lo=(0.0,), hi=(1.0,))
    with pytest.raises(ConfigurationError):
        hausdorff_upper(lambda d: d, box, [])
    with pytest.raises(ConfigurationError):
        hausdorff_upper(lambda d: d, box, [0.1, 0.1])
    with pytest.raises(ConfigurationError):
        hausdorff_upper(lambda d: d, box, [0.1, -0.05])
