import math

import numpy as np
import pytest

from fedzo import RngStream, empirical_tail, envelope, make_problem, moment_check, tail_experiment
from fedzo.tails import TEST_FUNCTIONS, moment_bound


# --- empirical tails ---------------------------------------------------------

def test_empirical_tail_examples():
    out = empirical_tail([0.1, 0.2, 0.3], [0.15])
    assert out[0][1] == pytest.approx(2 / 3)
    below = empirical_tail([0.1, 0.2, 0.3], [0.05])
    assert below[0][1] == 1.0
    above = empirical_tail([0.1, 0.2, 0.3], [0.5])
    assert above[0][1] == 0.0 and above[0][2] == 0.0


def test_empirical_tail_validation():
    with pytest.raises(ValueError):
        empirical_tail([], [0.1])
    with pytest.raises(ValueError):
        empirical_tail([1.0], [0.2, 0.1])


def test_empirical_tail_monotone():
    gen = RngStream(61).generator()
    samples = gen.exponential(size=20_000)
    grid = np.linspace(0.01, 5.0, 60)
    fracs = [f for _, f, _ in empirical_tail(samples, grid)]
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))


# --- envelopes -----------------------------------------------------------------

def test_envelope_lipschitz_value():
    assert envelope("lipschitz", 0.5, 10_000) == pytest.approx(361 * math.exp(-15), rel=1e-12)
    assert envelope("lipschitz", 0.5, 10_000) == pytest.approx(1.104e-4, rel=1e-3)


def test_envelope_avg_min_switch():
    assert envelope("avg", 2.0, 16) == pytest.approx(2 * math.exp(-2), rel=1e-12)
    # below r = 1 the quadratic branch applies (d large enough to stay < 1)
    assert envelope("avg", 0.9, 64) == pytest.approx(2 * math.exp(-64 * 0.81 / 16), rel=1e-12)
    # vacuous values are clamped at 1
    assert envelope("avg", 0.5, 16) == 1.0


def test_envelope_ratio_clamps_at_one():
    assert envelope("ratio", 1.0, 256) == 1.0  # 17.1 exp(-2.816) ~ 1.024


def test_envelope_avg_sqrt():
    assert envelope("avg-sqrt", 2.0, 64) == pytest.approx(2 * math.exp(-1.0), rel=1e-12)


def test_envelope_norm_to_avg():
    assert envelope("norm-to-avg", 1.0, 300) == pytest.approx(88 * math.exp(-5.4), rel=1e-12)


def test_envelope_validity_errors():
    with pytest.raises(ValueError):
        envelope("ratio", 0.5, 256)     # below 16/sqrt(d)
    with pytest.raises(ValueError):
        envelope("ratio", 20.0, 1)      # d = 1 inadmissible
    with pytest.raises(ValueError):
        envelope("norm-to-avg", 2.5, 64)
    with pytest.raises(ValueError):
        envelope("avg", -1.0, 64)
    with pytest.raises(ValueError):
        envelope("sideways", 1.0, 64)


# --- tail experiments -------------------------------------------------------------

def test_tail_experiment_avg_no_violations():
    report = tail_experiment("avg", 64, 100_000, RngStream(62))
    assert report.violations == 0
    fracs = [p.empirical for p in report.grid]
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))


def test_tail_experiment_ratio_d1_errors():
    with pytest.raises(ValueError, match="d >= 2"):
        tail_experiment("ratio", 1, 100_000, RngStream(63))


def test_tail_experiment_lipschitz_first_coord():
    report = tail_experiment("lipschitz", 32, 100_000, RngStream(64),
                             fn_name="first-coord")
    assert report.violations == 0


def test_tail_experiment_rejects_small_samples():
    with pytest.raises(ValueError):
        tail_experiment("avg", 16, 5_000, RngStream(65))


def test_tail_experiment_ratio_statistic_below_one():
    # ||x||_2 <= S always, so with the admissible grid above 16/sqrt(d) the
    # empirical tail is identically zero for moderate d.
    report = tail_experiment("ratio", 64, 10_000, RngStream(66))
    assert all(p.empirical == 0.0 for p in report.grid)
    assert report.violations == 0


def test_tail_experiment_deterministic():
    a = tail_experiment("avg", 16, 10_000, RngStream(67))
    b = tail_experiment("avg", 16, 10_000, RngStream(67))
    assert [(p.r, p.empirical) for p in a.grid] == [(p.r, p.empirical) for p in b.grid]


def test_test_functions_are_1_lipschitz():
    gen = RngStream(68).generator()
    z1 = gen.normal(size=(2_000, 8))
    z2 = gen.normal(size=(2_000, 8))
    dist = np.linalg.norm(z1 - z2, axis=1)
    for name, fn in TEST_FUNCTIONS.items():
        gap = np.abs(fn(z1) - fn(z2))
        assert (gap <= dist + 1e-12).all(), name


# --- moment bounds -----------------------------------------------------------------

def test_moment_bound_formula():
    assert moment_bound(2, 10, 1.0) == pytest.approx(
        (2.0 ** 2 / 2) * (361 * 2 * (math.sqrt(10) / 0.003) ** 2 + 1), rel=1e-12)


def test_moment_check_p2_within_bounds():
    p = make_problem("shifted-norm", 10, theta=np.full(10, -0.3), noise_scale=0.1)
    report = moment_check(2, 10, 0.1, p.L, 100_000, p, RngStream(69))
    assert report.ok
    for pt in report.points:
        assert pt.second_moment_raw <= 18 * (1 + math.sqrt(2)) ** 2 * p.L ** 2 * 10
        assert pt.second_moment_centered <= 211 * p.L ** 2 * 10


def test_moment_check_zero_function():
    p = make_problem("linear-noise", 5, a=np.zeros(5), noise_scale=0.0)
    report = moment_check(2, 5, 0.1, 1.0, 100_000, p, RngStream(70))
    for pt in report.points:
        assert pt.moment_p == 0.0
        assert pt.second_moment_raw == 0.0
    assert report.ok


def test_moment_check_all_families_and_orders():
    # Every family, d in {3, 10, 50}, p in {2, 4}: the factorial bound (and
    # at p = 2 the raw/centered second-moment bounds) dominates empirically.
    stream_idx = 0
    for d in (3, 10, 50):
        a = np.linspace(1.0, 2.0, d)
        problems = [
            make_problem("linear-noise", d, a=a, noise_scale=0.1),
            make_problem("shifted-norm", d, theta=np.full(d, -0.3), noise_scale=0.1),
            make_problem("max-affine-noise", d,
                         slopes=np.stack([np.eye(d)[i % d] for i in range(3)]),
                         offsets=np.array([0.0, 0.1, -0.2]), noise_scale=0.1),
        ]
        for p_obj in problems:
            for p in (2, 4):
                report = moment_check(p, d, 0.05, p_obj.L, 100_000, p_obj,
                                      RngStream(71, worker=stream_idx))
                stream_idx += 1
                assert report.ok, (p_obj.family, d, p)


def test_moment_check_validation():
    p = make_problem("linear-noise", 3, a=[1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        moment_check(1, 3, 0.1, 1.0, 100_000, p, RngStream(0))
    with pytest.raises(ValueError):
        moment_check(9, 3, 0.1, 1.0, 100_000, p, RngStream(0))
    with pytest.raises(ValueError):
        moment_check(2, 3, 0.1, 1.0, 50_000, p, RngStream(0))
    with pytest.raises(ValueError):
        moment_check(2, 4, 0.1, 1.0, 100_000, p, RngStream(0))
