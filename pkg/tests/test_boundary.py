import math

import numpy as np
import pytest

from fedzo import (
    MartingaleSpec,
    RngStream,
    SubGammaBoundary,
    boundary_coverage_experiment,
    subgamma_boundary,
)


# --- boundary formula ---------------------------------------------------------

def test_boundary_at_zero_variance():
    # V = 0, c = 0, rho = 1, delta = 2/e: H = 2, log(H/delta) = 1, value 11.
    b = SubGammaBoundary(c=0.0, rho=1.0, delta=2 / math.e)
    assert subgamma_boundary(b, 0.0) == pytest.approx(11.0, abs=1e-12)


def test_boundary_matches_bignum_oracle():
    # Independent 50-digit evaluation (mpmath dev run) at V=100, c=0.5,
    # rho=1, delta=0.05.
    b = SubGammaBoundary(c=0.5, rho=1.0, delta=0.05)
    assert subgamma_boundary(b, 100.0) == pytest.approx(169.01295122295248852, rel=1e-12)


def test_boundary_monotone_in_v():
    b = SubGammaBoundary(c=1.0, rho=1.0, delta=0.05)
    grid = np.linspace(0.0, 500.0, 100)
    vals = subgamma_boundary(b, grid)
    assert (np.diff(vals) >= 0).all()


def test_boundary_monotone_in_c_and_rho_decreasing_in_delta():
    v = 42.0
    base = subgamma_boundary(SubGammaBoundary(c=0.5, rho=1.0, delta=0.1), v)
    assert subgamma_boundary(SubGammaBoundary(c=1.0, rho=1.0, delta=0.1), v) > base
    assert subgamma_boundary(SubGammaBoundary(c=0.5, rho=2.0, delta=0.1), v) > base
    deltas = [0.05, 0.1, 0.25]
    vals = [subgamma_boundary(SubGammaBoundary(c=0.5, rho=1.0, delta=dl), v)
            for dl in deltas]
    assert vals[0] > vals[1] > vals[2]


def test_boundary_parameter_validation():
    with pytest.raises(ValueError):
        SubGammaBoundary(c=-0.1, rho=1.0, delta=0.1)
    with pytest.raises(ValueError):
        SubGammaBoundary(c=0.1, rho=0.0, delta=0.1)
    with pytest.raises(ValueError):
        SubGammaBoundary(c=0.1, rho=1.0, delta=1.0)
    b = SubGammaBoundary(c=0.1, rho=1.0, delta=0.1)
    with pytest.raises(ValueError):
        subgamma_boundary(b, -1.0)


# --- martingale specs -----------------------------------------------------------

def test_spec_certificate_enforced():
    # Rademacher increments of magnitude 1 certify scale 1/3; declaring less
    # is rejected.
    with pytest.raises(ValueError):
        MartingaleSpec(law="bounded-symmetric", variance=1.0, scale=0.2,
                       steps=10, replications=10)
    MartingaleSpec(law="bounded-symmetric", variance=1.0, scale=1 / 3,
                   steps=10, replications=10)


def test_spec_validation():
    with pytest.raises(ValueError):
        MartingaleSpec(law="cauchy", variance=1.0, scale=1.0, steps=10, replications=10)
    with pytest.raises(ValueError):
        MartingaleSpec(law="centered-gamma", variance=1.0, scale=0.0,
                       steps=10, replications=10)
    with pytest.raises(ValueError):
        MartingaleSpec(law="centered-gamma", variance=1.0, scale=1.0,
                       steps=0, replications=10)


def test_increment_moments_match_declaration():
    from fedzo.boundary import _draw_increments
    gen = RngStream(80).generator()
    for law, scale in [("bounded-symmetric", 1.0), ("centered-gamma", 0.5)]:
        spec = MartingaleSpec(law=law, variance=2.0, scale=scale,
                              steps=200, replications=5_000)
        inc = _draw_increments(spec, gen)
        n = inc.size
        assert inc.mean() == pytest.approx(0.0, abs=4 * math.sqrt(2.0 / n))
        assert inc.var() == pytest.approx(2.0, rel=0.05)


# --- coverage experiments ---------------------------------------------------------

def test_coverage_bounded_symmetric():
    spec = MartingaleSpec(law="bounded-symmetric", variance=1.0, scale=1 / 3,
                          steps=1000, replications=2000)
    b = SubGammaBoundary(c=1 / 3, rho=1.0, delta=0.05)
    res = boundary_coverage_experiment(spec, b, RngStream(81))
    assert res.crossing_fraction <= 0.10 + 3 * math.sqrt(0.1 * 0.9 / 2000)


def test_coverage_centered_gamma():
    spec = MartingaleSpec(law="centered-gamma", variance=1.0, scale=0.5,
                          steps=1000, replications=2000)
    b = SubGammaBoundary(c=0.5, rho=1.0, delta=0.05)
    res = boundary_coverage_experiment(spec, b, RngStream(82))
    assert res.crossing_fraction <= 0.10 + 3 * math.sqrt(0.1 * 0.9 / 2000)


def test_coverage_zero_variance_never_crosses():
    spec = MartingaleSpec(law="bounded-symmetric", variance=0.0, scale=0.5,
                          steps=100, replications=500)
    b = SubGammaBoundary(c=0.5, rho=1.0, delta=0.05)
    res = boundary_coverage_experiment(spec, b, RngStream(83))
    assert res.crossing_fraction == 0.0


def test_coverage_monotone_in_delta_on_shared_paths():
    # The same increments evaluated against shrinking boundaries can only
    # cross more often as delta grows.
    spec = MartingaleSpec(law="bounded-symmetric", variance=1.0, scale=1 / 3,
                          steps=500, replications=1000)
    fracs = []
    for delta in (0.05, 0.1, 0.25):
        b = SubGammaBoundary(c=1 / 3, rho=1.0, delta=delta)
        res = boundary_coverage_experiment(spec, b, RngStream(84))
        fracs.append(res.crossing_fraction)
    assert fracs[0] <= fracs[1] <= fracs[2]
    assert all(f <= 1.0 for f in fracs)


def test_coverage_reports_counts():
    spec = MartingaleSpec(law="bounded-symmetric", variance=1.0, scale=10.0,
                          steps=50, replications=400)
    b = SubGammaBoundary(c=10.0, rho=1.0, delta=0.2)
    res = boundary_coverage_experiment(spec, b, RngStream(85))
    assert res.replications == 400
    assert res.crossed == round(res.crossing_fraction * 400)
