"""Tube probabilities and the action ratio law."""

import math

import numpy as np
import pytest

from ompath import (
    ContractViolation,
    DiscretePath,
    TubeQuery,
    builtin_model,
    euler_lagrange_rhs_example1,
    linear_path,
    om_ratio_check,
    om_ratio_ladder,
    solve_el_bvp,
    tube_probability,
    uniform_grid,
)

BROWNIAN = builtin_model("zero_drift", {"n": 1, "sigma": 1.0})
LINEAR = builtin_model("linear_test", {"a": -1.0, "g0": 1.0, "g1": 0.0})


def zero_path(steps):
    return DiscretePath(grid=uniform_grid(steps), values=np.zeros((steps + 1, 1)))


def coarse_pair():
    """sinh minimizer vs straight line for f = -x on the 2-step grid.

    The Holder ball around a path is tiny for fine grids (the seminorm
    maximizes over all node pairs), so ratio experiments that need
    actual hits run on deliberately coarse reference grids.
    """
    grid = uniform_grid(2)
    sinh_vals = (np.sinh(grid) / math.sinh(1.0)).reshape(-1, 1)
    return (
        DiscretePath(grid=grid, values=sinh_vals),
        linear_path(np.zeros(1), np.ones(1), 2),
    )


def test_noiseless_process_never_leaves_its_tube():
    still = builtin_model("zero_drift", {"n": 1, "sigma": 0.0})
    ref = DiscretePath(grid=uniform_grid(16), values=np.full((17, 1), 0.3))
    est = tube_probability(
        TubeQuery(model=still, reference_path=ref, epsilon=0.1, alpha=0.2, samples=50, seed=1)
    )
    assert est.hits == est.samples == 50
    assert est.probability == 1.0
    assert est.standard_error == 0.0
    assert not est.low_statistics


def test_binomial_standard_error_formula():
    est = tube_probability(
        TubeQuery(model=BROWNIAN, reference_path=zero_path(8), epsilon=2.5, alpha=0.2, samples=2000, seed=5)
    )
    p = est.hits / est.samples
    assert est.probability == p
    assert 0.0 < p < 1.0
    assert est.standard_error == pytest.approx(math.sqrt(p * (1.0 - p) / est.samples), rel=1e-12)


def test_hits_monotone_in_radius_under_common_seed():
    # same seed -> identical ensemble, so shrinking the tube can only lose hits
    hits = [
        tube_probability(
            TubeQuery(model=BROWNIAN, reference_path=zero_path(8), epsilon=eps, alpha=0.2, samples=2000, seed=5)
        ).hits
        for eps in (3.0, 2.5, 2.0, 1.5)
    ]
    assert all(a >= b for a, b in zip(hits, hits[1:]))
    assert hits[0] > hits[-1]


def test_standard_error_shrinks_as_root_samples():
    q = dict(model=BROWNIAN, reference_path=zero_path(8), epsilon=2.5, alpha=0.2, seed=5)
    se_small = tube_probability(TubeQuery(samples=2000, **q)).standard_error
    se_big = tube_probability(TubeQuery(samples=4000, **q)).standard_error
    assert se_small / se_big == pytest.approx(math.sqrt(2.0), rel=0.1)


def test_matches_high_statistics_reference():
    # Reference: this estimator at 10_000_000 samples (seed 20260814, same
    # tube: zero path, 256 steps, eps 1.0, alpha 0.2) gave 4 hits, i.e.
    # p = 4e-7 with binomial standard error 2e-7, in 289 s of wall time.
    p_ref, se_ref = 4e-7, 1.9999996e-7
    est = tube_probability(
        TubeQuery(model=BROWNIAN, reference_path=zero_path(256), epsilon=1.0, alpha=0.2, samples=100000, seed=3)
    )
    assert est.low_statistics  # the tube is far too rare for 1e5 samples
    combined = math.hypot(est.standard_error, se_ref)
    assert abs(est.probability - p_ref) <= 3.0 * combined


def test_ratio_check_of_path_against_itself():
    phi, _ = coarse_pair()
    rc = om_ratio_check(LINEAR, phi, phi, epsilon=0.5, alpha=0.2, samples=2000, seed=4)
    assert rc.estimate_1.hits == rc.estimate_2.hits > 0
    assert rc.log_prob_ratio == 0.0
    assert rc.om_prediction == 0.0
    assert rc.agreement == 0.0
    assert not rc.inconclusive


def test_vanishing_tube_is_inconclusive_not_wrong():
    phi1, phi2 = coarse_pair()
    rc = om_ratio_check(LINEAR, phi1, phi2, epsilon=1e-4, alpha=0.2, samples=500, seed=6)
    assert rc.inconclusive
    assert rc.estimate_1.hits == 0 and rc.estimate_2.hits == 0
    assert math.isnan(rc.log_prob_ratio)
    assert math.isnan(rc.agreement)
    assert math.isnan(rc.stderr)
    assert math.isfinite(rc.om_prediction)


def test_ladder_tracks_action_prediction():
    phi1, phi2 = coarse_pair()
    pts = om_ratio_ladder(
        LINEAR, phi1, phi2, epsilons=[0.5, 0.35, 0.25], alpha=0.2, samples=100000, seed=2
    )
    assert [p.epsilon for p in pts] == [0.5, 0.35, 0.25]
    predictions = {p.om_prediction for p in pts}
    assert len(predictions) == 1  # one action difference, shared by every rung
    for p in pts:
        assert not p.inconclusive
        assert abs(p.log_ratio - p.om_prediction) <= 3.0 * p.stderr
    assert all(a.hits1 >= b.hits1 for a, b in zip(pts, pts[1:]))
    assert all(a.hits2 >= b.hits2 for a, b in zip(pts, pts[1:]))


def test_most_probable_path_tube_beats_straight_line():
    model = builtin_model("example1")
    mpp = solve_el_bvp(euler_lagrange_rhs_example1, -2.0, 2.0, 16, n_seeds=64)
    line = linear_path(np.array([-2.0]), np.array([2.0]), 16)
    rc = om_ratio_check(model, mpp, line, epsilon=3.0, alpha=0.2, samples=60000, seed=9)
    assert not rc.inconclusive
    assert rc.estimate_1.hits >= 200 and rc.estimate_2.hits >= 200
    assert rc.estimate_1.hits > rc.estimate_2.hits
    assert rc.om_1.total < rc.om_2.total
    # the measured ratio and the action prediction agree in sign
    assert rc.log_prob_ratio > 0.0 and rc.om_prediction > 0.0


def test_worker_count_does_not_change_the_estimate():
    q = TubeQuery(model=BROWNIAN, reference_path=zero_path(8), epsilon=2.5, alpha=0.2, samples=1000, seed=7)
    assert tube_probability(q, workers=1).hits == tube_probability(q, workers=4).hits


def test_query_validation():
    ref = zero_path(8)
    with pytest.raises(ContractViolation):
        TubeQuery(model=BROWNIAN, reference_path=ref, epsilon=0.0, alpha=0.2, samples=100, seed=0)
    with pytest.raises(ContractViolation):
        TubeQuery(model=BROWNIAN, reference_path=ref, epsilon=1.0, alpha=0.2, samples=0, seed=0)
    wide = builtin_model("zero_drift", {"n": 2})
    with pytest.raises(ContractViolation):
        TubeQuery(model=wide, reference_path=ref, epsilon=1.0, alpha=0.2, samples=100, seed=0)
    phi1, phi2 = coarse_pair()
    with pytest.raises(ContractViolation):
        om_ratio_ladder(LINEAR, phi1, phi2, epsilons=[], alpha=0.2, samples=100, seed=0)
    with pytest.raises(ContractViolation):
        om_ratio_ladder(LINEAR, phi1, phi2, epsilons=[0.5, -0.1], alpha=0.2, samples=100, seed=0)
