"""Grid-posterior inference on simulated records.

The discrete model is linear-Gaussian, so the log-likelihood is exactly
quadratic in the candidate field and the maximum-likelihood estimator is
exactly normal with variance 1/S_AA.  Several tests below lean on those two
facts as oracles.
"""

import math

import numpy as np
import pytest

from magmon.bayes import (estimate, log_likelihood, posterior,
                          prefix_coefficients, quadratic_coefficients,
                          saturation_curve)
from magmon.information import fisher_record_closed
from magmon.model import ModelParams, TimeGrid
from magmon.records import batch_simulate, simulate_record

P = ModelParams(J=1e4, kappa=1.0, gamma=1.0, eta=1.0, B=0.0)
GRID = TimeGrid(t_final=1.0, n_steps=40000)
PRIOR = (-0.01, 0.01)


def test_loglik_is_exactly_quadratic():
    rec = simulate_record(P, GRID, seed=2)
    S_rr, S_rA, S_AA = quadratic_coefficients(rec)
    for B in (-3e-3, 0.0, 1e-4, 7e-3):
        expect = -0.5 * (S_rr - 2.0 * B * S_rA + B * B * S_AA)
        assert log_likelihood(rec, B) == pytest.approx(expect, rel=1e-12)


def test_discrete_fisher_tracks_closed_form():
    # S_AA is the discrete-model Fisher information; on a fine grid it should
    # land within a fraction of a percent of the continuum value.
    rec = simulate_record(P, GRID, seed=2)
    _, _, S_AA = quadratic_coefficients(rec)
    assert S_AA == pytest.approx(fisher_record_closed(P, GRID.t_final), rel=5e-3)


def test_ml_estimator_calibration():
    # B_hat = S_rA/S_AA is exactly N(B_true, 1/S_AA) in the discrete model.
    B_true = 2e-3
    records = batch_simulate(P.replace(B=B_true), GRID, n_records=150,
                             seed_base=31)
    coeffs = [quadratic_coefficients(r) for r in records]
    bhat = np.array([c[1] / c[2] for c in coeffs])
    sigma = math.sqrt(1.0 / np.mean([c[2] for c in coeffs]))
    n = len(bhat)
    assert abs(bhat.mean() - B_true) < 4.0 * sigma / math.sqrt(n)
    # variance of the variance estimator: relative sd ~ sqrt(2/(n-1))
    assert bhat.var(ddof=1) == pytest.approx(sigma ** 2,
                                             rel=5.0 * math.sqrt(2.0 / (n - 1)))


def test_posterior_normalized():
    post = posterior(batch_simulate(P, GRID, 3, seed_base=6), PRIOR)
    assert float(np.dot(post.weights(), post.posterior)) == pytest.approx(1.0, abs=1e-12)


def test_posterior_permutation_bitwise():
    records = batch_simulate(P, GRID, n_records=5, seed_base=17)
    a = posterior(records, PRIOR)
    b = posterior(records[::-1], PRIOR)
    assert a.posterior.tobytes() == b.posterior.tobytes()
    assert a.log_likelihood.tobytes() == b.log_likelihood.tobytes()


def test_more_records_narrow_the_posterior():
    records = batch_simulate(P, GRID, n_records=8, seed_base=40)
    sd2 = estimate(posterior(records[:2], PRIOR)).sd
    sd8 = estimate(posterior(records, PRIOR)).sd
    assert sd8 < sd2
    # 4x the data should shrink sd by about 2 (within statistical slack)
    assert sd2 / sd8 == pytest.approx(2.0, rel=0.35)


def test_zero_records_returns_prior():
    post = posterior([], PRIOR)
    assert post.n_records == 0
    np.testing.assert_allclose(post.posterior, post.posterior[0])
    summ = estimate(post)
    assert summ.mean == pytest.approx(0.0, abs=1e-15)
    width = PRIOR[1] - PRIOR[0]
    assert summ.sd == pytest.approx(width / math.sqrt(12.0), rel=1e-3)
    assert math.isnan(summ.ratio) and math.isnan(summ.sd_crb)


def test_boundary_guard():
    # True field far outside the prior: the posterior piles onto the edge.
    rec = simulate_record(P.replace(B=0.05), GRID, seed=1)
    with pytest.raises(RuntimeError, match="boundary"):
        posterior([rec], PRIOR)
    post = posterior([rec], PRIOR, boundary="allow")
    assert post.posterior.argmax() in (0, len(post.posterior) - 1)


def test_single_record_saturates_the_bound():
    rec = simulate_record(P, GRID, seed=12)
    summ = estimate(posterior([rec], PRIOR))
    assert 0.8 < summ.ratio < 1.2


def test_prefix_matches_truncation():
    rec = simulate_record(P, GRID, seed=9)
    steps = [0, 1, 1000, 20000, GRID.n_steps]
    crr, cra, caa = prefix_coefficients(rec, steps)
    for i, k in enumerate(steps):
        full = quadratic_coefficients(rec, upto_step=k)
        assert (crr[i], cra[i], caa[i]) == pytest.approx(full, rel=1e-12, abs=1e-15)
    assert (crr[-1], cra[-1], caa[-1]) == pytest.approx(
        quadratic_coefficients(rec), rel=1e-12)


def test_prefix_rejects_bad_steps():
    rec = simulate_record(P, GRID, seed=9)
    with pytest.raises(ValueError):
        prefix_coefficients(rec, [GRID.n_steps + 1])
    with pytest.raises(ValueError):
        quadratic_coefficients(rec, upto_step=-1)


def test_incompatible_records_rejected():
    rec_a = simulate_record(P, GRID, seed=1)
    rec_b = simulate_record(P.replace(J=5e3), GRID, seed=1)
    with pytest.raises(ValueError, match="parameters"):
        posterior([rec_a, rec_b], PRIOR)
    rec_c = simulate_record(P, GRID, seed=1, convention_tag="appc")
    with pytest.raises(ValueError, match="convention"):
        posterior([rec_a, rec_c], PRIOR)


def test_convention_does_not_change_inference():
    main = simulate_record(P, GRID, seed=22, convention_tag="main")
    appc = simulate_record(P, GRID, seed=22, convention_tag="appc")
    pm = posterior([main], PRIOR)
    pa = posterior([appc], PRIOR)
    np.testing.assert_allclose(pa.posterior, pm.posterior, rtol=1e-9)


def test_saturation_curve_shape():
    records = batch_simulate(P, GRID, n_records=3, seed_base=55)
    steps = [4000, 20000, 40000]
    times, summaries = saturation_curve(records, steps, PRIOR)
    np.testing.assert_allclose(times, np.asarray(steps) * GRID.dt)
    assert len(summaries) == len(steps)
    assert all(len(row) == 3 for row in summaries)
    # posterior spread shrinks along the record for every trajectory
    for j in range(3):
        sds = [summaries[i][j].sd for i in range(len(steps))]
        assert sds[0] > sds[-1]
