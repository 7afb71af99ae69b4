"""Goodness-of-fit calibration and power, outage curves, slopes, bound sweeps."""
import math
from dataclasses import replace

import numpy as np
import pytest

from thzra import analytics, channel, validation
from thzra.errors import EmptySample, InsufficientTail
from thzra.params import (Experiment, FadingParams, GammaAbsorption,
                          MisalignmentParams, ProtocolConfig, ThzLinkParams)


def make_experiment(**kw):
    link = kw.pop("link", ThzLinkParams(
        f_hz=300e9, d_m=100.0, gain_tx=316227.766, gain_rx=316227.766,
        k_t=0.0, k_r=0.0, avg_snr=10 ** 4.5))
    return Experiment(
        link=link,
        absorption=kw.pop("absorption", GammaAbsorption(k=3, beta=10.0)),
        fading=kw.pop("fading", FadingParams(enabled=False)),
        misalignment=kw.pop("misalignment", MisalignmentParams(rho=4.0)),
        protocol=ProtocolConfig())


# ---------------------------------------------------------------------------
# KS harness
# ---------------------------------------------------------------------------

def test_ks_calibration_nominal_rejection_rate():
    # samples drawn from the analytic law itself: ~5% rejections at the
    # 1.36/sqrt(n) threshold
    rho = 3.0
    passes = 0
    reps = 200
    for i in range(reps):
        rng = np.random.default_rng(1000 + i)
        hp = channel.sample_misalignment(rho, rng, 2000)
        rep = validation.ks_compare(hp, lambda x: channel.misalignment_cdf(x, rho))
        passes += rep.passed
    rate = passes / reps
    assert 0.90 <= rate <= 0.995      # 95% nominal, 3 sigma binomial slack


def test_ks_detects_perturbed_rho():
    rho = 4.0
    rng = np.random.default_rng(7)
    hp = channel.sample_misalignment(rho * 1.1, rng, 100_000)
    rep = validation.ks_compare(hp, lambda x: channel.misalignment_cdf(x, rho))
    assert not rep.passed


def test_ks_passes_exact_sampler_at_1e5():
    rng = np.random.default_rng(3)
    hp = channel.sample_misalignment(4.0, rng, 100_000)
    rep = validation.ks_compare(hp, lambda x: channel.misalignment_cdf(x, 4.0))
    assert rep.passed
    assert rep.threshold == pytest.approx(1.36 / math.sqrt(100_000))


def test_ks_requires_enough_samples():
    with pytest.raises(EmptySample):
        validation.ks_compare(np.ones(10), lambda x: x)


# ---------------------------------------------------------------------------
# chi-square harness
# ---------------------------------------------------------------------------

def test_chi_square_passes_own_law_and_detects_perturbation():
    link = make_experiment().link
    model = GammaAbsorption(k=3, beta=10.0)
    rng = np.random.default_rng(9)
    hl = channel.sample_path_gain(model, link, rng, 100_000)
    cdf = lambda x: channel.path_gain_cdf(float(x), model, link)
    rep = validation.chi_square_compare(hl, cdf, support=(0.0, link.a_l))
    assert rep.passed
    assert rep.p_value > 0.01
    wrong = GammaAbsorption(k=3, beta=12.0)
    rep_bad = validation.chi_square_compare(
        hl, lambda x: channel.path_gain_cdf(float(x), wrong, link),
        support=(0.0, link.a_l))
    assert not rep_bad.passed


# ---------------------------------------------------------------------------
# outage curves
# ---------------------------------------------------------------------------

GRID = [25.0, 29.0, 33.0, 37.0, 41.0]


def test_outage_curve_monotone_and_reproducible():
    exp = make_experiment()
    gth = 10 ** 0.5
    c1 = validation.outage_mc(exp, gth, GRID, 100_000, seed=3)
    c2 = validation.outage_mc(exp, gth, GRID, 100_000, seed=3)
    np.testing.assert_array_equal(c1.p_out, c2.p_out)
    # monotone nonincreasing up to CI noise: compare interval envelopes
    for i in range(len(GRID) - 1):
        assert c1.ci_lo[i + 1] <= c1.ci_hi[i]
    assert np.all(c1.ci_lo <= c1.p_out) and np.all(c1.p_out <= c1.ci_hi)


def test_outage_grows_with_mean_absorption():
    gth = 10 ** 0.5
    light = make_experiment(absorption=GammaAbsorption(k=3, beta=5.0))
    heavy = make_experiment(absorption=GammaAbsorption(k=3, beta=25.0))
    cl = validation.outage_mc(light, gth, GRID, 150_000, seed=4)
    ch = validation.outage_mc(heavy, gth, GRID, 150_000, seed=4)
    assert np.all(ch.p_out > cl.p_out)


def test_outage_matches_closed_form_within_3se():
    exp = make_experiment(link=replace(make_experiment().link, k_t=0.1, k_r=0.1))
    gth = 10 ** 0.5
    n = 200_000
    curve = validation.outage_mc(exp, gth, GRID, n, seed=5)
    for db, phat in zip(curve.gamma_bar_db, curve.p_out):
        q = analytics.OutageQuery(gth, 10 ** (db / 10.0), exp.link.k_h)
        p = analytics.cdf_snr_no_fading(q, exp.absorption,
                                        exp.misalignment.rho, exp.link)
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(phat - p) <= 3 * se


# ---------------------------------------------------------------------------
# slope fits
# ---------------------------------------------------------------------------

def test_slope_fit_recovers_diversity_order():
    exp = make_experiment(fading=FadingParams(alpha=2.0, mu=1))
    z = exp.absorption.z_for(exp.link)
    do = analytics.diversity_order(2.0, 1.0, 4.0, z)
    assert do.effective == 1.0
    curve = validation.outage_mc(exp, 10 ** 0.5, [38, 42, 46, 50, 54, 58],
                                 1_000_000, seed=11)
    fit = validation.slope_fit(curve)
    assert fit.slope == pytest.approx(do.effective, rel=0.15)
    assert fit.n_points >= 4


def test_slope_fit_insufficient_tail():
    exp = make_experiment()
    curve = validation.outage_mc(exp, 10 ** 0.5, [10.0, 14.0, 18.0], 20_000,
                                 seed=12)
    with pytest.raises(InsufficientTail):
        validation.slope_fit(curve)


# ---------------------------------------------------------------------------
# bound sweeps and agreement
# ---------------------------------------------------------------------------

def test_bound_sweep_spot_values_pass():
    rows = validation.bound_sweep([3, 10, 40, 100, 1000, 10_000])
    assert validation.sweep_all_pass(rows)
    metrics = {r.metric for r in rows}
    assert metrics == {"atp_delay", "atp_energy", "ftp_delay", "ftp_energy",
                       "energy_gap"}


def test_atp_bound_slack_vanishes():
    rows = {r.K: r for r in validation.bound_sweep([10, 100, 1000, 10_000])
            if r.metric == "atp_delay"}
    slack = {k: (r.upper - r.exact) / r.exact for k, r in rows.items()}
    assert slack[10_000] < slack[1000] < slack[100] < slack[10]
    assert slack[10_000] < 0.001


def test_relative_energy_gain_approaches_inverse_e():
    gain = 1.0 - analytics.energy_ftp(1000) / analytics.energy_atp(1000)
    assert gain == pytest.approx(1.0 / math.e, abs=0.05 / math.e)


def test_simulator_agreement_harness():
    exp = make_experiment()
    rows = validation.simulator_agreement(exp, ["atp"], [2, 5], trials=3000)
    assert all(r.passed for r in rows)
    kinds = {(r.scheme, r.K, r.kind) for r in rows}
    assert ("atp", 2, "delay") in kinds and ("atp", 5, "energy") in kinds
