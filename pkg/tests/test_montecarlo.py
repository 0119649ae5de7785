import math
from dataclasses import replace

import numpy as np
import pytest

from tmcdma import baseband, montecarlo as mc
from tmcdma.detect import TmParams
from tmcdma.errors import ComplexityGuard, ConfigurationError

# Q(sqrt 2) and Q(sqrt(2*10^0.4)) from mpmath
BER_0DB = 0.07864960352514257
BER_4DB = 0.012500818040737563


def small(**kw):
    base = dict(K_range=(2, 4), N=16, ebn0_db=(6.0,), symbols_per_point=600,
                block_size=256, seed=5)
    base.update(kw)
    return mc.ScenarioSpec(**base)


def test_theoretical_ber():
    assert mc.theoretical_ber_single_user(0.0) == pytest.approx(BER_0DB, rel=1e-12)
    assert mc.theoretical_ber_single_user(4.0) == pytest.approx(BER_4DB, rel=1e-12)
    assert mc.q_function(0.0) == 0.5


def test_noiseless_single_user_error_free():
    spec = mc.ScenarioSpec(K_range=(1, 1), N=8, ebn0_db=(math.inf,),
                           symbols_per_point=500)
    rows = mc.sweep_scenario(spec)
    assert len(rows) == 5
    for r in rows:
        assert r.ber == 0 and r.errors == 0 and r.status == mc.STATUS_LOW


def test_sweep_row_count_and_order():
    spec = small(K_range=(2, 6), detectors=("ml", "conv"))
    rows = mc.sweep_scenario(spec)
    assert len(rows) == 10
    assert [(r.K, r.detector_id) for r in rows[:4]] == [
        (2, "conv"), (2, "ml"), (3, "conv"), (3, "ml")]


def test_ml_beyond_guard_is_skipped():
    spec = small(load_class="heavy", K_range=(3, 5), k_max=4, detectors=("conv", "ml"),
                 symbols_per_point=100)
    rows = mc.sweep_scenario(spec)
    ml = {r.K: r for r in rows if r.detector_id == "ml"}
    assert not ml[4].skipped
    assert ml[5].skipped and ml[5].status == mc.STATUS_SKIP_ML
    assert math.isnan(ml[5].ber)
    with pytest.raises(ComplexityGuard):
        mc.run_point(spec, 5, "ml")


def test_singular_correlation_skips_zf():
    # 4 users on 2 chips: rank(R) <= 2
    spec = small(K_range=(4, 4), N=2, detectors=("conv", "zf"), symbols_per_point=50)
    rows = {r.detector_id: r for r in mc.sweep_scenario(spec)}
    assert rows["zf"].status == mc.STATUS_SKIP_ZF
    assert not rows["conv"].skipped


def test_deterministic_and_worker_independent():
    spec = small(detectors=("conv", "nd", "tm"), ebn0_db=(2.0, 6.0))
    a = mc.sweep_scenario(spec, workers=1)
    b = mc.sweep_scenario(spec, workers=1)
    c = mc.sweep_scenario(spec, workers=3)
    assert a == b == c
    d = mc.sweep_scenario(replace(spec, seed=6), workers=1)
    assert a != d


def test_block_size_partition():
    assert mc._block_sizes(small(symbols_per_point=600)) == [256, 256, 88]
    assert sum(mc._block_sizes(mc.ScenarioSpec())) == 10_000


def test_ml_evals_and_tm_bounded():
    spec = small(K_range=(6, 6), symbols_per_point=400)
    rows = {r.detector_id: r for r in mc.sweep_scenario(spec)}
    assert rows["ml"].mean_metric_evals == 2 ** 6
    assert rows["tm"].mean_metric_evals < 2 ** 6
    assert rows["conv"].mean_metric_evals == 0


def test_optimal_detectors_beat_conventional():
    spec = small(K_range=(8, 8), N=16, ebn0_db=(8.0,), symbols_per_point=2000,
                 detectors=("conv", "ml", "tm"))
    rows = {r.detector_id: r for r in mc.sweep_scenario(spec)}
    assert rows["ml"].ber <= rows["conv"].ber
    assert rows["tm"].ber <= rows["conv"].ber
    # refinement pulls TM decisions towards ML compared with the coarse sign
    short = replace(spec, symbols_per_point=500)
    agree = mc.tm_ml_agreement(short, 8)
    coarse = mc.tm_ml_agreement(short, 8, tm_params=TmParams(tau=0.0))
    assert coarse < agree <= 1.0


def test_tm_tau_inf_agrees_with_ml_everywhere():
    spec = small(K_range=(5, 5), symbols_per_point=300,
                 tm_params=TmParams(tau=math.inf, s_max=5))
    assert mc.tm_ml_agreement(spec, 5) == 1.0


def test_pilot_epochs_not_counted():
    spec = small(K_range=(3, 3), pilot_period=4, symbols_per_point=400)
    rows = mc.sweep_scenario(spec)
    assert all(r.symbols == 400 for r in rows)
    base = {r.detector_id: r for r in mc.sweep_scenario(replace(spec, pilot_period=None))}
    # same data bits: the noiseless conv decisions see the same symbols
    assert {r.detector_id for r in rows} == set(base)


def test_mean_nd_iterations():
    rows = mc.sweep_scenario(small(detectors=("nd",)))
    it = mc.mean_nd_iterations(rows)
    assert set(it) == {2, 3, 4}
    assert all(v >= 0 for v in it.values())


def test_empirical_snr_single_user():
    cfg = baseband.SystemConfig(K=1, N=8)
    codes = baseband.generate_codes(cfg)
    rng = np.random.default_rng(1)
    b = rng.choice([-1.0, 1.0], size=(200_000, 1))
    sigma = 0.5
    y = baseband.matched_filter_bank(
        baseband.add_awgn(baseband.transmit_chips(b, cfg, codes), sigma, rng), codes)
    est = mc.empirical_snr(y, codes, 1.0, b)
    assert est.mean_db == pytest.approx(10 * math.log10(1 / sigma ** 2), abs=0.03)


def test_empirical_snr_noiseless_two_users():
    c = np.array([[1.0, 0.0], [0.5, math.sqrt(0.75)]])
    codes = baseband.SpreadingCodeSet(c, 0, "custom")
    b = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    y = b @ (c @ c.T)
    est = mc.empirical_snr(y, codes, 1.0, b)
    # rho = 0.5: desired 1, MAI 0.25
    assert est.mean_db == pytest.approx(10 * math.log10(4), abs=1e-12)


def test_empirical_snr_orthogonal_noiseless_is_huge():
    cfg = baseband.SystemConfig(K=4, N=8, code_kind="walsh-hadamard")
    codes = baseband.generate_codes(cfg)
    b = np.random.default_rng(0).choice([-1.0, 1.0], size=(50, 4))
    y = baseband.matched_filter_bank(baseband.transmit_chips(b, cfg, codes), codes)
    # only chip-level rounding remains as interference
    assert mc.empirical_snr(y, codes, 1.0, b).mean_db > 250


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        mc.ScenarioSpec(load_class="medium")
    with pytest.raises(ConfigurationError):
        mc.ScenarioSpec(detectors=("conv", "mmse"))
    with pytest.raises(ConfigurationError):
        mc.ScenarioSpec(K_range=(5, 2))
    with pytest.raises(ConfigurationError):
        mc.run_point(small(), 2, "mmse")


def test_reproduce_figure3_points():
    ds = mc.reproduce_figure(3)
    at22 = {p.algorithm_id: p.gamma_db for p in ds.points if p.K == 22}
    assert at22["tm"] == pytest.approx(6.5, abs=1e-9)
    assert at22["nd"] == pytest.approx(5.8, abs=1e-9)
    assert at22["ml"] == pytest.approx(5.5, abs=1e-9)
    algs = ds.meta["algorithms"]
    assert algs["tm"]["phi2"] == pytest.approx(0.3162874588, abs=1e-9)
    assert algs["tm"]["in_range"] is False


def test_reproduce_figure_unanchored_midpoint():
    ds = mc.reproduce_figure(7)
    algs = ds.meta["algorithms"]
    assert algs["tm"]["source"] == "calibrated"
    assert algs["ml"]["source"] == "range-midpoint"
    assert algs["ml"]["phi2"] == pytest.approx(0.55)


def test_reproduce_figure8_slope_decreases():
    from tmcdma.snrmodel import FixedPhi2
    ds = mc.reproduce_figure(8, policy=FixedPhi2(1.0))
    tm = {p.K: p.gamma_db for p in ds.points if p.algorithm_id == "tm" and p.defined}
    assert tm[51] - tm[50] > tm[101] - tm[100]
    with pytest.raises(ConfigurationError):
        mc.reproduce_figure(2)
