import math

import pytest

from multiqf import bounds as b
from multiqf import circuits as qc
from multiqf import gains as gn
from multiqf import mcsim as mc
from multiqf.errors import ParameterError, ValidityError
from multiqf.noise import NoiseModel, realize_circuit


def tree_matrix(k):
    return qc.compose_layout(qc.optimal_tree_layout(k))


def make_params(ecc, k, m_pulses, p_error, eta=1.0, p_dark=0.0):
    return b.ProtocolParams(
        k=k, n_bits=m_pulses / ecc.c, ecc=ecc, p_error=p_error, eta=eta, p_dark=p_dark
    )


class TestWilson:
    def test_bounds_order(self):
        assert mc.wilson_upper(0, 1000) > 0.0
        assert mc.wilson_upper(10, 1000) >= 10 / 1000
        assert mc.wilson_upper(1000, 1000) == pytest.approx(1.0, abs=1e-9)

    def test_zero_errors_scale(self):
        # ~ z^2 / n for zero observed errors
        up = mc.wilson_upper(0, 5000)
        assert up == pytest.approx(1.6449**2 / (5000 + 1.6449**2), rel=1e-3)

    def test_default_trials(self):
        assert mc.default_trials(1e-2) == 5000
        assert mc.default_trials(1e-5) == 5000
        assert mc.default_trials(0.1) == 500


class TestSimulate:
    def test_matches_exact_no_click_product(self, ecc):
        # ideal circuit, no dark counts: the worst-different error rate is
        # exactly exp(-4 (1-delta) (K-1) alpha2 / K)
        for k, seed in ((2, 2), (3, 3), (4, 4), (7, 7)):
            alpha2 = b.ideal_alpha2(k, ecc, 0.05)
            params = make_params(ecc, k, 10**4, 0.05)
            cfg = mc.SimConfig(
                trials=5000, scenario=mc.WORST_DIFFERENT, strategy=b.STRATEGY_FIRST,
                params=params, transfer=tree_matrix(k), alpha2=alpha2, threshold_r=0.0,
            )
            out = mc.simulate(cfg, seed=seed)
            exact = math.exp(-4 * (1 - ecc.delta) * (k - 1) * alpha2 / k)
            ci = 1.96 * math.sqrt(exact * (1 - exact) / 5000)
            assert abs(out.error_rate - exact) <= ci

    def test_all_equal_ideal_never_errs(self, ecc):
        params = make_params(ecc, 4, 10**4, 0.05)
        cfg = mc.SimConfig(
            trials=3000, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_FIRST,
            params=params, transfer=tree_matrix(4), alpha2=5.0, threshold_r=0.0,
        )
        assert mc.simulate(cfg, seed=0).error_rate == 0.0

    def test_no_light_last_only_always_errs(self, ecc):
        params = make_params(ecc, 4, 10**4, 0.05)
        cfg = mc.SimConfig(
            trials=200, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_LAST,
            params=params, transfer=tree_matrix(4), alpha2=0.0, threshold_r=0.0,
        )
        assert mc.simulate(cfg, seed=0).error_rate == 1.0

    def test_photon_regime_guard(self, ecc):
        params = make_params(ecc, 4, 100, 0.05)
        cfg = mc.SimConfig(
            trials=100, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_FIRST,
            params=params, transfer=tree_matrix(4), alpha2=50.0, threshold_r=0.0,
        )
        with pytest.raises(ValidityError):
            mc.simulate(cfg, seed=0)
        relaxed = mc.SimConfig(
            trials=100, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_FIRST,
            params=params, transfer=tree_matrix(4), alpha2=50.0, threshold_r=0.0,
            enforce_photon_regime=False,
        )
        mc.simulate(relaxed, seed=0)

    def test_determinism(self, ecc):
        params = make_params(ecc, 3, 10**4, 0.05, p_dark=1e-5)
        cfg = mc.SimConfig(
            trials=500, scenario=mc.WORST_DIFFERENT, strategy=b.STRATEGY_LAST,
            params=params, transfer=tree_matrix(3), alpha2=8.0, threshold_r=3.0,
        )
        assert mc.simulate(cfg, seed=7) == mc.simulate(cfg, seed=7)
        assert mc.simulate(cfg, seed=7) != mc.simulate(cfg, seed=8)

    def test_poisson_thinning_invariance(self, ecc):
        t = tree_matrix(3)
        cfg1 = mc.SimConfig(
            trials=400, scenario=mc.WORST_DIFFERENT, strategy=b.STRATEGY_FIRST,
            params=make_params(ecc, 3, 10**4, 0.05, eta=0.4, p_dark=1e-6),
            transfer=t, alpha2=40.0, threshold_r=10.0,
        )
        cfg2 = mc.SimConfig(
            trials=400, scenario=mc.WORST_DIFFERENT, strategy=b.STRATEGY_FIRST,
            params=make_params(ecc, 3, 10**4, 0.05, eta=0.8, p_dark=1e-6),
            transfer=t, alpha2=20.0, threshold_r=10.0,
        )
        assert mc.simulate(cfg1, seed=3) == mc.simulate(cfg2, seed=3)

    def test_histogram_summary(self, ecc):
        params = make_params(ecc, 3, 10**4, 0.05, p_dark=1e-4)
        cfg = mc.SimConfig(
            trials=300, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_LAST,
            params=params, transfer=tree_matrix(3), alpha2=10.0, threshold_r=1.0,
        )
        out = mc.simulate(cfg, seed=1)
        assert set(out.click_histogram) == {1, 2, 3}
        bus = out.click_histogram[1]
        assert bus["max"] >= bus["mean"] >= bus["min"]

    def test_rejects_bad_config(self, ecc):
        params = make_params(ecc, 3, 100, 0.05)
        with pytest.raises(ParameterError):
            mc.SimConfig(
                trials=0, scenario=mc.ALL_EQUAL, strategy=b.STRATEGY_FIRST,
                params=params, transfer=tree_matrix(3), alpha2=1.0, threshold_r=0.0,
            )
        with pytest.raises(ParameterError):
            mc.SimConfig(
                trials=10, scenario="sideways", strategy=b.STRATEGY_FIRST,
                params=params, transfer=tree_matrix(3), alpha2=1.0, threshold_r=0.0,
            )


@pytest.fixture(scope="module")
def realized(ecc):
    model = NoiseModel(sigma_t=0.01, sigma_p=0.01, bs_loss_db=-0.2, seed=777)
    t = realize_circuit(qc.optimal_tree_layout(3), model, index=0)
    return t, gn.gain_set(t)


class TestVerifyBound:
    def test_pipeline_passes(self, ecc, realized):
        t, gains = realized
        params = make_params(ecc, 3, 10**4, 1e-2, eta=0.5, p_dark=1e-6)
        rep = mc.verify_bound(b.STRATEGY_FIRST, params, gains, t, trials=5000, seed=1)
        assert rep.passed
        assert set(rep.outcomes) == set(mc.SCENARIOS)

    def test_sabotaged_alpha_fails_different(self, ecc, realized):
        t, gains = realized
        params = make_params(ecc, 3, 10**4, 1e-2, eta=0.5, p_dark=1e-6)
        rep = mc.verify_bound(
            b.STRATEGY_FIRST, params, gains, t, trials=5000, seed=1, alpha2_scale=0.25
        )
        assert not rep.passed
        assert rep.outcomes[mc.WORST_DIFFERENT].wilson_upper_95 > 1e-2

    def test_sabotaged_threshold_fails_equal(self, ecc, realized):
        t, gains = realized
        params = make_params(ecc, 3, 10**5, 1e-2, eta=0.5, p_dark=1e-6)
        rep = mc.verify_bound(
            b.STRATEGY_LAST, params, gains, t, trials=5000, seed=1, r_scale=1.5
        )
        assert not rep.passed
        assert rep.outcomes[mc.ALL_EQUAL].wilson_upper_95 > 1e-2

    def test_report_json_shape(self, ecc, realized):
        import json

        t, gains = realized
        params = make_params(ecc, 3, 10**5, 1e-2, eta=0.5, p_dark=1e-6)
        rep = mc.verify_bound(b.STRATEGY_LAST, params, gains, t, trials=2000, seed=1)
        data = json.loads(rep.to_json())
        assert {"strategy", "alpha2", "threshold_r", "p_error", "pass", "scenarios"} <= set(data)
        for sc in data["scenarios"]:
            assert {"strategy", "scenario", "trials", "errors", "error_rate",
                    "wilson_upper_95", "pass"} <= set(sc)

    def test_conservative_over_parameter_grid(self, ecc, realized):
        t, gains = realized
        for p_error in (1e-2, 3e-2):
            for p_dark in (1e-7, 1e-6):
                params = make_params(ecc, 3, 10**5, p_error, eta=0.5, p_dark=p_dark)
                for strategy in (b.STRATEGY_FIRST, b.STRATEGY_LAST):
                    rep = mc.verify_bound(strategy, params, gains, t, trials=3000, seed=11)
                    assert rep.passed, (strategy, p_error, p_dark)


class TestIdealGainCrossCheck:
    def test_both_strategies_ideal_circuit(self, ecc):
        # closed-form bounds at ideal gains, checked against the oracle on
        # the ideal tree with no dark counts; M keeps K*alpha2/M deep inside
        # the small-photon regime, where the tail guarantee is airtight
        t = tree_matrix(3)
        gains = gn.gain_set(t)
        params = make_params(ecc, 3, 10**5, 1e-2, eta=1.0, p_dark=0.0)
        for strategy in (b.STRATEGY_FIRST, b.STRATEGY_LAST):
            rep = mc.verify_bound(strategy, params, gains, t, trials=3000, seed=21)
            assert rep.passed, strategy
