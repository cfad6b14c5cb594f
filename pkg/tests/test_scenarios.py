"""Scenario calibration and correlated outcome generation."""

import numpy as np
import pytest

from droid.scenarios import (
    Scenario,
    builtin_scenario,
    builtin_scenarios,
    calibrate_intercept,
    calibrate_scenario,
    generate_patient,
    load_scenarios,
    sample_outcomes,
    save_scenarios,
    scenario_from_dict,
    _mean_link_prob,
)

DOSES = (0.1, 0.3, 0.5, 0.7, 0.9)


class TestCalibrateIntercept:
    def test_inverts_the_marginal_rate(self):
        for target in (0.02, 0.15, 0.45, 0.85):
            a = calibrate_intercept(target, shift_mean=0.3, shift_sd=1.0)
            assert _mean_link_prob(a, 0.3, 1.0) == pytest.approx(target,
                                                                 abs=1e-8)

    def test_monotone_in_target(self):
        lo = calibrate_intercept(0.1, 0.0, 1.0)
        hi = calibrate_intercept(0.6, 0.0, 1.0)
        assert lo < hi

    def test_rejects_degenerate_targets(self):
        with pytest.raises(ValueError, match="lie in"):
            calibrate_intercept(0.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="lie in"):
            calibrate_intercept(1.0, 0.0, 1.0)

    def test_unreachable_rate_raises(self):
        # a huge shift keeps the mean rate near one on the whole bracket
        with pytest.raises(ValueError, match="no intercept"):
            calibrate_intercept(0.5, shift_mean=80.0, shift_sd=0.1)


class TestCalibrateScenario:
    def test_quadrature_residual_is_tiny(self):
        s = builtin_scenario("3")
        for j in range(s.n_doses):
            sd_t = float(np.hypot(s.tox_slope * s.pd_sd, s.effect_sd))
            got = _mean_link_prob(s.tox_intercept[j],
                                  s.tox_slope * s.pd_mean[j], sd_t)
            assert got == pytest.approx(s.tox[j], abs=1e-8)
            sd_e = float(np.hypot(s.resp_slope * s.pd_sd, s.effect_sd))
            got = _mean_link_prob(s.resp_intercept[j],
                                  s.resp_slope * s.pd_mean[j], sd_e)
            assert got == pytest.approx(s.resp[j], abs=1e-8)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="grid length"):
            calibrate_scenario("x", (0.1, 0.2), (0.3, 0.4, 0.5),
                               (0.1, 0.2), doses=(0.1, 0.3))

    def test_rates_must_be_probabilities(self):
        with pytest.raises(ValueError):
            calibrate_scenario("x", (0.0, 0.2), (0.3, 0.4), (0.1, 0.2),
                               doses=(0.1, 0.3))


class TestSampling:
    def test_marginals_match_targets(self):
        s = builtin_scenario("1")
        rng = np.random.default_rng(2024)
        n = 150_000
        for j in (1, 3, 5):
            y_t, _, y_e = sample_outcomes(s, j, n, rng)
            for got, want in ((y_t.mean(), s.tox[j - 1]),
                              (y_e.mean(), s.resp[j - 1])):
                se = np.sqrt(want * (1 - want) / n)
                assert abs(got - want) < 4 * se

    def test_pd_marginal(self):
        s = builtin_scenario("5")
        rng = np.random.default_rng(7)
        _, y_s, _ = sample_outcomes(s, 4, 100_000, rng)
        assert y_s.mean() == pytest.approx(s.pd_mean[3], abs=0.002)
        assert y_s.std() == pytest.approx(s.pd_sd, abs=0.002)

    def test_outcomes_positively_associated(self):
        s = builtin_scenario("1")
        rng = np.random.default_rng(11)
        for j in range(1, 6):
            y_t, _, y_e = sample_outcomes(s, j, 50_000, rng)
            a = np.sum((y_t == 1) & (y_e == 1)) + 0.5
            b = np.sum((y_t == 1) & (y_e == 0)) + 0.5
            c = np.sum((y_t == 0) & (y_e == 1)) + 0.5
            d = np.sum((y_t == 0) & (y_e == 0)) + 0.5
            assert (a * d) / (b * c) > 1.0

    def test_no_shared_effect_breaks_association(self):
        s = calibrate_scenario("ind", (0.2,) * 3, (0.4,) * 3, (0.3,) * 3,
                               doses=(0.1, 0.3, 0.5), effect_sd=0.0,
                               tox_slope=0.0, resp_slope=0.0)
        rng = np.random.default_rng(13)
        y_t, _, y_e = sample_outcomes(s, 2, 200_000, rng)
        a = np.sum((y_t == 1) & (y_e == 1)) + 0.5
        b = np.sum((y_t == 1) & (y_e == 0)) + 0.5
        c = np.sum((y_t == 0) & (y_e == 1)) + 0.5
        d = np.sum((y_t == 0) & (y_e == 0)) + 0.5
        assert (a * d) / (b * c) == pytest.approx(1.0, abs=0.05)

    def test_deterministic_given_seed(self):
        s = builtin_scenario("2")
        a = sample_outcomes(s, 3, 10, np.random.default_rng(5))
        b = sample_outcomes(s, 3, 10, np.random.default_rng(5))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_generate_patient_shapes(self):
        s = builtin_scenario("2")
        y_t, y_s, y_e = generate_patient(s, 1, np.random.default_rng(3))
        assert y_t in (0, 1) and y_e in (0, 1)
        assert isinstance(y_s, float)


class TestBuiltins:
    def test_nine_scenarios_on_the_default_grid(self):
        all_s = builtin_scenarios()
        assert [s.name for s in all_s] == [str(k) for k in range(1, 10)]
        assert all(s.doses == DOSES for s in all_s)
        assert [s.optimal for s in all_s] == [2, 3, 3, 4, 4, 2, 5, 1, None]

    def test_flat_scenario_has_no_gradient(self):
        s = builtin_scenario("9")
        assert s.optimal is None
        assert max(s.pd_mean) - min(s.pd_mean) <= 0.01
        assert len(set(s.resp)) == 1

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            builtin_scenario("42")

    def test_scenario_errors_empty_for_builtins(self):
        assert all(s.errors() == [] for s in builtin_scenarios())


class TestJsonIO:
    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "scenarios.json")
        orig = [builtin_scenario("1"), builtin_scenario("9")]
        save_scenarios(orig, path)
        back = load_scenarios(path)
        assert back == orig    # recalibration reproduces the intercepts

    def test_single_object_file(self, tmp_path):
        path = str(tmp_path / "one.json")
        with open(path, "w") as fh:
            import json
            json.dump(builtin_scenario("4").to_dict(), fh)
        assert load_scenarios(path) == [builtin_scenario("4")]

    def test_from_dict_defaults(self):
        s = scenario_from_dict({"name": "d", "doses": [0.1, 0.3],
                                "tox": [0.1, 0.2], "resp": [0.3, 0.4],
                                "pd_mean": [0.1, 0.3]})
        assert s.pd_sd == 0.1 and s.effect_sd == 1.0
        assert s.optimal is None
