import math

import numpy as np
import pytest
from scipy.stats import beta as beta_dist
from scipy.stats import norm

import oracles
from droid.core import McmcSettings, Tdr, TrialState, default_design
from droid.inference import DrawSet, EmaxFit, ToxicityFit, fit_emax, fit_toxicity
from droid.inference import ToxicityModelSpec, default_emax_spec, effective_doses
from droid.rules import (
    AllocationDecision,
    BoinBoundaries,
    Stage1Snapshot,
    boin_boundaries,
    decision_table,
    elimination_check,
    format_decision_table,
    mad_candidate_model_assisted,
    mad_candidate_model_based,
    mtd_candidate_model_assisted,
    mtd_candidate_model_based,
    next_allocation,
    pd_below_target_prob,
    pooled_pd_variance,
    select_rp2s,
    select_tdr,
    snapshot_from_state,
    stage1_stopping,
    toxicity_excess_prob,
)

REF_SKELETON = (0.05, 0.15, 0.30, 0.40, 0.55)


class TestBoinBoundaries:
    @pytest.mark.parametrize("phi,pair", [
        (0.20, (0.157, 0.238)),
        (0.25, (0.197, 0.298)),
        (0.30, (0.236, 0.358)),
        (0.35, (0.276, 0.419)),
        (0.40, (0.316, 0.480)),
    ])
    def test_toxicity_pairs(self, phi, pair):
        b = boin_boundaries(phi, 0.1)
        assert abs(b.lambda_e - pair[0]) < 1e-3
        assert abs(b.lambda_d - pair[1]) < 1e-3

    def test_matches_closed_form_oracle(self):
        for phi in (0.15, 0.22, 0.3, 0.37):
            b = boin_boundaries(phi, 0.1)
            le, ld = oracles.boin_bounds_closed_form(phi)
            assert b.lambda_e == pytest.approx(le, abs=1e-12)
            assert b.lambda_d == pytest.approx(ld, abs=1e-12)

    def test_pd_boundaries(self):
        b = boin_boundaries(0.3, 0.1)
        assert b.gamma_e == pytest.approx(0.08)
        assert b.gamma_d == pytest.approx(0.12)

    def test_brackets_targets(self):
        b = boin_boundaries(0.3, 0.1)
        assert b.lambda_e < 0.3 < b.lambda_d
        assert b.gamma_e < 0.1 < b.gamma_d

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            boin_boundaries(0.0, 0.1)
        with pytest.raises(ValueError):
            boin_boundaries(0.3, 0.0)

    def test_bad_bracket_rejected_by_type(self):
        with pytest.raises(ValueError, match="bracket"):
            BoinBoundaries(lambda_e=0.4, lambda_d=0.5, gamma_e=0.08,
                           gamma_d=0.12, phi_t=0.3, phi_s=0.1)


class TestModelBasedCandidates:
    def test_mad_escalates_toward_target(self):
        assert mad_candidate_model_based(1, (0.05, 0.12, 0.20), 0.1) == 2

    def test_mad_deescalates(self):
        assert mad_candidate_model_based(3, (0.10, 0.30, 0.40), 0.1) == 2

    def test_mad_tie_breaks_low(self):
        assert mad_candidate_model_based(1, (0.08, 0.12, 0.2), 0.1) == 1

    def test_mad_stays_on_target(self):
        assert mad_candidate_model_based(2, (0.01, 0.1, 0.4), 0.1) == 2

    def test_mad_clamps_at_top(self):
        assert mad_candidate_model_based(3, (0.01, 0.02, 0.03), 0.1) == 3

    def test_mtd_escalates(self):
        assert mtd_candidate_model_based(2, REF_SKELETON, 0.3) == 3

    def test_mtd_deescalates(self):
        assert mtd_candidate_model_based(2, (0.4, 0.5, 0.6), 0.3) == 1

    def test_mtd_tie_breaks_low(self):
        assert mtd_candidate_model_based(1, (0.25, 0.35), 0.3) == 1

    def test_mtd_clamps_at_bottom(self):
        assert mtd_candidate_model_based(1, (0.5, 0.6, 0.7), 0.3) == 1

    def test_never_skips_levels(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            est = np.sort(rng.uniform(0, 1, size=5))
            j = int(rng.integers(1, 6))
            for cand in (mtd_candidate_model_based(j, est.tolist(), 0.3),
                         mad_candidate_model_based(j, est.tolist(), 0.1)):
                assert abs(cand - j) <= 1
                assert 1 <= cand <= 5


class TestModelAssistedCandidates:
    def setup_method(self):
        self.b = boin_boundaries(0.3, 0.1)

    def test_pd_escalates_below_band(self):
        assert mad_candidate_model_assisted(2, 0.05, self.b, 5) == 3

    def test_pd_deescalates_above_band(self):
        assert mad_candidate_model_assisted(2, 0.15, self.b, 5) == 1

    def test_pd_stays_inside_band(self):
        assert mad_candidate_model_assisted(2, 0.10, self.b, 5) == 2

    def test_tox_stays_inside_band(self):
        assert mtd_candidate_model_assisted(2, 1 / 3, self.b, 5) == 2

    def test_tox_escalates_on_zero(self):
        assert mtd_candidate_model_assisted(2, 0.0, self.b, 5) == 3

    def test_tox_deescalates_on_two_thirds(self):
        assert mtd_candidate_model_assisted(2, 2 / 3, self.b, 5) == 1

    def test_boundaries_are_inclusive_exclusive(self):
        # escalate at exactly lambda_e; stay at exactly lambda_d
        assert mtd_candidate_model_assisted(2, self.b.lambda_e, self.b, 5) == 3
        assert mtd_candidate_model_assisted(2, self.b.lambda_d, self.b, 5) == 2

    def test_clamps_at_grid_ends(self):
        assert mtd_candidate_model_assisted(5, 0.0, self.b, 5) == 5
        assert mtd_candidate_model_assisted(1, 1.0, self.b, 5) == 1

    def test_blocked_escalation_stays(self):
        assert mtd_candidate_model_assisted(3, 0.0, self.b, 5, hi=3) == 3

    def test_blocked_deescalation_stays(self):
        assert mad_candidate_model_assisted(3, 0.9, self.b, 5, lo=3) == 3

    def test_eliminated_current_level_steps_back(self):
        assert mtd_candidate_model_assisted(4, 0.0, self.b, 5, hi=2) == 3
        assert mad_candidate_model_assisted(1, 0.5, self.b, 5, lo=3) == 2

    def test_missing_data_rejected(self):
        with pytest.raises(ValueError, match="no data"):
            mad_candidate_model_assisted(2, None, self.b, 5)


def snap(n_j, tox_j, pd_mean_j, pooled_var=0.0625, tox_fit=None, emax_fit=None):
    return Stage1Snapshot(n_j=tuple(n_j), tox_j=tuple(tox_j),
                          pd_mean_j=tuple(pd_mean_j), pooled_var=pooled_var,
                          tox_fit=tox_fit, emax_fit=emax_fit)


class TestEliminationCheck:
    def test_three_of_three_eliminates_upward(self):
        s = snap([3, 3, 0, 0, 0], [0, 3, 0, 0, 0], [0.2, 0.2, None, None, None])
        high, low = elimination_check(s, 0.3, 0.1, 0.95, 0.95)
        assert high == 2
        assert low is None
        assert abs(toxicity_excess_prob(3, 3, 0.3) - (1 - 0.3 ** 4)) < 1e-12

    def test_zero_of_three_keeps_dose(self):
        s = snap([3, 0, 0, 0, 0], [0, 0, 0, 0, 0], [0.2, None, None, None, None])
        assert elimination_check(s, 0.3, 0.1, 0.95, 0.95) == (None, None)
        assert abs(toxicity_excess_prob(3, 0, 0.3) - 0.7 ** 4) < 1e-12

    def test_no_data_no_elimination(self):
        s = snap([0] * 5, [0] * 5, [None] * 5)
        assert elimination_check(s, 0.3, 0.1, 0.95, 0.95) == (None, None)

    def test_evidence_floor_blocks_small_n(self):
        s = snap([2, 0, 0, 0, 0], [2, 0, 0, 0, 0], [0.2, None, None, None, None])
        assert elimination_check(s, 0.3, 0.1, 0.95, 0.95) == (None, None)

    def test_lowest_toxic_dose_reported(self):
        s = snap([3, 3, 3, 0, 0], [0, 3, 3, 0, 0], [0.2, 0.2, 0.2, None, None])
        high, _ = elimination_check(s, 0.3, 0.1, 0.95, 0.95)
        assert high == 2

    def test_futility_eliminates_downward(self):
        s = snap([3, 3, 0, 0, 0], [0, 0, 0, 0, 0], [0.0, 0.0, None, None, None],
                 pooled_var=1e-10)
        high, low = elimination_check(s, 0.3, 0.1, 0.95, 0.95)
        assert high is None
        assert low == 2

    def test_tail_matches_scipy(self):
        for n, x in [(3, 1), (6, 2), (9, 4), (12, 0)]:
            ours = toxicity_excess_prob(n, x, 0.3)
            ref = float(beta_dist.sf(0.3, 1 + x, 1 + n - x))
            assert abs(ours - ref) < 1e-12


class TestPdPosterior:
    def test_no_data_is_even_odds(self):
        assert pd_below_target_prob(0, None, 0.1, 0.0625) == 0.5

    def test_matches_hand_formula(self):
        n, ybar, phi_s, var = 6, 0.05, 0.1, 0.04
        prec = 1.0 + n / var
        post_mean = (phi_s + ybar * n / var) / prec
        post_sd = math.sqrt(1.0 / prec)
        expected = float(norm.cdf((phi_s - post_mean) / post_sd))
        assert pd_below_target_prob(n, ybar, phi_s, var) == pytest.approx(expected)

    def test_pooled_variance(self):
        assert pooled_pd_variance([[0.0, 1.0], [2.0, 4.0]]) == pytest.approx(1.25)
        assert pooled_pd_variance([[0.5], [0.7]]) == pytest.approx(0.0625)
        assert pooled_pd_variance([[], []]) == pytest.approx(0.0625)


class TestStage1Stopping:
    def test_toxic_lowest_dose_stops(self):
        cfg = default_design()
        s = snap([3, 0, 0, 0, 0], [3, 0, 0, 0, 0], [0.2, None, None, None, None])
        assert stage1_stopping(cfg, s) == "toxicity"

    def test_inactive_highest_dose_stops(self):
        cfg = default_design()
        s = snap([3, 0, 0, 0, 3], [0, 0, 0, 0, 0],
                 [0.5, None, None, None, 0.0], pooled_var=1e-10)
        assert stage1_stopping(cfg, s) == "futility"

    def test_toxicity_dominates(self):
        cfg = default_design()
        s = snap([3, 0, 0, 0, 3], [3, 0, 0, 0, 0],
                 [0.5, None, None, None, 0.0], pooled_var=1e-10)
        assert stage1_stopping(cfg, s) == "toxicity"

    def test_clean_data_continues(self):
        cfg = default_design()
        s = snap([3, 3, 0, 0, 0], [0, 1, 0, 0, 0], [0.3, 0.4, None, None, None])
        assert stage1_stopping(cfg, s) is None

    def test_evidence_floor(self):
        cfg = default_design()
        s = snap([2, 0, 0, 0, 0], [2, 0, 0, 0, 0], [0.2, None, None, None, None])
        assert stage1_stopping(cfg, s) is None

    def test_model_based_degenerate_posteriors(self):
        cfg = default_design(stage1_mode="model-based")
        spec = ToxicityModelSpec(skeleton=REF_SKELETON)
        hot = fit_toxicity([(6, 6), (0, 0), (0, 0), (0, 0), (0, 0)], spec,
                           McmcSettings(burn_in=500, draws=500, seed=1))
        flat = fit_emax([(0.9, 0.0)] * 6, default_emax_spec(),
                        McmcSettings(burn_in=500, draws=500, seed=2),
                        eval_doses=(0.1, 0.3, 0.5, 0.7, 0.9))
        s = snap([6, 0, 0, 0, 6], [6, 0, 0, 0, 0],
                 [0.0, None, None, None, 0.0], tox_fit=hot, emax_fit=flat)
        assert stage1_stopping(cfg, s) == "toxicity"

    def test_model_based_requires_fits(self):
        cfg = default_design(stage1_mode="model-based")
        s = snap([3, 0, 0, 0, 0], [0, 0, 0, 0, 0], [0.2, None, None, None, None])
        with pytest.raises(ValueError, match="fits"):
            stage1_stopping(cfg, s)


def trial_at(j_t, j_s, n_enrolled_doses, **overrides) -> TrialState:
    """Stage-I trial with the given process levels; cohorts recorded per
    (dose, outcomes) in n_enrolled_doses."""
    t = TrialState(config=default_design(**overrides), seed=1)
    t.pending_alloc = []
    for dose, outcomes in n_enrolled_doses:
        t.pending_alloc = [dose] * len(outcomes)
        t.record_cohort(dose, outcomes)
    t.j_t, t.j_s = j_t, j_s
    return t


def cohort(y_t=0, y_s=0.3, y_e=0, n=3):
    return [(y_t, y_s, y_e)] * n


def band_cohort(tox_count=0, pd_center=0.3):
    """One cohort of 3 with the given toxicity count and PD values spread
    around pd_center (keeps pooled variance realistic)."""
    offsets = (-0.02, 0.0, 0.02)
    return [(1 if i < tox_count else 0, pd_center + o, 0)
            for i, o in enumerate(offsets)]


class TestNextAllocation:
    def test_merge_single_at_toxicity_candidate(self):
        # both stats inside their bands: candidates stay at (2, 2) -> merged
        t = trial_at(2, 2, [(1, band_cohort(0, 0.35)),
                            (2, band_cohort(1, 0.10))])
        s = snapshot_from_state(t)
        d = next_allocation(t, s)
        assert d.kind == "single"
        assert d.cohorts == ((2, 3),)
        assert (d.candidate_t, d.candidate_s) == (2, 2)

    def test_split_when_candidates_diverge(self):
        # j_t=3 with 1/3 tox stays; j_s=1 with PD inside band stays -> split
        t = trial_at(3, 1, [(1, band_cohort(0, 0.10)),
                            (2, band_cohort(0, 0.30)),
                            (3, band_cohort(1, 0.50))])
        s = snapshot_from_state(t)
        d = next_allocation(t, s)
        assert d.kind == "split"
        assert d.cohorts == ((3, 3), (1, 3))
        assert d.candidate_t == 3 and d.candidate_s == 1
        assert d.pending == [3, 3, 3, 1, 1, 1]

    def test_last_cohort_goes_to_activity_candidate(self):
        # 11 cohorts spent, one left; force diverging candidates
        enrolled = [(1, band_cohort(0, 0.10))]
        for _ in range(5):
            enrolled.append((2, band_cohort(1, 0.50)))
            enrolled.append((3, band_cohort(1, 0.50)))
        t = trial_at(3, 1, enrolled)
        assert t.n_enrolled == 33
        s = snapshot_from_state(t)
        d = next_allocation(t, s)
        assert d.kind == "single"
        assert d.cohorts[0][0] == d.candidate_s

    def test_stop_propagates(self):
        t = trial_at(1, 1, [(1, cohort(y_t=1))])
        d = next_allocation(t, snapshot_from_state(t))
        assert d.kind == "stop"
        assert d.reason == "toxicity"

    def test_all_eliminated_stops(self):
        # doses 1-4 futile, dose 5 toxic; window empties -> stop
        data = [(j, cohort(y_s=0.0)) for j in (1, 2, 3, 4)]
        data.append((5, [(1, 0.5, 0), (1, 0.5, 0), (1, 0.51, 0)]))
        t = trial_at(4, 4, data)
        d = next_allocation(t, snapshot_from_state(t))
        assert d.kind == "stop"
        assert d.reason == "toxicity"

    def test_budget_exhausted_rejected(self):
        enrolled = [(1, cohort(y_s=0.1))] * 12
        t = trial_at(1, 1, enrolled)
        assert t.n_enrolled == 36
        with pytest.raises(ValueError, match="budget"):
            next_allocation(t, snapshot_from_state(t))

    def test_wrong_stage_rejected(self):
        t = trial_at(1, 1, [(1, cohort())])
        t.stage = 2
        with pytest.raises(ValueError, match="stage-I"):
            next_allocation(t, snapshot_from_state(t))

    def test_fresh_trial_first_allocation_is_dose_one(self):
        t = TrialState(config=default_design(), seed=3)
        assert t.pending_alloc == [1, 1, 1]

    def test_trace_is_populated(self):
        t = trial_at(2, 2, [(1, band_cohort(0, 0.35)),
                            (2, band_cohort(1, 0.10))])
        d = next_allocation(t, snapshot_from_state(t))
        assert any("candidate" in line for line in d.trace)


def fake_tox_fit(alpha=1.0, skeleton=REF_SKELETON):
    eff = tuple(effective_doses(skeleton))
    ds = DrawSet(matrix=np.full((4, 1), alpha), columns=("alpha",),
                 accept_rates=(0.3,), seed=0)
    from scipy.special import expit as _expit
    p = tuple(float(_expit(3.0 + alpha * d)) for d in eff)
    return ToxicityFit(draws=ds, effective=eff, alpha0=3.0, p_hat=p)


def fake_emax_fit(eta, tau, beta, gamma, doses=(0.1, 0.3, 0.5, 0.7, 0.9)):
    row = np.array([eta, tau, beta, gamma, 0.1])
    ds = DrawSet(matrix=np.tile(row, (4, 1)),
                 columns=("baseline", "span", "midpoint", "slope", "sigma"),
                 accept_rates=(0.3,) * 5, seed=0)
    mu = tuple(float(v) for v in oracles.emax_curve(np.array(doses), eta, tau, beta, gamma))
    return EmaxFit(draws=ds, doses=tuple(doses), mu_hat=mu)


class TestSelectTdr:
    def test_discrete_from_true_curve_shapes(self):
        # toxicity (0.05,0.10,0.15,0.18,0.45), PD (0.40,...) -> range 1..4
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit()
        object.__setattr__(tox, "p_hat", (0.05, 0.10, 0.15, 0.18, 0.45))
        em = fake_emax_fit(0.4, 0.2, 0.3, 2.0)
        object.__setattr__(em, "mu_hat", (0.40, 0.57, 0.58, 0.60, 0.60))
        s = snap([3, 3, 3, 3, 3], [0, 0, 0, 0, 1], [0.4, 0.57, 0.58, 0.6, 0.6],
                 tox_fit=tox, emax_fit=em)
        tdr = select_tdr(cfg, s)
        assert tdr == Tdr.discrete(1, 4)

    def test_all_inactive_is_empty(self):
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit()
        em = fake_emax_fit(0.01, 0.02, 0.5, 2.0)
        s = snap([3, 3, 3, 3, 3], [0] * 5, [0.02] * 5, tox_fit=tox, emax_fit=em)
        assert select_tdr(cfg, s).is_empty

    def test_crossed_thresholds_are_empty(self):
        # only dose 1 tolerable but activity starts at dose 2
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit()
        object.__setattr__(tox, "p_hat", (0.2, 0.5, 0.6, 0.7, 0.8))
        em = fake_emax_fit(0.4, 0.2, 0.3, 2.0)
        object.__setattr__(em, "mu_hat", (0.05, 0.2, 0.3, 0.4, 0.5))
        s = snap([3] * 5, [0] * 5, [0.05, 0.2, 0.3, 0.4, 0.5],
                 tox_fit=tox, emax_fit=em)
        assert select_tdr(cfg, s).is_empty

    def test_assisted_uses_isotonic_estimates(self):
        # raw toxicity rates (1/3, 0) pool to (1/6, 1/6): both tolerable
        cfg = default_design()
        t = trial_at(1, 1, [
            (1, [(1, 0.3, 1), (0, 0.32, 1), (0, 0.31, 0)]),
            (2, [(0, 0.5, 1), (0, 0.52, 0), (0, 0.51, 1)]),
        ])
        s = snapshot_from_state(t)
        p_iso, mu_iso, tried = s.isotonic_estimates()
        assert tried == [1, 2]
        assert p_iso == pytest.approx([1 / 6, 1 / 6], abs=1e-12)
        tdr = select_tdr(cfg, s)
        assert tdr == Tdr.discrete(1, 2)

    def test_assisted_pools_nonmonotone_rates(self):
        t = trial_at(1, 1, [
            (1, [(1, 0.3, 0)] * 3),
            (2, [(0, 0.5, 0), (0, 0.5, 1), (1, 0.5, 0)]),
        ])
        s = snapshot_from_state(t)
        p_iso, _, _ = s.isotonic_estimates()
        assert p_iso == pytest.approx([2 / 3, 2 / 3])

    def test_untried_doses_never_selected(self):
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit()  # p_hat = skeleton, all of 1..3 tolerable
        em = fake_emax_fit(0.2, 0.3, 0.4, 2.0)  # active everywhere
        s = snap([3, 3, 0, 0, 0], [0, 0, 0, 0, 0], [0.3, 0.4, None, None, None],
                 tox_fit=tox, emax_fit=em)
        tdr = select_tdr(cfg, s)
        assert tdr.hi <= 2

    def test_eliminations_restrict_range(self):
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit()
        em = fake_emax_fit(0.2, 0.3, 0.4, 2.0)
        s = snap([3] * 5, [0] * 5, [0.3] * 5, tox_fit=tox, emax_fit=em)
        full = select_tdr(cfg, s)
        assert full == Tdr.discrete(1, 3)
        cut = select_tdr(cfg, s, eliminated_high=3)
        assert cut == Tdr.discrete(1, 2)
        cut2 = select_tdr(cfg, s, eliminated_low=1)
        assert cut2 == Tdr.discrete(2, 3)

    def test_continuous_mode_inverts_curves(self):
        cfg = default_design(stage1_mode="model-based", tdr_mode="continuous")
        tox = fake_tox_fit(alpha=1.0)
        em = fake_emax_fit(0.05, 0.5, 0.5, 2.0)
        s = snap([3] * 5, [0] * 5, [0.3] * 5, tox_fit=tox, emax_fit=em)
        tdr = select_tdr(cfg, s)
        assert tdr.kind == "continuous"
        # activity crossing: 0.05 + 0.5 d^2/(0.25+d^2) = 0.1 -> d = 1/6
        assert tdr.lo == pytest.approx(math.sqrt(0.025 / 0.9), abs=1e-6)
        # toxicity crossing sits exactly at the third grid dose
        assert tdr.hi == pytest.approx(0.5, abs=1e-6)
        assert tdr.levels(cfg.grid) == [2, 3]

    def test_extrapolated_mode_unclamps_low_end_only(self):
        cfg = default_design(stage1_mode="model-based")
        tox = fake_tox_fit(alpha=1.0)
        em = fake_emax_fit(0.3, 0.3, 0.5, 2.0)  # active even at dose zero
        s = snap([3] * 5, [0] * 5, [0.4] * 5, tox_fit=tox, emax_fit=em)
        cont = select_tdr(cfg, s, mode="continuous")
        extr = select_tdr(cfg, s, mode="extrapolated")
        assert cont.lo == pytest.approx(0.1)
        assert extr.lo == pytest.approx(0.0, abs=1e-6)
        assert extr.hi == cont.hi == pytest.approx(0.5, abs=1e-6)

    def test_continuous_requires_fits(self):
        cfg = default_design(tdr_mode="continuous")
        s = snap([3] * 5, [0] * 5, [0.3] * 5)
        with pytest.raises(ValueError, match="fits"):
            select_tdr(cfg, s)


class TestSelectRp2s:
    def counts(self, pairs):
        return [(r, n) for r, n in pairs]

    def test_all_pass(self):
        counts = self.counts([(9, 20), (10, 20), (12, 22), (0, 0), (0, 0)])
        assert select_rp2s([1, 2, 3], counts, 3, 0.3) == [1, 2, 3]

    def test_top_k_by_rate(self):
        counts = self.counts([(9, 20), (10, 20), (12, 22), (0, 0), (0, 0)])
        assert select_rp2s([1, 2, 3], counts, 2, 0.3) == [2, 3]

    def test_filter_empties(self):
        counts = self.counts([(1, 20), (2, 20), (3, 20), (0, 0), (0, 0)])
        assert select_rp2s([1, 2, 3], counts, 3, 0.3) == []

    def test_tie_keeps_lower_dose(self):
        counts = self.counts([(5, 10), (5, 10), (0, 0), (0, 0), (0, 0)])
        assert select_rp2s([1, 2], counts, 1, 0.3) == [1]

    def test_threshold_is_strict(self):
        # posterior mean exactly phi_e fails the strict filter
        counts = self.counts([(2, 9), (0, 0), (0, 0), (0, 0), (0, 0)])
        # (1+2)/(2+9) = 3/11 < 0.3; use (5,18): 6/20 = 0.30 exactly
        counts[0] = (5, 18)
        assert select_rp2s([1], counts, 3, 0.3) == []

    def test_outside_tdr_ignored(self):
        counts = self.counts([(9, 10), (9, 10), (9, 10), (0, 0), (0, 0)])
        assert select_rp2s([2], counts, 3, 0.3) == [2]


class TestDecisionTable:
    def test_reference_rows(self):
        b = boin_boundaries(0.3, 0.1)
        rows = {r["n"]: r for r in decision_table(b, 12)}
        assert rows[3]["escalate_if_at_most"] == 0
        assert rows[3]["deescalate_if_at_least"] == 2
        assert rows[6]["escalate_if_at_most"] == 1
        assert rows[6]["deescalate_if_at_least"] == 3
        assert rows[9]["escalate_if_at_most"] == 2
        assert rows[9]["deescalate_if_at_least"] == 4

    def test_boundaries_consistent_with_rule(self):
        b = boin_boundaries(0.3, 0.1)
        for row in decision_table(b, 15):
            n = row["n"]
            esc = row["escalate_if_at_most"]
            de = row["deescalate_if_at_least"]
            assert esc / n <= b.lambda_e
            assert (esc + 1) / n > b.lambda_e
            if de <= n:
                assert de / n > b.lambda_d
                assert (de - 1) / n <= b.lambda_d

    def test_format_renders(self):
        b = boin_boundaries(0.3, 0.1)
        text = format_decision_table(b, 6)
        assert "escalate" in text and len(text.splitlines()) == 7

    def test_invalid_max_n(self):
        with pytest.raises(ValueError):
            decision_table(boin_boundaries(0.3, 0.1), 0)


class TestAllocationDecisionType:
    def test_stop_needs_reason(self):
        with pytest.raises(ValueError, match="reason"):
            AllocationDecision(kind="stop")

    def test_split_ordering_enforced(self):
        with pytest.raises(ValueError, match="candidate_t > candidate_s"):
            AllocationDecision(kind="split", cohorts=((1, 3), (2, 3)),
                               candidate_t=1, candidate_s=2)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            AllocationDecision(kind="both")

    def test_pending_expansion(self):
        d = AllocationDecision(kind="split", cohorts=((4, 2), (2, 3)),
                               candidate_t=4, candidate_s=2)
        assert d.pending == [4, 4, 2, 2, 2]

    def test_round_trip_dict(self):
        d = AllocationDecision(kind="single", cohorts=((2, 3),),
                               candidate_t=2, candidate_s=2, trace=("x",))
        assert d.to_dict()["cohorts"] == [[2, 3]]
