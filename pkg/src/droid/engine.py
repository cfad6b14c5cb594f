"""Cohort-by-cohort trial conduct.

Wires the stage-I allocation rules, the stage-II randomization and
monitoring, and the final analysis around TrialState.  A caller records
cohort outcomes and calls advance(); everything else (dose moves,
eliminations, the stage transition, drops, completion) happens here, with
every state change routed through the TrialState mutation API so the
decision log stays replayable.

All randomness is derived deterministically from the trial seed and the
enrollment count at the moment of the decision, so re-running a trial from
the same seed and outcomes reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .core import (
    MODEL_BASED,
    RAND_ADAPTIVE,
    TDR_DISCRETE,
    MODEL_ASSISTED,
    PosteriorSnapshot,
    Tdr,
    TrialError,
    TrialState,
)
from .inference import (
    ToxicityModelSpec,
    beta_binomial_posterior,
    default_emax_spec,
    fit_emax,
    fit_toxicity,
)
from .rules import Stage1Snapshot, next_allocation, select_rp2s, select_tdr, snapshot_from_state
from .stage2 import (
    FinalAnalysis,
    RandPolicy,
    draw_stage2_cohort,
    final_analysis,
    refresh_rp2s,
    stage2_monitor,
)

# seed-derivation namespaces: one per independent random stream
NS_PATIENT = 0      # simulated patient outcomes (used by the simulator)
NS_MCMC = 1         # posterior sampler seeds
NS_RAND = 2         # stage-II randomization
NS_MONITOR = 3      # stage-II monitoring draw matrices
NS_FINAL = 4        # final-analysis draw matrices

_MASK64 = (1 << 64) - 1


def derive_seed(*key: int) -> int:
    """Deterministic 32-bit seed from an integer key tuple."""
    parts = tuple(int(k) & _MASK64 for k in key)
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def derive_rng(*key: int) -> np.random.Generator:
    parts = tuple(int(k) & _MASK64 for k in key)
    return np.random.default_rng(np.random.SeedSequence(parts))


def fit_activity_curve(state: TrialState):
    """Refit the activity curve to the trial's current data.

    The sampler seed is derived from (trial seed, enrollment count), so a
    fit at a given data state is reproducible without an external seed.
    """
    cfg = state.config
    pairs = [(cfg.grid.doses[p.dose_index - 1], p.y_s) for p in state.patients]
    return fit_emax(pairs, default_emax_spec(), settings=cfg.mcmc,
                    eval_doses=cfg.grid.doses,
                    seed=derive_seed(state.seed, NS_MCMC,
                                     state.n_enrolled, 1))


def fit_current(state: TrialState):
    """Refit both dose-response models to the trial's current data."""
    cfg = state.config
    counts = list(zip(state.counts_per_dose(), state.tox_counts_per_dose()))
    tox = fit_toxicity(counts, ToxicityModelSpec(skeleton=cfg.grid.skeleton),
                       settings=cfg.mcmc,
                       seed=derive_seed(state.seed, NS_MCMC,
                                        state.n_enrolled, 0))
    return tox, fit_activity_curve(state)


def _snapshot(state: TrialState, with_fits: bool) -> Stage1Snapshot:
    fits = fit_current(state) if with_fits else (None, None)
    return snapshot_from_state(state, *fits)


# ---------------------------------------------------------------------------
# stage I


def evaluate_stage1(state: TrialState) -> None:
    """One stage-I rule evaluation: stop, close out the stage, or recommend
    the next cohort(s)."""
    cfg = state.config
    closing = (cfg.stage1_budget - state.n_enrolled) // cfg.cohort_size < 1
    need_fits = cfg.stage1_mode == MODEL_BASED or \
        (closing and cfg.tdr_mode != TDR_DISCRETE)
    snap = _snapshot(state, need_fits)
    if closing:
        _close_stage1(state, snap)
        return

    dec = next_allocation(state, snap)
    inputs = {"n_enrolled": state.n_enrolled, "trace": list(dec.trace)}
    if dec.kind == "stop":
        state.apply_stage1_eval(inputs, {
            "stop": dec.reason,
            "eliminated_high": dec.eliminated_high,
            "eliminated_low": dec.eliminated_low,
        })
        return
    if dec.kind == "split":
        j_t, j_s = dec.candidate_t, dec.candidate_s
    elif dec.candidate_t <= dec.candidate_s:
        # processes merged: both settle on the treated dose
        j_t = j_s = dec.candidate_t
    else:
        # budget allowed only the activity-side cohort
        j_t, j_s = state.j_t, dec.candidate_s
    state.apply_stage1_eval(inputs, {
        "j_t": j_t, "j_s": j_s, "pending": dec.pending,
        "eliminated_high": dec.eliminated_high,
        "eliminated_low": dec.eliminated_low,
    })


def _terminal_reason(cfg, snap: Stage1Snapshot, state: TrialState,
                     tdr: Tdr) -> str:
    """Label an empty close-out: toxicity when no usable dose meets the
    toxicity limit, futility otherwise (activity or response inadequate)."""
    if not tdr.is_empty:
        return "futility"
    if cfg.tdr_mode == TDR_DISCRETE:
        lo = 1 if state.eliminated_low is None else state.eliminated_low + 1
        hi = cfg.n_doses if state.eliminated_high is None \
            else state.eliminated_high - 1
        if cfg.stage1_mode == MODEL_ASSISTED:
            p_iso, _, tried = snap.isotonic_estimates()
            p_est = dict(zip(tried, p_iso))
        else:
            tried = [j + 1 for j, n in enumerate(snap.n_j) if n > 0]
            p_est = {j: snap.tox_fit.p_hat[j - 1] for j in tried}
        usable = [j for j in tried if lo <= j <= hi]
        if not usable or all(p_est[j] > cfg.phi_t + 1e-12 for j in usable):
            return "toxicity"
        return "futility"
    return "toxicity" if snap.tox_fit.p_hat[0] > cfg.phi_t else "futility"


def _close_stage1(state: TrialState, snap: Stage1Snapshot) -> None:
    """Select the acceptable dose range and the randomization set; terminal
    when either comes up empty."""
    cfg = state.config
    tdr = select_tdr(cfg, snap, state.eliminated_low, state.eliminated_high)
    levels = tdr.levels(cfg.grid)
    rp2s = select_rp2s(levels, state.response_counts_per_dose(),
                       cfg.k_max, cfg.phi_e)
    inputs = {"n_enrolled": state.n_enrolled}
    close = {"tdr": tdr.to_dict(), "rp2s": rp2s, "terminal": False}
    if tdr.is_empty or not rp2s:
        close["terminal"] = True
        close["reason"] = _terminal_reason(cfg, snap, state, tdr)
    state.apply_stage1_eval(inputs, {"close": close})


def close_stage1_now(state: TrialState) -> TrialState:
    """Close out stage I on the data recorded so far.

    Selects the acceptable dose range and the randomization set exactly as
    the budget-exhaustion close-out would, discarding any outstanding
    cohort recommendation, then advances to the next decision point.
    """
    if state.stage != 1 or not state.active:
        raise TrialError("stage-I close-out on a non-stage-I trial")
    if state.n_enrolled == 0:
        raise TrialError("stage-I close-out needs at least one cohort")
    cfg = state.config
    need_fits = cfg.stage1_mode == MODEL_BASED or cfg.tdr_mode != TDR_DISCRETE
    _close_stage1(state, _snapshot(state, need_fits))
    return advance(state)


# ---------------------------------------------------------------------------
# stage II


def _policy(state: TrialState) -> RandPolicy:
    cfg = state.config
    desirability = None
    if cfg.rand_scheme == RAND_ADAPTIVE:
        # posterior-mean response rate under a uniform prior
        desirability = [(r + 1.0) / (n + 2.0)
                        for r, n in state.response_counts_per_dose()]
    return RandPolicy.from_config(cfg, desirability=desirability)


def evaluate_stage2(state: TrialState) -> None:
    """One stage-II look: monitor for drops, re-check for dose additions,
    then either randomize the next cohort or complete the stage."""
    cfg = state.config
    need_fits = cfg.stage1_mode == MODEL_BASED or \
        (cfg.allow_dose_addition and cfg.tdr_mode != TDR_DISCRETE)
    snap = _snapshot(state, need_fits)
    res = stage2_monitor(state, snap,
                         seed=derive_seed(state.seed, NS_MONITOR,
                                          state.n_enrolled))
    added = refresh_rp2s(state, snap)
    active = sorted((set(state.rp2s) | set(added))
                    - set(state.dropped_stage2) - set(res.newly_dropped))
    inputs = {"n_enrolled": state.n_enrolled, "monitor": res.to_dict()}
    outcome = {"dropped_added": list(res.newly_dropped),
               "rp2s_added": list(added)}

    policy = _policy(state)
    counts = state.counts_per_dose()
    if not any(counts[j - 1] < policy.per_dose_cap for j in active):
        outcome["complete"] = True
        state.apply_stage2_eval(inputs, outcome)
        run_final_analysis(state, snap)
        return
    rng = derive_rng(state.seed, NS_RAND, state.n_enrolled)
    outcome["pending"] = draw_stage2_cohort(state, policy, rng, active=active)
    state.apply_stage2_eval(inputs, outcome)


def posterior_snapshot(state: TrialState, tox_fit=None,
                       emax_fit=None) -> PosteriorSnapshot:
    """Per-dose posterior summaries on the current data.

    Fits whichever model the caller did not supply, so the summaries are
    available at any point of the trial in either conduct mode.
    """
    if tox_fit is None or emax_fit is None:
        fit_t, fit_e = fit_current(state)
        tox_fit = tox_fit if tox_fit is not None else fit_t
        emax_fit = emax_fit if emax_fit is not None else fit_e
    orr = [beta_binomial_posterior(r, n)
           for r, n in state.response_counts_per_dose()]
    return PosteriorSnapshot(
        p_hat=tuple(float(v) for v in tox_fit.p_hat),
        mu_hat=tuple(float(v) for v in emax_fit.mu_hat),
        pi_hat=tuple(b.mean for b in orr),
        beta_params=tuple((b.a, b.b) for b in orr),
        n_draws=tox_fit.draws.n_draws,
        tox_draws=tuple(float(v) for v in tox_fit.draws.column("alpha")),
        emax_draws=tuple(tuple(float(v) for v in row)
                         for row in emax_fit.draws.matrix))


def run_final_analysis(state: TrialState,
                       snap: Optional[Stage1Snapshot] = None) -> FinalAnalysis:
    """Dose-response assessment and optimal-dose selection; closes the
    trial."""
    if snap is None:
        snap = _snapshot(state, False)
    # final qualification reads the toxicity fit in model-based conduct
    if state.config.stage1_mode == MODEL_BASED and snap.tox_fit is None:
        tox_fit, emax_fit = fit_current(state)
        snap = replace(snap, tox_fit=tox_fit, emax_fit=emax_fit)
    elif snap.emax_fit is None:
        snap = replace(snap, emax_fit=fit_activity_curve(state))
    result = final_analysis(state, snap,
                            seed=derive_seed(state.seed, NS_FINAL,
                                             state.n_enrolled))
    state.apply_final(result.to_dict())
    return result


# ---------------------------------------------------------------------------
# driver


def advance(state: TrialState) -> TrialState:
    """Run rule evaluations until the trial recommends enrollment or ends.

    After construction and after each record_cohort call, this brings the
    trial to its next decision point: pending_alloc non-empty (enroll and
    record outcomes) or status no longer active.
    """
    while state.active and not state.pending_alloc:
        if state.stage == 1:
            evaluate_stage1(state)
        else:
            evaluate_stage2(state)
    return state
