"""Stage-II randomization, drop monitoring, and final dose selection.

Stage II randomizes additional patients to the recommended dose set,
drops doses that turn out toxic or inactive, optionally admits doses
that qualify under accumulating data, and closes the trial with a
dose-response assessment and an optimal-dose pick.

Monitoring and selection are deterministic functions of the trial state
(Monte Carlo steps use a fixed internal substream); only randomize_next
and draw_stage2_cohort consume caller-supplied randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    MODEL_ASSISTED,
    RAND_ADAPTIVE,
    RAND_BALANCE,
    RAND_EQUAL,
    DesignConfig,
    TrialError,
    TrialState,
)
from .inference import (
    EmaxFit,
    beta_binomial_posterior,
    pava_matrix,
)
from .rules import Stage1Snapshot, select_rp2s, select_tdr

POC_ESTABLISHED = "established"
POC_NOT_ESTABLISHED = "not-established"

CRITERION_POSTERIOR = "posterior"
CRITERION_POINT = "point"

# doses with fewer observations are never dropped (too little evidence)
MONITOR_MIN_N = 3


# ---------------------------------------------------------------------------
# randomization


@dataclass(frozen=True)
class RandPolicy:
    """How stage-II patients are spread over the active dose set.

    `per_dose_cap` bounds the total (stage I + II) count at each dose; a
    dose at or above its cap is simply no longer eligible.  `desirability`
    holds a per-grid-level activity estimate and is required only by the
    adaptive scheme.
    """

    scheme: str = RAND_BALANCE
    per_dose_cap: int = 20
    desirability: Optional[tuple[float, ...]] = None

    def errors(self) -> list[str]:
        errs = []
        if self.scheme not in (RAND_EQUAL, RAND_BALANCE, RAND_ADAPTIVE):
            errs.append(f"unknown randomization scheme {self.scheme!r}")
        if self.per_dose_cap < 1:
            errs.append("per_dose_cap must be >= 1")
        if self.scheme == RAND_ADAPTIVE and self.desirability is None:
            errs.append("adaptive randomization needs desirability estimates")
        return errs

    @classmethod
    def from_config(cls, config: DesignConfig,
                    desirability: Optional[Sequence[float]] = None) -> "RandPolicy":
        return cls(scheme=config.rand_scheme,
                   per_dose_cap=config.per_dose_cap,
                   desirability=None if desirability is None
                   else tuple(float(v) for v in desirability))


def _counts_with_extra(state: TrialState,
                       extra: Optional[Sequence[int]]) -> list[int]:
    counts = state.counts_per_dose()
    for j in extra or ():
        counts[j - 1] += 1
    return counts


def randomization_probabilities(state: TrialState, policy: RandPolicy,
                                extra: Optional[Sequence[int]] = None,
                                active: Optional[Sequence[int]] = None
                                ) -> list[tuple[int, float]]:
    """(level, probability) over the eligible doses; empty when none remain.

    `extra` counts not-yet-recorded allocations toward the caps and the
    balance criterion, so a cohort can be drawn patient by patient without
    overshooting either.  `active` overrides the surviving set, letting a
    caller draw against drops or additions it has not applied yet.
    """
    errs = policy.errors()
    if errs:
        raise ValueError("; ".join(errs))
    counts = _counts_with_extra(state, extra)
    pool = state.surviving_set() if active is None else sorted(active)
    eligible = [j for j in pool if counts[j - 1] < policy.per_dose_cap]
    if not eligible:
        return []
    if policy.scheme == RAND_EQUAL:
        p = [1.0 / len(eligible)] * len(eligible)
    elif policy.scheme == RAND_BALANCE:
        low = min(counts[j - 1] for j in eligible)
        tied = [j for j in eligible if counts[j - 1] == low]
        p = [1.0 / len(tied) if j in tied else 0.0 for j in eligible]
    else:
        w = [max(policy.desirability[j - 1], 0.0) for j in eligible]
        total = sum(w)
        if total <= 0.0:
            p = [1.0 / len(eligible)] * len(eligible)
        else:
            p = [wi / total for wi in w]
    return list(zip(eligible, p))


def randomize_next(state: TrialState, policy: RandPolicy,
                   rng: np.random.Generator,
                   extra: Optional[Sequence[int]] = None) -> int:
    """Draw the dose level for the next stage-II patient."""
    pairs = randomization_probabilities(state, policy, extra)
    if not pairs:
        raise TrialError("no eligible dose for stage-II randomization")
    levels = [j for j, _ in pairs]
    probs = np.array([p for _, p in pairs])
    return int(levels[rng.choice(len(levels), p=probs)])


def draw_stage2_cohort(state: TrialState, policy: RandPolicy,
                       rng: np.random.Generator,
                       n: Optional[int] = None,
                       active: Optional[Sequence[int]] = None) -> list[int]:
    """Dose levels for the next stage-II cohort, drawn patient by patient.

    Earlier draws count toward the caps and the balance criterion for later
    ones.  Returns fewer than `n` levels when the caps leave less room, and
    raises when no dose has any room at all.
    """
    n = state.config.cohort_size if n is None else n
    drawn: list[int] = []
    for _ in range(n):
        pairs = randomization_probabilities(state, policy, extra=drawn,
                                            active=active)
        if not pairs:
            break
        levels = [j for j, _ in pairs]
        probs = np.array([p for _, p in pairs])
        drawn.append(int(levels[rng.choice(len(levels), p=probs)]))
    if not drawn:
        raise TrialError("no eligible dose for stage-II randomization")
    return drawn


# ---------------------------------------------------------------------------
# posterior draw matrices (model-assisted route)


def _pd_posterior_params(n: int, ybar: float, phi_s: float,
                         pooled_var: float) -> tuple[float, float]:
    # Normal(phi_s, 1) prior, known-variance likelihood; same update as the
    # stage-I futility tail so both stages read one posterior
    prec = 1.0 + n / pooled_var
    mean = (phi_s + ybar * n / pooled_var) / prec
    return mean, math.sqrt(1.0 / prec)


def assisted_posterior_draws(snap: Stage1Snapshot, phi_s: float,
                             n_draws: int = 4000, seed: int = 0
                             ) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Joint posterior samples of the per-dose toxicity rates and PD means
    over the tried levels, made monotone draw by draw.

    Returns (tried levels, toxicity matrix, PD matrix); matrices are
    n_draws x len(tried) and row i of each is one joint draw.
    """
    tried = [j + 1 for j, n in enumerate(snap.n_j) if n > 0]
    if not tried:
        raise ValueError("no treated dose to sample from")
    rng = np.random.default_rng(seed)
    n_vec = np.array([snap.n_j[j - 1] for j in tried], dtype=float)
    x_vec = np.array([snap.tox_j[j - 1] for j in tried], dtype=float)
    tox = rng.beta(1.0 + x_vec, 1.0 + n_vec - x_vec, size=(n_draws, len(tried)))
    means, sds = zip(*(_pd_posterior_params(snap.n_j[j - 1],
                                            snap.pd_mean_j[j - 1],
                                            phi_s, snap.pooled_var)
                       for j in tried))
    pd = rng.normal(np.array(means), np.array(sds), size=(n_draws, len(tried)))
    return tried, pava_matrix(tox, n_vec), pava_matrix(pd, n_vec)


# ---------------------------------------------------------------------------
# drop monitoring


@dataclass(frozen=True)
class MonitorResult:
    """Outcome of one group-sequential stage-II look.

    Probabilities are per grid level, None where the level was not
    evaluated (untreated, too few observations, or already inactive).
    """

    newly_dropped: tuple[int, ...]
    tox_prob: tuple[Optional[float], ...]
    fut_prob: tuple[Optional[float], ...]

    def to_dict(self) -> dict:
        return {"newly_dropped": list(self.newly_dropped),
                "tox_prob": list(self.tox_prob),
                "fut_prob": list(self.fut_prob)}


def stage2_monitor(state: TrialState, snap: Stage1Snapshot,
                   c_t2: Optional[float] = None,
                   c_s2: Optional[float] = None,
                   min_n: int = MONITOR_MIN_N,
                   n_draws: int = 4000, seed: int = 0) -> MonitorResult:
    """Safety and futility drop rules over the active dose set.

    A dose whose excess-toxicity probability clears c_t2 is dropped along
    with every higher active dose; a dose whose below-target-activity
    probability clears c_s2 is dropped along with every lower active dose.
    Tail probabilities come from the monotone joint posterior samples in
    model-assisted mode and from the fitted curve posteriors in model-based
    mode.  Already-dropped doses are never revisited.
    """
    config = state.config
    c_t2 = config.c_t2 if c_t2 is None else c_t2
    c_s2 = config.c_s2 if c_s2 is None else c_s2
    active = state.surviving_set()
    n_doses = config.n_doses
    tox_prob: list[Optional[float]] = [None] * n_doses
    fut_prob: list[Optional[float]] = [None] * n_doses

    if config.stage1_mode == MODEL_ASSISTED:
        tried, tox_mat, pd_mat = assisted_posterior_draws(
            snap, config.phi_s, n_draws=n_draws, seed=seed)
        col = {j: k for k, j in enumerate(tried)}
        for j in active:
            if j in col and snap.n_j[j - 1] >= min_n:
                tox_prob[j - 1] = float(np.mean(tox_mat[:, col[j]] > config.phi_t))
                fut_prob[j - 1] = float(np.mean(pd_mat[:, col[j]] < config.phi_s))
    else:
        if snap.tox_fit is None or snap.emax_fit is None:
            raise ValueError("model-based monitoring requires both fits")
        p_draws = snap.tox_fit.p_draws()
        mu_draws = snap.emax_fit.mu_draws(config.grid.doses)
        for j in active:
            if snap.n_j[j - 1] >= min_n:
                tox_prob[j - 1] = float(np.mean(p_draws[:, j - 1] > config.phi_t))
                fut_prob[j - 1] = float(np.mean(mu_draws[:, j - 1] < config.phi_s))

    dropped: set[int] = set()
    toxic = [j for j in active
             if tox_prob[j - 1] is not None and tox_prob[j - 1] > c_t2]
    if toxic:
        dropped.update(j for j in active if j >= min(toxic))
    futile = [j for j in active
              if fut_prob[j - 1] is not None and fut_prob[j - 1] > c_s2]
    if futile:
        dropped.update(j for j in active if j <= max(futile))
    return MonitorResult(newly_dropped=tuple(sorted(dropped)),
                         tox_prob=tuple(tox_prob), fut_prob=tuple(fut_prob))


def refresh_rp2s(state: TrialState, snap: Stage1Snapshot) -> list[int]:
    """Levels that newly qualify for randomization under the accumulated data.

    Re-runs the full stage-I close-out selection; returns only additions.
    Levels already dropped during stage II are never re-admitted, and the
    active set never shrinks here (drops happen in stage2_monitor).  No-op
    unless the design enables dose addition.
    """
    if not state.config.allow_dose_addition:
        return []
    tdr = select_tdr(state.config, snap,
                     eliminated_low=state.eliminated_low,
                     eliminated_high=state.eliminated_high)
    fresh = select_rp2s(tdr.levels(state.config.grid),
                        state.response_counts_per_dose(),
                        state.config.k_max, state.config.phi_e)
    return [j for j in fresh
            if j not in state.rp2s and j not in state.dropped_stage2]


# ---------------------------------------------------------------------------
# dose-response index and proof of concept


def dri_from_draws(mu_low: np.ndarray, mu_high: np.ndarray,
                   delta: float) -> float:
    """Fraction of joint draws where activity at the lowest dose sits below
    delta times activity at the highest tried dose."""
    mu_low = np.asarray(mu_low, dtype=float)
    mu_high = np.asarray(mu_high, dtype=float)
    if mu_low.shape != mu_high.shape or mu_low.size == 0:
        raise ValueError("draw vectors must be non-empty and aligned")
    return float(np.mean(mu_low < delta * mu_high))


def compute_dri(emax_fit: EmaxFit, lowest_dose: float,
                highest_tried_dose: float, delta: float) -> float:
    """Posterior probability of a dose-response relationship from the fitted
    activity curve, evaluated between the lowest grid dose and the highest
    dose any patient received."""
    draws = emax_fit.mu_draws(np.array([lowest_dose, highest_tried_dose]))
    return dri_from_draws(draws[:, 0], draws[:, 1], delta)


def establish_poc(dri: float, c_dri: float) -> str:
    """Strictly-greater cutoff on the dose-response index."""
    return POC_ESTABLISHED if dri > c_dri else POC_NOT_ESTABLISHED


# ---------------------------------------------------------------------------
# optimal-dose selection


@dataclass(frozen=True)
class DoseGate:
    """Per-dose evaluation of the two posterior selection conditions."""

    level: int
    pr_mu: float        # Pr(activity >= delta * activity at the top of S)
    pr_pi: float        # Pr(response rate >= phi_e)
    passes: bool

    def to_dict(self) -> dict:
        return {"level": self.level, "pr_mu": self.pr_mu,
                "pr_pi": self.pr_pi, "passes": self.passes}


def posterior_gates(s: Sequence[int], mu_cols: dict[int, np.ndarray],
                    orr_posteriors: Sequence, delta: float,
                    c_1: float, c_2: float, phi_e: float) -> list[DoseGate]:
    """Evaluate the joint plateau condition and the response gate per dose.

    `mu_cols` maps each level to its activity draw vector; vectors share the
    draw index, so the plateau comparison happens within a draw.  A level in
    `s` without a draw vector cannot demonstrate the plateau and gets 0.
    `orr_posteriors` is indexed by grid level (1-based) and needs prob_geq.
    """
    levels = sorted(s)
    if not levels:
        return []
    top = mu_cols.get(levels[-1])
    gates = []
    for j in levels:
        col = mu_cols.get(j)
        if col is None or top is None:
            pr_mu = 0.0
        else:
            pr_mu = float(np.mean(np.asarray(col) >= delta * np.asarray(top)))
        pr_pi = float(orr_posteriors[j - 1].prob_geq(phi_e))
        gates.append(DoseGate(level=j, pr_mu=pr_mu, pr_pi=pr_pi,
                              passes=pr_mu > c_1 and pr_pi > c_2))
    return gates


def select_optimal_posterior(s: Sequence[int], emax_fit: EmaxFit,
                             orr_posteriors: Sequence, doses: Sequence[float],
                             delta: float, c_1: float, c_2: float,
                             phi_e: float) -> Optional[int]:
    """Lowest surviving dose clearing both posterior gates, None if none does."""
    levels = sorted(s)
    if not levels:
        return None
    draws = emax_fit.mu_draws(np.array([doses[j - 1] for j in levels]))
    mu_cols = {j: draws[:, k] for k, j in enumerate(levels)}
    for gate in posterior_gates(levels, mu_cols, orr_posteriors,
                                delta, c_1, c_2, phi_e):
        if gate.passes:
            return gate.level
    return None


def select_optimal_point(s: Sequence[int], mu_hat: Sequence[float],
                         pi_hat: Sequence[float], delta: float,
                         phi_e: float) -> Optional[int]:
    """Point-estimate variant: lowest surviving dose whose activity estimate
    reaches delta times the top surviving dose's and whose response-rate
    estimate reaches phi_e (both comparisons non-strict)."""
    levels = sorted(s)
    if not levels:
        return None
    top = mu_hat[levels[-1] - 1]
    if top is None:
        return None
    for j in levels:
        mu_j, pi_j = mu_hat[j - 1], pi_hat[j - 1]
        if mu_j is None:
            continue
        if mu_j >= delta * top and pi_j >= phi_e:
            return j
    return None


def requalify_surviving(config: DesignConfig, snap: Stage1Snapshot,
                        s: Sequence[int]) -> list[int]:
    """Surviving doses still inside the recommended range on pooled data.

    A dose can drift over the toxicity limit (or under the activity
    target) during stage II without tripping the posterior drop monitor,
    whose thresholds demand near-certainty.  Before any dose may be
    picked, both range bounds are re-checked on the final point
    estimates, read through the same estimator that closed stage I.
    """
    if config.stage1_mode == MODEL_ASSISTED:
        p_iso, mu_iso, tried = snap.isotonic_estimates()
        p_est = dict(zip(tried, p_iso))
        mu_est = dict(zip(tried, mu_iso))
    else:
        if snap.tox_fit is None or snap.emax_fit is None:
            raise TrialError("model-based qualification requires both fits")
        p_est = {j: snap.tox_fit.p_hat[j - 1] for j in s}
        mu_est = {j: snap.emax_fit.mu_hat[j - 1] for j in s}
    return [j for j in sorted(s)
            if p_est.get(j, 1.0) <= config.phi_t + 1e-12
            and mu_est.get(j, 0.0) >= config.phi_s - 1e-12]


# ---------------------------------------------------------------------------
# final analysis


@dataclass(frozen=True)
class FinalAnalysis:
    """End-of-trial readout: dose-response evidence, the concept verdict,
    and the selected dose, plus everything needed to re-check them offline.

    `surviving` is the dose set that came out of stage-II monitoring;
    `qualified` is its subset still meeting both range bounds on the
    pooled data, the only doses eligible for selection.  per_dose rows
    carry n, toxicity count, responders/evaluated, the point estimates,
    and the gate probabilities where evaluated.
    """

    dri: float
    poc: str
    optimal_level: Optional[int]
    surviving: tuple[int, ...]
    qualified: tuple[int, ...]
    criterion: str
    highest_tried_level: Optional[int]
    delta: float
    c_dri: float
    c_1: float
    c_2: float
    phi_e: float
    per_dose: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (0.0 <= self.dri <= 1.0):
            raise ValueError("dri outside [0,1]")
        if self.poc not in (POC_ESTABLISHED, POC_NOT_ESTABLISHED):
            raise ValueError(f"unknown poc verdict {self.poc!r}")
        if self.criterion not in (CRITERION_POSTERIOR, CRITERION_POINT):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not set(self.qualified) <= set(self.surviving):
            raise ValueError("qualified set outside the surviving set")
        if self.optimal_level is not None:
            if self.optimal_level not in self.qualified:
                raise ValueError("optimal dose outside the qualified set")
            if self.poc != POC_ESTABLISHED:
                raise ValueError("optimal dose without established concept")

    def to_dict(self) -> dict:
        return {"dri": self.dri, "poc": self.poc,
                "optimal_level": self.optimal_level,
                "surviving": list(self.surviving),
                "qualified": list(self.qualified),
                "criterion": self.criterion,
                "highest_tried_level": self.highest_tried_level,
                "delta": self.delta, "c_dri": self.c_dri,
                "c_1": self.c_1, "c_2": self.c_2, "phi_e": self.phi_e,
                "per_dose": [dict(row) for row in self.per_dose]}

    @classmethod
    def from_dict(cls, d: dict) -> "FinalAnalysis":
        d = dict(d)
        d["surviving"] = tuple(d["surviving"])
        d["qualified"] = tuple(d["qualified"])
        d["per_dose"] = tuple(dict(row) for row in d["per_dose"])
        return cls(**d)


def final_analysis(state: TrialState, snap: Stage1Snapshot,
                   n_draws: int = 8000, seed: int = 0) -> FinalAnalysis:
    """Close out stage II on the pooled data.

    Activity is read through two posteriors with complementary strengths:
    the monotone joint posterior over the tried doses (per-dose pooling,
    faithful to kinks in the profile) and the fitted curve posterior
    (borrows strength across the whole grid).  The dose-response index
    compares the lowest grid dose against the highest tried dose on the
    fitted curve, whose top-of-range estimate stays stable when few
    patients sat at the top.  The per-dose plateau gates average the two
    posteriors with equal weight, so neither model's blind spot decides
    the pick alone.

    Selection is restricted to surviving doses that still meet both
    range bounds on the pooled point estimates; the drop monitor only
    removes doses on near-certain evidence, so a dose sitting past the
    toxicity limit at the end must be screened out here rather than
    picked.  The optimal dose is reported only when the dose-response
    relationship is established; per-dose summaries are emitted
    regardless so a flat readout can still be reviewed.
    """
    config = state.config
    s = state.surviving_set()
    h_star = state.highest_tried()
    if h_star is None:
        raise TrialError("final analysis needs at least one treated patient")
    if snap.emax_fit is None:
        raise TrialError("final analysis needs a fitted activity curve")
    doses = config.grid.doses
    orr = [beta_binomial_posterior(r, n)
           for r, n in state.response_counts_per_dose()]
    pi_hat = [b.mean for b in orr]

    dri = compute_dri(snap.emax_fit, doses[0], doses[h_star - 1],
                      config.delta)

    half = max(n_draws // 2, 1)
    tried, _, pd_mat = assisted_posterior_draws(snap, config.phi_s,
                                                n_draws=half, seed=seed)
    curve = snap.emax_fit.mu_draws(np.asarray(doses))
    # equal-weight average = equal draw counts from each component
    m = min(half, curve.shape[0])
    mu_cols = {j: np.concatenate([pd_mat[:m, k], curve[:m, j - 1]])
               for k, j in enumerate(tried)}
    mu_hat = [float(np.mean(mu_cols[j])) if j in mu_cols
              else float(np.mean(curve[:, j - 1]))
              for j in range(1, config.n_doses + 1)]

    poc = establish_poc(dri, config.c_dri)
    qualified = requalify_surviving(config, snap, s)
    gates = posterior_gates(qualified, mu_cols, orr, config.delta,
                            config.c_1, config.c_2, config.phi_e)
    gate_by_level = {g.level: g for g in gates}

    optimal = None
    if poc == POC_ESTABLISHED:
        if config.optimal_rule == CRITERION_POSTERIOR:
            optimal = next((g.level for g in gates if g.passes), None)
        else:
            optimal = select_optimal_point(qualified, mu_hat, pi_hat,
                                           config.delta, config.phi_e)

    counts = state.counts_per_dose()
    tox = state.tox_counts_per_dose()
    resp = state.response_counts_per_dose()
    per_dose = []
    for j in range(1, config.n_doses + 1):
        gate = gate_by_level.get(j)
        per_dose.append({
            "level": j, "dose": doses[j - 1],
            "n": counts[j - 1], "tox": tox[j - 1],
            "responders": resp[j - 1][0], "evaluated": resp[j - 1][1],
            "mu_hat": mu_hat[j - 1], "pi_hat": pi_hat[j - 1],
            "pr_mu": None if gate is None else gate.pr_mu,
            "pr_pi": None if gate is None else gate.pr_pi,
            "in_s": j in s,
            "qualified": j in qualified,
            "dropped": j in state.dropped_stage2,
        })

    return FinalAnalysis(dri=dri, poc=poc, optimal_level=optimal,
                         surviving=tuple(s),
                         qualified=tuple(qualified),
                         criterion=config.optimal_rule,
                         highest_tried_level=h_star,
                         delta=config.delta, c_dri=config.c_dri,
                         c_1=config.c_1, c_2=config.c_2, phi_e=config.phi_e,
                         per_dose=tuple(per_dose))
