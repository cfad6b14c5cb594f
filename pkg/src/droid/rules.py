"""Stage-I decision engine: dual-process candidate rules, interval-based
escalation boundaries, elimination and stopping checks, the merge/split
allocation step, and close-out selection of the therapeutic dose range and
the randomization set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from droid.core import (
    MODEL_ASSISTED,
    MODEL_BASED,
    TDR_CONTINUOUS,
    TDR_DISCRETE,
    TDR_EXTRAPOLATED,
    DesignConfig,
    Tdr,
    TrialState,
)
from droid.inference import (
    EmaxFit,
    ToxicityFit,
    beta_binomial_posterior,
    pava_isotonic,
)

FALLBACK_PD_VAR = 0.25 ** 2


@dataclass(frozen=True)
class BoinBoundaries:
    """Escalation/de-escalation boundaries for the two monitored endpoints:
    toxicity rate boundaries (lambda_e, lambda_d) and mean-PD boundaries
    (gamma_e, gamma_d)."""

    lambda_e: float
    lambda_d: float
    gamma_e: float
    gamma_d: float
    phi_t: float
    phi_s: float

    def __post_init__(self):
        if not (self.lambda_e < self.phi_t < self.lambda_d):
            raise ValueError("toxicity boundaries must bracket phi_t")
        if not (self.gamma_e < self.phi_s < self.gamma_d):
            raise ValueError("PD boundaries must bracket phi_s")


def boin_boundaries(phi_t: float, phi_s: float) -> BoinBoundaries:
    """Interval boundaries: the toxicity pair comes from the optimal-interval
    construction with bracketing rates 0.6*phi_t and 1.4*phi_t; the PD pair
    is (0.8*phi_s, 1.2*phi_s)."""
    if not (0.0 < phi_t < 1.0):
        raise ValueError("phi_t outside (0,1)")
    if phi_s <= 0:
        raise ValueError("phi_s must be positive")
    p1, p2 = 0.6 * phi_t, 1.4 * phi_t
    lam_e = math.log((1 - p1) / (1 - phi_t)) / \
        math.log(phi_t * (1 - p1) / (p1 * (1 - phi_t)))
    lam_d = math.log((1 - phi_t) / (1 - p2)) / \
        math.log(p2 * (1 - phi_t) / (phi_t * (1 - p2)))
    return BoinBoundaries(lambda_e=lam_e, lambda_d=lam_d,
                          gamma_e=0.8 * phi_s, gamma_d=1.2 * phi_s,
                          phi_t=phi_t, phi_s=phi_s)


@dataclass(frozen=True)
class AllocationDecision:
    """Next-cohort allocation: a single cohort, a two-cohort split, or a stop.

    cohorts lists (dose_index, n_patients) per cohort to enroll.
    """

    kind: str                              # "single" | "split" | "stop"
    cohorts: tuple[tuple[int, int], ...] = ()
    reason: Optional[str] = None           # for kind="stop"
    candidate_t: Optional[int] = None
    candidate_s: Optional[int] = None
    eliminated_high: Optional[int] = None  # post-decision ratchet values
    eliminated_low: Optional[int] = None
    trace: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind == "stop":
            if self.reason not in ("toxicity", "futility"):
                raise ValueError("stop requires a reason")
        elif self.kind == "split":
            if not (self.candidate_t is not None and self.candidate_s is not None
                    and self.candidate_t > self.candidate_s):
                raise ValueError("split requires candidate_t > candidate_s")
            if len(self.cohorts) != 2:
                raise ValueError("split must allocate exactly two cohorts")
        elif self.kind == "single":
            if len(self.cohorts) != 1:
                raise ValueError("single must allocate exactly one cohort")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def pending(self) -> list[int]:
        out: list[int] = []
        for dose, n in self.cohorts:
            out.extend([dose] * n)
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cohorts": [list(c) for c in self.cohorts],
                "reason": self.reason, "candidate_t": self.candidate_t,
                "candidate_s": self.candidate_s,
                "eliminated_high": self.eliminated_high,
                "eliminated_low": self.eliminated_low,
                "trace": list(self.trace)}


@dataclass(frozen=True)
class Stage1Snapshot:
    """Everything the stage-I rules read: per-dose sufficient statistics and,
    in model-based mode, the two fitted posteriors."""

    n_j: tuple[int, ...]
    tox_j: tuple[int, ...]
    pd_mean_j: tuple[Optional[float], ...]
    pooled_var: float
    tox_fit: Optional[ToxicityFit] = None
    emax_fit: Optional[EmaxFit] = None

    @property
    def n_doses(self) -> int:
        return len(self.n_j)

    def isotonic_estimates(self) -> tuple[list[float], list[float], list[int]]:
        """(toxicity-rate fit, PD-mean fit, tried levels) over treated doses,
        each made monotone non-decreasing by isotonic regression."""
        tried = [j + 1 for j, n in enumerate(self.n_j) if n > 0]
        rates = [self.tox_j[j - 1] / self.n_j[j - 1] for j in tried]
        means = [self.pd_mean_j[j - 1] for j in tried]
        weights = [float(self.n_j[j - 1]) for j in tried]
        if not tried:
            return [], [], []
        return (pava_isotonic(rates, weights),
                pava_isotonic(means, weights), tried)


def snapshot_from_state(state: TrialState,
                        tox_fit: Optional[ToxicityFit] = None,
                        emax_fit: Optional[EmaxFit] = None) -> Stage1Snapshot:
    n_j = state.counts_per_dose()
    tox_j = state.tox_counts_per_dose()
    pd_vals = state.pd_values_per_dose()
    means = tuple(float(np.mean(v)) if v else None for v in pd_vals)
    return Stage1Snapshot(n_j=tuple(n_j), tox_j=tuple(tox_j), pd_mean_j=means,
                          pooled_var=pooled_pd_variance(pd_vals),
                          tox_fit=tox_fit, emax_fit=emax_fit)


def pooled_pd_variance(pd_values: Sequence[Sequence[float]],
                       fallback: float = FALLBACK_PD_VAR) -> float:
    """Within-dose pooled sample variance of the PD outcome; falls back to a
    fixed dispersion when fewer than two residual degrees of freedom exist."""
    ss = 0.0
    df = 0
    for vals in pd_values:
        n = len(vals)
        if n >= 2:
            m = sum(vals) / n
            ss += sum((v - m) ** 2 for v in vals)
            df += n - 1
    if df < 1:
        return fallback
    return max(ss / df, 1e-10)


def _argmin_closest(estimates: Sequence[float], target: float) -> int:
    """1-based index minimizing |estimate - target|; ties break low."""
    best, best_gap = 1, float("inf")
    for j, e in enumerate(estimates, start=1):
        gap = abs(e - target)
        if gap < best_gap - 1e-15:
            best, best_gap = j, gap
    return best


def mad_candidate_model_based(j_s: int, mu_hat: Sequence[float],
                              phi_s: float) -> int:
    """One step from j_s toward the dose whose mean-PD estimate is closest
    to phi_s (ties to the lower dose), clamped to the grid."""
    n_doses = len(mu_hat)
    j_star = _argmin_closest(mu_hat, phi_s)
    if j_star > j_s:
        return min(j_s + 1, n_doses)
    if j_star < j_s:
        return max(j_s - 1, 1)
    return j_s


def mtd_candidate_model_based(j_t: int, p_hat: Sequence[float],
                              phi_t: float) -> int:
    """One step from j_t toward the dose whose toxicity estimate is closest
    to phi_t (ties to the lower dose), clamped to the grid."""
    n_doses = len(p_hat)
    j_star = _argmin_closest(p_hat, phi_t)
    if j_star > j_t:
        return min(j_t + 1, n_doses)
    if j_star < j_t:
        return max(j_t - 1, 1)
    return j_t


def _assisted_step(j: int, stat: Optional[float], esc_bound: float,
                   deesc_bound: float, n_doses: int, lo: int, hi: int) -> int:
    if stat is None:
        raise ValueError(f"no data at current level {j}")
    # a level that is itself eliminated takes one forced step toward the
    # allowed window; voluntary moves into an eliminated level are blocked
    if j > hi:
        return max(j - 1, 1)
    if j < lo:
        return min(j + 1, n_doses)
    if stat <= esc_bound:
        cand = min(j + 1, n_doses)
        if cand > hi:
            cand = j
    elif stat > deesc_bound:
        cand = max(j - 1, 1)
        if cand < lo:
            cand = j
    else:
        cand = j
    return cand


def mad_candidate_model_assisted(j_s: int, mu_bar: Optional[float],
                                 bounds: BoinBoundaries, n_doses: int,
                                 lo: int = 1, hi: Optional[int] = None) -> int:
    """Interval rule on the sample PD mean at j_s: escalate at or below
    gamma_e, de-escalate above gamma_d, else stay."""
    return _assisted_step(j_s, mu_bar, bounds.gamma_e, bounds.gamma_d,
                          n_doses, lo, n_doses if hi is None else hi)


def mtd_candidate_model_assisted(j_t: int, p_bar: Optional[float],
                                 bounds: BoinBoundaries, n_doses: int,
                                 lo: int = 1, hi: Optional[int] = None) -> int:
    """Interval rule on the observed toxicity rate at j_t: escalate at or
    below lambda_e, de-escalate above lambda_d, else stay."""
    return _assisted_step(j_t, p_bar, bounds.lambda_e, bounds.lambda_d,
                          n_doses, lo, n_doses if hi is None else hi)


def toxicity_excess_prob(n: int, tox: int, phi_t: float,
                         prior: tuple[float, float] = (1.0, 1.0)) -> float:
    """Pr(toxicity rate > phi_t) under the conjugate Beta posterior."""
    return beta_binomial_posterior(tox, n, prior).prob_greater(phi_t)


def pd_below_target_prob(n: int, ybar: Optional[float], phi_s: float,
                         pooled_var: float) -> float:
    """Pr(mean PD < phi_s) under a Normal(phi_s, 1) prior with known-variance
    Gaussian likelihood (variance = pooled within-dose sample variance)."""
    if n == 0 or ybar is None:
        return 0.5
    prec = 1.0 + n / pooled_var
    post_mean = (phi_s + ybar * n / pooled_var) / prec
    post_sd = math.sqrt(1.0 / prec)
    return float(norm.cdf((phi_s - post_mean) / post_sd))


def elimination_check(snap: Stage1Snapshot, phi_t: float, phi_s: float,
                      c_t: float, c_s: float,
                      min_n: int = 3) -> tuple[Optional[int], Optional[int]]:
    """(lowest toxicity-eliminated level, highest futility-eliminated level).

    Toxicity elimination closes upward from the lowest dose with at least
    min_n patients whose Beta posterior exceeds phi_t with probability > c_t;
    futility elimination closes downward from the highest dose whose
    mean-PD posterior sits below phi_s with probability > c_s.
    """
    elim_high: Optional[int] = None
    elim_low: Optional[int] = None
    for j in range(1, snap.n_doses + 1):
        n = snap.n_j[j - 1]
        if n < min_n:
            continue
        if toxicity_excess_prob(n, snap.tox_j[j - 1], phi_t) > c_t:
            elim_high = j
            break
    for j in range(snap.n_doses, 0, -1):
        n = snap.n_j[j - 1]
        if n < min_n:
            continue
        if pd_below_target_prob(n, snap.pd_mean_j[j - 1], phi_s,
                                snap.pooled_var) > c_s:
            elim_low = j
            break
    return elim_high, elim_low


def stage1_stopping(config: DesignConfig, snap: Stage1Snapshot,
                    min_n: int = 3) -> Optional[str]:
    """Trial-level early stopping: "toxicity" when the lowest dose is too
    toxic, "futility" when the highest dose is inactive, None otherwise.
    Toxicity dominates when both fire."""
    n_doses = snap.n_doses
    if config.stage1_mode == MODEL_BASED:
        if snap.tox_fit is None or snap.emax_fit is None:
            raise ValueError("model-based stopping requires both fits")
        p1 = snap.tox_fit.p_draws()[:, 0]
        tox_prob = float(np.mean(p1 > config.phi_t))
        mu_top = snap.emax_fit.mu_draws()[:, n_doses - 1]
        fut_prob = float(np.mean(mu_top < config.phi_s))
        tox_ready = snap.n_j[0] >= 1
        fut_ready = snap.n_j[n_doses - 1] >= 1
    else:
        tox_ready = snap.n_j[0] >= min_n
        fut_ready = snap.n_j[n_doses - 1] >= min_n
        tox_prob = toxicity_excess_prob(snap.n_j[0], snap.tox_j[0],
                                        config.phi_t) if tox_ready else 0.0
        fut_prob = pd_below_target_prob(snap.n_j[n_doses - 1],
                                        snap.pd_mean_j[n_doses - 1],
                                        config.phi_s, snap.pooled_var) \
            if fut_ready else 0.0
    if tox_ready and tox_prob > config.c_t1:
        return "toxicity"
    if fut_ready and fut_prob > config.c_s1:
        return "futility"
    return None


def next_allocation(state: TrialState, snap: Stage1Snapshot) -> AllocationDecision:
    """Stage-I allocation step: stopping check, elimination update, both
    candidate rules, then the merge/split of the next cohort(s)."""
    cfg = state.config
    if state.stage != 1 or not state.active:
        raise ValueError("stage-I allocation on a non-stage-I trial")
    trace: list[str] = []

    stop = stage1_stopping(cfg, snap)
    if stop is not None:
        trace.append(f"early stop: {stop} rule fired")
        return AllocationDecision(kind="stop", reason=stop,
                                  eliminated_high=state.eliminated_high,
                                  eliminated_low=state.eliminated_low,
                                  trace=tuple(trace))

    n_doses = cfg.n_doses
    lo, hi = 1, n_doses
    elim_high, elim_low = state.eliminated_high, state.eliminated_low
    if cfg.stage1_mode == MODEL_ASSISTED:
        new_high, new_low = elimination_check(snap, cfg.phi_t, cfg.phi_s,
                                              cfg.c_t, cfg.c_s)
        if new_high is not None:
            elim_high = new_high if elim_high is None else min(elim_high, new_high)
            trace.append(f"toxicity elimination at level {elim_high} and above")
        if new_low is not None:
            elim_low = new_low if elim_low is None else max(elim_low, new_low)
            trace.append(f"futility elimination at level {elim_low} and below")
        lo = 1 if elim_low is None else elim_low + 1
        hi = n_doses if elim_high is None else elim_high - 1
        if lo > hi:
            reason = "toxicity" if elim_high is not None else "futility"
            trace.append("all levels eliminated")
            return AllocationDecision(kind="stop", reason=reason,
                                      eliminated_high=elim_high,
                                      eliminated_low=elim_low,
                                      trace=tuple(trace))

    if cfg.stage1_mode == MODEL_BASED:
        if snap.tox_fit is None or snap.emax_fit is None:
            raise ValueError("model-based allocation requires both fits")
        cand_t = mtd_candidate_model_based(state.j_t, snap.tox_fit.p_hat,
                                           cfg.phi_t)
        cand_s = mad_candidate_model_based(state.j_s, snap.emax_fit.mu_hat,
                                           cfg.phi_s)
    else:
        bounds = boin_boundaries(cfg.phi_t, cfg.phi_s)
        n_t = snap.n_j[state.j_t - 1]
        p_bar = snap.tox_j[state.j_t - 1] / n_t if n_t else None
        cand_t = mtd_candidate_model_assisted(state.j_t, p_bar, bounds,
                                              n_doses, lo, hi)
        cand_s = mad_candidate_model_assisted(state.j_s,
                                              snap.pd_mean_j[state.j_s - 1],
                                              bounds, n_doses, lo, hi)
    trace.append(f"toxicity-target candidate: level {cand_t}")
    trace.append(f"activity-target candidate: level {cand_s}")

    remaining = cfg.stage1_budget - state.n_enrolled
    cohorts_left = remaining // cfg.cohort_size
    if cohorts_left < 1:
        raise ValueError("stage-I budget exhausted")
    if cand_t <= cand_s:
        trace.append("processes merged: single cohort at the lower candidate")
        return AllocationDecision(kind="single",
                                  cohorts=((cand_t, cfg.cohort_size),),
                                  candidate_t=cand_t, candidate_s=cand_s,
                                  eliminated_high=elim_high,
                                  eliminated_low=elim_low,
                                  trace=tuple(trace))
    if cohorts_left == 1:
        trace.append("one cohort left: allocated to the activity-target dose")
        return AllocationDecision(kind="single",
                                  cohorts=((cand_s, cfg.cohort_size),),
                                  candidate_t=cand_t, candidate_s=cand_s,
                                  eliminated_high=elim_high,
                                  eliminated_low=elim_low,
                                  trace=tuple(trace))
    trace.append("split: one cohort at each candidate")
    return AllocationDecision(kind="split",
                              cohorts=((cand_t, cfg.cohort_size),
                                       (cand_s, cfg.cohort_size)),
                              candidate_t=cand_t, candidate_s=cand_s,
                              eliminated_high=elim_high,
                              eliminated_low=elim_low,
                              trace=tuple(trace))


def _invert_increasing(fn, target: float, lo: float, hi: float,
                       tol: float = 1e-10) -> Optional[float]:
    """Smallest x in [lo, hi] with fn(x) >= target, or None when fn stays
    below target on the whole interval (fn non-decreasing)."""
    if fn(hi) < target:
        return None
    if fn(lo) >= target:
        return lo
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if fn(mid) >= target:
            b = mid
        else:
            a = mid
    return b


def select_tdr(config: DesignConfig, snap: Stage1Snapshot,
               eliminated_low: Optional[int] = None,
               eliminated_high: Optional[int] = None,
               mode: Optional[str] = None) -> Tdr:
    """Close out stage I: the dose range bounded below by the lowest dose
    meeting the activity target and above by the highest dose meeting the
    toxicity limit."""
    mode = config.tdr_mode if mode is None else mode
    n_doses = config.n_doses
    lo_allowed = 1 if eliminated_low is None else eliminated_low + 1
    hi_allowed = n_doses if eliminated_high is None else eliminated_high - 1

    if mode == TDR_DISCRETE:
        if config.stage1_mode == MODEL_ASSISTED:
            p_iso, mu_iso, tried = snap.isotonic_estimates()
            p_est = dict(zip(tried, p_iso))
            mu_est = dict(zip(tried, mu_iso))
        else:
            if snap.tox_fit is None or snap.emax_fit is None:
                raise ValueError("model-based selection requires both fits")
            tried = [j + 1 for j, n in enumerate(snap.n_j) if n > 0]
            p_est = {j: snap.tox_fit.p_hat[j - 1] for j in tried}
            mu_est = {j: snap.emax_fit.mu_hat[j - 1] for j in tried}
        usable = [j for j in tried if lo_allowed <= j <= hi_allowed]
        mtd = max((j for j in usable if p_est[j] <= config.phi_t + 1e-12),
                  default=None)
        mad = min((j for j in usable if mu_est[j] >= config.phi_s - 1e-12),
                  default=None)
        if mtd is None or mad is None or mad > mtd:
            return Tdr.empty()
        return Tdr.discrete(mad, mtd)

    if mode not in (TDR_CONTINUOUS, TDR_EXTRAPOLATED):
        raise ValueError(f"unknown TDR mode {mode!r}")
    if snap.tox_fit is None or snap.emax_fit is None:
        raise ValueError("continuous selection requires both fits")
    doses = config.grid.doses
    d1, dj = doses[0], doses[-1]
    eff = snap.tox_fit.effective

    def p_curve(d: float) -> float:
        d_eff = float(np.interp(d, doses, eff))
        return float(np.mean(snap.tox_fit.p_draws(np.array([d_eff]))))

    def mu_curve(d: float) -> float:
        return float(np.mean(snap.emax_fit.mu_draws(np.array([d]))))

    search_lo = 0.0 if mode == TDR_EXTRAPOLATED else d1
    lo_cross = _invert_increasing(mu_curve, config.phi_s, search_lo, dj)
    if lo_cross is None:
        return Tdr.empty()
    lower = lo_cross if mode == TDR_EXTRAPOLATED else max(d1, lo_cross)

    if p_curve(d1) > config.phi_t:
        return Tdr.empty()
    hi_cross = _invert_increasing(p_curve, config.phi_t, d1, dj)
    upper = dj if hi_cross is None else hi_cross
    return Tdr.continuous(lower, upper)


def select_rp2s(tdr_levels: Sequence[int],
                response_counts: Sequence[tuple[int, int]],
                k_max: int, phi_e: float,
                prior: tuple[float, float] = (1.0, 1.0)) -> list[int]:
    """Randomization set: TDR levels whose posterior-mean response rate
    clears phi_e, trimmed to the k_max highest rates (ties keep the lower
    dose). response_counts is (responders, evaluated) per grid level."""
    scored = []
    for j in tdr_levels:
        r, n = response_counts[j - 1]
        pi_hat = beta_binomial_posterior(r, n, prior).mean
        if pi_hat > phi_e:
            scored.append((j, pi_hat))
    if len(scored) > k_max:
        scored.sort(key=lambda t: (-t[1], t[0]))
        scored = scored[:k_max]
    return sorted(j for j, _ in scored)


def decision_table(bounds: BoinBoundaries, max_n: int) -> list[dict]:
    """Protocol-appendix table: for each cohort total n, the largest toxicity
    count that still escalates and the smallest that de-escalates."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    rows = []
    for n in range(1, max_n + 1):
        esc = math.floor(bounds.lambda_e * n + 1e-12)
        deesc = math.floor(bounds.lambda_d * n + 1e-12) + 1
        rows.append({"n": n, "escalate_if_at_most": esc,
                     "deescalate_if_at_least": min(deesc, n + 1)})
    return rows


def format_decision_table(bounds: BoinBoundaries, max_n: int) -> str:
    lines = ["  n  escalate if #tox <=  de-escalate if #tox >="]
    for row in decision_table(bounds, max_n):
        de = row["deescalate_if_at_least"]
        lines.append(f"{row['n']:>3}  {row['escalate_if_at_most']:>19}  "
                     f"{de if de <= row['n'] else '-':>22}")
    return "\n".join(lines)
