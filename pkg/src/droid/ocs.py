"""Monte Carlo operating characteristics.

Runs the full two-stage design against a simulation scenario, many
replicates at a time, and aggregates selection percentages, patient
allocation, and early-stopping rates.  Also provides a single-endpoint
comparator that chases the toxicity target alone, for benchmarking the
dual-endpoint design against classic dose-escalation practice.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import (
    STATUS_COMPLETED,
    STATUS_STOPPED_FUT,
    STATUS_STOPPED_TOX,
    DesignConfig,
    TrialState,
)
from .engine import NS_PATIENT, advance, derive_rng, derive_seed
from .inference import ToxicityModelSpec, fit_toxicity
from .rules import mtd_candidate_model_based
from .scenarios import Scenario, generate_patient

POC_ESTABLISHED = "established"


def run_trial(config: DesignConfig, scenario: Scenario,
              seed: int) -> TrialState:
    """Simulate one complete trial; deterministic given (config, scenario,
    seed)."""
    if scenario.n_doses != config.n_doses:
        raise ValueError("scenario grid does not match the design grid")
    state = TrialState(config=config, seed=seed)
    rng = derive_rng(seed, NS_PATIENT)
    while state.active:
        if not state.pending_alloc:
            advance(state)
            continue
        dose = state.pending_alloc[0]
        want = sum(1 for j in state.pending_alloc if j == dose)
        outcomes = [generate_patient(scenario, dose, rng)
                    for _ in range(want)]
        state.record_cohort(dose, outcomes)
    return state


def replicate_row(state: TrialState, rep: int) -> dict:
    """Flat per-replicate summary used for aggregation and export."""
    final = state.final or {}
    return {
        "rep": rep,
        "seed": state.seed,
        "status": state.status,
        "selected": final.get("optimal_level"),
        "poc": final.get("poc"),
        "dri": final.get("dri"),
        "n_total": state.n_enrolled,
        "n_per_dose": state.counts_per_dose(),
    }


@dataclass(frozen=True)
class OCReport:
    """Aggregated operating characteristics for one design x scenario cell."""

    design_label: str
    scenario_name: str
    n_reps: int
    seed: int
    selection_fraction: tuple[float, ...]    # per dose level
    none_fraction: float                     # stopped early or no dose chosen
    mean_patients: tuple[float, ...]
    mean_total: float
    early_stop_fraction: float
    poc_fraction: float
    config_digest: str
    replicates: tuple[dict, ...] = field(default=(), repr=False)

    def __post_init__(self):
        total = sum(self.selection_fraction) + self.none_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError("selection fractions must sum to one")

    def selection_pct(self) -> list[float]:
        return [100.0 * f for f in self.selection_fraction]

    def to_dict(self) -> dict:
        return {
            "design": self.design_label,
            "scenario": self.scenario_name,
            "n_reps": self.n_reps,
            "seed": self.seed,
            "selection_fraction": list(self.selection_fraction),
            "none_fraction": self.none_fraction,
            "mean_patients": list(self.mean_patients),
            "mean_total": self.mean_total,
            "early_stop_fraction": self.early_stop_fraction,
            "poc_fraction": self.poc_fraction,
            "config_digest": self.config_digest,
        }


def config_digest(config: DesignConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _aggregate(rows: Sequence[dict], n_doses: int, design_label: str,
               scenario_name: str, seed: int, digest: str,
               keep_replicates: bool) -> OCReport:
    n = len(rows)
    sel = [0] * n_doses
    none = 0
    early = 0
    poc = 0
    tot_per = [0] * n_doses
    tot_all = 0
    for r in rows:
        if r["selected"] is None:
            none += 1
        else:
            sel[r["selected"] - 1] += 1
        if r["status"] in (STATUS_STOPPED_TOX, STATUS_STOPPED_FUT):
            early += 1
        if r["poc"] == POC_ESTABLISHED:
            poc += 1
        tot_all += r["n_total"]
        for j, c in enumerate(r["n_per_dose"]):
            tot_per[j] += c
    return OCReport(
        design_label=design_label,
        scenario_name=scenario_name,
        n_reps=n,
        seed=seed,
        selection_fraction=tuple(s / n for s in sel),
        none_fraction=none / n,
        mean_patients=tuple(t / n for t in tot_per),
        mean_total=tot_all / n,
        early_stop_fraction=early / n,
        poc_fraction=poc / n,
        config_digest=digest,
        replicates=tuple(rows) if keep_replicates else (),
    )


def _sim_chunk(args) -> list[dict]:
    config, scenario, root_seed, reps = args
    out = []
    for rep in reps:
        state = run_trial(config, scenario, derive_seed(root_seed, rep))
        out.append(replicate_row(state, rep))
    return out


def run_ocs(config: DesignConfig, scenario: Scenario, n_reps: int,
            seed: int, design_label: str = "droid",
            keep_replicates: bool = False, workers: int = 1) -> OCReport:
    """Operating characteristics over n_reps independent replicates.

    Replicate seeds are derived from (seed, rep) with a counter-based
    split, so results are reproducible for any worker count and each
    replicate's trial can be rerun in isolation.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    reps = list(range(n_reps))
    if workers <= 1:
        rows = _sim_chunk((config, scenario, seed, reps))
    else:
        chunks = [(config, scenario, seed, reps[i::workers])
                  for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sim_chunk, chunks))
        rows = sorted((r for part in parts for r in part),
                      key=lambda r: r["rep"])
    return _aggregate(rows, config.n_doses, design_label, scenario.name,
                      seed, config_digest(config), keep_replicates)


# ---------------------------------------------------------------------------
# single-endpoint comparator


def _select_mtd(estimates: Sequence[float], target: float) -> int:
    """Highest dose whose toxicity estimate stays at or under the target;
    the lowest-estimate dose when every dose exceeds it."""
    under = [j for j, e in enumerate(estimates, start=1) if e <= target]
    if under:
        return max(under)
    return min(range(1, len(estimates) + 1), key=lambda j: estimates[j - 1])


def run_comparator_trial(config: DesignConfig, scenario: Scenario,
                         seed: int) -> dict:
    """One replicate of the toxicity-only comparator.

    Cohorts of config.cohort_size up to the stage-I budget, starting at the
    lowest dose; after each cohort the slope model is refit and the next
    cohort moves one step toward the dose whose estimate is closest to the
    toxicity target.  The final selection is the highest dose whose
    end-of-trial estimate stays at or under the target.  No activity or
    response data are used.
    """
    cfg = config
    rng = derive_rng(seed, NS_PATIENT)
    spec = ToxicityModelSpec(skeleton=cfg.grid.skeleton)
    counts = [0] * cfg.n_doses
    tox = [0] * cfg.n_doses
    level = 1
    n_cohorts = cfg.stage1_budget // cfg.cohort_size
    fit = None
    for _ in range(n_cohorts):
        for _ in range(cfg.cohort_size):
            y_t, _, _ = generate_patient(scenario, level, rng)
            counts[level - 1] += 1
            tox[level - 1] += y_t
        fit = fit_toxicity(list(zip(counts, tox)), spec, settings=cfg.mcmc,
                           seed=derive_seed(seed, 1, sum(counts)))
        level = mtd_candidate_model_based(level, fit.p_hat, cfg.phi_t)
    return {
        "selected": _select_mtd(fit.p_hat, cfg.phi_t),
        "status": STATUS_COMPLETED,
        "poc": None,
        "dri": None,
        "n_total": sum(counts),
        "n_per_dose": counts,
        "seed": seed,
    }


def _comparator_chunk(args) -> list[dict]:
    config, scenario, root_seed, reps = args
    out = []
    for rep in reps:
        row = run_comparator_trial(config, scenario,
                                   derive_seed(root_seed, rep))
        row["rep"] = rep
        out.append(row)
    return out


def run_comparator_ocs(config: DesignConfig, scenario: Scenario, n_reps: int,
                       seed: int, design_label: str = "crm",
                       keep_replicates: bool = False,
                       workers: int = 1) -> OCReport:
    """Operating characteristics for the toxicity-only comparator."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    reps = list(range(n_reps))
    if workers <= 1:
        rows = _comparator_chunk((config, scenario, seed, reps))
    else:
        chunks = [(config, scenario, seed, reps[i::workers])
                  for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_comparator_chunk, chunks))
        rows = sorted((r for part in parts for r in part),
                      key=lambda r: r["rep"])
    return _aggregate(rows, config.n_doses, design_label, scenario.name,
                      seed, config_digest(config), keep_replicates)


# ---------------------------------------------------------------------------
# export


def write_ocs_csv(reports: Sequence[OCReport], path: str) -> None:
    """One row per (scenario, design, dose) plus a none row per cell.

    selection_pct is in percent; the none row leaves mean_patients empty.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "design", "dose", "selection_pct",
                    "mean_patients"])
        for rep in reports:
            for j in range(len(rep.selection_fraction)):
                w.writerow([rep.scenario_name, rep.design_label, j + 1,
                            f"{100.0 * rep.selection_fraction[j]:.4f}",
                            f"{rep.mean_patients[j]:.4f}"])
            w.writerow([rep.scenario_name, rep.design_label, "none",
                        f"{100.0 * rep.none_fraction:.4f}", ""])


def write_ocs_json(reports: Sequence[OCReport], path: str,
                   meta: Optional[dict] = None) -> None:
    payload = {"meta": meta or {}, "results": [r.to_dict() for r in reports]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
