"""Why does the model lane over-admit dose 1 in scenario 5?"""
import numpy as np

from droid.core import DesignConfig, TrialState, MODEL_BASED, default_design
from droid.engine import advance, derive_rng, fit_activity_curve, NS_PATIENT
from droid.scenarios import builtin_scenarios, generate_patient

sc = [s for s in builtin_scenarios() if s.name == "5"][0]
cfg = default_design(stage1_mode=MODEL_BASED)

admit = 0
mu1s = []
gammas = []
n1_counts = []
closed = 0
for rep in range(200):
    state = TrialState(config=cfg, seed=rep)
    rng = derive_rng(rep, NS_PATIENT)
    stage1_counts = None
    while state.active:
        if not state.pending_alloc:
            advance(state)
            if state.stage == 2 and stage1_counts is None:
                stage1_counts = list(state.counts_per_dose())
                fit = fit_activity_curve(state)
                mu1s.append(fit.mu_hat[0])
                gammas.append(float(np.mean(fit.draws.column("slope"))))
                if state.tdr is not None and 1 in state.tdr.levels(cfg.grid):
                    admit += 1
                closed += 1
                break
            continue
        dose = state.pending_alloc[0]
        want = sum(1 for j in state.pending_alloc if j == dose)
        outcomes = [generate_patient(sc, dose, rng) for _ in range(want)]
        state.record_cohort(dose, outcomes)
    if stage1_counts is not None:
        n1_counts.append(stage1_counts)

mu1s = np.array(mu1s)
print(f"closed stage I: {closed}/200")
print(f"d1 in TDR: {admit}/{closed} = {admit/closed:.3f}")
print(f"mu_hat(d1): mean {mu1s.mean():.3f}  median {np.median(mu1s):.3f}")
print(f"  >= 0.1: {(mu1s >= 0.1 - 1e-12).mean():.3f}")
print(f"  quantiles 10/50/90: {np.quantile(mu1s, [.1,.5,.9]).round(3)}")
g = np.array(gammas)
print(f"posterior-mean slope: mean {g.mean():.2f} median {np.median(g):.2f} "
      f"frac<0.5 {(g < 0.5).mean():.3f}")
n1 = np.array(n1_counts)
print(f"stage-I mean counts: {n1.mean(axis=0).round(2)}")
