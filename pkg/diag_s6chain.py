"""Decompose scenario-6 dose-3 selection: admission -> survival -> win."""
import numpy as np

from droid.core import TrialState, MODEL_ASSISTED, MODEL_BASED, default_design
from droid.engine import advance, derive_rng, NS_PATIENT
from droid.scenarios import builtin_scenarios, generate_patient

sc = [s for s in builtin_scenarios() if s.name == "6"][0]

for mode, reps in ((MODEL_ASSISTED, 400), (MODEL_BASED, 150)):
    cfg = default_design(stage1_mode=mode)
    admitted = dropped = in_s_final = sel3 = sel1 = 0
    n3_close = []
    n3_final = []
    completed = 0
    for rep in range(reps):
        state = TrialState(config=cfg, seed=rep)
        rng = derive_rng(rep, NS_PATIENT)
        saw_adm = False
        while state.active:
            if not state.pending_alloc:
                advance(state)
                if state.stage == 2 and not saw_adm and state.tdr is not None:
                    saw_adm = True
                    levels = state.tdr.levels(cfg.grid)
                    if 3 in levels:
                        admitted += 1
                        n3_close.append(state.counts_per_dose()[2])
                continue
            dose = state.pending_alloc[0]
            want = sum(1 for j in state.pending_alloc if j == dose)
            outcomes = [generate_patient(sc, dose, rng) for _ in range(want)]
            state.record_cohort(dose, outcomes)
        if state.status != "completed" or state.final is None:
            continue
        completed += 1
        if 3 in state.dropped_stage2:
            dropped += 1
        final = state.final
        surv = final.get("surviving") or final.get("s") or []
        if 3 in surv:
            in_s_final += 1
            n3_final.append(state.counts_per_dose()[2])
        pick = final.get("optimal_level")
        if pick == 3:
            sel3 += 1
        if pick == 1:
            sel1 += 1
    lbl = "assisted" if mode == MODEL_ASSISTED else "model"
    print(f"[{lbl}] reps {reps} completed {completed}")
    print(f"  d3 in TDR at close: {admitted/reps:.3f}  "
          f"(mean n3 at close {np.mean(n3_close) if n3_close else 0:.1f})")
    print(f"  d3 dropped in stage II: {dropped/reps:.3f}")
    print(f"  d3 in S at final: {in_s_final/reps:.3f}  "
          f"(mean n3 {np.mean(n3_final) if n3_final else 0:.1f})")
    print(f"  sel3 {sel3/reps:.3f}  sel1 {sel1/reps:.3f}")
    if in_s_final:
        print(f"  sel3 | d3 in S: {sel3/in_s_final:.3f}")
