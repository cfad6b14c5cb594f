"""Classify off-optimal selections by failure mode."""
import collections
import sys

from droid.core import default_design
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario

name = sys.argv[1] if len(sys.argv) > 1 else "4"
n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 150
scn = builtin_scenario(name)
cfg = default_design()

sel = collections.Counter()
modes = collections.Counter()
prmu_fail_vals = []
for rep in range(n_reps):
    st = run_trial(cfg, scn, seed=(7000 + rep))
    fa = st.final
    pick = fa["optimal_level"] if fa is not None else None
    sel[pick] += 1
    if fa is None or pick == scn.optimal:
        continue
    rows = {r["level"]: r for r in fa["per_dose"]}
    r = rows[scn.optimal]
    if pick is None:
        modes["no_poc_or_none"] += 1
    elif not r["in_s"]:
        if r["dropped"]:
            modes["dropped_stage2"] += 1
        elif r["n"] <= 3:
            modes["sparse_gatekeeper"] += 1
        else:
            modes["excluded_stage1"] += 1
    elif r["pr_mu"] is not None and r["pr_mu"] <= cfg.c_1:
        modes["mu_gate_fail"] += 1
        prmu_fail_vals.append(r["pr_mu"])
    elif r["pr_pi"] is not None and r["pr_pi"] <= cfg.c_2:
        modes["orr_gate_fail"] += 1
    else:
        modes["other"] += 1

print("scenario", name, "reps", n_reps)
print("selection", dict(sorted(sel.items(), key=lambda kv: (kv[0] is None, kv[0]))))
print("PCS", sel[scn.optimal] / n_reps)
print("modes", dict(modes))
if prmu_fail_vals:
    import statistics
    print("pr_mu among mu-gate fails: mean %.3f  max %.3f"
          % (statistics.mean(prmu_fail_vals), max(prmu_fail_vals)))
