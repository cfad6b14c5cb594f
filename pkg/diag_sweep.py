"""PD-noise sweep: PCS and failure modes on recalibrated scenarios."""
import collections
import sys

from droid.core import default_design
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario, calibrate_scenario

name = sys.argv[1] if len(sys.argv) > 1 else "4"
n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 150
sds = [float(v) for v in (sys.argv[3].split(",") if len(sys.argv) > 3
                          else ("0.10", "0.15", "0.20"))]
base = builtin_scenario(name)
cfg = default_design()

for sd in sds:
    scn = calibrate_scenario(name=base.name, tox=base.tox, resp=base.resp,
                             pd_mean=base.pd_mean, doses=base.doses,
                             pd_sd=sd, effect_sd=base.effect_sd,
                             optimal=base.optimal)
    sel = collections.Counter()
    modes = collections.Counter()
    n_tot = [0.0] * scn.n_doses
    for rep in range(n_reps):
        st = run_trial(cfg, scn, seed=(7000 + rep))
        fa = st.final
        pick = fa["optimal_level"] if fa is not None else None
        sel[pick] += 1
        for j, c in enumerate(st.counts_per_dose()):
            n_tot[j] += c / n_reps
        if fa is None or pick == scn.optimal:
            continue
        rows = {r["level"]: r for r in fa["per_dose"]}
        r = rows[scn.optimal] if scn.optimal else None
        if pick is None:
            modes["none"] += 1
        elif r is None:
            pass
        elif not r["in_s"]:
            modes["dropped" if r["dropped"] else
                  ("sparse_gate" if r["n"] <= 3 else "excl_stage1")] += 1
        elif r["pr_mu"] is not None and r["pr_mu"] <= cfg.c_1:
            modes["mu_gate"] += 1
        elif r["pr_pi"] is not None and r["pr_pi"] <= cfg.c_2:
            modes["orr_gate"] += 1
        else:
            modes["other"] += 1
    pcs = sel[scn.optimal] / n_reps if scn.optimal else sel[None] / n_reps
    print(f"pd_sd={sd:.2f}  PCS={pcs:.3f}  "
          f"sel={dict(sorted(sel.items(), key=lambda kv: (kv[0] is None, kv[0])))}")
    print(f"          modes={dict(modes)}  mean_n={[round(v, 1) for v in n_tot]}")
