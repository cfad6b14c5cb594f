"""Instrument S4 replicates: which gate pushes selection off dose 4."""
import collections
import sys

from droid.core import default_design
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario

name = sys.argv[1] if len(sys.argv) > 1 else "4"
n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 150
scn = builtin_scenario(name)
cfg = default_design()
print("scenario", name, "tox", scn.tox, "resp", scn.resp, "pd", scn.pd_mean)

sel = collections.Counter()
bad = []
for rep in range(n_reps):
    st = run_trial(cfg, scn, seed=(7000 + rep))
    fa = st.final
    pick = fa["optimal_level"] if fa is not None else None
    sel[pick] += 1
    if fa is not None and pick is not None and pick != scn.optimal:
        rows = {r["level"]: r for r in fa["per_dose"]}
        bad.append((rep, pick, fa["surviving"], fa["dri"], rows))

print("selection", dict(sorted(sel.items(), key=lambda kv: (kv[0] is None, kv[0]))))
print()
for rep, pick, surv, dri, rows in bad[:60]:
    opt = scn.optimal
    r_opt = rows.get(opt)
    r_pick = rows.get(pick)
    def fmt(r):
        if r is None:
            return "absent"
        pm = "None" if r["pr_mu"] is None else f"{r['pr_mu']:.3f}"
        pp = "None" if r["pr_pi"] is None else f"{r['pr_pi']:.3f}"
        return (f"n={r['n']:2d} tox={r['tox']} resp={r['responders']}/{r['evaluated']}"
                f" mu^={r['mu_hat']:.3f} pr_mu={pm} pr_pi={pp} inS={r['in_s']}")
    print(f"rep={rep:3d} picked={pick} surv={surv} dri={dri:.3f}")
    print(f"   opt d{opt}: {fmt(r_opt)}")
    print(f"  pick d{pick}: {fmt(r_pick)}")
