"""Tally TDR/RP2S composition at the stage-1 close."""
import collections
import sys

from droid.core import default_design
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario

name = sys.argv[1] if len(sys.argv) > 1 else "3"
n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 200
scn = builtin_scenario(name)
cfg = default_design()

tdr_inc = collections.Counter()
rp2s_inc = collections.Counter()
sizes = collections.Counter()
cap_cut = collections.Counter()   # in TDR, passed filter, lost to the K cap
flt_cut = collections.Counter()   # in TDR but failed the ORR filter
n_close = 0
for rep in range(n_reps):
    st = run_trial(cfg, scn, seed=(7000 + rep))
    close = None
    for entry in st.decision_log:
        if entry.get("rule") == "stage1-eval" and "close" in entry["outcome"]:
            close = entry["outcome"]["close"]
            break
    if close is None:
        continue
    n_close += 1
    td = close["tdr"]
    lo, hi = td.get("lo"), td.get("hi")
    tdr = set() if lo is None else set(range(int(lo), int(hi) + 1))
    rp2s = set(close["rp2s"])
    sizes[len(rp2s)] += 1
    for j in tdr:
        tdr_inc[j] += 1
    for j in rp2s:
        rp2s_inc[j] += 1
    # classify TDR members that missed RP2S
    resp = st.response_counts_per_dose()
    for j in sorted(tdr - rp2s):
        r, n = resp[j - 1]
        pi_hat = (r + 1) / (n + 2)
        if pi_hat > cfg.phi_e:
            cap_cut[j] += 1
        else:
            flt_cut[j] += 1

print("scenario", name, "reps with close:", n_close)
print("TDR inclusion rate:", {j: round(tdr_inc[j] / n_close, 3) for j in range(1, 6)})
print("RP2S inclusion rate:", {j: round(rp2s_inc[j] / n_close, 3) for j in range(1, 6)})
print("RP2S size dist:", dict(sorted(sizes.items())))
print("lost to ORR filter:", dict(sorted(flt_cut.items())))
print("lost to K cap:", dict(sorted(cap_cut.items())))
