"""Counterfactual: RP2S with isotonic-pooled response-rate estimates.

Diagnostic only. Replaces the per-dose Beta gate with PAVA-pooled posterior
means to quantify how much of the selection gap in S3/S4/S5 is attributable
to the pinned per-dose rule.
"""
import collections
import sys

import droid.engine as eng
from droid.core import default_design
from droid.inference import beta_binomial_posterior, pava_isotonic
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario


def select_rp2s_iso(tdr_levels, response_counts, k_max, phi_e,
                    prior=(1.0, 1.0)):
    tried = [j for j, (r, n) in enumerate(response_counts, start=1) if n > 0]
    raw = [beta_binomial_posterior(*response_counts[j - 1], prior).mean
           for j in tried]
    w = [response_counts[j - 1][1] + 2.0 for j in tried]
    iso = dict(zip(tried, pava_isotonic(raw, w)))
    scored = [(j, iso[j]) for j in tdr_levels if j in iso and iso[j] > phi_e]
    if len(scored) > k_max:
        scored.sort(key=lambda t: (-t[1], t[0]))
        scored = scored[:k_max]
    return sorted(j for j, _ in scored)


name = sys.argv[1] if len(sys.argv) > 1 else "3"
n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 300
use_iso = len(sys.argv) > 3 and sys.argv[3] == "iso"
if use_iso:
    eng.select_rp2s = select_rp2s_iso

scn = builtin_scenario(name)
cfg = default_design()
opt = scn.optimal
sel = collections.Counter()
tot = [0.0] * 5
for rep in range(n_reps):
    st = run_trial(cfg, scn, seed=(7000 + rep))
    fa = st.final
    pick = None if fa is None else fa.get("optimal_level")
    sel[pick] += 1
    for j, n in enumerate(st.counts_per_dose()):
        tot[j] += n
print(f"scenario {name} reps {n_reps} iso={use_iso} optimal={opt}")
print("PCS:", round(sel[opt] / n_reps, 3), " selection:",
      {k: round(v / n_reps, 3) for k, v in sorted(sel.items(),
                                                  key=lambda kv: (kv[0] is None, kv[0]))})
print("mean n:", [round(t / n_reps, 1) for t in tot])
