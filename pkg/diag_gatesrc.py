"""Replay final gates under three posterior sources on identical trials."""
import sys
import numpy as np

from droid.core import default_design, MODEL_ASSISTED
from droid.engine import (NS_FINAL, derive_seed, fit_activity_curve,
                          _snapshot)
from droid.ocs import run_trial
from droid.inference import beta_binomial_posterior
from droid.scenarios import builtin_scenarios
from droid.stage2 import (POC_ESTABLISHED, assisted_posterior_draws,
                          compute_dri, establish_poc, posterior_gates)

names = sys.argv[1].split(",") if len(sys.argv) > 1 else ["6"]
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 400

cfg = default_design(stage1_mode=MODEL_ASSISTED)
scs = {s.name: s for s in builtin_scenarios()}

for name in names:
    sc = scs[name]
    tallies = {src: np.zeros(cfg.n_doses + 1) for src in ("iso", "emax", "mix", "mixS")}
    match = 0
    done = 0
    for rep in range(reps):
        state = run_trial(cfg, sc, rep)
        if state.status != "completed" or state.final is None:
            continue
        done += 1
        snap = _snapshot(state, False)
        emax_fit = fit_activity_curve(state)
        seed = derive_seed(state.seed, NS_FINAL, state.n_enrolled)
        s = state.surviving_set()
        h_star = state.highest_tried()
        doses = cfg.grid.doses
        orr = [beta_binomial_posterior(r, n)
               for r, n in state.response_counts_per_dose()]
        dri = compute_dri(emax_fit, doses[0], doses[h_star - 1], cfg.delta)
        poc = establish_poc(dri, cfg.c_dri)

        half = 4000
        tried, _, pd_mat = assisted_posterior_draws(snap, cfg.phi_s,
                                                    n_draws=half, seed=seed)
        curve = emax_fit.mu_draws(np.asarray(doses))
        m = min(half, curve.shape[0])
        mix_cols = {j: np.concatenate([pd_mat[:m, k], curve[:m, j - 1]])
                    for k, j in enumerate(tried)}
        cols = {
            "iso": {j: pd_mat[:, k] for k, j in enumerate(tried)},
            "emax": {j: curve[:, j - 1] for j in tried},
            "mix": mix_cols,
            "mixS": mix_cols,
        }
        p_iso, _, tried_iso = snap.isotonic_estimates()
        p_map = dict(zip(tried_iso, p_iso))
        s_screen = [j for j in s if p_map.get(j, 1.0) <= cfg.phi_t + 1e-12]
        for src, mu_cols in cols.items():
            use_s = s_screen if src == "mixS" else s
            pick = None
            if poc == POC_ESTABLISHED and use_s:
                gates = posterior_gates(use_s, mu_cols, orr, cfg.delta,
                                        cfg.c_1, cfg.c_2, cfg.phi_e)
                pick = next((g.level for g in gates if g.passes), None)
            tallies[src][pick if pick else 0] += 1
            if src == "mix" and pick == state.final.get("optimal_level"):
                match += 1
            elif src == "mix" and state.final.get("optimal_level") is None \
                    and pick is None:
                match += 1
    print(f"scenario {name} (opt {sc.optimal}) completed {done}, "
          f"mix replay match {match}/{done}")
    for src in ("iso", "emax", "mix", "mixS"):
        t = tallies[src] / max(done, 1)
        sel = " ".join(f"{v:.3f}" for v in t[1:])
        print(f"  {src:5s} none {t[0]:.3f}  sel {sel}")
