"""Compare final-analysis posterior routes on the same simulated trials."""
import sys
import time

import numpy as np

import droid.engine as eng
from droid.core import MODEL_ASSISTED, default_design
from droid.ocs import run_ocs
from droid.scenarios import builtin_scenarios
from droid.stage2 import (
    CRITERION_POSTERIOR,
    FinalAnalysis,
    POC_ESTABLISHED,
    assisted_posterior_draws,
    beta_binomial_posterior,
    compute_dri,
    dri_from_draws,
    establish_poc,
    posterior_gates,
    select_optimal_point,
)

PUB = {
    "1": (0.012, 0.752, 0.207, 0.009, 0.000),
    "2": (0.000, 0.160, 0.799, 0.027, 0.004),
    "3": (0.004, 0.064, 0.777, 0.138, 0.002),
    "4": (0.000, 0.000, 0.018, 0.773, 0.201),
    "5": (0.000, 0.029, 0.142, 0.772, 0.028),
    "6": (0.032, 0.895, 0.057, 0.000, 0.000),
    "9": None,
}

ROUTE = "iso"


def final_variant(state, snap, n_draws=8000, seed=0):
    config = state.config
    s = state.surviving_set()
    h_star = state.highest_tried()
    doses = config.grid.doses
    orr = [beta_binomial_posterior(r, n)
           for r, n in state.response_counts_per_dose()]
    pi_hat = [b.mean for b in orr]

    iso_needed = ROUTE in ("iso", "hybrid", "mix")
    emax_needed = ROUTE in ("emax", "hybrid", "mix")
    col = {}
    if iso_needed:
        tried, _, pd_mat = assisted_posterior_draws(snap, config.phi_s,
                                                    n_draws=n_draws, seed=seed)
        col = {j: pd_mat[:, k] for k, j in enumerate(tried)}
    emax = None
    if emax_needed:
        emax = eng.fit_current(state)[1]
    if ROUTE == "iso":
        dri = dri_from_draws(col[tried[0]], col[h_star], config.delta)
        mu_cols = col
        mu_hat = [float(np.mean(col[j])) if j in col else None
                  for j in range(1, config.n_doses + 1)]
    elif ROUTE == "emax":
        dri = compute_dri(emax, doses[0], doses[h_star - 1], config.delta)
        draws = emax.mu_draws(np.asarray(doses))
        mu_cols = {j: draws[:, j - 1] for j in range(1, config.n_doses + 1)}
        mu_hat = list(emax.mu_hat)
    elif ROUTE == "hybrid":  # emax DRI, iso gates
        dri = compute_dri(emax, doses[0], doses[h_star - 1], config.delta)
        mu_cols = col
        mu_hat = [float(np.mean(col[j])) if j in col else None
                  for j in range(1, config.n_doses + 1)]
    else:  # mix: emax DRI, half-and-half gate draws
        dri = compute_dri(emax, doses[0], doses[h_star - 1], config.delta)
        draws = emax.mu_draws(np.asarray(doses))
        half = draws.shape[0]
        mu_cols = {}
        for j in col:
            k = min(len(col[j]), half)
            mu_cols[j] = np.concatenate([col[j][:k], draws[:k, j - 1]])
        mu_hat = [float(np.mean(mu_cols[j])) if j in mu_cols else None
                  for j in range(1, config.n_doses + 1)]

    poc = establish_poc(dri, config.c_dri)
    gates = posterior_gates(s, mu_cols, orr, config.delta,
                            config.c_1, config.c_2, config.phi_e)
    optimal = None
    if poc == POC_ESTABLISHED:
        if config.optimal_rule == CRITERION_POSTERIOR:
            optimal = next((g.level for g in gates if g.passes), None)
        else:
            optimal = select_optimal_point(s, mu_hat, pi_hat,
                                           config.delta, config.phi_e)
    return FinalAnalysis(dri=dri, poc=poc, optimal_level=optimal,
                         surviving=tuple(s), criterion=config.optimal_rule,
                         highest_tried_level=h_star, delta=config.delta,
                         c_dri=config.c_dri, c_1=config.c_1, c_2=config.c_2,
                         phi_e=config.phi_e, per_dose=())


def main():
    global ROUTE
    routes = sys.argv[1].split(",") if len(sys.argv) > 1 else ["emax"]
    n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 300
    names = (sys.argv[3].split(",") if len(sys.argv) > 3
             else ["2", "3", "5", "9"])
    eng.final_analysis = final_variant
    cfg = default_design(stage1_mode=MODEL_ASSISTED)
    by_name = {sc.name: sc for sc in builtin_scenarios()}
    for route in routes:
        ROUTE = route
        for name in names:
            sc = by_name[name]
            t0 = time.time()
            rep = run_ocs(cfg, sc, n_reps, seed=20260818)
            dt = time.time() - t0
            sel = " ".join("%.3f" % f for f in rep.selection_fraction)
            pcs = (rep.selection_fraction[sc.optimal - 1] if sc.optimal
                   else rep.none_fraction)
            pub = PUB.get(name)
            ref = (" pub=[%s]" % " ".join("%.3f" % p for p in pub)) if pub \
                else ""
            print("%s S%s pcs=%.3f none=%.3f sel=[%s] %.0fs%s"
                  % (route, name, pcs, rep.none_fraction, sel, dt, ref),
                  flush=True)


if __name__ == "__main__":
    main()
