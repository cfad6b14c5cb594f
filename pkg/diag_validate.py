"""1000-rep dual-lane validation against the published operating table."""
import json
import sys
import time

from droid.core import MODEL_ASSISTED, MODEL_BASED, default_design
from droid.ocs import run_ocs
from droid.scenarios import builtin_scenarios

OUT = "/root/pkg/validate_1000.json"

def main():
    reps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
    results = {}
    for lane, mode in (("assisted", MODEL_ASSISTED), ("model", MODEL_BASED)):
        cfg = default_design(stage1_mode=mode)
        for sc in builtin_scenarios():
            t0 = time.time()
            rep = run_ocs(cfg, sc, n_reps=reps, seed=20260818)
            pcs = (rep.none_fraction if sc.optimal is None
                   else rep.selection_fraction[sc.optimal - 1])
            row = {
                "pcs": pcs, "none": rep.none_fraction,
                "sel": list(rep.selection_fraction),
                "mean_n": list(rep.mean_patients),
                "mean_total": rep.mean_total,
                "poc": rep.poc_fraction,
                "secs": round(time.time() - t0, 1),
            }
            results[f"{lane}-{sc.name}"] = row
            with open(OUT, "w") as fh:
                json.dump(results, fh, indent=1)
            print(f"{lane} S{sc.name} pcs={pcs:.3f} none={rep.none_fraction:.3f} "
                  f"{row['secs']}s", flush=True)

if __name__ == "__main__":
    main()
