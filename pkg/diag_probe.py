"""Scratch: production-path probes of the final qualification screen."""
import json
import sys
import time

import numpy as np

from droid.core import default_design
from droid.ocs import run_trial
from droid.scenarios import builtin_scenario


def probe(tag, mode, scen, reps):
    cfg = default_design(stage1_mode=mode)
    s = builtin_scenario(scen)
    sel = np.zeros(len(cfg.grid.doses))
    none = 0
    t0 = time.time()
    for r in range(reps):
        res = run_trial(cfg, s, seed=r)
        pick = (res.final or {}).get("optimal_level")
        if pick is None:
            none += 1
        else:
            sel[pick - 1] += 1
    out = {"sel": list(np.round(sel / reps, 3)), "none": round(none / reps, 3),
           "secs": round(time.time() - t0, 1)}
    print(tag, json.dumps(out), flush=True)


if __name__ == "__main__":
    reps = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    for mode, scen in [("model-assisted", "6"), ("model-assisted", "8"),
                       ("model-based", "8"), ("model-based", "6"),
                       ("model-based", "2"), ("model-based", "7")]:
        probe(f"{mode}-{scen}", mode, scen, reps)
