"""Pilot all builtin scenarios in one lane at moderate reps."""
import sys
import time

from droid.core import MODEL_ASSISTED, MODEL_BASED, default_design
from droid.ocs import run_ocs
from droid.scenarios import builtin_scenarios

PUBLISHED = {
    "assisted": {"S1": 0.752, "S2": 0.799, "S3": 0.777, "S4": 0.773,
                 "S5": 0.772, "S6": 0.895},
    "model": {"S1": 0.784, "S2": 0.760, "S3": 0.762, "S4": 0.746,
              "S5": 0.749, "S6": 0.882, "S7": 0.798, "S8": 0.694},
}


def main() -> None:
    lane = sys.argv[1] if len(sys.argv) > 1 else "assisted"
    n_reps = int(sys.argv[2]) if len(sys.argv) > 2 else 300
    only = sys.argv[3].split(",") if len(sys.argv) > 3 else None
    mode = MODEL_ASSISTED if lane == "assisted" else MODEL_BASED
    cfg = default_design(stage1_mode=mode)
    pub = PUBLISHED.get(lane, {})
    for sc in builtin_scenarios():
        if only and sc.name not in only:
            continue
        t0 = time.time()
        rep = run_ocs(cfg, sc, n_reps, seed=20260818)
        dt = time.time() - t0
        sel = ["%.3f" % f for f in rep.selection_fraction]
        opt = sc.optimal
        pcs = rep.selection_fraction[opt - 1] if opt else rep.none_fraction
        tgt = pub.get(sc.name)
        flag = ""
        if tgt is not None:
            flag = " pub=%.3f diff=%+.3f" % (tgt, pcs - tgt)
        print("%s opt=%s pcs=%.3f none=%.3f sel=[%s] n=[%s] %.0fs%s"
              % (sc.name, opt, pcs, rep.none_fraction, " ".join(sel),
                 " ".join("%.1f" % m for m in rep.mean_patients), dt, flag),
              flush=True)


if __name__ == "__main__":
    main()
