"""Command-line interface: batch simulation, live conduct, and the service.

`droid simulate` runs operating-characteristics batches over a scenario
file and writes the CSV/JSON reports.  `droid conduct` drives a single
persisted trial cohort by cohort.  `droid serve` starts the HTTP
service.  Exit codes: 0 success, 2 invalid configuration or arguments,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from .conduct import RevisionConflict, StoreError, TrialStore
from .core import MODEL_ASSISTED, MODEL_BASED, TrialError, TrialState, default_design
from .engine import advance
from .ocs import run_comparator_ocs, run_ocs, write_ocs_csv, write_ocs_json
from .scenarios import load_scenarios

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

DESIGNS = {
    "droid-boin": dict(stage1_mode=MODEL_ASSISTED),
    "droid-crm": dict(stage1_mode=MODEL_BASED),
    "crm": None,    # toxicity-only comparator
}


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _load_config(design: str, config_path):
    overrides = {}
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config {config_path}: {exc}")
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, f"bad config {config_path}: {exc}")
    base = DESIGNS[design]
    merged = dict(base or {})
    merged.update(overrides)
    try:
        cfg = default_design(**merged)
    except TypeError as exc:
        raise CliError(EXIT_CONFIG, f"bad config field: {exc}")
    errs = cfg.errors()
    if errs:
        raise CliError(EXIT_CONFIG, "invalid configuration: " + "; ".join(errs))
    return cfg


def _print_summary(reports) -> None:
    """Per-scenario selection percentages and mean patient counts."""
    for rep in reports:
        sel = " ".join(f"{100 * v:5.1f}" for v in rep.selection_fraction)
        n = " ".join(f"{v:5.1f}" for v in rep.mean_patients)
        print(f"scenario {rep.scenario_name} ({rep.design_label}, "
              f"{rep.n_reps} reps)")
        print(f"  selection %   {sel}   none {100 * rep.none_fraction:5.1f}")
        print(f"  mean patients {n}   total {rep.mean_total:6.1f}")


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise CliError(EXIT_CONFIG, "reps must be >= 1")
    if args.workers < 1:
        raise CliError(EXIT_CONFIG, "workers must be >= 1")
    cfg = _load_config(args.design, args.config)
    try:
        scenarios = load_scenarios(args.scenarios)
    except OSError as exc:
        raise CliError(EXIT_IO,
                       f"cannot read scenarios {args.scenarios}: {exc}")
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"bad scenario file: {exc}")

    runner = run_ocs if DESIGNS[args.design] is not None else run_comparator_ocs
    reports = [runner(cfg, sc, n_reps=args.reps, seed=args.seed,
                      design_label=args.design, workers=args.workers)
               for sc in scenarios]

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_ocs_csv(reports, str(out / "oc.csv"))
        write_ocs_json(reports, str(out / "oc.json"),
                       meta={"design": args.design, "reps": args.reps,
                             "seed": args.seed,
                             "scenarios": str(args.scenarios)})
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write reports under {out}: {exc}")
    _print_summary(reports)
    return EXIT_OK


# ---------------------------------------------------------------------------
# conduct


def _parse_outcomes(raw: str):
    """JSON rows of [y_t, y_s, y_e]; y_e null (or omitted) means pending."""
    try:
        rows = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"outcomes must be JSON: {exc}")
    if not isinstance(rows, list) or not rows:
        raise CliError(EXIT_CONFIG, "outcomes must be a non-empty JSON list")
    out = []
    for row in rows:
        if not isinstance(row, list) or len(row) not in (2, 3):
            raise CliError(EXIT_CONFIG,
                           "each outcome row is [y_t, y_s] or [y_t, y_s, y_e]")
        y_t, y_s = row[0], row[1]
        y_e = row[2] if len(row) == 3 else None
        if not isinstance(y_t, int) or isinstance(y_t, bool) or \
                isinstance(y_s, bool) or not isinstance(y_s, (int, float)) or \
                y_e not in (0, 1, None):
            raise CliError(EXIT_CONFIG,
                           "outcome rows are [0|1, number, 0|1|null]")
        out.append((y_t, float(y_s), y_e))
    return out


def _print_recommendation(state: TrialState) -> None:
    if not state.active:
        print(f"trial {state.status}; no further enrollment")
        return
    alloc = Counter(state.pending_alloc)
    for j, n in sorted(alloc.items()):
        print(f"cohort of {n} at dose {j} (stage {state.stage})")
    last = next((e for e in reversed(state.decision_log)
                 if e["rule"] in ("stage1-eval", "stage2-eval")), None)
    if last is not None:
        for line in last["inputs"].get("trace", []):
            print(f"  rule: {line}")


def _print_final(final: dict) -> None:
    print(f"dose-response index {final['dri']:.3f} "
          f"(threshold {final['c_dri']});"
          f" concept {final['poc']}")
    if final["optimal_level"] is None:
        print("no dose selected")
    else:
        print(f"optimal dose: level {final['optimal_level']}")
    for row in final["per_dose"]:
        gates = ""
        if row["pr_mu"] is not None:
            gates = (f"  pr_mu={row['pr_mu']:.3f}"
                     f" pr_pi={row['pr_pi']:.3f}")
        mu = "-" if row["mu_hat"] is None else f"{row['mu_hat']:.3f}"
        note = ""
        if row.get("in_s") and not row.get("qualified"):
            note = "  [out of range at close]"
        print(f"  dose {row['level']}: n={row['n']} tox={row['tox']}"
              f" resp={row['responders']}/{row['evaluated']}"
              f" mu_hat={mu} pi_hat={row['pi_hat']:.3f}"
              + gates + note)


def cmd_conduct(args) -> int:
    path = Path(args.trial)
    store = TrialStore(path.parent if str(path.parent) != "" else ".")
    trial_id = path.stem

    if args.action == "new":
        cfg = _load_config(args.design, args.config)
        state = TrialState(config=cfg, seed=args.seed)
        advance(state)
        try:
            store.create(state, trial_id=trial_id)
        except StoreError as exc:
            raise CliError(EXIT_IO, str(exc))
        print(f"created trial {trial_id} at revision 0")
        _print_recommendation(state)
        return EXIT_OK

    try:
        env = store.load(trial_id)
    except StoreError as exc:
        raise CliError(EXIT_IO, f"{exc} (path {path})")

    if args.action == "next":
        _print_recommendation(env.state)
        return EXIT_OK

    if args.action == "enroll":
        if args.dose is None or args.outcomes is None:
            raise CliError(EXIT_CONFIG, "enroll needs --dose and --outcomes")
        outcomes = _parse_outcomes(args.outcomes)
        try:
            env.state.record_cohort(args.dose, outcomes)
            advance(env.state)
            store.save(env)
        except RevisionConflict as exc:
            raise CliError(EXIT_IO, str(exc))
        except TrialError as exc:
            raise CliError(EXIT_CONFIG, str(exc))
        print(f"recorded {len(outcomes)} patients at dose {args.dose} "
              f"(revision {env.revision})")
        _print_recommendation(env.state)
        return EXIT_OK

    # analyze: the engine closes stage II itself once every active dose
    # reaches its cap, so an active trial is by definition not done yet
    if env.state.final is not None:
        _print_final(env.state.final)
        return EXIT_OK
    print(f"analysis pending: trial in stage {env.state.stage}, "
          f"status {env.state.status}")
    _print_partial(env.state)
    return EXIT_OK


def _print_partial(state: TrialState) -> None:
    """Interim per-dose counts; selection comes only with the final analysis."""
    counts = state.counts_per_dose()
    tox = state.tox_counts_per_dose()
    resp = state.response_counts_per_dose()
    for j in range(1, state.config.n_doses + 1):
        print(f"  dose {j}: n={counts[j - 1]} tox={tox[j - 1]}"
              f" resp={resp[j - 1][0]}/{resp[j - 1][1]}")
    print("optimal dose: pending")


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(state_dir=args.state_dir)
    uvicorn.run(app, host=args.host, port=args.port, workers=1,
                log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droid",
        description="two-stage dose-optimization engine")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run operating characteristics")
    sim.add_argument("--design", choices=sorted(DESIGNS), default="droid-boin")
    sim.add_argument("--scenarios", required=True,
                     help="scenario JSON file")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".", help="report directory")
    sim.add_argument("--config", default=None,
                     help="JSON file of design-config overrides")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(fn=cmd_simulate)

    con = sub.add_parser("conduct", help="drive one persisted trial")
    con.add_argument("trial", help="trial JSON file")
    con.add_argument("action", choices=["new", "next", "enroll", "analyze"])
    con.add_argument("--design", choices=["droid-boin", "droid-crm"],
                     default="droid-boin")
    con.add_argument("--config", default=None)
    con.add_argument("--seed", type=int, default=0)
    con.add_argument("--dose", type=int, default=None)
    con.add_argument("--outcomes", default=None,
                     help='JSON rows [y_t, y_s, y_e]; y_e null = pending')
    con.set_defaults(fn=cmd_conduct)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--state-dir", default=None,
                     help="trial store (default $DROID_STATE_DIR or ./trials)")
    srv.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
