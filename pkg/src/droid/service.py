"""HTTP service for live trial conduct.

Exposes the engine over JSON: create a trial, record cohorts, read the
current recommendation with its rule trace, fetch posterior summaries
shaped for plotting, close out stage I, and trigger the final analysis.
State lives in a file-per-trial store; every mutation presents the
revision it read and conflicts return 409, so concurrent writers are
serialized without locks.

Run with `droid serve` or mount `create_app()` under any ASGI server.
"""

from __future__ import annotations

import os
import threading
from collections import Counter
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from scipy import stats

from .conduct import RevisionConflict, StoreError, TrialNotFound, TrialStore
from .core import TrialError, TrialState, default_design
from .engine import (
    advance,
    close_stage1_now,
    fit_current,
    posterior_snapshot,
    run_final_analysis,
)

STATE_DIR_ENV = "DROID_STATE_DIR"
QUANTILES = (2.5, 25.0, 50.0, 75.0, 97.5)
MESH_POINTS = 50


class ApiError(Exception):
    """Error carrying the HTTP status and the wire {code, message} body."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _wrap(exc: Exception) -> ApiError:
    if isinstance(exc, TrialNotFound):
        return ApiError(404, "not-found", str(exc))
    if isinstance(exc, RevisionConflict):
        return ApiError(409, "conflict", str(exc))
    if isinstance(exc, (TrialError, StoreError, ValueError)):
        return ApiError(400, "validation", str(exc))
    raise exc


class CreateTrial(BaseModel):
    design: dict = Field(default_factory=dict)   # DesignConfig overrides
    seed: int = 0
    trial_id: Optional[str] = None


class Outcome(BaseModel):
    y_t: int
    y_s: float
    y_e: Optional[int] = None


class PostCohort(BaseModel):
    dose_index: int
    outcomes: list[Outcome]
    expected_revision: int


class Mutation(BaseModel):
    expected_revision: int


def recommendation_payload(state: TrialState) -> dict:
    """What the trial asks for next: an enrollment or the stop verdict."""
    if not state.active:
        return {"kind": "stop", "status": state.status,
                "reason": state.status,
                "final_available": state.final is not None}
    last = next((e for e in reversed(state.decision_log)
                 if e["rule"] in ("stage1-eval", "stage2-eval")), None)
    inputs = {} if last is None else last["inputs"]
    alloc = Counter(state.pending_alloc)
    return {"kind": "enroll", "stage": state.stage,
            "allocations": [{"dose_index": j, "n": n}
                            for j, n in sorted(alloc.items())],
            "trace": inputs.get("trace", []),
            "monitor": inputs.get("monitor")}


def posteriors_payload(state: TrialState) -> dict:
    """Posterior summaries plus quantile grids over a dense dose mesh.

    The dashboard plots these directly; all numbers are computed here.
    """
    grid = state.config.grid
    tox_fit, emax_fit = fit_current(state)
    snap = posterior_snapshot(state, tox_fit, emax_fit)
    mesh = np.linspace(grid.doses[0], grid.doses[-1], MESH_POINTS)

    def curve(draws: np.ndarray) -> dict:
        qs = np.percentile(draws, QUANTILES, axis=0)
        keys = ("q025", "q25", "q50", "q75", "q975")
        return {"mean": np.mean(draws, axis=0).tolist(),
                **{k: qs[i].tolist() for i, k in enumerate(keys)}}

    effective = np.interp(mesh, grid.doses, tox_fit.effective)
    counts = state.counts_per_dose()
    tox_counts = state.tox_counts_per_dose()
    resp = state.response_counts_per_dose()
    per_dose = []
    for j in range(1, state.config.n_doses + 1):
        a, b = snap.beta_params[j - 1]
        lo, mid, hi = stats.beta.ppf([0.025, 0.5, 0.975], a, b)
        per_dose.append({
            "level": j, "dose": grid.doses[j - 1],
            "n": counts[j - 1], "tox": tox_counts[j - 1],
            "responders": resp[j - 1][0], "evaluated": resp[j - 1][1],
            "p_hat": snap.p_hat[j - 1], "mu_hat": snap.mu_hat[j - 1],
            "pi_hat": snap.pi_hat[j - 1],
            "pi_q025": float(lo), "pi_q50": float(mid), "pi_q975": float(hi),
        })
    return {"n_enrolled": state.n_enrolled,
            "stage": state.stage,
            "dose_mesh": mesh.tolist(),
            "toxicity": curve(tox_fit.p_draws(effective)),
            "activity": curve(emax_fit.mu_draws(mesh)),
            "per_dose": per_dose,
            "tdr": None if state.tdr is None else state.tdr.to_dict(),
            "rp2s": list(state.rp2s),
            "dropped": list(state.dropped_stage2)}


def create_app(state_dir=None) -> FastAPI:
    """Build the service around a state directory.

    Defaults to $DROID_STATE_DIR, falling back to ./trials.
    """
    root = state_dir or os.environ.get(STATE_DIR_ENV) or "trials"
    store = TrialStore(root)
    app = FastAPI(title="dose-optimization trial service")
    write_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code,
                                     "message": exc.message})

    def mutate(trial_id: str, expected_revision: int, fn):
        """Load at the expected revision, apply fn, persist, return envelope.

        The lock serializes in-process writers; the revision check in
        store.save guards against out-of-process ones.
        """
        with write_lock:
            try:
                env = store.load(trial_id)
                if env.revision != expected_revision:
                    raise RevisionConflict(trial_id, expected_revision,
                                           env.revision)
                fn(env.state)
                return store.save(env).to_dict()
            except Exception as exc:
                raise _wrap(exc) from exc

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/trials", status_code=201)
    def create_trial(body: CreateTrial):
        try:
            config = default_design(**body.design)
            errs = config.errors()
            if errs:
                raise ValueError("; ".join(errs))
            state = TrialState(config=config, seed=body.seed)
            advance(state)
            env = store.create(state, trial_id=body.trial_id)
        except TypeError as exc:
            raise ApiError(400, "validation", f"bad design field: {exc}")
        except Exception as exc:
            raise _wrap(exc) from exc
        return env.to_dict()

    @app.get("/trials/{trial_id}")
    def get_trial(trial_id: str):
        try:
            return store.load(trial_id).to_dict()
        except Exception as exc:
            raise _wrap(exc) from exc

    @app.post("/trials/{trial_id}/cohorts")
    def post_cohort(trial_id: str, body: PostCohort):
        def fn(state: TrialState):
            outcomes = [(o.y_t, o.y_s, o.y_e) for o in body.outcomes]
            state.record_cohort(body.dose_index, outcomes)
            advance(state)
        return mutate(trial_id, body.expected_revision, fn)

    @app.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str):
        try:
            env = store.load(trial_id)
            return {"trial_id": trial_id, "revision": env.revision,
                    **recommendation_payload(env.state)}
        except Exception as exc:
            raise _wrap(exc) from exc

    @app.get("/trials/{trial_id}/posteriors")
    def get_posteriors(trial_id: str):
        try:
            env = store.load(trial_id)
            return {"trial_id": trial_id, "revision": env.revision,
                    **posteriors_payload(env.state)}
        except Exception as exc:
            raise _wrap(exc) from exc

    @app.post("/trials/{trial_id}/advance-stage")
    def advance_stage(trial_id: str, body: Mutation):
        return mutate(trial_id, body.expected_revision, close_stage1_now)

    @app.post("/trials/{trial_id}/final-analysis")
    def final_analysis_now(trial_id: str, body: Mutation):
        try:
            env = store.load(trial_id)
        except Exception as exc:
            raise _wrap(exc) from exc
        if env.state.final is not None:
            # already analyzed: idempotent read, no revision bump
            out = env.to_dict()
            out["final"] = env.state.final
            return out

        def fn(state: TrialState):
            if state.stage != 2 or not state.active:
                raise TrialError("final analysis requires an active "
                                 "stage-II trial")
            run_final_analysis(state)
        out = mutate(trial_id, body.expected_revision, fn)
        out["final"] = out["state"]["final"]
        return out

    return app
