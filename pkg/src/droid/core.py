"""Domain types, configuration validation, and the trial-state ledger.

Everything downstream (decision rules, stage-II analysis, the simulator and
the conduct service) works against the types defined here.  TrialState is a
single-writer audit ledger: every mutation appends exactly one decision-log
entry, and replaying the log against an empty state reproduces the final
state bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

SCHEMA_VERSION = 1

# stage-I transition machinery
MODEL_BASED = "model-based"
MODEL_ASSISTED = "model-assisted"

# TDR selection flavours
TDR_DISCRETE = "discrete"
TDR_CONTINUOUS = "continuous"
TDR_EXTRAPOLATED = "extrapolated"

# stage-II randomization schemes
RAND_EQUAL = "equal"
RAND_BALANCE = "balance-to-M"
RAND_ADAPTIVE = "adaptive"

STATUS_ACTIVE = "active"
STATUS_STOPPED_TOX = "stopped-toxicity"
STATUS_STOPPED_FUT = "stopped-futility"
STATUS_COMPLETED = "completed"

STAGE_DONE = "done"

PENDING = "pending"  # sentinel for an unobserved efficacy outcome in wire formats


class ConfigError(ValueError):
    """Raised when a design configuration violates its invariants."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class TrialError(RuntimeError):
    """Raised when an operation is applied to a trial in the wrong state."""


@dataclass(frozen=True)
class DoseGrid:
    """Ordered investigational doses with prior toxicity guesses (skeleton)."""

    doses: tuple[float, ...]
    skeleton: tuple[float, ...]

    def __init__(self, doses, skeleton):
        object.__setattr__(self, "doses", tuple(float(d) for d in doses))
        object.__setattr__(self, "skeleton", tuple(float(q) for q in skeleton))

    @property
    def n_doses(self) -> int:
        return len(self.doses)

    def errors(self) -> list[str]:
        errs = []
        j = len(self.doses)
        if j != len(self.skeleton):
            errs.append("doses and skeleton must have equal length")
        if not (2 <= j <= 10):
            errs.append("number of doses must be between 2 and 10")
        if any(d <= 0 for d in self.doses):
            errs.append("doses must be positive")
        if any(b <= a for a, b in zip(self.doses, self.doses[1:])):
            errs.append("dose grid not increasing")
        if any(not (0.0 < q < 1.0) for q in self.skeleton):
            errs.append("skeleton values must lie in (0,1)")
        if any(b <= a for a, b in zip(self.skeleton, self.skeleton[1:])):
            errs.append("skeleton not strictly increasing")
        return errs

    def to_dict(self) -> dict:
        return {"doses": list(self.doses), "skeleton": list(self.skeleton)}

    @classmethod
    def from_dict(cls, d: dict) -> "DoseGrid":
        return cls(d["doses"], d["skeleton"])


@dataclass(frozen=True)
class McmcSettings:
    """Sampler budget and seeding policy shared by all posterior fits."""

    burn_in: int = 2000
    draws: int = 2000
    thin: int = 1
    seed: int = 0

    def errors(self) -> list[str]:
        errs = []
        if self.burn_in < 0:
            errs.append("mcmc burn_in must be >= 0")
        if self.draws < 1:
            errs.append("mcmc draws must be >= 1")
        if self.thin < 1:
            errs.append("mcmc thin must be >= 1")
        return errs

    def to_dict(self) -> dict:
        return {"burn_in": self.burn_in, "draws": self.draws,
                "thin": self.thin, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "McmcSettings":
        return cls(**d)


@dataclass(frozen=True)
class DesignConfig:
    """All design constants for a two-stage dose-optimization trial.

    Probability cutoffs:
      c_t1 / c_s1  stage-I early-stopping (toxicity at the lowest dose,
                   futility at the highest dose)
      c_t / c_s    stage-I dose elimination (model-assisted mode)
      c_e          optional posterior-probability efficacy gate (kept for
                   protocol completeness; the shipped RP2S rule thresholds
                   the posterior-mean response rate against phi_e)
      c_t2 / c_s2  stage-II safety / futility drop rules
      c_dri        proof-of-concept cutoff on the dose-response index
      c_1 / c_2    posterior optimal-dose selection gates
    """

    grid: DoseGrid
    phi_t: float = 0.3
    phi_s: float = 0.1
    phi_e: float = 0.3
    cohort_size: int = 3
    n1_cohorts: int = 12
    per_dose_cap: int = 20
    k_max: int = 3
    delta: float = 0.9
    c_t1: float = 0.95
    c_s1: float = 0.95
    c_t: float = 0.95
    c_s: float = 0.95
    c_e: float = 0.95
    c_t2: float = 0.95
    c_s2: float = 0.95
    c_dri: float = 0.7
    c_1: float = 0.37
    c_2: float = 0.15
    stage1_mode: str = MODEL_ASSISTED
    tdr_mode: str = TDR_DISCRETE
    rand_scheme: str = RAND_BALANCE
    allow_dose_addition: bool = False
    optimal_rule: str = "posterior"  # or "point"
    mcmc: McmcSettings = field(default_factory=McmcSettings)

    @property
    def n_doses(self) -> int:
        return self.grid.n_doses

    @property
    def stage1_budget(self) -> int:
        return self.n1_cohorts * self.cohort_size

    def errors(self) -> list[str]:
        errs = self.grid.errors()
        for name in ("phi_t", "phi_e", "c_t1", "c_s1", "c_t", "c_s", "c_e",
                     "c_t2", "c_s2", "c_dri", "c_1", "c_2"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                errs.append(f"{name} outside (0,1)")
        if self.phi_s <= 0:
            errs.append("phi_s must be positive")
        if not (0.0 < self.delta <= 1.0):
            errs.append("delta outside (0,1]")
        if self.cohort_size < 1:
            errs.append("cohort_size must be >= 1")
        if self.n1_cohorts < 1:
            errs.append("n1_cohorts must be >= 1")
        if self.k_max < 1:
            errs.append("k_max must be >= 1")
        if not self.grid.errors():
            feasible = math.ceil(self.stage1_budget / self.grid.n_doses)
            if self.per_dose_cap < feasible:
                errs.append(
                    f"per_dose_cap {self.per_dose_cap} below stage-I feasibility "
                    f"(ceil({self.stage1_budget}/{self.grid.n_doses}) = {feasible})")
        if self.stage1_mode not in (MODEL_BASED, MODEL_ASSISTED):
            errs.append(f"unknown stage1_mode {self.stage1_mode!r}")
        if self.tdr_mode not in (TDR_DISCRETE, TDR_CONTINUOUS, TDR_EXTRAPOLATED):
            errs.append(f"unknown tdr_mode {self.tdr_mode!r}")
        if self.rand_scheme not in (RAND_EQUAL, RAND_BALANCE, RAND_ADAPTIVE):
            errs.append(f"unknown rand_scheme {self.rand_scheme!r}")
        if self.optimal_rule not in ("posterior", "point"):
            errs.append(f"unknown optimal_rule {self.optimal_rule!r}")
        errs.extend(self.mcmc.errors())
        return errs

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "phi_t": self.phi_t, "phi_s": self.phi_s, "phi_e": self.phi_e,
            "cohort_size": self.cohort_size, "n1_cohorts": self.n1_cohorts,
            "per_dose_cap": self.per_dose_cap, "k_max": self.k_max,
            "delta": self.delta,
            "c_t1": self.c_t1, "c_s1": self.c_s1, "c_t": self.c_t,
            "c_s": self.c_s, "c_e": self.c_e, "c_t2": self.c_t2,
            "c_s2": self.c_s2, "c_dri": self.c_dri, "c_1": self.c_1,
            "c_2": self.c_2,
            "stage1_mode": self.stage1_mode, "tdr_mode": self.tdr_mode,
            "rand_scheme": self.rand_scheme,
            "allow_dose_addition": self.allow_dose_addition,
            "optimal_rule": self.optimal_rule,
            "mcmc": self.mcmc.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignConfig":
        d = dict(d)
        d["grid"] = DoseGrid.from_dict(d["grid"])
        d["mcmc"] = McmcSettings.from_dict(d.get("mcmc", {}))
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def config_errors(cfg: DesignConfig) -> list[str]:
    """Complete list of invariant violations; empty when the config is valid."""
    return cfg.errors()


def validate_config(cfg: DesignConfig) -> DesignConfig:
    """Return cfg unchanged if all invariants hold, else raise ConfigError."""
    errs = cfg.errors()
    if errs:
        raise ConfigError(errs)
    return cfg


@dataclass(frozen=True)
class PatientRecord:
    """One enrolled patient: dose, toxicity, PD value, and (possibly pending)
    response outcome."""

    id: int
    dose_index: int          # 1-based level on the grid
    y_t: int                 # binary toxicity
    y_s: float               # continuous PD measurement
    y_e: Optional[int]       # binary response; None while pending
    enroll_order: int
    stage: int               # 1 or 2

    def to_dict(self) -> dict:
        return {"id": self.id, "dose_index": self.dose_index,
                "y_t": self.y_t, "y_s": self.y_s,
                "y_e": PENDING if self.y_e is None else self.y_e,
                "enroll_order": self.enroll_order, "stage": self.stage}

    @classmethod
    def from_dict(cls, d: dict) -> "PatientRecord":
        y_e = d["y_e"]
        return cls(id=d["id"], dose_index=d["dose_index"], y_t=d["y_t"],
                   y_s=d["y_s"], y_e=None if y_e == PENDING else y_e,
                   enroll_order=d["enroll_order"], stage=d["stage"])


@dataclass(frozen=True)
class Tdr:
    """Therapeutic dose range: a discrete level interval, a continuous dose
    interval, or empty."""

    kind: str                      # "discrete" | "continuous" | "empty"
    lo: Optional[float] = None     # level index (discrete) or dose (continuous)
    hi: Optional[float] = None

    @classmethod
    def empty(cls) -> "Tdr":
        return cls(kind="empty")

    @classmethod
    def discrete(cls, mad: int, mtd: int) -> "Tdr":
        if mad > mtd:
            return cls.empty()
        return cls(kind="discrete", lo=int(mad), hi=int(mtd))

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "Tdr":
        if lo > hi:
            return cls.empty()
        return cls(kind="continuous", lo=float(lo), hi=float(hi))

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def levels(self, grid: DoseGrid) -> list[int]:
        """Grid levels covered by the range (1-based)."""
        if self.is_empty:
            return []
        if self.kind == "discrete":
            return list(range(int(self.lo), int(self.hi) + 1))
        return [j + 1 for j, d in enumerate(grid.doses)
                if self.lo <= d <= self.hi]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "Tdr":
        if d["kind"] == "discrete":
            return cls(kind="discrete", lo=int(d["lo"]), hi=int(d["hi"]))
        return cls(kind=d["kind"], lo=d["lo"], hi=d["hi"])


@dataclass(frozen=True)
class PosteriorSnapshot:
    """Per-dose posterior summaries plus the retained draws they came from.

    Model-assisted snapshots carry point estimates only (draw matrices are
    None); model-based snapshots retain the toxicity-slope draws and the
    PD-curve parameter draws so probability queries can be re-evaluated.
    """

    p_hat: tuple[float, ...]                 # toxicity probability estimates
    mu_hat: tuple[float, ...]                # mean-PD estimates
    pi_hat: tuple[float, ...]                # response-rate posterior means
    beta_params: tuple[tuple[float, float], ...]   # per-dose Beta(a,b) for pi
    n_draws: int
    tox_draws: Optional[tuple[float, ...]] = None        # slope draws
    emax_draws: Optional[tuple[tuple[float, ...], ...]] = None  # rows (eta,tau,beta,gamma,sigma)

    def errors(self) -> list[str]:
        errs = []
        for name in ("p_hat", "mu_hat", "pi_hat"):
            if any(not math.isfinite(v) for v in getattr(self, name)):
                errs.append(f"non-finite {name}")
        if any(a <= 0 or b <= 0 for a, b in self.beta_params):
            errs.append("non-positive Beta parameters")
        if self.tox_draws is not None and len(self.tox_draws) != self.n_draws:
            errs.append("tox draw count mismatch")
        if self.emax_draws is not None and len(self.emax_draws) != self.n_draws:
            errs.append("emax draw count mismatch")
        return errs

    def to_dict(self) -> dict:
        return {
            "p_hat": list(self.p_hat), "mu_hat": list(self.mu_hat),
            "pi_hat": list(self.pi_hat),
            "beta_params": [list(ab) for ab in self.beta_params],
            "n_draws": self.n_draws,
            "tox_draws": None if self.tox_draws is None else list(self.tox_draws),
            "emax_draws": None if self.emax_draws is None
            else [list(r) for r in self.emax_draws],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorSnapshot":
        return cls(
            p_hat=tuple(d["p_hat"]), mu_hat=tuple(d["mu_hat"]),
            pi_hat=tuple(d["pi_hat"]),
            beta_params=tuple((a, b) for a, b in d["beta_params"]),
            n_draws=d["n_draws"],
            tox_draws=None if d["tox_draws"] is None else tuple(d["tox_draws"]),
            emax_draws=None if d["emax_draws"] is None
            else tuple(tuple(r) for r in d["emax_draws"]),
        )


@dataclass
class TrialState:
    """Full audit of a running trial.

    Mutations happen only through the apply_* methods below, each of which
    appends exactly one decision-log entry.  `pending_alloc` lists the dose
    levels (one per patient) that the last decision allocated and that are
    still awaiting outcome entry; cohorts may only be recorded against it.
    """

    config: DesignConfig
    seed: int = 0
    patients: list[PatientRecord] = field(default_factory=list)
    j_t: int = 1
    j_s: int = 1
    stage: Any = 1                      # 1, 2, or "done"
    eliminated_high: Optional[int] = None   # lowest toxicity-eliminated level
    eliminated_low: Optional[int] = None    # highest futility-eliminated level
    tdr: Optional[Tdr] = None
    rp2s: list[int] = field(default_factory=list)
    dropped_stage2: list[int] = field(default_factory=list)
    status: str = STATUS_ACTIVE
    pending_alloc: list[int] = field(default_factory=list)
    decision_log: list[dict] = field(default_factory=list)
    final: Optional[dict] = None        # serialized FinalAnalysis

    def __post_init__(self):
        if not self.decision_log and not self.pending_alloc and self.status == STATUS_ACTIVE:
            # fresh trial: first cohort goes to the lowest dose
            self.pending_alloc = [1] * self.config.cohort_size

    # ---- read-only helpers -------------------------------------------------

    @property
    def n_enrolled(self) -> int:
        return len(self.patients)

    @property
    def active(self) -> bool:
        return self.status == STATUS_ACTIVE

    def counts_per_dose(self) -> list[int]:
        counts = [0] * self.config.n_doses
        for p in self.patients:
            counts[p.dose_index - 1] += 1
        return counts

    def tox_counts_per_dose(self) -> list[int]:
        counts = [0] * self.config.n_doses
        for p in self.patients:
            counts[p.dose_index - 1] += p.y_t
        return counts

    def pd_values_per_dose(self) -> list[list[float]]:
        vals: list[list[float]] = [[] for _ in range(self.config.n_doses)]
        for p in self.patients:
            vals[p.dose_index - 1].append(p.y_s)
        return vals

    def response_counts_per_dose(self) -> list[tuple[int, int]]:
        """(responders, observed) per dose; pending outcomes are excluded."""
        out = [[0, 0] for _ in range(self.config.n_doses)]
        for p in self.patients:
            if p.y_e is not None:
                out[p.dose_index - 1][0] += p.y_e
                out[p.dose_index - 1][1] += 1
        return [(r, n) for r, n in out]

    def eligible_levels(self) -> list[int]:
        """Stage-II randomization candidates: RP2S minus drops, below cap."""
        counts = self.counts_per_dose()
        return [j for j in self.rp2s
                if j not in self.dropped_stage2
                and counts[j - 1] < self.config.per_dose_cap]

    def surviving_set(self) -> list[int]:
        """RP2S doses not dropped for toxicity or futility (ordered)."""
        return sorted(j for j in self.rp2s if j not in self.dropped_stage2)

    def highest_tried(self) -> Optional[int]:
        counts = self.counts_per_dose()
        tried = [j + 1 for j, n in enumerate(counts) if n > 0]
        return max(tried) if tried else None

    # ---- mutations (each appends exactly one log entry) --------------------

    def _log(self, rule: str, inputs: dict, outcome: dict) -> None:
        self.decision_log.append({
            "seq": len(self.decision_log),
            "rule": rule,
            "inputs": inputs,
            "outcome": outcome,
        })

    def record_cohort(self, dose_index: int,
                      outcomes: list[tuple[int, float, Optional[int]]]) -> None:
        """Append one cohort of (y_t, y_s, y_e-or-None) outcomes at a dose.

        The dose must be among the currently recommended allocations and the
        cohort must cover every pending slot at that dose.
        """
        if not self.active:
            raise TrialError("trial not active")
        want = sum(1 for j in self.pending_alloc if j == dose_index)
        if want == 0:
            raise TrialError(f"dose {dose_index} not currently recommended "
                             f"(pending: {sorted(set(self.pending_alloc))})")
        if len(outcomes) != want:
            raise TrialError(f"expected {want} outcomes at dose {dose_index}, "
                             f"got {len(outcomes)}")
        stage = self.stage if self.stage in (1, 2) else 2
        if stage == 2:
            n_at = self.counts_per_dose()[dose_index - 1]
            if n_at + want > self.config.per_dose_cap:
                raise TrialError(f"cap exceeded at dose {dose_index}")
        for y_t, y_s, y_e in outcomes:
            if not math.isfinite(y_s):
                raise TrialError("non-finite PD value")
            if y_t not in (0, 1):
                raise TrialError("y_t must be 0 or 1")
            if y_e not in (0, 1, None):
                raise TrialError("y_e must be 0, 1, or None")
        self._apply_enroll(dose_index, [list(o) for o in outcomes], stage)
        self._log("enroll",
                  {"dose": dose_index, "n": want},
                  {"dose": dose_index, "stage": stage,
                   "outcomes": [[y_t, y_s, PENDING if y_e is None else y_e]
                                for y_t, y_s, y_e in outcomes]})

    def _apply_enroll(self, dose_index: int, outcomes: list, stage: int) -> None:
        order = self.n_enrolled
        for y_t, y_s, y_e in outcomes:
            if y_e == PENDING:
                y_e = None
            order += 1
            self.patients.append(PatientRecord(
                id=order, dose_index=dose_index, y_t=int(y_t), y_s=float(y_s),
                y_e=None if y_e is None else int(y_e),
                enroll_order=order, stage=stage))
        removed = 0
        kept = []
        for j in self.pending_alloc:
            if j == dose_index and removed < len(outcomes):
                removed += 1
            else:
                kept.append(j)
        self.pending_alloc = kept

    def apply_stage1_eval(self, inputs: dict, outcome: dict) -> None:
        """Apply a stage-I rule-evaluation outcome (moves, eliminations,
        stopping, or stage close-out) computed by the engine."""
        if self.stage != 1 or not self.active:
            raise TrialError("stage-I evaluation on a non-stage-I trial")
        self._apply_stage1_outcome(outcome)
        self._log("stage1-eval", inputs, outcome)

    def _apply_stage1_outcome(self, outcome: dict) -> None:
        if outcome.get("eliminated_high") is not None:
            self.eliminated_high = outcome["eliminated_high"]
        if outcome.get("eliminated_low") is not None:
            self.eliminated_low = outcome["eliminated_low"]
        stop = outcome.get("stop")
        if stop:
            self.status = (STATUS_STOPPED_TOX if stop == "toxicity"
                           else STATUS_STOPPED_FUT)
            self.pending_alloc = []
            self.stage = STAGE_DONE
            return
        close = outcome.get("close")
        if close is not None:
            self.tdr = Tdr.from_dict(close["tdr"])
            self.rp2s = list(close["rp2s"])
            if close.get("terminal"):
                self.status = (STATUS_STOPPED_TOX
                               if close.get("reason") == "toxicity"
                               else STATUS_STOPPED_FUT)
                self.stage = STAGE_DONE
                self.pending_alloc = []
            else:
                self.stage = 2
                self.pending_alloc = list(outcome.get("pending", []))
            return
        self.j_t = outcome["j_t"]
        self.j_s = outcome["j_s"]
        self.pending_alloc = list(outcome["pending"])

    def apply_stage2_eval(self, inputs: dict, outcome: dict) -> None:
        """Apply a stage-II monitoring outcome (drops, dose additions, the
        next randomized cohort, or completion)."""
        if self.stage != 2 or not self.active:
            raise TrialError("stage-II evaluation on a non-stage-II trial")
        self._apply_stage2_outcome(outcome)
        self._log("stage2-eval", inputs, outcome)

    def _apply_stage2_outcome(self, outcome: dict) -> None:
        for j in outcome.get("dropped_added", []):
            if j not in self.dropped_stage2:
                self.dropped_stage2.append(j)
        self.dropped_stage2.sort()
        for j in outcome.get("rp2s_added", []):
            if j not in self.rp2s:
                self.rp2s.append(j)
        self.rp2s.sort()
        if outcome.get("complete"):
            self.pending_alloc = []
        else:
            self.pending_alloc = list(outcome["pending"])

    def apply_final(self, final: dict) -> None:
        """Record the final analysis and close the trial."""
        if self.stage != 2 or not self.active:
            raise TrialError("final analysis requires an active stage-II trial")
        self._apply_final_outcome(final)
        self._log("final", {}, {"final": final})

    def _apply_final_outcome(self, final: dict) -> None:
        self.final = final
        self.stage = STAGE_DONE
        self.status = STATUS_COMPLETED
        self.pending_alloc = []

    # ---- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "patients": [p.to_dict() for p in self.patients],
            "j_t": self.j_t, "j_s": self.j_s,
            "stage": self.stage,
            "eliminated_high": self.eliminated_high,
            "eliminated_low": self.eliminated_low,
            "tdr": None if self.tdr is None else self.tdr.to_dict(),
            "rp2s": list(self.rp2s),
            "dropped_stage2": list(self.dropped_stage2),
            "status": self.status,
            "pending_alloc": list(self.pending_alloc),
            "decision_log": [dict(e) for e in self.decision_log],
            "final": self.final,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialState":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise TrialError(f"unsupported schema_version {d.get('schema_version')}")
        state = cls(config=DesignConfig.from_dict(d["config"]), seed=d["seed"])
        state.patients = [PatientRecord.from_dict(p) for p in d["patients"]]
        state.j_t = d["j_t"]
        state.j_s = d["j_s"]
        state.stage = d["stage"]
        state.eliminated_high = d["eliminated_high"]
        state.eliminated_low = d["eliminated_low"]
        state.tdr = None if d["tdr"] is None else Tdr.from_dict(d["tdr"])
        state.rp2s = list(d["rp2s"])
        state.dropped_stage2 = list(d["dropped_stage2"])
        state.status = d["status"]
        state.pending_alloc = list(d["pending_alloc"])
        state.decision_log = [dict(e) for e in d["decision_log"]]
        state.final = d["final"]
        return state

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, blob: str) -> "TrialState":
        return cls.from_dict(json.loads(blob))


def replay_log(config: DesignConfig, seed: int, log: list[dict]) -> TrialState:
    """Rebuild a trial state by re-applying each logged outcome in order.

    The rebuilt state matches the original bit-exactly: rules are not
    re-decided, only their recorded outcomes are applied.
    """
    state = TrialState(config=config, seed=seed)
    for entry in log:
        outcome = entry["outcome"]
        rule = entry["rule"]
        if rule == "enroll":
            state._apply_enroll(outcome["dose"],
                                [list(o) for o in outcome["outcomes"]],
                                outcome["stage"])
        elif rule == "stage1-eval":
            state._apply_stage1_outcome(outcome)
        elif rule == "stage2-eval":
            state._apply_stage2_outcome(outcome)
        elif rule == "final":
            state._apply_final_outcome(outcome["final"])
        else:
            raise TrialError(f"unknown log rule {rule!r}")
        state.decision_log.append(dict(entry))
    return state


def default_design(**overrides) -> DesignConfig:
    """The reference five-dose design used throughout the documentation and
    the bundled simulation scenarios."""
    grid = DoseGrid(doses=(0.1, 0.3, 0.5, 0.7, 0.9),
                    skeleton=(0.05, 0.15, 0.30, 0.40, 0.55))
    return replace(DesignConfig(grid=grid), **overrides) if overrides \
        else DesignConfig(grid=grid)
