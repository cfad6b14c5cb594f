"""Simulation truth: correlated patient-outcome generation.

A scenario fixes per-dose marginal rates for toxicity and response and a
per-dose mean for the continuous PD readout.  Outcomes are correlated
through a shared patient effect and through the PD value itself, which
enters both binary-outcome links.  Intercepts are calibrated by quadrature
so the simulated marginals hit the requested rates exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

DEFAULT_PD_SD = 0.1
DEFAULT_EFFECT_SD = 1.0
_BRACKET = 30.0
_GH_NODES = 80


@dataclass(frozen=True)
class Scenario:
    """Ground truth for one simulated dose grid.

    tox and resp are the marginal event probabilities per dose; pd_mean is
    the mean of the continuous PD outcome.  tox_intercept / resp_intercept
    are the calibrated per-dose link intercepts (see calibrate_scenario).
    optimal marks the target dose for summary tables, None when the
    scenario has no acceptable dose.
    """

    name: str
    doses: tuple[float, ...]
    tox: tuple[float, ...]
    resp: tuple[float, ...]
    pd_mean: tuple[float, ...]
    pd_sd: float = DEFAULT_PD_SD
    effect_sd: float = DEFAULT_EFFECT_SD
    tox_slope: float = 1.0
    resp_slope: float = 1.0
    tox_intercept: tuple[float, ...] = ()
    resp_intercept: tuple[float, ...] = ()
    optimal: Optional[int] = None

    @property
    def n_doses(self) -> int:
        return len(self.doses)

    def errors(self) -> list[str]:
        errs = []
        lens = {len(self.tox), len(self.resp), len(self.pd_mean),
                len(self.doses)}
        if len(lens) != 1:
            errs.append("per-dose arrays must share the grid length")
        if any(not 0.0 < t < 1.0 for t in self.tox + self.resp):
            errs.append("toxicity and response rates must lie in (0, 1)")
        if self.pd_sd <= 0.0:
            errs.append("pd_sd must be positive")
        if self.effect_sd < 0.0:
            errs.append("effect_sd must be non-negative")
        if self.optimal is not None and not 1 <= self.optimal <= self.n_doses:
            errs.append("optimal level outside the grid")
        for arr in (self.tox_intercept, self.resp_intercept):
            if len(arr) != self.n_doses:
                errs.append("intercepts not calibrated for the grid")
                break
        return errs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "doses": list(self.doses),
            "tox": list(self.tox),
            "resp": list(self.resp),
            "pd_mean": list(self.pd_mean),
            "pd_sd": self.pd_sd,
            "effect_sd": self.effect_sd,
            "tox_slope": self.tox_slope,
            "resp_slope": self.resp_slope,
            "optimal": self.optimal,
        }


def _mean_link_prob(intercept: float, shift_mean: float,
                    shift_sd: float) -> float:
    """E[expit(intercept + W)] with W normal, by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(_GH_NODES)
    w = shift_mean + np.sqrt(2.0) * shift_sd * nodes
    return float(np.dot(weights, expit(intercept + w)) / np.sqrt(np.pi))


def calibrate_intercept(target: float, shift_mean: float,
                        shift_sd: float) -> float:
    """Intercept a with E[expit(a + W)] = target, W ~ N(shift_mean,
    shift_sd^2).  Bisection; the mean is strictly increasing in a."""
    if not 0.0 < target < 1.0:
        raise ValueError("target rate must lie in (0, 1)")
    lo, hi = -_BRACKET, _BRACKET
    f_lo = _mean_link_prob(lo, shift_mean, shift_sd)
    f_hi = _mean_link_prob(hi, shift_mean, shift_sd)
    if not f_lo < target < f_hi:
        raise ValueError(f"no intercept in [-{_BRACKET}, {_BRACKET}] "
                         f"reaches rate {target}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _mean_link_prob(mid, shift_mean, shift_sd)
        if abs(f - target) < 1e-10:
            return mid
        if f < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def calibrate_scenario(name: str,
                       tox: Sequence[float],
                       resp: Sequence[float],
                       pd_mean: Sequence[float],
                       doses: Sequence[float],
                       pd_sd: float = DEFAULT_PD_SD,
                       effect_sd: float = DEFAULT_EFFECT_SD,
                       tox_slope: float = 1.0,
                       resp_slope: float = 1.0,
                       optimal: Optional[int] = None) -> Scenario:
    """Build a scenario whose simulated marginals match the given rates.

    Each binary outcome follows expit(intercept + slope * pd + effect) with
    the patient effect shared between the two outcomes, so toxicity and
    response are positively associated within dose.  The per-dose intercept
    is solved so the marginal rate (integrating over pd and the effect)
    equals the target.
    """
    s = Scenario(name=name, doses=tuple(float(d) for d in doses),
                 tox=tuple(float(t) for t in tox),
                 resp=tuple(float(r) for r in resp),
                 pd_mean=tuple(float(m) for m in pd_mean),
                 pd_sd=float(pd_sd), effect_sd=float(effect_sd),
                 tox_slope=float(tox_slope), resp_slope=float(resp_slope),
                 tox_intercept=tuple(0.0 for _ in doses),
                 resp_intercept=tuple(0.0 for _ in doses),
                 optimal=optimal)
    lens = {len(s.tox), len(s.resp), len(s.pd_mean), len(s.doses)}
    if len(lens) != 1:
        raise ValueError("per-dose arrays must share the grid length")
    tox_i = []
    resp_i = []
    for j in range(s.n_doses):
        m = s.pd_mean[j]
        sd_t = float(np.hypot(s.tox_slope * s.pd_sd, s.effect_sd))
        sd_e = float(np.hypot(s.resp_slope * s.pd_sd, s.effect_sd))
        tox_i.append(calibrate_intercept(s.tox[j], s.tox_slope * m, sd_t))
        resp_i.append(calibrate_intercept(s.resp[j], s.resp_slope * m, sd_e))
    out = replace(s, tox_intercept=tuple(tox_i), resp_intercept=tuple(resp_i))
    errs = out.errors()
    if errs:
        raise ValueError("; ".join(errs))
    return out


def sample_outcomes(scenario: Scenario, dose_index: int, n: int,
                    rng: np.random.Generator
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n correlated outcome triples at a dose, as (y_t, y_s, y_e) arrays.

    Draw order is fixed (pd values, shared effects, toxicity uniforms,
    response uniforms) so a seeded generator reproduces an outcome stream
    exactly, whatever the batch sizes.
    """
    j = dose_index - 1
    y_s = rng.normal(scenario.pd_mean[j], scenario.pd_sd, n)
    effect = rng.normal(0.0, scenario.effect_sd, n)
    p_t = expit(scenario.tox_intercept[j] + scenario.tox_slope * y_s + effect)
    p_e = expit(scenario.resp_intercept[j] + scenario.resp_slope * y_s + effect)
    y_t = (rng.random(n) < p_t).astype(int)
    y_e = (rng.random(n) < p_e).astype(int)
    return y_t, y_s, y_e


def generate_patient(scenario: Scenario, dose_index: int,
                     rng: np.random.Generator) -> tuple[int, float, int]:
    """One correlated outcome triple (y_t, y_s, y_e) at a dose level."""
    y_t, y_s, y_e = sample_outcomes(scenario, dose_index, 1, rng)
    return int(y_t[0]), float(y_s[0]), int(y_e[0])


# ---------------------------------------------------------------------------
# built-in scenario table

_DEFAULT_DOSES = (0.1, 0.3, 0.5, 0.7, 0.9)

_BUILTIN = (
    # name, toxicity, response, pd mean, optimal level (None: no good dose)
    ("1", (0.05, 0.10, 0.15, 0.18, 0.45), (0.40, 0.50, 0.52, 0.53, 0.53),
     (0.40, 0.57, 0.58, 0.60, 0.60), 2),
    ("2", (0.05, 0.08, 0.10, 0.13, 0.22), (0.35, 0.40, 0.50, 0.52, 0.52),
     (0.00, 0.37, 0.45, 0.48, 0.49), 3),
    ("3", (0.05, 0.08, 0.10, 0.13, 0.15), (0.35, 0.45, 0.58, 0.59, 0.60),
     (0.20, 0.31, 0.42, 0.42, 0.43), 3),
    ("4", (0.02, 0.04, 0.06, 0.08, 0.10), (0.15, 0.30, 0.35, 0.45, 0.48),
     (0.00, 0.08, 0.20, 0.34, 0.35), 4),
    ("5", (0.05, 0.08, 0.10, 0.12, 0.20), (0.15, 0.35, 0.45, 0.55, 0.56),
     (0.03, 0.15, 0.28, 0.37, 0.38), 4),
    ("6", (0.05, 0.12, 0.45, 0.60, 0.75), (0.45, 0.55, 0.62, 0.62, 0.63),
     (0.18, 0.33, 0.43, 0.55, 0.70), 2),
    ("7", (0.02, 0.04, 0.06, 0.08, 0.12), (0.10, 0.20, 0.30, 0.40, 0.50),
     (0.00, 0.04, 0.14, 0.25, 0.40), 5),
    ("8", (0.10, 0.40, 0.50, 0.70, 0.85), (0.45, 0.60, 0.62, 0.62, 0.62),
     (0.32, 0.64, 0.78, 0.79, 0.80), 1),
    # flat dose-response: no dose should be selected
    ("9", (0.02, 0.07, 0.12, 0.18, 0.50), (0.45, 0.45, 0.45, 0.45, 0.45),
     (0.20, 0.20, 0.21, 0.21, 0.21), None),
)


@lru_cache(maxsize=1)
def _builtin_calibrated() -> tuple[Scenario, ...]:
    return tuple(
        calibrate_scenario(name, tox, resp, pd, doses=_DEFAULT_DOSES,
                           optimal=opt)
        for name, tox, resp, pd, opt in _BUILTIN)


def builtin_scenarios() -> list[Scenario]:
    """The nine-scenario evaluation suite on the default five-dose grid."""
    return list(_builtin_calibrated())


def builtin_scenario(name: str) -> Scenario:
    for s in _builtin_calibrated():
        if s.name == str(name):
            return s
    raise KeyError(f"no built-in scenario named {name!r}")


# ---------------------------------------------------------------------------
# JSON I/O


def scenario_from_dict(d: dict) -> Scenario:
    """Recalibrate a scenario from its stored marginals."""
    return calibrate_scenario(
        str(d["name"]), d["tox"], d["resp"], d["pd_mean"], doses=d["doses"],
        pd_sd=d.get("pd_sd", DEFAULT_PD_SD),
        effect_sd=d.get("effect_sd", DEFAULT_EFFECT_SD),
        tox_slope=d.get("tox_slope", 1.0),
        resp_slope=d.get("resp_slope", 1.0),
        optimal=d.get("optimal"))


def load_scenarios(path: str) -> list[Scenario]:
    """Read a scenario list (or a single scenario object) from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        raw = raw.get("scenarios", [raw])
    return [scenario_from_dict(d) for d in raw]


def save_scenarios(scenarios: Sequence[Scenario], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"scenarios": [s.to_dict() for s in scenarios]}, fh,
                  indent=2)
        fh.write("\n")
