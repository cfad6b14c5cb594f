"""Posterior computation: toxicity slope model, saturating PD curve model,
conjugate response-rate updates, isotonic regression, and prior elicitation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import betainc, expit

from droid import _mcmc
from droid.core import McmcSettings


def elicit_gamma_prior(estimate: float, bounds: tuple[float, float]) -> tuple[float, float]:
    """Gamma (shape, rate) with mean = estimate and sd = range width / 4."""
    lo, hi = bounds
    if not (lo < estimate < hi):
        raise ValueError(f"estimate {estimate} outside range ({lo}, {hi})")
    sd = (hi - lo) / 4.0
    shape = (estimate / sd) ** 2
    rate = estimate / sd ** 2
    return shape, rate


def effective_doses(skeleton: Sequence[float], alpha0: float = 3.0,
                    alpha_hat: float = 1.0) -> list[float]:
    """Back-solve transformed doses so the slope model matches the prior
    toxicity guesses at the prior mean of the slope."""
    if alpha_hat <= 0:
        raise ValueError("alpha_hat must be positive")
    if any(not (0.0 < q < 1.0) for q in skeleton):
        raise ValueError("skeleton value outside (0,1)")
    if any(b <= a for a, b in zip(skeleton, skeleton[1:])):
        raise ValueError("skeleton not strictly increasing")
    return [(math.log(q / (1.0 - q)) - alpha0) / alpha_hat for q in skeleton]


@dataclass(frozen=True)
class ToxicityModelSpec:
    """One-parameter slope model with fixed intercept on back-solved doses."""

    skeleton: tuple[float, ...]
    alpha0: float = 3.0
    alpha_prior_mean: float = 1.0

    @property
    def effective_doses(self) -> tuple[float, ...]:
        return tuple(effective_doses(self.skeleton, self.alpha0,
                                     self.alpha_prior_mean))


@dataclass(frozen=True)
class EmaxModelSpec:
    """Priors for the saturating PD curve: four Gamma (shape, rate) pairs for
    baseline, span, midpoint, and slope, plus a half-normal noise-sd scale.

    When elicited (estimate, range) pairs are supplied, each Gamma prior mean
    must sit within 2% of its estimate.
    """

    baseline: tuple[float, float] = (1.0, 10.0)
    span: tuple[float, float] = (7.1, 17.8)
    midpoint: tuple[float, float] = (4.0, 8.0)
    slope: tuple[float, float] = (1.0 / 9.0, 1.0 / 18.0)
    sigma_scale: float = 0.5
    elicited: dict = field(default_factory=dict)

    def errors(self) -> list[str]:
        errs = []
        for name in ("baseline", "span", "midpoint", "slope"):
            a, b = getattr(self, name)
            if a <= 0 or b <= 0:
                errs.append(f"non-positive Gamma parameters for {name}")
        if self.sigma_scale <= 0:
            errs.append("sigma_scale must be positive")
        for name, (est, _) in self.elicited.items():
            a, b = getattr(self, name)
            if abs(a / b - est) > 0.02 * est:
                errs.append(f"{name} prior mean {a / b:.4f} off elicited {est}")
        return errs

    @classmethod
    def from_elicitation(cls, baseline=(0.1, (0.0, 0.3)), span=(0.4, (0.1, 0.7)),
                         midpoint=(0.5, (0.0, 1.0)), slope=(2.0, (0.0, 24.0)),
                         sigma_scale=0.5) -> "EmaxModelSpec":
        pairs = {"baseline": baseline, "span": span,
                 "midpoint": midpoint, "slope": slope}
        priors = {k: elicit_gamma_prior(est, rng) for k, (est, rng) in pairs.items()}
        return cls(sigma_scale=sigma_scale, elicited=pairs, **priors)


def default_emax_spec() -> EmaxModelSpec:
    """The shipped default curve priors (see README for their provenance)."""
    return EmaxModelSpec()


@dataclass(frozen=True)
class DrawSet:
    """Retained posterior draws: rows are draws, columns named parameters."""

    matrix: np.ndarray
    columns: tuple[str, ...]
    accept_rates: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.columns):
            raise ValueError("draw matrix shape does not match columns")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("non-finite draws")

    @property
    def n_draws(self) -> int:
        return self.matrix.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.columns.index(name)]


def posterior_prob(values, threshold: float, direction: str = ">") -> float:
    """Monte Carlo fraction of draws whose functional value satisfies the
    predicate (value <direction> threshold)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no draws")
    if direction == ">":
        hits = v > threshold
    elif direction == ">=":
        hits = v >= threshold
    elif direction == "<":
        hits = v < threshold
    elif direction == "<=":
        hits = v <= threshold
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return float(np.mean(hits))


@dataclass(frozen=True)
class ToxicityFit:
    """Slope-model posterior with per-dose toxicity probability estimates."""

    draws: DrawSet
    effective: tuple[float, ...]
    alpha0: float
    p_hat: tuple[float, ...]

    def p_draws(self, effective: Optional[Sequence[float]] = None) -> np.ndarray:
        d = np.asarray(self.effective if effective is None else effective)
        alpha = self.draws.column("alpha")
        return expit(self.alpha0 + alpha[:, None] * d[None, :])


def fit_toxicity(counts: Sequence[tuple[int, int]], spec: ToxicityModelSpec,
                 settings: McmcSettings = McmcSettings(),
                 seed: Optional[int] = None) -> ToxicityFit:
    """Fit the slope model to per-dose (n, toxicity count) data."""
    n_j = np.array([n for n, _ in counts], dtype=np.int64)
    x_j = np.array([x for _, x in counts], dtype=np.int64)
    if np.any(x_j < 0) or np.any(x_j > n_j):
        raise ValueError("toxicity counts must satisfy 0 <= x <= n")
    if n_j.sum() == 0:
        raise ValueError("at least one treated patient required")
    d_eff = np.asarray(spec.effective_doses, dtype=float)
    if len(d_eff) != len(n_j):
        raise ValueError("counts length does not match dose grid")
    use_seed = settings.seed if seed is None else seed
    raw, rate = _mcmc.tox_rw(d_eff, n_j, x_j, spec.alpha0,
                             settings.burn_in, settings.draws, settings.thin,
                             use_seed)
    draws = DrawSet(matrix=raw.reshape(-1, 1), columns=("alpha",),
                    accept_rates=(float(rate),), seed=use_seed)
    p = expit(spec.alpha0 + raw[:, None] * d_eff[None, :])
    return ToxicityFit(draws=draws, effective=tuple(d_eff), alpha0=spec.alpha0,
                       p_hat=tuple(float(v) for v in p.mean(axis=0)))


EMAX_COLUMNS = ("baseline", "span", "midpoint", "slope", "sigma")


@dataclass(frozen=True)
class EmaxFit:
    """Curve-model posterior with mean-PD estimates on an evaluation grid."""

    draws: DrawSet
    doses: tuple[float, ...]
    mu_hat: tuple[float, ...]

    def mu_draws(self, doses: Optional[Sequence[float]] = None) -> np.ndarray:
        """Curve values per retained draw (rows) at each dose (columns)."""
        d = np.asarray(self.doses if doses is None else doses, dtype=float)
        m = self.draws.matrix
        eta, tau = m[:, 0:1], m[:, 1:2]
        beta, gam = m[:, 2:3], m[:, 3:4]
        with np.errstate(divide="ignore"):
            logd = np.log(d)[None, :]
        frac = np.where(np.isneginf(logd),
                        0.0,
                        expit(gam * (logd - np.log(beta))))
        return eta + tau * frac


def emax_sufficient_stats(data: Iterable[tuple[float, float]],
                          doses: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-dose (n, sum, sum of squares) for the curve likelihood."""
    d = np.asarray(doses, dtype=float)
    n_j = np.zeros(len(d), dtype=np.int64)
    s1 = np.zeros(len(d))
    s2 = np.zeros(len(d))
    for dose, y in data:
        if not math.isfinite(y):
            raise ValueError("non-finite PD value")
        idx = np.flatnonzero(np.isclose(d, dose))
        if idx.size == 0:
            raise ValueError(f"dose {dose} not on the evaluation grid")
        j = int(idx[0])
        n_j[j] += 1
        s1[j] += y
        s2[j] += y * y
    return n_j, s1, s2


def fit_emax_stats(doses: Sequence[float], n_j: np.ndarray, s1: np.ndarray,
                   s2: np.ndarray, spec: EmaxModelSpec,
                   settings: McmcSettings = McmcSettings(),
                   seed: Optional[int] = None) -> EmaxFit:
    """Fit the curve model from per-dose sufficient statistics."""
    errs = spec.errors()
    if errs:
        raise ValueError("; ".join(errs))
    if int(np.sum(n_j)) == 0:
        raise ValueError("at least one observation required")
    d = np.asarray(doses, dtype=float)
    if np.any(d < 0):
        raise ValueError("doses must be nonnegative")
    with np.errstate(divide="ignore"):
        log_d = np.where(d > 0, np.log(np.maximum(d, 1e-300)), -np.inf)
    pa = np.array([spec.baseline[0], spec.span[0], spec.midpoint[0], spec.slope[0]])
    pb = np.array([spec.baseline[1], spec.span[1], spec.midpoint[1], spec.slope[1]])
    use_seed = settings.seed if seed is None else seed
    raw, rates = _mcmc.emax_rw(log_d, np.asarray(n_j, dtype=np.int64),
                               np.asarray(s1, dtype=float),
                               np.asarray(s2, dtype=float),
                               pa, pb, spec.sigma_scale,
                               settings.burn_in, settings.draws, settings.thin,
                               use_seed)
    draws = DrawSet(matrix=raw, columns=EMAX_COLUMNS,
                    accept_rates=tuple(float(r) for r in rates), seed=use_seed)
    fit = EmaxFit(draws=draws, doses=tuple(float(v) for v in d), mu_hat=())
    mu = fit.mu_draws().mean(axis=0)
    return EmaxFit(draws=draws, doses=fit.doses,
                   mu_hat=tuple(float(v) for v in mu))


def fit_emax(data: Iterable[tuple[float, float]], spec: EmaxModelSpec,
             settings: McmcSettings = McmcSettings(),
             eval_doses: Optional[Sequence[float]] = None,
             seed: Optional[int] = None) -> EmaxFit:
    """Fit the curve model to (dose, PD value) pairs.

    eval_doses sets the grid the fit reports on; it defaults to the distinct
    doses present in the data and may include untreated doses.
    """
    pairs = list(data)
    if eval_doses is None:
        eval_doses = sorted({dose for dose, _ in pairs})
    n_j, s1, s2 = emax_sufficient_stats(pairs, eval_doses)
    return fit_emax_stats(eval_doses, n_j, s1, s2, spec, settings, seed)


@dataclass(frozen=True)
class BetaPosterior:
    """Conjugate Beta posterior for a response rate."""

    a: float
    b: float

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def prob_greater(self, t: float) -> float:
        """Pr(rate > t)."""
        return float(1.0 - betainc(self.a, self.b, min(max(t, 0.0), 1.0)))

    def prob_geq(self, t: float) -> float:
        """Pr(rate >= t); equals prob_greater for this continuous posterior."""
        return self.prob_greater(t)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.beta(self.a, self.b, size=size)


def beta_binomial_posterior(responses: int, n: int,
                            prior: tuple[float, float] = (1.0, 1.0)) -> BetaPosterior:
    """Closed-form Beta update for responses out of n."""
    if not (0 <= responses <= n):
        raise ValueError(f"responses {responses} outside [0, {n}]")
    a0, b0 = prior
    if a0 <= 0 or b0 <= 0:
        raise ValueError("prior parameters must be positive")
    return BetaPosterior(a=a0 + responses, b=b0 + n - responses)


def pava_isotonic(values: Sequence[float], weights: Sequence[float]) -> list[float]:
    """Weighted least-squares non-decreasing fit (pooled adjacent violators)."""
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise ValueError("values and weights must be equal-length vectors")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite values")
    out = np.empty_like(y)
    _mcmc.pava_fit(y, w, out)
    return [float(v) for v in out]


def pava_matrix(mat: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Row-wise PAVA for draw matrices (shared per-column weights)."""
    return _mcmc.pava_rows(np.ascontiguousarray(mat, dtype=float),
                           np.asarray(weights, dtype=float))
