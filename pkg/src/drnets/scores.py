"""Doubly robust scores, pseudo-outcomes, and cross-fitting fold plans.

Nuisance functions are carried as plain callables evaluated on covariate
arrays, so fitted models and exact simulation-truth closures are handled
identically.  Every propensity evaluation is clipped into
``[propensity_clip, 1 - propensity_clip]`` before any division.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InputError

PredictFn = Callable[[np.ndarray], np.ndarray]


def _column(a, n, name, binary=False) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n,):
        raise InputError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite values")
    if binary and not np.all((a == 0) | (a == 1)):
        raise InputError(f"{name} must be coded 0/1")
    return a


def _covariates(s, name) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] < 1:
        raise InputError(f"{name} must be 2-D (n, d), got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InputError(f"{name} contains non-finite values")
    if np.any(np.abs(s) > 1.0 + 1e-9):
        raise InputError(f"{name} has entries outside the covariate support [-1, 1]")
    return s


@dataclass(frozen=True)
class CateData:
    """Single-stage observations: covariates, binary treatment, outcome."""

    s: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = _covariates(self.s, "s")
        n = s.shape[0]
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", _column(self.t, n, "t", binary=True))
        object.__setattr__(self, "y", _column(self.y, n, "y"))

    @property
    def n(self) -> int:
        return self.s.shape[0]

    def subset(self, idx) -> "CateData":
        return CateData(self.s[idx], self.t[idx], self.y[idx])


@dataclass(frozen=True)
class DteData:
    """Two-stage observations; ``m`` holds a mediator level when present."""

    s1: np.ndarray
    t1: np.ndarray
    s2: np.ndarray
    t2: np.ndarray
    y: np.ndarray
    m: Optional[np.ndarray] = None

    def __post_init__(self):
        s1 = _covariates(self.s1, "s1")
        n = s1.shape[0]
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "t1", _column(self.t1, n, "t1", binary=True))
        object.__setattr__(self, "s2", _covariates(self.s2, "s2"))
        if self.s2.shape[0] != n:
            raise InputError("s1 and s2 must have the same number of rows")
        object.__setattr__(self, "t2", _column(self.t2, n, "t2", binary=True))
        object.__setattr__(self, "y", _column(self.y, n, "y"))
        if self.m is not None:
            m = _column(self.m, n, "m")
            if not np.all(m == np.round(m)):
                raise InputError("m must hold integer mediator levels")
            object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.s1.shape[0]

    @property
    def sbar2(self) -> np.ndarray:
        """Accumulated history (s1, s2) used by second-stage nuisances."""
        return np.concatenate([self.s1, self.s2], axis=1)

    def subset(self, idx) -> "DteData":
        m = None if self.m is None else self.m[idx]
        return DteData(self.s1[idx], self.t1[idx], self.s2[idx], self.t2[idx], self.y[idx], m)


def _check_clip(c: float) -> float:
    if not (0.0 < c < 0.5):
        raise ConfigurationError(f"propensity_clip must lie in (0, 0.5), got {c}")
    return float(c)


@dataclass(frozen=True)
class CateNuisance:
    """Role-tagged nuisance predictors for single-stage scores."""

    pi: PredictFn
    mu1: PredictFn
    mu0: PredictFn
    propensity_clip: float = 0.01

    def __post_init__(self):
        _check_clip(self.propensity_clip)

    def clipped_pi(self, s: np.ndarray) -> np.ndarray:
        c = self.propensity_clip
        return np.clip(np.asarray(self.pi(s), dtype=np.float64), c, 1.0 - c)


@dataclass(frozen=True)
class DteNuisance:
    """Role-tagged nuisance predictors for two-stage scores.

    ``pi`` and ``mu`` take first-stage covariates s1; ``rho`` and ``nu`` take
    the accumulated history (s1, s2).  Roles not needed by a particular score
    may be left as None.
    """

    pi: Optional[PredictFn] = None
    rho: Optional[PredictFn] = None
    nu: Optional[PredictFn] = None
    mu: Optional[PredictFn] = None
    propensity_clip: float = 0.01

    def __post_init__(self):
        _check_clip(self.propensity_clip)

    def _clip(self, raw: np.ndarray) -> np.ndarray:
        c = self.propensity_clip
        return np.clip(np.asarray(raw, dtype=np.float64), c, 1.0 - c)

    def clipped_pi(self, s1: np.ndarray) -> np.ndarray:
        return self._clip(self.pi(s1))

    def clipped_rho(self, sbar2: np.ndarray) -> np.ndarray:
        return self._clip(self.rho(sbar2))


# ------------------------------------------------------------------ folds


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each row to one of K cross-fitting folds."""

    n_total: int
    assignments: np.ndarray
    n_folds: int
    seed: int

    def fold_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == k)

    def complement_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != k)


def make_folds(n_total: int, n_folds: int, seed: int) -> FoldPlan:
    """Seeded uniform shuffle followed by round-robin assignment."""
    if n_folds < 2:
        raise ConfigurationError(f"n_folds must be >= 2, got {n_folds}")
    if n_total < n_folds:
        raise ConfigurationError(f"need at least n_folds={n_folds} rows, got {n_total}")
    perm = np.random.default_rng(seed).permutation(n_total)
    assignments = np.empty(n_total, dtype=np.int64)
    assignments[perm] = np.arange(n_total) % n_folds
    assignments.flags.writeable = False
    return FoldPlan(n_total, assignments, n_folds, seed)


# ------------------------------------------------------------------ scores


def cate_pseudo_outcome(data: CateData, nuis: CateNuisance) -> np.ndarray:
    """Bias-corrected outcome contrast whose conditional mean is the CATE."""
    pi = nuis.clipped_pi(data.s)
    mu1 = np.asarray(nuis.mu1(data.s), dtype=np.float64)
    mu0 = np.asarray(nuis.mu0(data.s), dtype=np.float64)
    t, y = data.t, data.y
    return mu1 + t * (y - mu1) / pi - mu0 - (1.0 - t) * (y - mu0) / (1.0 - pi)


def dte_stage2_pseudo_outcome(data: DteData, nuis: DteNuisance) -> np.ndarray:
    """Second-stage correction: nu plus the inverse-weighted stage-2 residual."""
    sbar2 = data.sbar2
    rho = nuis.clipped_rho(sbar2)
    nu = np.asarray(nuis.nu(sbar2), dtype=np.float64)
    return nu + data.t2 * (data.y - nu) / rho


def dte_score(data: DteData, nuis: DteNuisance) -> np.ndarray:
    """Efficient-score summand for the mean outcome under the (1, 1) path."""
    sbar2 = data.sbar2
    pi = nuis.clipped_pi(data.s1)
    rho = nuis.clipped_rho(sbar2)
    nu = np.asarray(nuis.nu(sbar2), dtype=np.float64)
    mu = np.asarray(nuis.mu(data.s1), dtype=np.float64)
    t1, t2, y = data.t1, data.t2, data.y
    return mu + t1 * (nu - mu) / pi + t1 * t2 * (y - nu) / (pi * rho)


def cde_score(data: DteData, target: tuple[int, int], nuis: DteNuisance) -> np.ndarray:
    """Score for the mean outcome at exposure level t with mediator held at m.

    The nuisances are understood as arm-specific: ``pi`` predicts
    P(T = t | s1), ``rho`` predicts P(M = m | history, T = t), ``nu`` and
    ``mu`` are the corresponding regressions.
    """
    if data.m is None:
        raise InputError("cde_score requires data with a mediator column")
    t_level, m_level = target
    i1 = (data.t1 == t_level).astype(np.float64)
    i2 = i1 * (data.m == m_level).astype(np.float64)
    sbar2 = data.sbar2
    pi = nuis.clipped_pi(data.s1)
    rho = nuis.clipped_rho(sbar2)
    nu = np.asarray(nuis.nu(sbar2), dtype=np.float64)
    mu = np.asarray(nuis.mu(data.s1), dtype=np.float64)
    return mu + i1 * (nu - mu) / pi + i2 * (data.y - nu) / (pi * rho)


def delta_decomposition(
    data: CateData, nuis_hat: CateNuisance, nuis_true: CateNuisance
) -> tuple[np.ndarray, np.ndarray]:
    """Split the pseudo-outcome estimation error into linear and product terms.

    Returns ``(delta1, delta2)`` with ``delta1 + delta2`` equal, row by row,
    to ``cate_pseudo_outcome(data, nuis_hat) - cate_pseudo_outcome(data,
    nuis_true)``.  Each ``delta1`` summand carries exactly one nuisance error
    and has conditional mean zero under the true nuisances; every ``delta2``
    summand is a product of the propensity error and an outcome-regression
    error, so it vanishes when either nuisance is exact.  The sign of
    ``delta2`` is fixed by the exact decomposition.
    """
    s, t, y = data.s, data.t, data.y
    pi_hat = nuis_hat.clipped_pi(s)
    pi_true = nuis_true.clipped_pi(s)
    mu1_hat = np.asarray(nuis_hat.mu1(s), dtype=np.float64)
    mu0_hat = np.asarray(nuis_hat.mu0(s), dtype=np.float64)
    mu1_true = np.asarray(nuis_true.mu1(s), dtype=np.float64)
    mu0_true = np.asarray(nuis_true.mu0(s), dtype=np.float64)

    e1 = mu1_hat - mu1_true
    e0 = mu0_hat - mu0_true
    ip1 = t / pi_hat - t / pi_true
    ip0 = (1.0 - t) / (1.0 - pi_hat) - (1.0 - t) / (1.0 - pi_true)

    # On rows with t=1 the observed y is the treated potential outcome, and
    # symmetrically for t=0, so the residual factors below are observable.
    d11 = (1.0 - t / pi_true) * e1
    d12 = ip1 * (y - mu1_true)
    d13 = -(1.0 - (1.0 - t) / (1.0 - pi_true)) * e0
    d14 = -ip0 * (y - mu0_true)
    delta1 = d11 + d12 + d13 + d14
    delta2 = -ip1 * e1 + ip0 * e0
    return delta1, delta2
