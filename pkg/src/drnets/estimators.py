"""Cross-fitted doubly robust estimators built on the score algebra.

Nuisances are fit per training set with role-specific learners (network,
L1-penalized linear model, fitted constant, or an injected fixed function)
and always through weighted losses: stratum restrictions enter as indicator
sample weights, never by silently dropping rows.  Final-stage regressions
(treatment effects, stage-one outcome regressions) are always networks fit
on two swapped halves whose predictions are averaged.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import expit, ndtri

from .errors import (
    ConfigurationError,
    EmptySubgroupError,
    FoldError,
    InputError,
    SplitError,
    StratumError,
)
from .linmod import lasso_fit, logistic_lasso_fit, select_lambda
from .nnet import MLPConfig, MLPModel, mlp_fit, mlp_predict
from .scores import (
    CateData,
    CateNuisance,
    DteData,
    DteNuisance,
    FoldPlan,
    cate_pseudo_outcome,
    cde_score,
    dte_score,
    dte_stage2_pseudo_outcome,
    make_folds,
)

# ------------------------------------------------------------ learner specs


@dataclass(frozen=True)
class LassoSpec:
    """L1 learner; lam=None selects the penalty on a log-spaced grid."""

    lam: Optional[float] = None
    grid_size: int = 8

    def __post_init__(self):
        if self.lam is not None and not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ConfigurationError(f"lam must be non-negative, got {self.lam}")
        if self.grid_size < 2:
            raise ConfigurationError(f"grid_size must be >= 2, got {self.grid_size}")


@dataclass(frozen=True)
class ConstantSpec:
    """Predicts the weighted target mean: a deliberately inflexible learner."""

    value: Optional[float] = None  # fixed level instead of the fitted mean


@dataclass(frozen=True)
class FixedSpec:
    """Injects a known prediction function (e.g. simulation truth); no fitting."""

    fn: Callable[[np.ndarray], np.ndarray]


LearnerConfig = Union[MLPConfig, LassoSpec, ConstantSpec, FixedSpec]


@dataclass(frozen=True)
class LearnerSpec:
    """Per-role nuisance learner assignment.

    ``pi`` is the first-stage propensity, ``mu`` the outcome regression used
    by single-stage estimators, ``rho``/``nu`` the second-stage propensity
    and outcome regression used by two-stage estimators.  For single-stage
    estimators ``mu`` may be one config shared by both arms or a pair
    ``(treated, control)``.
    """

    pi: LearnerConfig
    mu: Optional[LearnerConfig] = None
    rho: Optional[LearnerConfig] = None
    nu: Optional[LearnerConfig] = None


def _arm_configs(mu_cfg):
    if isinstance(mu_cfg, tuple):
        if len(mu_cfg) != 2:
            raise ConfigurationError("mu pair must be (treated, control) configs")
        return mu_cfg
    return mu_cfg, mu_cfg


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _describe(cfg) -> dict:
    if isinstance(cfg, tuple):
        c1, c0 = _arm_configs(cfg)
        return {"treated": _describe(c1), "control": _describe(c0)}
    if isinstance(cfg, MLPConfig):
        return {"family": "mlp", **asdict(cfg)}
    if isinstance(cfg, LassoSpec):
        return {"family": "lasso", "lam": cfg.lam, "grid_size": cfg.grid_size}
    if isinstance(cfg, ConstantSpec):
        return {"family": "constant", "value": cfg.value}
    return {"family": "fixed"}


def _fit_learner(cfg, x, y, w, kind, seed):
    """Fit one nuisance and return a mean-scale prediction closure."""
    if isinstance(cfg, FixedSpec):
        return cfg.fn
    if isinstance(cfg, ConstantSpec):
        if cfg.value is not None:
            level = float(cfg.value)
        else:
            total = w.sum()
            if total <= 0:
                raise EmptySubgroupError("all sample weights are zero")
            level = float(np.dot(w, y) / total)
        return lambda s, _v=level: np.full(s.shape[0], _v)
    if isinstance(cfg, MLPConfig):
        loss = "logistic" if kind == "propensity" else "square"
        model = mlp_fit(x, y, replace(cfg, loss=loss, seed=_derive_seed(seed, cfg.seed)), w)
        if kind == "propensity":
            return lambda s, _m=model: expit(mlp_predict(_m, s))
        return lambda s, _m=model: mlp_predict(_m, s)
    if isinstance(cfg, LassoSpec):
        link = "logistic" if kind == "propensity" else "identity"
        # Zero-weight rows are inert under weighted losses; dropping them up
        # front keeps the selection holdout inside the stratum.
        keep = np.flatnonzero(w > 0)
        if keep.size == 0:
            raise EmptySubgroupError("all sample weights are zero")
        xs, ys, ws = x[keep], y[keep], w[keep]
        lam = cfg.lam
        if lam is None:
            lam = select_lambda(
                xs, ys, link, grid_size=cfg.grid_size, seed=_derive_seed(seed, 1), sample_weight=ws
            )
        if link == "logistic":
            model = logistic_lasso_fit(xs, ys, lam, sample_weight=ws)
        else:
            model = lasso_fit(xs, ys, lam, sample_weight=ws)
        return model.predict
    raise ConfigurationError(f"unknown learner config {cfg!r}")


# ----------------------------------------------------------------- reports


def normal_quantile(q: float) -> float:
    """Standard normal quantile (inverse CDF)."""
    return float(ndtri(q))


@dataclass(frozen=True)
class EstimateReport:
    estimand: str
    theta_hat: float
    sigma_hat: float
    ci_lower: float
    ci_upper: float
    alpha: float
    n_folds: int
    n: int
    seed: int
    fold_means: tuple[float, ...]
    learner_configs: dict = field(default_factory=dict)


def _make_report(estimand, scores_by_fold, theta, alpha, seed, learner_configs):
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    all_scores = np.concatenate(scores_by_fold)
    n = all_scores.size
    sigma = float(np.sqrt(np.mean((all_scores - theta) ** 2)))
    half = normal_quantile(1.0 - alpha / 2.0) * sigma / np.sqrt(n)
    return EstimateReport(
        estimand=estimand,
        theta_hat=float(theta),
        sigma_hat=sigma,
        ci_lower=float(theta - half),
        ci_upper=float(theta + half),
        alpha=float(alpha),
        n_folds=len(scores_by_fold),
        n=n,
        seed=seed,
        fold_means=tuple(float(np.mean(s)) for s in scores_by_fold),
        learner_configs=learner_configs,
    )


def report_to_dict(report: EstimateReport) -> dict:
    return {
        "estimand": report.estimand,
        "theta_hat": report.theta_hat,
        "sigma_hat": report.sigma_hat,
        "ci": [report.ci_lower, report.ci_upper],
        "alpha": report.alpha,
        "K": report.n_folds,
        "n": report.n,
        "seed": report.seed,
        "per_fold": list(report.fold_means),
        "learner_configs": report.learner_configs,
    }


def report_to_json(report: EstimateReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True)


# ------------------------------------------------------------------- ATE


def _require(cfg, role):
    if cfg is None:
        raise ConfigurationError(f"LearnerSpec is missing the {role!r} role")
    return cfg


def estimate_ate(
    data: CateData,
    learners: LearnerSpec,
    n_folds: int = 5,
    alpha: float = 0.05,
    seed: int = 0,
    propensity_clip: float = 0.01,
) -> EstimateReport:
    """Cross-fitted mean of the bias-corrected outcome contrast."""
    mu_cfg = _require(learners.mu, "mu")
    mu1_cfg, mu0_cfg = _arm_configs(mu_cfg)
    plan = make_folds(data.n, n_folds, seed)
    scores_by_fold = []
    for k in range(n_folds):
        train = data.subset(plan.complement_indices(k))
        if train.t.min() == train.t.max():
            raise FoldError(f"fold {k}: training data has a single treatment arm")
        nuis = CateNuisance(
            pi=_fit_learner(learners.pi, train.s, train.t, np.ones(train.n), "propensity",
                            _derive_seed(seed, k, 1)),
            mu1=_fit_learner(mu1_cfg, train.s, train.y, train.t, "regression",
                             _derive_seed(seed, k, 2)),
            mu0=_fit_learner(mu0_cfg, train.s, train.y, 1.0 - train.t, "regression",
                             _derive_seed(seed, k, 3)),
            propensity_clip=propensity_clip,
        )
        held = data.subset(plan.fold_indices(k))
        scores_by_fold.append(cate_pseudo_outcome(held, nuis))
    theta = float(np.mean(np.concatenate(scores_by_fold)))
    configs = {
        "pi": _describe(learners.pi),
        "mu": _describe(mu_cfg),
        "propensity_clip": propensity_clip,
    }
    return _make_report("ate", scores_by_fold, theta, alpha, seed, configs)


# ------------------------------------------------------------------ CATE


@dataclass(frozen=True)
class MlpPair:
    """Two networks fit on swapped halves; predictions are averaged."""

    model_half1: MLPModel
    model_half2: MLPModel

    def predict(self, s: np.ndarray) -> np.ndarray:
        return 0.5 * (mlp_predict(self.model_half1, s) + mlp_predict(self.model_half2, s))


@dataclass(frozen=True)
class CateEstimate(MlpPair):
    provenance: dict = field(default_factory=dict)


def _two_way_split(n, seed):
    perm = np.random.default_rng([seed, 101]).permutation(n)
    return perm[: n // 2], perm[n // 2 :]


def estimate_cate(
    data: CateData,
    learners: LearnerSpec,
    final_stage: MLPConfig,
    seed: int = 0,
    propensity_clip: float = 0.01,
) -> CateEstimate:
    """Two-way sample split: nuisances on one half, effect regression on the other.

    Each half's pseudo-outcomes use nuisances fit on the opposite half; the
    two effect networks are averaged.  If a half lacks a treatment arm the
    split is redrawn once with seed+1 before failing.
    """
    mu_cfg = _require(learners.mu, "mu")
    mu1_cfg, mu0_cfg = _arm_configs(mu_cfg)
    if data.n < 4:
        raise InputError(f"estimate_cate needs at least 4 rows, got {data.n}")
    reshuffled = False
    idx_a, idx_b = _two_way_split(data.n, seed)
    for half in (idx_a, idx_b):
        t = data.t[half]
        if t.size == 0 or t.min() == t.max():
            reshuffled = True
            idx_a, idx_b = _two_way_split(data.n, seed + 1)
            break
    if reshuffled:
        for half in (idx_a, idx_b):
            t = data.t[half]
            if t.size == 0 or t.min() == t.max():
                raise SplitError("both split attempts left a half with a single arm")

    def fit_half(model_idx, train_idx, tag):
        train = data.subset(train_idx)
        nuis = CateNuisance(
            pi=_fit_learner(learners.pi, train.s, train.t, np.ones(train.n), "propensity",
                            _derive_seed(seed, tag, 1)),
            mu1=_fit_learner(mu1_cfg, train.s, train.y, train.t, "regression",
                             _derive_seed(seed, tag, 2)),
            mu0=_fit_learner(mu0_cfg, train.s, train.y, 1.0 - train.t, "regression",
                             _derive_seed(seed, tag, 3)),
            propensity_clip=propensity_clip,
        )
        held = data.subset(model_idx)
        pseudo = cate_pseudo_outcome(held, nuis)
        cfg = replace(final_stage, seed=_derive_seed(seed, tag, 4, final_stage.seed))
        return mlp_fit(held.s, pseudo, cfg)

    model1 = fit_half(idx_a, idx_b, 1)
    model2 = fit_half(idx_b, idx_a, 2)
    provenance = {
        "seed": seed,
        "half_sizes": [int(idx_a.size), int(idx_b.size)],
        "reshuffled": reshuffled,
        "propensity_clip": propensity_clip,
        "learner_configs": {
            "pi": _describe(learners.pi),
            "mu": _describe(mu_cfg),
            "final_stage": _describe(final_stage),
        },
    }
    return CateEstimate(model1, model2, provenance)


# ----------------------------------------------------- stage-one regression


def _check_stage2_strata(d: DteData, label: str):
    on1 = d.t1 == 1
    if not np.any(on1):
        raise StratumError(f"{label}: t1=1 stratum is empty")
    t2_on1 = d.t2[on1]
    if t2_on1.min() == t2_on1.max():
        raise StratumError(f"{label}: t1=1 stratum lacks both t2 arms")
    if not np.any(on1 & (d.t2 == 1)):
        raise StratumError(f"{label}: (t1, t2)=(1, 1) stratum is empty")


def estimate_mu_dr(
    data: DteData,
    learners: LearnerSpec,
    final_stage: MLPConfig,
    seed: int = 0,
    propensity_clip: float = 0.01,
) -> MlpPair:
    """Stage-one outcome regression with a second-stage bias correction.

    The sample is split in two.  On each half the second-stage nuisances
    (rho on t1=1 rows, nu on t1=t2=1 rows, both via indicator weights) are
    fit and used to build corrected outcomes for the other half, where a
    network is fit with weights t1.  The swapped pair is averaged.
    """
    rho_cfg = _require(learners.rho, "rho")
    nu_cfg = _require(learners.nu, "nu")
    if data.n < 4:
        raise InputError(f"estimate_mu_dr needs at least 4 rows, got {data.n}")
    idx_a, idx_b = _two_way_split(data.n, _derive_seed(seed, 201))

    def fit_half(model_idx, train_idx, tag):
        train = data.subset(train_idx)
        _check_stage2_strata(train, f"nuisance half {tag}")
        sbar2 = train.sbar2
        nuis = DteNuisance(
            rho=_fit_learner(rho_cfg, sbar2, train.t2, train.t1, "propensity",
                             _derive_seed(seed, tag, 11)),
            nu=_fit_learner(nu_cfg, sbar2, train.y, train.t1 * train.t2, "regression",
                            _derive_seed(seed, tag, 12)),
            propensity_clip=propensity_clip,
        )
        held = data.subset(model_idx)
        if not np.any(held.t1 == 1):
            raise StratumError(f"regression half {tag}: t1=1 stratum is empty")
        pseudo = dte_stage2_pseudo_outcome(held, nuis)
        cfg = replace(final_stage, seed=_derive_seed(seed, tag, 13, final_stage.seed))
        return mlp_fit(held.s1, pseudo, cfg, sample_weight=held.t1)

    model1 = fit_half(idx_a, idx_b, 1)
    model2 = fit_half(idx_b, idx_a, 2)
    return MlpPair(model1, model2)


# ------------------------------------------------------------------- DTE


def _resolve_mu(learners, final_stage, train, rho, nu, seed, k, propensity_clip):
    """Stage-one regression for one training complement.

    Default (mu role unset): the nested two-half network regression.  A
    FixedSpec short-circuits fitting; any other config regresses the
    stage-two corrected outcomes on s1 with weights t1.
    """
    if learners.mu is None:
        pair = estimate_mu_dr(
            train.subset(np.flatnonzero(train.t1 == 1)),
            learners,
            final_stage,
            seed=_derive_seed(seed, k, 24),
            propensity_clip=propensity_clip,
        )
        return pair.predict
    if isinstance(learners.mu, FixedSpec):
        return learners.mu.fn
    inner = DteNuisance(rho=rho, nu=nu, propensity_clip=propensity_clip)
    pseudo = dte_stage2_pseudo_outcome(train, inner)
    return _fit_learner(learners.mu, train.s1, pseudo, train.t1.astype(np.float64),
                        "regression", _derive_seed(seed, k, 25))


def estimate_dte(
    data: DteData,
    learners: LearnerSpec,
    final_stage: MLPConfig,
    n_folds: int = 5,
    alpha: float = 0.05,
    seed: int = 0,
    propensity_clip: float = 0.01,
) -> EstimateReport:
    """Cross-fitted mean outcome under the always-treated two-stage path.

    Per fold: fit pi on the complement, rho/nu via indicator weights, and
    the stage-one regression mu on the complement's t1=1 rows (with its own
    nested two-way split); average the held-out scores, then average fold
    means and attach the plug-in normal interval.

    The mu role defaults to the nested network regression.  Setting
    ``learners.mu`` overrides it: a FixedSpec injects a known function, any
    other config is fit directly on the stage-two corrected outcomes with
    weights t1 (no nested split).
    """
    rho_cfg = _require(learners.rho, "rho")
    nu_cfg = _require(learners.nu, "nu")
    plan = make_folds(data.n, n_folds, seed)
    scores_by_fold = []
    for k in range(n_folds):
        train = data.subset(plan.complement_indices(k))
        if train.t1.min() == train.t1.max():
            raise FoldError(f"fold {k}: training data has a single t1 arm")
        _check_stage2_strata(train, f"fold {k}")
        sbar2 = train.sbar2
        ones = np.ones(train.n)
        pi = _fit_learner(learners.pi, train.s1, train.t1, ones, "propensity",
                          _derive_seed(seed, k, 21))
        rho = _fit_learner(rho_cfg, sbar2, train.t2, train.t1, "propensity",
                           _derive_seed(seed, k, 22))
        nu = _fit_learner(nu_cfg, sbar2, train.y, train.t1 * train.t2, "regression",
                          _derive_seed(seed, k, 23))
        mu = _resolve_mu(learners, final_stage, train, rho, nu,
                         seed, k, propensity_clip)
        nuis = DteNuisance(pi=pi, rho=rho, nu=nu, mu=mu,
                           propensity_clip=propensity_clip)
        held = data.subset(plan.fold_indices(k))
        scores_by_fold.append(dte_score(held, nuis))
    theta = float(np.mean([np.mean(s) for s in scores_by_fold]))
    configs = {
        "pi": _describe(learners.pi),
        "rho": _describe(rho_cfg),
        "nu": _describe(nu_cfg),
        "mu": None if learners.mu is None else _describe(learners.mu),
        "final_stage": _describe(final_stage),
        "propensity_clip": propensity_clip,
    }
    return _make_report("dte", scores_by_fold, theta, alpha, seed, configs)


# ------------------------------------------------------------------- CDE


def estimate_cde(
    data: DteData,
    target: tuple[int, int],
    learners: LearnerSpec,
    final_stage: MLPConfig,
    n_folds: int = 5,
    alpha: float = 0.05,
    seed: int = 0,
    propensity_clip: float = 0.01,
) -> EstimateReport:
    """Mean outcome at exposure level t with the mediator held at level m.

    Runs the two-stage pipeline with the mediator playing the role of the
    second-stage treatment: indicators 1{T=t} and 1{M=m} replace t1 and t2.
    Estimates for two exposure levels at the same mediator level difference
    to a controlled direct effect.
    """
    if data.m is None:
        raise InputError("estimate_cde requires data with a mediator column")
    t_level, m_level = int(target[0]), int(target[1])
    if t_level not in (0, 1):
        raise ConfigurationError(f"exposure level must be 0 or 1, got {t_level}")
    if not np.any(data.m == m_level):
        raise StratumError(f"mediator level m={m_level} never occurs in the data")
    rho_cfg = _require(learners.rho, "rho")
    nu_cfg = _require(learners.nu, "nu")

    i1 = (data.t1 == t_level).astype(np.float64)
    i2 = (data.m == m_level).astype(np.float64)
    plan = make_folds(data.n, n_folds, seed)
    scores_by_fold = []
    for k in range(n_folds):
        comp = plan.complement_indices(k)
        train = data.subset(comp)
        if train.t1.min() == train.t1.max():
            raise FoldError(f"fold {k}: training data has a single exposure arm")
        # Relabel so the generic two-stage machinery targets (t, m).
        relabeled = DteData(train.s1, i1[comp], train.s2, i1[comp] * i2[comp], train.y)
        _check_stage2_strata(relabeled, f"fold {k}")
        sbar2 = train.sbar2
        ones = np.ones(train.n)
        p_treat = _fit_learner(learners.pi, train.s1, train.t1, ones, "propensity",
                               _derive_seed(seed, k, 31))
        if t_level == 1:
            pi = p_treat
        else:
            pi = lambda s, _p=p_treat: 1.0 - _p(s)
        rho = _fit_learner(rho_cfg, sbar2, i2[comp], i1[comp], "propensity",
                           _derive_seed(seed, k, 32))
        nu = _fit_learner(nu_cfg, sbar2, train.y, i1[comp] * i2[comp], "regression",
                          _derive_seed(seed, k, 33))
        mu = _resolve_mu(
            LearnerSpec(pi=learners.pi, mu=learners.mu, rho=rho_cfg, nu=nu_cfg),
            final_stage, relabeled, rho, nu,
            _derive_seed(seed, k, 34), 0, propensity_clip,
        )
        nuis = DteNuisance(pi=pi, rho=rho, nu=nu, mu=mu,
                           propensity_clip=propensity_clip)
        held = data.subset(plan.fold_indices(k))
        scores_by_fold.append(cde_score(held, (t_level, m_level), nuis))
    theta = float(np.mean([np.mean(s) for s in scores_by_fold]))
    configs = {
        "pi": _describe(learners.pi),
        "rho": _describe(rho_cfg),
        "nu": _describe(nu_cfg),
        "mu": None if learners.mu is None else _describe(learners.mu),
        "final_stage": _describe(final_stage),
        "propensity_clip": propensity_clip,
        "target": [t_level, m_level],
    }
    return _make_report(f"cde_t{t_level}_m{m_level}", scores_by_fold, theta, alpha, seed, configs)


# ------------------------------------------------------------------ defaults


def default_final_config(n: int, seed: int = 0) -> MLPConfig:
    """Effect-regression network sized to the sample: width grows like n^(1/4)."""
    width = int(max(8, round(1.5 * n**0.25)))
    return MLPConfig(
        depth=2,
        width=width,
        epochs=120,
        batch_size=min(max(16, n // 8), 128),
        step_size=0.05,
        seed=seed,
        validation_fraction=0.2,
    )


def default_learner_spec(family: str = "lasso", n: int = 1000, seed: int = 0) -> LearnerSpec:
    """Uniform nuisance family across roles; 'mlp' uses sample-sized networks."""
    if family == "lasso":
        cfg = LassoSpec()
        return LearnerSpec(pi=cfg, mu=cfg, rho=cfg, nu=cfg)
    if family == "mlp":
        cfg = default_final_config(n, seed)
        return LearnerSpec(pi=cfg, mu=cfg, rho=cfg, nu=cfg)
    raise ConfigurationError(f"unknown learner family {family!r}")
