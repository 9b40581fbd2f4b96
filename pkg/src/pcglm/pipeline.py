"""End-to-end principal-component logistic model.

Features in the PCA set are standardized and rotated onto principal
components; passthrough features (longitude/area by default) are only
standardized. A logistic GLM is fitted on the component scores plus the
passthrough columns, components are pruned by backward elimination, and the
component coefficients are mapped back to one coefficient per original
feature so they can be reported as odds ratios.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EliminationError, ModelIOError, PcglmError, ShapeError
from .glm import GlmFit, expit, fit_binomial_logit, predict_linear, wald_summary
from .numeric import StandardizationStats, standardize
from .pca import PcaModel, fit_pca

SCHEMA_VERSION = 1
Z95 = 1.96
DEFAULT_PASSTHROUGH = ("longitude", "area")
SIGNIFICANCE_LEVELS = ("positive", "negative", "none", "not-estimable")


@dataclass(frozen=True)
class FeaturePartition:
    pca_features: tuple
    passthrough_features: tuple = ()

    @classmethod
    def default(cls, feature_names, passthrough=DEFAULT_PASSTHROUGH):
        names = tuple(feature_names)
        through = tuple(f for f in names if f.lower() in passthrough)
        return cls(tuple(f for f in names if f not in through), through)

    def validate(self, feature_names):
        a, b = set(self.pca_features), set(self.passthrough_features)
        if not self.pca_features:
            raise ConfigError("the PCA feature set is empty")
        if a & b:
            raise ConfigError("partition sets overlap", features=sorted(a & b))
        if a | b != set(feature_names) or len(a) + len(b) != len(feature_names):
            missing = sorted(set(feature_names) - (a | b))
            extra = sorted((a | b) - set(feature_names))
            raise ConfigError("partition does not cover the feature set", missing=missing, extra=extra)


@dataclass(frozen=True)
class OddsRatioRow:
    feature: str
    exp_beta: float = float("nan")
    se: float = float("nan")
    ci_low: float = float("nan")
    ci_high: float = float("nan")
    significance: str = "not-estimable"
    beta: float = float("nan")
    se_beta: float = float("nan")


@dataclass(frozen=True)
class PcglmModel:
    feature_names: tuple
    partition: FeaturePartition
    pca: PcaModel
    passthrough_stats: StandardizationStats
    retained_pcs: tuple
    glm: GlmFit
    elimination_trace: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def pca_index(self):
        return [self.feature_names.index(f) for f in self.partition.pca_features]

    @property
    def passthrough_index(self):
        return [self.feature_names.index(f) for f in self.partition.passthrough_features]

    @property
    def estimable(self):
        """Boolean mask over ``feature_names``."""
        mask = np.ones(len(self.feature_names), dtype=bool)
        pca_idx = self.pca_index
        for j in self.pca.dropped:
            mask[pca_idx[j]] = False
        through = self.passthrough_index
        for j in self.passthrough_stats.dropped:
            mask[through[j]] = False
        return mask

    def check_schema(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ShapeError(
                f"expected {len(self.feature_names)} feature columns, got {X.shape[-1]}",
                expected=len(self.feature_names),
                got=int(X.shape[-1]),
            )
        return X

    def regressors(self, X):
        """Retained component scores followed by standardized passthrough columns."""
        X = self.check_schema(X)
        scores = self.pca.transform(X[:, self.pca_index])[:, list(self.retained_pcs)]
        if self.partition.passthrough_features:
            through = self.passthrough_stats.apply(X[:, self.passthrough_index])
            return np.hstack([scores, through])
        return scores

    def recomposition_matrix(self):
        """Linear map from GLM coefficients to (intercept, per-feature betas).

        Row 0 is the intercept, row 1+j is feature j; rows of features that
        cannot be estimated are NaN.
        """
        p = len(self.feature_names)
        m1 = len(self.glm.coefficients)
        C = np.zeros((1 + p, m1))
        pca_idx = self.pca_index
        keep = self.pca.stats.kept
        for r, comp in enumerate(self.retained_pcs):
            for j_local, j in enumerate(pca_idx):
                if keep[j_local]:
                    C[1 + j, 1 + r] = self.pca.loadings[comp, j_local] / self.pca.stats.scales[j_local]
        through_idx = self.passthrough_index
        t_keep = self.passthrough_stats.kept
        col = 1 + len(self.retained_pcs)
        for j_local, j in enumerate(through_idx):
            if t_keep[j_local]:
                C[1 + j, col] = 1.0 / self.passthrough_stats.scales[j_local]
                col += 1
        means = np.zeros(p)
        for j_local, j in enumerate(pca_idx):
            means[j] = self.pca.stats.means[j_local]
        for j_local, j in enumerate(through_idx):
            means[j] = self.passthrough_stats.means[j_local]
        est = self.estimable
        C[0, 0] = 1.0
        C[0, :] -= means[est] @ C[1:][est]
        C[1:][~est] = np.nan
        return C

    @property
    def recomposed(self):
        """(intercept, betas) in original feature units; NaN marks not-estimable."""
        b = self.recomposition_matrix() @ self.glm.coefficients
        return float(b[0]), b[1:]

    def recomposed_covariance(self):
        C = self.recomposition_matrix()
        return C @ self.glm.covariance @ C.T

    def predict_proba(self, X):
        return expit(predict_linear(self.glm, self.regressors(X)))

    def predict_proba_recomposed(self, X):
        X = self.check_schema(X)
        b0, beta = self.recomposed
        est = self.estimable
        return expit(b0 + X[:, est] @ beta[est])


def backward_eliminate(R, y, eliminable, alpha=0.05, ridge=0.0):
    """Drop the least significant eliminable regressor until all pass ``alpha``.

    Ties on the p-value remove the larger column index (the lower-variance
    component when columns are ordered by eigenvalue).

    Returns:
        (retained, trace, fit): retained column indices, the ordered list of
        (removed column, p-value at removal), and the GLM fit on ``retained``.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)", alpha=alpha)
    R = np.asarray(R, dtype=np.float64)
    eliminable = set(int(i) for i in eliminable)
    active = list(range(R.shape[1]))
    trace = []
    while True:
        try:
            fit = fit_binomial_logit(R[:, active], y, ridge=ridge)
        except PcglmError as exc:
            if not trace:
                # the full model itself failed; nothing was eliminated yet
                raise
            extra = {"advice": exc.context["advice"]} if "advice" in exc.context else {}
            raise EliminationError(
                f"GLM failed during backward elimination: {exc.message}", trace=trace, cause=exc.code, **extra
            ) from exc
        pvals = wald_summary(fit).p_value[1:]
        candidates = [(float(pvals[i]), col) for i, col in enumerate(active) if col in eliminable]
        if not candidates:
            break
        worst = max(pv for pv, _ in candidates)
        if worst <= alpha:
            break
        col = max(c for pv, c in candidates if pv == worst)
        active.remove(col)
        trace.append((col, worst))
    return active, trace, fit


def fit_pipeline(
    X,
    y,
    feature_names,
    partition=None,
    alpha=0.05,
    pca_mode="correlation",
    rank_tolerance=1e-10,
    ridge=0.0,
    eliminate=True,
    config=None,
):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    feature_names = tuple(feature_names)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise ShapeError("feature matrix does not match feature_names")
    if X.shape[0] != len(y):
        raise ShapeError("feature rows do not match label count", rows=X.shape[0], labels=len(y))
    if partition is None:
        partition = FeaturePartition.default(feature_names)
    partition.validate(feature_names)
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)", alpha=alpha)

    pca_idx = [feature_names.index(f) for f in partition.pca_features]
    through_idx = [feature_names.index(f) for f in partition.passthrough_features]
    pca = fit_pca(X[:, pca_idx], partition.pca_features, rank_tolerance=rank_tolerance, mode=pca_mode)
    scores = pca.transform(X[:, pca_idx])
    if through_idx:
        through, t_stats, _ = standardize(X[:, through_idx])
    else:
        through = np.zeros((len(y), 0))
        t_stats = StandardizationStats(means=np.zeros(0), scales=np.zeros(0))
    R = np.hstack([scores, through])
    k = scores.shape[1]
    if eliminate:
        active, trace, fit = backward_eliminate(R, y, range(k), alpha=alpha, ridge=ridge)
    else:
        active, trace = list(range(R.shape[1])), []
        fit = fit_binomial_logit(R, y, ridge=ridge)
    retained = tuple(int(c) for c in active if c < k)
    cfg = dict(config or {})
    cfg.update(alpha=alpha, pca_mode=pca_mode, rank_tolerance=rank_tolerance, ridge=ridge, eliminate=eliminate)
    return PcglmModel(
        feature_names=feature_names,
        partition=partition,
        pca=pca,
        passthrough_stats=t_stats,
        retained_pcs=retained,
        glm=fit,
        elimination_trace=tuple((int(c), float(p)) for c, p in trace),
        config=cfg,
    )


def recompose_coefficients(model):
    return model.recomposed


def classify_significance(ci_low, ci_high):
    if not (math.isfinite(ci_low) and math.isfinite(ci_high)):
        return "not-estimable"
    if ci_low > 1.0:
        return "positive"
    if ci_high < 1.0:
        return "negative"
    return "none"


def odds_ratio_row(feature, beta, se_beta, ci_form="symmetric", z=Z95):
    """One odds-ratio line from a coefficient and its standard error.

    The delta method gives SE(e^b) = e^b * SE(b). ``symmetric`` intervals are
    e^b +/- z*SE(e^b); ``log_scale`` intervals are exp(b +/- z*SE(b)).
    """
    if not (math.isfinite(beta) and math.isfinite(se_beta)):
        return OddsRatioRow(feature=feature)
    or_ = math.exp(beta)
    se = or_ * se_beta
    if ci_form == "symmetric":
        lo, hi = or_ - z * se, or_ + z * se
    elif ci_form == "log_scale":
        lo, hi = math.exp(beta - z * se_beta), math.exp(beta + z * se_beta)
    else:
        raise ConfigError(f"unknown ci_form {ci_form!r}")
    return OddsRatioRow(feature, or_, se, lo, hi, classify_significance(lo, hi), beta, se_beta)


def odds_ratio_table(model, ci_form=None, z=Z95, include_intercept=True):
    ci_form = ci_form or model.config.get("ci_form", "symmetric")
    b0, beta = model.recomposed
    cov = model.recomposed_covariance()
    var = np.diag(cov)
    rows = []
    for j, name in enumerate(model.feature_names):
        v = var[1 + j]
        se_b = math.sqrt(v) if math.isfinite(v) and v >= 0 else float("nan")
        rows.append(odds_ratio_row(name, float(beta[j]), se_b, ci_form, z))
    if include_intercept:
        rows.append(odds_ratio_row("Intercept", b0, math.sqrt(max(var[0], 0.0)), ci_form, z))
    return rows


def logit_interval(eta, var, z=Z95):
    """Inverse-link Wald interval for the mean response."""
    eta = np.asarray(eta, dtype=np.float64)
    sd = np.sqrt(np.maximum(np.asarray(var, dtype=np.float64), 0.0))
    return expit(eta), expit(eta - z * sd), expit(eta + z * sd)


def predict_with_interval(model, X, z=Z95, covariance_scale=1.0):
    """Probabilities with 95% intervals.

    Returns:
        (prob, lo, hi) arrays, one entry per row of ``X``.
    """
    R = model.regressors(X)
    R1 = np.hstack([np.ones((R.shape[0], 1)), R])
    eta = predict_linear(model.glm, R)
    cov = model.glm.covariance * covariance_scale
    var = np.einsum("ij,jk,ik->i", R1, cov, R1)
    return logit_interval(eta, var, z)


@dataclass
class BackcastYear:
    year: int
    probability: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None
    share: float = float("nan")
    error: dict = None


def backcast(model, yearly, threshold=None):
    """Apply a fitted model to each year's feature matrix.

    ``yearly`` maps year -> feature matrix (columns in ``model.feature_names``
    order). A failing year is recorded with its error and does not stop the
    others.
    """
    threshold = model.config.get("threshold", 0.5) if threshold is None else threshold
    out = {}
    for year in sorted(yearly):
        try:
            prob, lo, hi = predict_with_interval(model, yearly[year])
        except PcglmError as exc:
            out[year] = BackcastYear(year, error=exc.payload())
            continue
        share = float(np.mean(prob > threshold)) if len(prob) else float("nan")
        out[year] = BackcastYear(year, prob, lo, hi, share)
    return out


# -- serialization ---------------------------------------------------------

def _floats(a):
    return [None if not math.isfinite(v) else float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _matrix(a):
    a = np.asarray(a, dtype=np.float64)
    return [_floats(row) for row in a.reshape(a.shape[0], -1)] if a.size else []


def _arr(values, shape=None):
    a = np.array([np.nan if v is None else v for v in values], dtype=np.float64)
    return a if shape is None else a.reshape(shape)


def _mat(rows, ncols):
    if not rows:
        return np.zeros((0, ncols))
    return np.ascontiguousarray(np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=np.float64))


def _stats_dict(stats):
    return {"means": _floats(stats.means), "scales": _floats(stats.scales), "dropped": list(stats.dropped)}


def _stats_from(d):
    return StandardizationStats(
        means=_arr(d["means"]), scales=_arr(d["scales"]), dropped=tuple(int(j) for j in d["dropped"])
    )


def model_to_dict(model):
    b0, beta = model.recomposed
    return {
        "schema_version": SCHEMA_VERSION,
        "feature_names": list(model.feature_names),
        "partition": {
            "pca_features": list(model.partition.pca_features),
            "passthrough_features": list(model.partition.passthrough_features),
        },
        "standardization": {
            "pca": _stats_dict(model.pca.stats),
            "passthrough": _stats_dict(model.passthrough_stats),
        },
        "pca_mode": model.pca.mode,
        "rank_tolerance": model.pca.rank_tolerance,
        "loadings": _matrix(model.pca.loadings),
        "eigenvalues": _floats(model.pca.eigenvalues),
        "discarded_eigenvalues": _floats(model.pca.discarded_eigenvalues),
        "retained_pcs": list(model.retained_pcs),
        "glm_coefficients": _floats(model.glm.coefficients),
        "glm_covariance": _matrix(model.glm.covariance),
        "glm": {
            "deviance": model.glm.deviance,
            "null_deviance": model.glm.null_deviance,
            "iterations": model.glm.iterations,
            "converged": model.glm.converged,
            "ridge": model.glm.ridge,
        },
        "recomposed_betas": {"intercept": _floats([b0])[0], "betas": dict(zip(model.feature_names, _floats(beta)))},
        "elimination_trace": [[c, p] for c, p in model.elimination_trace],
        "config": model.config,
    }


def model_from_dict(d):
    try:
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ModelIOError("unsupported model schema version", schema_version=d.get("schema_version"))
        names = tuple(d["feature_names"])
        part = FeaturePartition(tuple(d["partition"]["pca_features"]), tuple(d["partition"]["passthrough_features"]))
        p_pca = len(part.pca_features)
        pca = PcaModel(
            stats=_stats_from(d["standardization"]["pca"]),
            loadings=_mat(d["loadings"], p_pca),
            eigenvalues=_arr(d["eigenvalues"]),
            feature_names=part.pca_features,
            rank_tolerance=float(d["rank_tolerance"]),
            mode=d["pca_mode"],
            discarded_eigenvalues=_arr(d["discarded_eigenvalues"]),
        )
        coef = _arr(d["glm_coefficients"])
        g = d["glm"]
        glm = GlmFit(
            coefficients=coef,
            covariance=_mat(d["glm_covariance"], len(coef)),
            deviance=float(g["deviance"]),
            iterations=int(g["iterations"]),
            converged=bool(g["converged"]),
            null_deviance=float(g["null_deviance"]),
            ridge=float(g["ridge"]),
        )
        return PcglmModel(
            feature_names=names,
            partition=part,
            pca=pca,
            passthrough_stats=_stats_from(d["standardization"]["passthrough"]),
            retained_pcs=tuple(int(c) for c in d["retained_pcs"]),
            glm=glm,
            elimination_trace=tuple((int(c), float(p)) for c, p in d["elimination_trace"]),
            config=dict(d.get("config", {})),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelIOError(f"corrupt model document: {exc!r}") from exc


def save_model(model, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(model_to_dict(model), fh, indent=1, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise ModelIOError(f"cannot write model file: {exc}", path=str(path)) from exc


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ModelIOError(f"cannot read model file: {exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"model file is not valid JSON: {exc}", path=str(path)) from exc
    if not isinstance(d, dict):
        raise ModelIOError("model file must hold a JSON object", path=str(path))
    return model_from_dict(d)
