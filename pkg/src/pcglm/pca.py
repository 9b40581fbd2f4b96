"""Principal-component transform of (standardized) features."""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, ShapeError
from .numeric import StandardizationStats, standardize, sym_eigen

log = logging.getLogger(__name__)

PCA_MODES = ("correlation", "covariance")


@dataclass(frozen=True)
class PcaModel:
    """Fitted component loadings.

    ``loadings`` is k x p over *all* input columns; columns dropped for zero
    variance carry zero weight. ``stats`` holds the centring/scaling applied
    before projection (scales are 1 in covariance mode).
    """

    stats: StandardizationStats
    loadings: np.ndarray
    eigenvalues: np.ndarray
    feature_names: tuple
    rank_tolerance: float = 1e-10
    mode: str = "correlation"
    discarded_eigenvalues: np.ndarray = None

    @property
    def n_components(self):
        return self.loadings.shape[0]

    @property
    def n_features(self):
        return self.loadings.shape[1]

    @property
    def dropped(self):
        return self.stats.dropped

    def standardized(self, X):
        """Centred/scaled features, with dropped columns set to zero."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"expected {self.n_features} feature columns, got {X.shape[-1]}",
                expected=self.n_features,
                got=int(X.shape[-1]),
            )
        out = np.zeros_like(X)
        keep = self.stats.kept
        out[:, keep] = (X[:, keep] - self.stats.means[keep]) / self.stats.scales[keep]
        return out

    def transform(self, X):
        return self.standardized(X) @ self.loadings.T


def fit_pca(X, feature_names=None, rank_tolerance=1e-10, mode="correlation"):
    """Fit PCA on the correlation (default) or covariance matrix of ``X``.

    Components whose eigenvalue is at most ``rank_tolerance`` times the
    largest are discarded.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("expected a 2-D matrix", shape=list(X.shape))
    n, p = X.shape
    if n < 2:
        raise InsufficientDataError("need at least 2 rows for PCA", rows=n)
    if not 0.0 <= rank_tolerance < 1.0:
        raise ValueError("rank_tolerance must lie in [0, 1)")
    if mode not in PCA_MODES:
        raise ValueError(f"unknown PCA mode {mode!r}")
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(p)]
    feature_names = tuple(feature_names)
    if len(feature_names) != p:
        raise ShapeError("feature_names length does not match column count")

    Z, stats, dropped = standardize(X)
    if Z.shape[1] == 0:
        raise DegenerateInputError("all PCA input columns are constant", features=list(feature_names))
    if dropped:
        log.warning("dropping zero-variance columns: %s", [feature_names[j] for j in dropped])
    if mode == "covariance":
        keep = stats.kept
        stats = StandardizationStats(
            means=stats.means, scales=np.where(keep, 1.0, 0.0), dropped=stats.dropped
        )
        Z = stats.apply(X)

    S = (Z.T @ Z) / (n - 1)
    w, V = sym_eigen(S)
    lam_max = w[0]
    if lam_max <= 0:
        raise DegenerateInputError("covariance of PCA inputs is zero")
    keep_comp = w > rank_tolerance * lam_max
    full = np.zeros((int(keep_comp.sum()), p))
    full[:, stats.kept] = V[:, keep_comp].T
    return PcaModel(
        stats=stats,
        loadings=full,
        eigenvalues=w[keep_comp].copy(),
        feature_names=feature_names,
        rank_tolerance=float(rank_tolerance),
        mode=mode,
        discarded_eigenvalues=w[~keep_comp].copy(),
    )


def transform(model, X):
    return model.transform(X)
