"""scikit-learn style wrappers around the private clustering algorithms.

Every estimator expects data already inside ``[-r, r]^d`` (see
``DomainScaler``) and spends exactly ``epsilon`` per ``fit``; the ledger is
kept on ``budget_``. Training-set labels are not stored, since they are not
private; call ``predict`` explicitly if you want them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dplloyd import DPLloydParams, dplloyd
from .eugkm import DEFAULT_THETA, eugkm
from .gkm import BlockPolicy, gkm
from .hybrid import hybrid
from .kmeans import assign, nicv, sphere_packing_init, sq_distances
from .mechanisms import Budget, ParameterError, make_rng, spawn_seed
from .pgkm import PgkmParams, pgkm


def _check_domain(X, r):
    if np.any(np.abs(X) > r):
        raise ValueError(f"input has coordinates outside [-{r}, {r}]; rescale it first (e.g. with DomainScaler)")


def _rng(random_state):
    if isinstance(random_state, np.random.RandomState):
        random_state = int(random_state.randint(0, 2**31 - 1))
    return make_rng(random_state)


class _PrivateKMeans(ClusterMixin, TransformerMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses implement ``_fit_centers``."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        _check_domain(X, self.r)
        rng = _rng(self.random_state)
        budget = Budget(self.epsilon)
        self.cluster_centers_ = np.asarray(self._fit_centers(X, rng, budget), dtype=float)
        self.budget_ = budget
        self.n_features_in_ = X.shape[1]
        return self

    def _validate_for_predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        return assign(self._validate_for_predict(X), self.cluster_centers_)

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)

    def transform(self, X):
        """Euclidean distance to every centroid."""
        return np.sqrt(sq_distances(self._validate_for_predict(X), self.cluster_centers_))

    def score(self, X, y=None):
        """Negated NICV (mean squared distance to the nearest centroid)."""
        return -nicv(self._validate_for_predict(X), self.cluster_centers_)

    def _init_sets(self, d, rng):
        return [sphere_packing_init(d, self.n_clusters, self.r, spawn_seed(rng)) for _ in range(self.n_init)]


class DPLloydKMeans(_PrivateKMeans):
    """Lloyd's algorithm with Laplace-noised counts and sums.

    ``init`` is ``"sphere_packing"`` or an explicit ``k x d`` array.
    """

    def __init__(self, n_clusters=5, epsilon=1.0, n_iter=5, r=1.0, init="sphere_packing", random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.n_iter = n_iter
        self.r = r
        self.init = init
        self.random_state = random_state

    def _fit_centers(self, X, rng, budget):
        if isinstance(self.init, str):
            if self.init != "sphere_packing":
                raise ValueError(f"unknown init {self.init!r}")
            init = sphere_packing_init(X.shape[1], self.n_clusters, self.r, spawn_seed(rng))
        else:
            init = check_array(self.init, dtype=np.float64)
            if init.shape != (self.n_clusters, X.shape[1]):
                raise ValueError(f"init must have shape ({self.n_clusters}, {X.shape[1]}), got {init.shape}")
        return dplloyd(X, init, self.epsilon, DPLloydParams(self.n_iter, self.r), rng, budget)


class GkMKMeans(_PrivateKMeans):
    """Sample-and-aggregate k-means.

    ``blocks`` is ``"n_pow_04"`` (about ``N**0.4`` blocks), ``"three_k"``
    (blocks of about ``3k`` points) or an explicit block count.
    """

    def __init__(self, n_clusters=5, epsilon=1.0, blocks="n_pow_04", r=1.0, random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.blocks = blocks
        self.r = r
        self.random_state = random_state

    def _policy(self):
        if self.blocks == "n_pow_04":
            return BlockPolicy.n_pow_04()
        if self.blocks == "three_k":
            return BlockPolicy.three_k()
        if isinstance(self.blocks, (int, np.integer)) and self.blocks >= 1:
            return BlockPolicy.explicit(int(self.blocks))
        raise ValueError(f"blocks must be 'n_pow_04', 'three_k' or a positive int, got {self.blocks!r}")

    def _fit_centers(self, X, rng, budget):
        return gkm(X, self.n_clusters, self.epsilon, self._policy(), rng, budget, self.r)


class PGkMKMeans(_PrivateKMeans):
    """Genetic k-means with exponential-mechanism selection."""

    def __init__(self, n_clusters=5, epsilon=1.0, pool_size=200, n_selected=10, r=1.0, random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.pool_size = pool_size
        self.n_selected = n_selected
        self.r = r
        self.random_state = random_state

    def _fit_centers(self, X, rng, budget):
        try:
            params = PgkmParams(pool_size=self.pool_size, m_prime=self.n_selected)
        except ParameterError as exc:
            raise ValueError(str(exc)) from exc
        return pgkm(X, self.n_clusters, self.epsilon, params, rng, budget, self.r)


class EUGkMKMeans(_PrivateKMeans):
    """k-means on a noisy uniform-grid synopsis, best of ``n_init`` starts.

    The fitted synopsis is kept on ``synopsis_``.
    """

    def __init__(self, n_clusters=5, epsilon=1.0, theta=DEFAULT_THETA, n_init=10, r=1.0, random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.theta = theta
        self.n_init = n_init
        self.r = r
        self.random_state = random_state

    def _fit_centers(self, X, rng, budget):
        C, self.synopsis_ = eugkm(X, self.n_clusters, self.epsilon, self.theta,
                                  self._init_sets(X.shape[1], rng), rng, budget, self.r)
        return C


class HybridKMeans(_PrivateKMeans):
    """EUGkM at half budget refined by one DPLloyd round, or EUGkM alone
    when the budget is below the predicted break-even point.

    The switch is recorded on ``decision_``.
    """

    def __init__(self, n_clusters=5, epsilon=1.0, theta=DEFAULT_THETA, n_init=10, rho=0.25, n_iter=5,
                 r=1.0, random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.theta = theta
        self.n_init = n_init
        self.rho = rho
        self.n_iter = n_iter
        self.r = r
        self.random_state = random_state

    def _fit_centers(self, X, rng, budget):
        C, self.decision_ = hybrid(X, self.n_clusters, self.epsilon, self.theta,
                                   self._init_sets(X.shape[1], rng), rng, budget, self.r,
                                   self.rho, self.n_iter)
        return C


class DomainScaler(TransformerMixin, BaseEstimator):
    """Min-max scaling of each column onto ``[-r, r]``.

    The column bounds are learned from the data passed to ``fit`` and are
    treated as public; they are not privatised. Constant columns map to 0 and
    transformed values are clipped to the domain.
    """

    def __init__(self, r=1.0):
        self.r = r

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        span = self.data_max_ - self.data_min_
        const = span == 0
        out = (X - self.data_min_) / np.where(const, 1.0, span) * (2.0 * self.r) - self.r
        out[:, const] = 0.0
        return np.clip(out, -self.r, self.r)

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        return (X + self.r) / (2.0 * self.r) * (self.data_max_ - self.data_min_) + self.data_min_
