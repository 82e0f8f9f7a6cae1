"""scikit-learn compatible estimators wrapping the core operations, so the
pipeline composes with the wider ecosystem (Pipeline, get_params/set_params,
clone).

    Pipeline([("dist", AnchorDistance(n_anchors=500)),
              ("tsne", TsneEmbedder(perplexity=30))]).fit_transform(texts)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin

from . import cluster as _cluster
from . import embed as _embed
from . import metric as _metric
from ._validation import as_counts, as_matrix, as_texts
from .corpus import corpus_from_texts
from .errors import DomainError


class AnchorDistance(BaseEstimator, TransformerMixin):
    """Learn an anchor set from a corpus (fit) and map any collection of
    passwords to rows of edit distances against those anchors (transform).

    Accepts a Corpus or a plain sequence of strings. When the corpus is
    smaller than ``n_anchors``, every password becomes an anchor.
    """

    def __init__(self, n_anchors=2000, seed=0, weight_by_count=False,
                 batch_rows=_metric.DEFAULT_BATCH_ROWS, workers=None):
        self.n_anchors = n_anchors
        self.seed = seed
        self.weight_by_count = weight_by_count
        self.batch_rows = batch_rows
        self.workers = workers

    def fit(self, X, y=None):
        texts = as_texts(X)
        counts = as_counts(X)
        corpus = corpus_from_texts(texts, name=getattr(X, "name", "memory"), counts=counts)
        self.anchor_set_ = _metric.select_anchors(
            corpus, self.n_anchors, self.seed, weight_by_count=self.weight_by_count
        )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "anchor_set_"):
            raise DomainError("AnchorDistance must be fitted before transform")
        return _metric.levenshtein_block(
            as_texts(X), self.anchor_set_.anchors,
            workers=self.workers, batch_rows=self.batch_rows,
        )


class TsneEmbedder(BaseEstimator):
    """fit_transform(X) -> (M, 2) float32 plane coordinates.

    t-SNE has no out-of-sample transform, so this estimator only embeds
    the data it is fitted on (valid as the final Pipeline step). The KL
    objective before/after optimisation lands in kl_start_ / kl_final_.
    """

    def __init__(self, perplexity=30.0, iterations=1000, early_exaggeration_factor=12.0,
                 early_exaggeration_iters=250, learning_rate="auto", momentum_initial=0.5,
                 momentum_final=0.8, seed=0, theta=None):
        self.perplexity = perplexity
        self.iterations = iterations
        self.early_exaggeration_factor = early_exaggeration_factor
        self.early_exaggeration_iters = early_exaggeration_iters
        self.learning_rate = learning_rate
        self.momentum_initial = momentum_initial
        self.momentum_final = momentum_final
        self.seed = seed
        self.theta = theta

    def _params(self) -> _embed.TsneParams:
        return _embed.TsneParams(
            perplexity=self.perplexity,
            iterations=self.iterations,
            early_exaggeration_factor=self.early_exaggeration_factor,
            early_exaggeration_iters=self.early_exaggeration_iters,
            learning_rate=self.learning_rate,
            momentum_initial=self.momentum_initial,
            momentum_final=self.momentum_final,
            seed=self.seed,
            theta=self.theta,
        )

    def fit(self, X, y=None):
        embedding = _embed.tsne_embed(as_matrix(X), self._params())
        self.embedding_ = embedding
        self.kl_start_ = embedding.kl_start
        self.kl_final_ = embedding.kl_final
        return self

    def fit_transform(self, X, y=None) -> np.ndarray:
        self.fit(X)
        return self.embedding_.coords


class KMeans(BaseEstimator, ClusterMixin):
    def __init__(self, k=8, seed=0, max_iter=300):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        self.assignment_ = _cluster.kmeans(X, self.k, seed=self.seed, max_iter=self.max_iter)
        self.labels_ = self.assignment_.labels
        self.centroids_ = self.assignment_.centroids
        return self


class DBSCAN(BaseEstimator, ClusterMixin):
    def __init__(self, eps=0.5, min_pts=5, index="grid"):
        self.eps = eps
        self.min_pts = min_pts
        self.index = index

    def fit(self, X, y=None):
        self.assignment_ = _cluster.dbscan(X, self.eps, self.min_pts, index=self.index)
        self.labels_ = self.assignment_.labels
        return self


class OPTICS(BaseEstimator, ClusterMixin):
    def __init__(self, min_pts=5, xi=0.05, method="xi", eps=None):
        self.min_pts = min_pts
        self.xi = xi
        self.method = method
        self.eps = eps

    def fit(self, X, y=None):
        self.assignment_ = _cluster.optics(X, self.min_pts, xi=self.xi,
                                           method=self.method, eps=self.eps)
        self.labels_ = self.assignment_.labels
        return self
