"""Estimator-style wrappers around the functional core.

These follow the scikit-learn conventions (constructor params stored
verbatim, fit/transform/predict, trailing-underscore fitted attributes,
get_params/set_params) so the recognizers compose with sklearn tooling.
X is a list of RawSignature or FeatureMatrix objects and y is the user
label of each signature; classic rectangular arrays do not fit
variable-length pen trajectories.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dtw import TEMPLATE_COMBINERS, DtwConfig, multi_template_score
from .errors import InvalidConfigError, InvalidInputError
from .fusion import (
    FIXED_STRATEGIES,
    WEIGHTED_STRATEGIES,
    FusionSpec,
    compute_weights,
    train_section_stats,
)
from .signal import FEATURE_SETS, FeatureMatrix, RawSignature, feature_dim, preprocess
from .vq import ModelConfig, model_score, train_user_model


def _featurize_one(item, feature_set: str) -> FeatureMatrix:
    if isinstance(item, FeatureMatrix):
        if item.feature_set != feature_set:
            raise InvalidInputError(
                f"feature set mismatch: got {item.feature_set}, expected {feature_set}"
            )
        return item
    if isinstance(item, RawSignature):
        return preprocess(item, feature_set)
    raise InvalidInputError(
        f"expected RawSignature or FeatureMatrix, got {type(item).__name__}"
    )


def _group_by_label(X, y) -> dict[str, list]:
    if y is None:
        raise InvalidInputError("y (user labels) is required")
    labels = [str(v) for v in y]
    if len(labels) != len(X):
        raise InvalidInputError(f"X has {len(X)} items but y has {len(labels)}")
    grouped: dict[str, list] = {}
    for item, label in zip(X, labels):
        grouped.setdefault(label, []).append(item)
    return grouped


def _cross_user_error_weights(models, featurized, strategy) -> dict[str, FusionSpec]:
    """Per-user section weights from separation of own vs other users'
    training signatures (see the experiment runner for the split-based kin)."""
    from .evaluation import ScoreSet, eer, far_frr
    from .fusion import section_score_table

    users = sorted(models)
    if len(users) < 2:
        raise InvalidConfigError(f"{strategy} needs at least two enrolled users")
    by_user = {}
    for u in users:
        own = section_score_table(models[u], featurized[u])
        other = [m for v in users if v != u for m in featurized[v]]
        impostor = section_score_table(models[u], other)
        values = []
        for s in range(own.shape[1]):
            scores = ScoreSet(
                genuine=[(u, float(v)) for v in own[:, s]],
                impostor=[(u, float(v), "random") for v in impostor[:, s]],
            )
            rate, threshold = eer(far_frr(scores))
            values.append(threshold if strategy == "WSUT" else rate)
        by_user[u] = FusionSpec(strategy, compute_weights(strategy, values))
    return by_user


class SignatureFeaturizer(TransformerMixin, BaseEstimator):
    """Turn raw pen trajectories into normalized feature matrices.

    Stateless apart from validation; transform maps each RawSignature
    through centering, differencing, channel assembly and z-scoring.
    """

    def __init__(self, feature_set: str = "FS6"):
        self.feature_set = feature_set

    def fit(self, X, y=None):
        self.feature_dim_ = feature_dim(self.feature_set)
        return self

    def transform(self, X) -> list[FeatureMatrix]:
        check_is_fitted(self, "feature_dim_")
        return [_featurize_one(item, self.feature_set) for item in X]

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray(FEATURE_SETS[self.feature_set], dtype=object)


class MultiSectionVqRecognizer(BaseEstimator):
    """Signature verification/identification via per-user sectioned codebooks.

    fit() groups the training signatures by user label and trains one
    codebook per section per user. predict() identifies: lowest fused
    quantization distortion wins. verify_score() returns the fused
    distortion of each signature against one claimed user, for thresholding.
    """

    def __init__(
        self,
        n_sections: int = 1,
        codebook_size: int = 128,
        feature_set: str = "FS6",
        fusion: str = "SUM",
        fusion_weights=None,
        lloyd_max_iters: int = 50,
        lloyd_rel_tol: float = 1e-4,
    ):
        self.n_sections = n_sections
        self.codebook_size = codebook_size
        self.feature_set = feature_set
        self.fusion = fusion
        self.fusion_weights = fusion_weights
        self.lloyd_max_iters = lloyd_max_iters
        self.lloyd_rel_tol = lloyd_rel_tol

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            n_sections=self.n_sections,
            codebook_size=self.codebook_size,
            feature_set=self.feature_set,
            lloyd_max_iters=self.lloyd_max_iters,
            lloyd_rel_tol=self.lloyd_rel_tol,
        )

    def fit(self, X, y):
        if self.fusion not in FIXED_STRATEGIES and self.fusion not in WEIGHTED_STRATEGIES:
            raise InvalidConfigError(f"unknown fusion strategy {self.fusion!r}")
        config = self._model_config()
        grouped = _group_by_label(X, y)
        featurized = {
            u: [_featurize_one(s, self.feature_set) for s in sigs]
            for u, sigs in grouped.items()
        }
        self.models_ = {}
        for u in sorted(featurized):
            self.models_[u] = train_user_model(featurized[u], config, user_id=u)
        self.users_ = sorted(self.models_)
        self.fusion_by_user_ = None
        if self.fusion_weights is not None:
            self.fusion_spec_ = FusionSpec(self.fusion, list(self.fusion_weights))
        elif self.fusion in FIXED_STRATEGIES:
            self.fusion_spec_ = FusionSpec(self.fusion)
        elif self.fusion in ("WSD", "WSHM", "WSLM"):
            self.fusion_spec_ = FusionSpec("SUM")
            self.fusion_by_user_ = {}
            for u, model in self.models_.items():
                model.train_stats = train_section_stats(model, featurized[u])
                self.fusion_by_user_[u] = FusionSpec(
                    self.fusion, compute_weights(self.fusion, model.train_stats)
                )
        elif self.fusion in ("WSUE", "WSUT"):
            self.fusion_spec_ = FusionSpec("SUM")
            self.fusion_by_user_ = _cross_user_error_weights(
                self.models_, featurized, self.fusion
            )
        else:
            raise InvalidConfigError(
                f"{self.fusion} weights must be estimated on held-out data; "
                "pass them via fusion_weights (the experiment runner can derive them)"
            )
        return self

    def _spec_for(self, user_id: str) -> FusionSpec:
        if self.fusion_by_user_ is not None and user_id in self.fusion_by_user_:
            return self.fusion_by_user_[user_id]
        return self.fusion_spec_

    def verify_score(self, X, claimed_user: str) -> np.ndarray:
        """Fused distortion of each signature against one claimed user's model
        (lower means more likely genuine)."""
        check_is_fitted(self, "models_")
        claimed_user = str(claimed_user)
        if claimed_user not in self.models_:
            raise InvalidInputError(f"no model enrolled for user {claimed_user!r}")
        model = self.models_[claimed_user]
        spec = self._spec_for(claimed_user)
        scores = [
            model_score(_featurize_one(item, self.feature_set), model, spec)[0]
            for item in X
        ]
        return np.asarray(scores, dtype=float)

    def decision_table(self, X) -> np.ndarray:
        """(len(X), n_users) fused distortions against every enrolled model,
        columns ordered like users_."""
        check_is_fitted(self, "models_")
        table = np.empty((len(X), len(self.users_)), dtype=float)
        feats = [_featurize_one(item, self.feature_set) for item in X]
        for col, u in enumerate(self.users_):
            model = self.models_[u]
            spec = self._spec_for(u)
            for row, m in enumerate(feats):
                table[row, col] = model_score(m, model, spec)[0]
        return table

    def predict(self, X) -> np.ndarray:
        """Closed-set identification: the enrolled user whose model yields the
        lowest fused distortion (ties broken by user id order)."""
        table = self.decision_table(X)
        best = np.argmin(table, axis=1)
        return np.asarray([self.users_[i] for i in best], dtype=object)

    def score(self, X, y) -> float:
        """Identification accuracy on (X, y)."""
        predicted = self.predict(X)
        truth = np.asarray([str(v) for v in y], dtype=object)
        if len(truth) != len(predicted):
            raise InvalidInputError(f"X has {len(predicted)} items but y has {len(truth)}")
        return float(np.mean(predicted == truth))


class DtwRecognizer(BaseEstimator):
    """Elastic-matching baseline: keep every training signature as a template
    and score by constrained elastic distance to the claimed user's templates."""

    def __init__(
        self,
        feature_set: str = "FS6",
        epsilon=None,
        use_parallelogram: bool = True,
        combiner: str = "MIN",
    ):
        self.feature_set = feature_set
        self.epsilon = epsilon
        self.use_parallelogram = use_parallelogram
        self.combiner = combiner

    def _config(self) -> DtwConfig:
        return DtwConfig(
            epsilon=self.epsilon,
            use_parallelogram=self.use_parallelogram,
            combiner=self.combiner,
        )

    def fit(self, X, y):
        if self.combiner not in TEMPLATE_COMBINERS:
            raise InvalidConfigError(f"unknown template combiner {self.combiner!r}")
        self._config()  # validates epsilon eagerly
        grouped = _group_by_label(X, y)
        self.references_ = {
            u: [_featurize_one(s, self.feature_set) for s in sigs]
            for u, sigs in sorted(grouped.items())
        }
        self.users_ = sorted(self.references_)
        return self

    def verify_score(self, X, claimed_user: str) -> np.ndarray:
        check_is_fitted(self, "references_")
        claimed_user = str(claimed_user)
        if claimed_user not in self.references_:
            raise InvalidInputError(f"no templates enrolled for user {claimed_user!r}")
        cfg = self._config()
        refs = self.references_[claimed_user]
        return np.asarray(
            [
                multi_template_score(_featurize_one(item, self.feature_set), refs, cfg)
                for item in X
            ],
            dtype=float,
        )

    def decision_table(self, X) -> np.ndarray:
        check_is_fitted(self, "references_")
        cfg = self._config()
        feats = [_featurize_one(item, self.feature_set) for item in X]
        table = np.empty((len(feats), len(self.users_)), dtype=float)
        for col, u in enumerate(self.users_):
            refs = self.references_[u]
            for row, m in enumerate(feats):
                table[row, col] = multi_template_score(m, refs, cfg)
        return table

    def predict(self, X) -> np.ndarray:
        table = self.decision_table(X)
        best = np.argmin(table, axis=1)
        return np.asarray([self.users_[i] for i in best], dtype=object)

    def score(self, X, y) -> float:
        predicted = self.predict(X)
        truth = np.asarray([str(v) for v in y], dtype=object)
        if len(truth) != len(predicted):
            raise InvalidInputError(f"X has {len(predicted)} items but y has {len(truth)}")
        return float(np.mean(predicted == truth))
