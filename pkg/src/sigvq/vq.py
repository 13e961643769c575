"""Multi-section vector-quantization models.

Each enrolled user gets one codebook per contiguous signature section
(a single section is the classic whole-signature case). Codebooks are
initialized by segment averaging and refined with Lloyd iterations; test
signatures are scored by nearest-neighbour quantization distortion per
section, normalized by section length, then fused.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, TYPE_CHECKING

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .fusion import FusionSpec, combine
from .instrument import DistanceCounter
from .signal import FEATURE_SETS, FeatureMatrix

if TYPE_CHECKING:  # pragma: no cover
    from .fusion import SectionStats


@dataclass
class ModelConfig:
    """Training-time knobs for one user model."""

    n_sections: int = 1
    codebook_size: int = 128
    feature_set: str = "FS6"
    lloyd_max_iters: int = 50
    lloyd_rel_tol: float = 1e-4

    def __post_init__(self):
        if self.n_sections < 1:
            raise InvalidConfigError("n_sections must be >= 1")
        if self.codebook_size < 1:
            raise InvalidConfigError("codebook_size must be >= 1")
        if self.feature_set not in FEATURE_SETS:
            raise InvalidConfigError(
                f"unknown feature set {self.feature_set!r}; expected one of {sorted(FEATURE_SETS)}"
            )
        if self.lloyd_max_iters < 0:
            raise InvalidConfigError("lloyd_max_iters must be >= 0")
        if self.lloyd_rel_tol < 0:
            raise InvalidConfigError("lloyd_rel_tol must be >= 0")


@dataclass
class Codebook:
    """A set of centroids plus the training distortion trace.

    distortion_history holds the total squared-Euclidean distortion of the
    training vectors after the initial assignment and after each Lloyd
    iteration; it is non-increasing by construction.
    """

    centroids: np.ndarray
    distortion_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=float)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise InvalidInputError("centroids must be a non-empty 2-D array")
        if not np.isfinite(self.centroids).all():
            raise InvalidInputError("centroids must be finite")

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass
class SectionedModel:
    """Per-user model: one codebook per section plus the training config."""

    user_id: str
    sections: list[Codebook]
    config: ModelConfig
    train_stats: Optional["SectionStats"] = None

    def __post_init__(self):
        if len(self.sections) != self.config.n_sections:
            raise InvalidConfigError(
                f"{len(self.sections)} codebooks for {self.config.n_sections} sections"
            )
        dims = {cb.dim for cb in self.sections}
        if len(dims) != 1:
            raise InvalidInputError("all section codebooks must share one dimension")

    @property
    def n_sections(self) -> int:
        return len(self.sections)

    @property
    def dim(self) -> int:
        return self.sections[0].dim


def section_bounds(length: int, n_sections: int) -> list[tuple[int, int]]:
    """Split range(length) into n_sections contiguous near-equal spans.

    Boundaries fall at floor(s * length / n_sections), so the spans
    partition the range and their lengths differ by at most one.
    """
    if n_sections < 1:
        raise InvalidConfigError("n_sections must be >= 1")
    if n_sections > length:
        raise InvalidConfigError(
            f"cannot split {length} vectors into {n_sections} sections"
        )
    edges = [(s * length) // n_sections for s in range(n_sections + 1)]
    return [(edges[s], edges[s + 1]) for s in range(n_sections)]


def split_sections(matrix, n_sections: int) -> list[tuple[int, int]]:
    """Row ranges of a feature matrix's sections, as (start, stop) pairs."""
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix)
    return section_bounds(values.shape[0], n_sections)


def _as_vectors(data) -> np.ndarray:
    v = data.values if isinstance(data, FeatureMatrix) else np.asarray(data, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise InvalidInputError("expected a non-empty 2-D array of vectors")
    if not np.isfinite(v).all():
        raise InvalidInputError("vectors must be finite")
    return v


def _sq_distances(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, L) squared Euclidean distances via explicit differences; the
    # expanded x^2+y^2-2xy form is faster but loses exactness near zero
    diff = vectors[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=2)


def _assign(vectors: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = _sq_distances(vectors, centroids)
    labels = d2.argmin(axis=1)  # ties resolve to the lowest centroid index
    inertia = float(d2[np.arange(len(vectors)), labels].sum())
    return labels, inertia


def train_codebook(
    vectors,
    size: int,
    max_iters: int = 50,
    rel_tol: float = 1e-4,
) -> Codebook:
    """Train one codebook by segment-average init plus Lloyd refinement.

    The initial centroids are the means of `size` contiguous near-equal
    segments of the training sequence. Each Lloyd iteration reassigns every
    vector to its nearest centroid (plain Euclidean; ties to the lowest
    index) and moves each centroid to its cell mean, keeping the previous
    position for empty cells. Iteration stops when the relative improvement
    of the tracked distortion falls below rel_tol or after max_iters update
    steps. A size larger than the number of vectors is clamped with a
    warning.
    """
    v = _as_vectors(vectors)
    if size < 1:
        raise InvalidConfigError("codebook size must be >= 1")
    if max_iters < 0:
        raise InvalidConfigError("max_iters must be >= 0")
    if rel_tol < 0:
        raise InvalidConfigError("rel_tol must be >= 0")
    n = v.shape[0]
    if size > n:
        warnings.warn(
            f"codebook size {size} clamped to {n} available training vectors",
            stacklevel=2,
        )
        size = n

    centroids = np.stack([v[a:b].mean(axis=0) for a, b in section_bounds(n, size)])
    labels, inertia = _assign(v, centroids)
    history = [inertia]
    for _ in range(max_iters):
        updated = centroids.copy()
        for j in range(size):
            members = labels == j
            if members.any():
                updated[j] = v[members].mean(axis=0)
        centroids = updated
        labels, new_inertia = _assign(v, centroids)
        history.append(new_inertia)
        converged = inertia == 0.0 or (inertia - new_inertia) < rel_tol * inertia
        inertia = new_inertia
        if converged:
            break
    return Codebook(centroids, distortion_history=history)


def train_user_model(
    train_sigs: Sequence[FeatureMatrix],
    config: ModelConfig,
    user_id: str | None = None,
) -> SectionedModel:
    """Train one user's sectioned model from their training signatures.

    Every training signature is split into config.n_sections spans; the
    s-th spans are concatenated across signatures (in the given order) and
    quantized into the s-th codebook.
    """
    if not train_sigs:
        raise InvalidInputError("need at least one training signature")
    feature_sets = {m.feature_set for m in train_sigs}
    if feature_sets != {config.feature_set}:
        raise InvalidInputError(
            f"training matrices use feature sets {sorted(feature_sets)}, "
            f"config expects {config.feature_set}"
        )
    if user_id is None:
        ids = {m.user_id for m in train_sigs}
        user_id = ids.pop() if len(ids) == 1 else ""

    per_section: list[list[np.ndarray]] = [[] for _ in range(config.n_sections)]
    for m in train_sigs:
        for s, (a, b) in enumerate(split_sections(m, config.n_sections)):
            per_section[s].append(m.values[a:b])
    codebooks = [
        train_codebook(
            np.concatenate(parts, axis=0),
            config.codebook_size,
            max_iters=config.lloyd_max_iters,
            rel_tol=config.lloyd_rel_tol,
        )
        for parts in per_section
    ]
    return SectionedModel(user_id=user_id, sections=codebooks, config=config)


def nner_distortion(
    vectors,
    codebook: Codebook,
    counter: DistanceCounter | None = None,
) -> tuple[float, int]:
    """Nearest-neighbour quantization distortion of a vector sequence.

    Returns (distortion, count): the sum over vectors of the plain Euclidean
    distance to the nearest centroid (ties to the lowest index), and the
    number of vectors quantized. Callers wanting a length-independent score
    divide by the count.
    """
    v = _as_vectors(vectors)
    if v.shape[1] != codebook.dim:
        raise InvalidInputError(
            f"vector dimension {v.shape[1]} does not match codebook dimension {codebook.dim}"
        )
    d2 = _sq_distances(v, codebook.centroids)
    if counter is not None:
        counter.add(v.shape[0] * codebook.size)
    distortion = float(np.sqrt(d2.min(axis=1)).sum())
    return distortion, v.shape[0]


def section_scores(
    test: FeatureMatrix,
    model: SectionedModel,
    counter: DistanceCounter | None = None,
) -> np.ndarray:
    """Per-section normalized distortions of a test signature against a model."""
    if isinstance(test, FeatureMatrix) and test.feature_set != model.config.feature_set:
        raise InvalidInputError(
            f"test feature set {test.feature_set} does not match model "
            f"feature set {model.config.feature_set}"
        )
    values = test.values if isinstance(test, FeatureMatrix) else np.asarray(test, dtype=float)
    bounds = section_bounds(values.shape[0], model.n_sections)
    out = np.empty(model.n_sections, dtype=float)
    for s, ((a, b), cb) in enumerate(zip(bounds, model.sections)):
        distortion, count = nner_distortion(values[a:b], cb, counter)
        out[s] = distortion / count
    return out


def model_score(
    test: FeatureMatrix,
    model: SectionedModel,
    fusion: FusionSpec,
    counter: DistanceCounter | None = None,
) -> tuple[float, list[float]]:
    """Fused dissimilarity of a test signature to a user model (lower = closer).

    Returns (score, per-section distortions). Section distortions are
    normalized by section length; the un-normalized sums are recoverable
    through nner_distortion's returned counts.
    """
    d = section_scores(test, model, counter)
    if fusion.weights is not None and len(fusion.weights) != len(d):
        raise InvalidConfigError(
            f"{len(fusion.weights)} fusion weights for {len(d)} sections"
        )
    return combine(d, fusion), [float(x) for x in d]
