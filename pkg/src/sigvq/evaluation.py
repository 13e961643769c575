"""Verification/identification metrics, protocol runner, and cost accounting.

Scores are dissimilarities: a trial is accepted when its score is at or
below the decision threshold. Error rates are swept over every distinct
score, the equal error rate is read off the crossing by linear
interpolation, and identification is the argmin over enrolled models.
Also here: the statistical test-set sizing rule and the analytic+measured
operation counts behind the speed/storage comparison of VQ against DTW.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, TYPE_CHECKING

import numpy as np

from .dtw import DtwConfig, dtw_distance, multi_template_score
from .errors import InvalidConfigError, InvalidInputError
from .fusion import (
    FIXED_STRATEGIES,
    WEIGHTED_STRATEGIES,
    FusionSpec,
    combine,
    compute_weights,
    section_score_table,
    train_section_stats,
)
from .instrument import DistanceCounter
from .signal import FeatureMatrix
from .vq import Codebook, ModelConfig, SectionedModel, model_score, nner_distortion, section_bounds, section_scores, train_user_model

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import CorpusManifest, ExperimentProtocol, Trial

IMPOSTOR_KINDS = ("random", "skilled")


# ---- Score containers ------------------------------------------------------


@dataclass
class ScoreSet:
    """Genuine and impostor trial scores, tagged by the claimed user.

    genuine entries are (user_id, score); impostor entries are
    (user_id, score, kind) where user_id is the attacked model's user and
    kind is 'random' or 'skilled'.
    """

    genuine: list[tuple[str, float]] = field(default_factory=list)
    impostor: list[tuple[str, float, str]] = field(default_factory=list)

    def __post_init__(self):
        for u, s in self.genuine:
            if not math.isfinite(s):
                raise InvalidInputError(f"non-finite genuine score for user {u!r}")
        for u, s, k in self.impostor:
            if not math.isfinite(s):
                raise InvalidInputError(f"non-finite impostor score for user {u!r}")
            if k not in IMPOSTOR_KINDS:
                raise InvalidInputError(f"impostor kind {k!r} not in {IMPOSTOR_KINDS}")

    def filtered(self, forgery_kind: str | None) -> "ScoreSet":
        """Copy with impostors restricted to one forgery kind (None = all)."""
        if forgery_kind is None:
            return ScoreSet(list(self.genuine), list(self.impostor))
        return ScoreSet(
            list(self.genuine),
            [e for e in self.impostor if e[2] == forgery_kind],
        )


@dataclass
class DetCurve:
    """FAR/FRR swept over every distinct score value."""

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.far = np.asarray(self.far, dtype=float)
        self.frr = np.asarray(self.frr, dtype=float)
        n = self.thresholds.size
        if not (self.far.size == n and self.frr.size == n and n >= 1):
            raise InvalidInputError("curve arrays must be non-empty and equally long")
        if np.any(np.diff(self.thresholds) <= 0):
            raise InvalidInputError("thresholds must be strictly increasing")
        for name, v in (("far", self.far), ("frr", self.frr)):
            if np.any((v < 0) | (v > 1)):
                raise InvalidInputError(f"{name} values must lie in [0, 1]")
        if np.any(np.diff(self.far) < 0):
            raise InvalidInputError("far must be non-decreasing in the threshold")
        if np.any(np.diff(self.frr) > 0):
            raise InvalidInputError("frr must be non-increasing in the threshold")

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(a), float(r))
            for t, a, r in zip(self.thresholds, self.far, self.frr)
        ]


def far_frr(scores: ScoreSet, forgery_filter: str | None = None) -> DetCurve:
    """Sweep acceptance thresholds over all distinct scores.

    A trial is accepted iff score <= threshold; FAR is the accepted fraction
    of impostor trials, FRR the rejected fraction of genuine trials.
    """
    if forgery_filter is not None and forgery_filter not in IMPOSTOR_KINDS:
        raise InvalidInputError(f"forgery_filter must be one of {IMPOSTOR_KINDS} or None")
    genuine = np.array([s for _, s in scores.genuine], dtype=float)
    impostor = np.array(
        [s for _, s, k in scores.impostor if forgery_filter in (None, k)], dtype=float
    )
    if genuine.size == 0:
        raise InvalidInputError("no genuine scores")
    if impostor.size == 0:
        raise InvalidInputError(f"no impostor scores (filter={forgery_filter!r})")
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    far = np.searchsorted(np.sort(impostor), thresholds, side="right") / impostor.size
    frr = 1.0 - np.searchsorted(np.sort(genuine), thresholds, side="right") / genuine.size
    return DetCurve(thresholds, far, frr)


def eer(curve: DetCurve) -> tuple[float, float]:
    """Equal error rate and its threshold from a swept curve.

    FAR-FRR changes sign at most once (FAR rises, FRR falls); the crossing
    is located by linear interpolation between adjacent sweep points. When
    the curves touch along a flat run of sweep points, the midpoint
    threshold of the run is reported.
    """
    t = curve.thresholds
    far = curve.far
    frr = curve.frr
    gap = far - frr
    if gap[0] > 0:
        # the crossing sits below the smallest swept score; extend with the
        # trivial operating point that rejects everything
        t = np.concatenate([[t[0] - 1.0], t])
        far = np.concatenate([[0.0], far])
        frr = np.concatenate([[1.0], frr])
        gap = far - frr
    flat = np.flatnonzero(gap == 0.0)
    if flat.size:
        a, b = int(flat[0]), int(flat[-1])
        return float(far[a]), float((t[a] + t[b]) / 2.0)
    k = int(np.argmax(gap > 0))  # first sign change; gap is non-decreasing
    denom = gap[k] - gap[k - 1]
    lam = (frr[k - 1] - far[k - 1]) / denom
    value = far[k - 1] + lam * (far[k] - far[k - 1])
    threshold = t[k - 1] + lam * (t[k] - t[k - 1])
    return float(value), float(threshold)


def eer_individual(scores: ScoreSet) -> float:
    """Mean of per-user equal error rates (user-specific thresholds).

    Users missing either score class are excluded with a warning; they
    contribute no term to the unweighted mean.
    """
    users = sorted(
        {u for u, _ in scores.genuine} | {u for u, _, _ in scores.impostor}
    )
    values = []
    skipped = []
    for u in users:
        genuine = [(uu, s) for uu, s in scores.genuine if uu == u]
        impostor = [(uu, s, k) for uu, s, k in scores.impostor if uu == u]
        if not genuine or not impostor:
            skipped.append(u)
            continue
        values.append(eer(far_frr(ScoreSet(genuine, impostor)))[0])
    if skipped:
        warnings.warn(
            f"excluded from individual EER (missing a score class): {skipped}",
            stacklevel=2,
        )
    if not values:
        raise InvalidInputError("no user has both genuine and impostor scores")
    return float(np.mean(values))


def identify(
    test: FeatureMatrix,
    models: Sequence[SectionedModel],
    fusion: FusionSpec,
    fusion_by_user: Mapping[str, FusionSpec] | None = None,
) -> str:
    """Closed-set identification: the enrolled user whose model scores lowest.

    Ties break to the lowest user_id. fusion_by_user overrides the fusion
    spec per model for user-dependent weighting.
    """
    if not len(models):
        raise InvalidInputError("no enrolled models")
    best: tuple[float, str] | None = None
    for m in models:
        spec = fusion if fusion_by_user is None else fusion_by_user.get(m.user_id, fusion)
        score, _ = model_score(test, m, spec)
        cand = (score, m.user_id)
        if best is None or cand < best:
            best = cand
    return best[1]


# ---- Test-set sizing -------------------------------------------------------


@dataclass(frozen=True)
class SignificanceQuery:
    """Inputs for the rule-of-thumb test-set size: confidence level alpha,
    relative error margin beta, expected error rate p_hat (a fraction)."""

    alpha: float
    beta: float
    p_hat: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise InvalidConfigError(f"{name} must lie strictly between 0 and 1")
        if not (0.0 < self.p_hat <= 1.0):
            raise InvalidConfigError("p_hat must lie in (0, 1]")


# multiplicative guard against quotients that land a hair above an integer
_CEIL_GUARD = 1.0 - 1e-12


def required_test_size(q: SignificanceQuery) -> tuple[int, int]:
    """Minimum independent-trial counts for a statistically meaningful error
    estimate: the exact bound -ln(alpha)/(beta^2 * p_hat) and the popular
    100/p_hat simplification, both rounded up."""
    exact = -math.log(q.alpha) / (q.beta * q.beta * q.p_hat)
    simplified = 100.0 / q.p_hat
    return (
        math.ceil(exact * _CEIL_GUARD),
        math.ceil(simplified * _CEIL_GUARD),
    )


# ---- Operation/storage accounting ------------------------------------------


@dataclass
class BenchmarkReport:
    """Analytic cost model plus optional measured counter readings.

    Analytic terms for one verification: DTW evaluates about one third of
    the K * test_len * template_len local distances under the slope
    constraint; VQ evaluates exactly test_len * codebook_size centroid
    distances (sectioning does not change the total). Reference storage is
    K * template_len vectors for DTW against codebook_size per section for
    VQ.
    """

    num_templates: int
    test_len: int
    template_len: int
    codebook_size: int
    n_sections: int
    dtw_distance_evals: float
    vq_distance_evals: int
    speedup: float
    storage_dtw: int
    storage_vq: int
    storage_msvq: int
    storage_reduction: float
    measured_dtw_evals: int | None = None
    measured_vq_evals: int | None = None
    dtw_measured_ratio: float | None = None
    vq_measured_ratio: float | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def benchmark_counts(
    num_templates: int,
    test_len: int,
    template_len: int,
    codebook_size: int,
    n_sections: int = 1,
    measure: bool = True,
    dim: int = 2,
    seed: int = 0,
    dtw_config: DtwConfig | None = None,
) -> BenchmarkReport:
    """Analytic distance/storage accounting, optionally cross-checked by
    running instrumented matchers on random data of the same dimensions."""
    if min(num_templates, test_len, template_len, codebook_size, n_sections) < 1:
        raise InvalidConfigError("benchmark dimensions must all be >= 1")
    if n_sections > test_len:
        raise InvalidConfigError("n_sections cannot exceed test_len")
    k, i, j, l, s = num_templates, test_len, template_len, codebook_size, n_sections
    report = BenchmarkReport(
        num_templates=k,
        test_len=i,
        template_len=j,
        codebook_size=l,
        n_sections=s,
        dtw_distance_evals=k * i * j / 3.0,
        vq_distance_evals=i * l,
        speedup=k * j / (3.0 * l),
        storage_dtw=k * j,
        storage_vq=l,
        storage_msvq=s * l,
        storage_reduction=k * j / float(l),
    )
    if not measure:
        return report

    rng = np.random.default_rng(seed)
    test = rng.standard_normal((i, dim))
    templates = [rng.standard_normal((j, dim)) for _ in range(k)]
    dtw_counter = DistanceCounter()
    cfg = dtw_config if dtw_config is not None else DtwConfig()
    for ref in templates:
        dtw_distance(test, ref, cfg, dtw_counter)

    vq_counter = DistanceCounter()
    codebooks = [
        Codebook(rng.standard_normal((l, dim))) for _ in range(s)
    ]
    for (a, b), cb in zip(section_bounds(i, s), codebooks):
        nner_distortion(test[a:b], cb, vq_counter)

    report.measured_dtw_evals = dtw_counter.distance_evals
    report.measured_vq_evals = vq_counter.distance_evals
    report.dtw_measured_ratio = dtw_counter.distance_evals / report.dtw_distance_evals
    report.vq_measured_ratio = vq_counter.distance_evals / report.vq_distance_evals
    return report


# ---- Protocol runner -------------------------------------------------------


@dataclass
class ExperimentResult:
    """Everything the eval command reports for one configuration."""

    n_users: int
    n_trials: dict[str, int]
    eer_table: dict[str, dict[str, float]]  # kind -> {individual, general}
    thresholds: dict[str, float]            # kind -> general EER threshold
    identification_correct: int
    identification_total: int
    scores: ScoreSet
    curves: dict[str, DetCurve]

    @property
    def identification_rate(self) -> float | None:
        if self.identification_total == 0:
            return None
        return self.identification_correct / self.identification_total

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_trials": dict(self.n_trials),
            "eer": {k: dict(v) for k, v in self.eer_table.items()},
            "eer_thresholds": dict(self.thresholds),
            "identification": {
                "correct": self.identification_correct,
                "total": self.identification_total,
                "rate": self.identification_rate,
            },
        }


FeatureTable = Mapping[str, Mapping[str, Sequence[FeatureMatrix]]]


def _trial_matrix(features: FeatureTable, trial: "Trial") -> FeatureMatrix:
    try:
        return features[trial.test_user][trial.test_kind][trial.test_index]
    except (KeyError, IndexError):
        raise InvalidInputError(
            f"no features for user {trial.test_user!r} {trial.test_kind}[{trial.test_index}]"
        ) from None


def score_trials(
    models: Mapping[str, SectionedModel],
    trials: Sequence["Trial"],
    features: FeatureTable,
    workers: int = 1,
) -> np.ndarray:
    """Per-section scores for every trial, shape (n_trials, n_sections).

    Work is partitioned by model user; results land in a preallocated array
    indexed by trial position, so the output is identical for any worker
    count.
    """
    if not trials:
        return np.empty((0, 0))
    n_sections = next(iter(models.values())).n_sections
    out = np.empty((len(trials), n_sections), dtype=float)

    by_model: dict[str, list[int]] = {}
    for idx, tr in enumerate(trials):
        by_model.setdefault(tr.model_user, []).append(idx)

    def run_group(user: str) -> None:
        model = models[user]
        for idx in by_model[user]:
            out[idx] = section_scores(_trial_matrix(features, trials[idx]), model)

    users = sorted(by_model)
    if workers <= 1:
        for u in users:
            run_group(u)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_group, users))
    return out


def _fuse(
    section_table: np.ndarray,
    trials: Sequence["Trial"],
    fusion: FusionSpec,
    fusion_by_user: Mapping[str, FusionSpec] | None,
) -> ScoreSet:
    genuine: list[tuple[str, float]] = []
    impostor: list[tuple[str, float, str]] = []
    for row, tr in zip(section_table, trials):
        spec = fusion if fusion_by_user is None else fusion_by_user.get(tr.model_user, fusion)
        s = combine(row, spec)
        if tr.label == "genuine":
            genuine.append((tr.model_user, s))
        else:
            impostor.append((tr.model_user, s, tr.label))
    return ScoreSet(genuine, impostor)


def _train_models(
    features: FeatureTable,
    users: Sequence[str],
    train_indices: Sequence[int],
    config: ModelConfig,
    with_stats: bool,
) -> dict[str, SectionedModel]:
    models: dict[str, SectionedModel] = {}
    for u in users:
        try:
            train = [features[u]["genuine"][i] for i in train_indices]
        except IndexError:
            raise InvalidInputError(
                f"user {u!r} lacks training signature indices {list(train_indices)}"
            ) from None
        model = train_user_model(train, config, user_id=u)
        if with_stats:
            model.train_stats = train_section_stats(model, train)
        models[u] = model
    return models


def _section_eers_from_trials(
    section_table: np.ndarray,
    trials: Sequence["Trial"],
    impostor_kind: str,
    want_thresholds: bool = False,
) -> list[float]:
    """General per-section EERs (or their thresholds) over a trial block."""
    n_sections = section_table.shape[1]
    out = []
    for s in range(n_sections):
        genuine = []
        impostor = []
        for value, tr in zip(section_table[:, s], trials):
            if tr.label == "genuine":
                genuine.append((tr.model_user, float(value)))
            elif tr.label == impostor_kind:
                impostor.append((tr.model_user, float(value), tr.label))
        rate, threshold = eer(far_frr(ScoreSet(genuine, impostor)))
        out.append(threshold if want_thresholds else rate)
    return out


def _per_user_error_weights(
    models: Mapping[str, SectionedModel],
    features: FeatureTable,
    train_indices: Sequence[int],
    strategy: str,
) -> dict[str, FusionSpec]:
    """WSUE/WSUT: per-user per-section EERs (or thresholds) where the
    impostor material is every other enrolled user's training signatures."""
    users = sorted(models)
    own: dict[str, np.ndarray] = {}
    train_sigs = {
        u: [features[u]["genuine"][i] for i in train_indices] for u in users
    }
    for u in users:
        own[u] = section_score_table(models[u], train_sigs[u])
    by_user: dict[str, FusionSpec] = {}
    for u in users:
        other = [m for v in users if v != u for m in train_sigs[v]]
        if not other:
            raise InvalidInputError(f"{strategy} needs at least two enrolled users")
        impostor_table = section_score_table(models[u], other)
        values = []
        for s in range(own[u].shape[1]):
            genuine = [(u, float(v)) for v in own[u][:, s]]
            impostor = [(u, float(v), "random") for v in impostor_table[:, s]]
            rate, threshold = eer(far_frr(ScoreSet(genuine, impostor)))
            values.append(threshold if strategy == "WSUT" else rate)
        by_user[u] = FusionSpec(strategy, compute_weights(strategy, values))
    return by_user


def resolve_fusion(
    strategy: str,
    models: Mapping[str, SectionedModel],
    features: FeatureTable,
    protocol: "ExperimentProtocol",
    dev_users: Sequence[str],
    model_config: ModelConfig,
    explicit_weights: Sequence[float] | None = None,
    workers: int = 1,
) -> tuple[FusionSpec, dict[str, FusionSpec] | None]:
    """Build the fusion spec(s) for an experiment.

    Returns (default spec, per-user overrides or None). Training-score
    strategies weight per user from stored stats; error-based WSRE/WSSE
    weights are estimated once on the development users (or taken from
    explicit_weights) and shared; WSUE/WSUT are per-user from
    cross-user training-signature impostors.
    """
    if strategy not in FIXED_STRATEGIES and strategy not in WEIGHTED_STRATEGIES:
        raise InvalidConfigError(f"unknown fusion strategy {strategy!r}")
    if explicit_weights is not None:
        return FusionSpec(strategy, list(explicit_weights)), None
    if strategy in FIXED_STRATEGIES:
        return FusionSpec(strategy), None
    if strategy in ("WSD", "WSHM", "WSLM"):
        by_user = {}
        for u, m in models.items():
            if m.train_stats is None:
                m.train_stats = train_section_stats(
                    m, [features[u]["genuine"][i] for i in protocol.train_indices]
                )
            by_user[u] = FusionSpec(strategy, compute_weights(strategy, m.train_stats))
        return FusionSpec("SUM"), by_user
    if strategy in ("WSUE", "WSUT"):
        by_user = _per_user_error_weights(
            models, features, protocol.train_indices, strategy
        )
        return FusionSpec("SUM"), by_user
    # WSRE / WSSE: section error rates measured on the development split
    if not dev_users:
        raise InvalidConfigError(
            f"{strategy} needs a development user split (protocol.dev_user_count > 0) "
            "or explicit fusion weights"
        )
    impostor_kind = "random" if strategy == "WSRE" else "skilled"
    if impostor_kind == "random" and len(dev_users) < 2:
        raise InvalidConfigError(
            "WSRE measures random-forgery errors across development users and "
            "needs at least two of them"
        )
    dev_protocol = replace(protocol, dev_user_count=0)
    dev_models = _train_models(
        features, dev_users, protocol.train_indices, model_config, with_stats=False
    )
    dev_trials = build_protocol_for_users(dev_users, features, dev_protocol)
    table = score_trials(dev_models, dev_trials, features, workers)
    eers = _section_eers_from_trials(table, dev_trials, impostor_kind)
    weights = compute_weights(strategy, eers)
    return FusionSpec(strategy, weights), None


def build_protocol_for_users(
    users: Sequence[str], features: FeatureTable, protocol: "ExperimentProtocol"
) -> list["Trial"]:
    """Index-based verification trials over in-memory features.

    Mirrors the manifest-based protocol builder for callers that already
    hold loaded feature tables.
    """
    from .corpus import CorpusManifest, UserEntry, build_protocol

    entries = [
        UserEntry(
            user_id=u,
            genuine=[""] * len(features[u]["genuine"]),
            skilled=[""] * len(features[u].get("skilled", ())),
        )
        for u in users
    ]
    manifest = CorpusManifest(users=entries, sample_rate_hz=100.0, source="memory")
    return build_protocol(manifest, protocol)


def run_experiment(
    features: FeatureTable,
    protocol: "ExperimentProtocol",
    model_config: ModelConfig,
    fusion_strategy: str = "SUM",
    fusion_weights: Sequence[float] | None = None,
    workers: int = 1,
) -> ExperimentResult:
    """Enroll every (non-development) user and run the full protocol.

    Returns verification EERs for random and skilled forgeries under both
    user-specific and shared thresholds, the closed-set identification rate,
    and the swept curves.
    """
    all_users = sorted(features)
    if protocol.dev_user_count >= len(all_users):
        raise InvalidConfigError(
            f"dev_user_count {protocol.dev_user_count} leaves no test users"
        )
    dev_users = all_users[: protocol.dev_user_count]
    test_users = all_users[protocol.dev_user_count :]

    needs_stats = fusion_strategy in ("WSD", "WSHM", "WSLM")
    models = _train_models(
        features, test_users, protocol.train_indices, model_config, needs_stats
    )
    fusion, fusion_by_user = resolve_fusion(
        fusion_strategy,
        models,
        features,
        protocol,
        dev_users,
        model_config,
        explicit_weights=fusion_weights,
        workers=workers,
    )

    test_protocol = replace(protocol, dev_user_count=0)
    trials = build_protocol_for_users(test_users, features, test_protocol)
    table = score_trials(models, trials, features, workers)
    scores = _fuse(table, trials, fusion, fusion_by_user)

    eer_table: dict[str, dict[str, float]] = {}
    thresholds: dict[str, float] = {}
    curves: dict[str, DetCurve] = {}
    for kind in IMPOSTOR_KINDS:
        subset = scores.filtered(kind)
        if not subset.impostor:
            continue
        curve = far_frr(subset)
        general, threshold = eer(curve)
        eer_table[kind] = {
            "individual": eer_individual(subset),
            "general": general,
        }
        thresholds[kind] = threshold
        curves[kind] = curve

    model_list = [models[u] for u in test_users]
    ident_indices = protocol.resolve_identification_indices(
        {u: len(features[u]["genuine"]) for u in test_users}
    )
    correct = 0
    total = 0
    for u in test_users:
        for idx in ident_indices[u]:
            predicted = identify(
                features[u]["genuine"][idx], model_list, fusion, fusion_by_user
            )
            correct += int(predicted == u)
            total += 1

    n_trials = {"genuine": 0, "skilled": 0, "random": 0}
    for tr in trials:
        n_trials[tr.label] += 1

    return ExperimentResult(
        n_users=len(test_users),
        n_trials=n_trials,
        eer_table=eer_table,
        thresholds=thresholds,
        identification_correct=correct,
        identification_total=total,
        scores=scores,
        curves=curves,
    )


def run_dtw_experiment(
    features: FeatureTable,
    protocol: "ExperimentProtocol",
    dtw_config: DtwConfig | None = None,
    workers: int = 1,
) -> ExperimentResult:
    """Same protocol with the multi-template DTW baseline as the matcher."""
    cfg = dtw_config if dtw_config is not None else DtwConfig()
    all_users = sorted(features)
    test_users = all_users[protocol.dev_user_count :]
    if not test_users:
        raise InvalidConfigError("no test users")
    references = {
        u: [features[u]["genuine"][i] for i in protocol.train_indices]
        for u in test_users
    }
    test_protocol = replace(protocol, dev_user_count=0)
    trials = build_protocol_for_users(test_users, features, test_protocol)

    def score_one(tr: "Trial") -> float:
        return multi_template_score(
            _trial_matrix(features, tr), references[tr.model_user], cfg
        )

    by_model: dict[str, list[int]] = {}
    for idx, tr in enumerate(trials):
        by_model.setdefault(tr.model_user, []).append(idx)
    values = np.empty(len(trials), dtype=float)

    def run_group(user: str) -> None:
        for idx in by_model[user]:
            values[idx] = score_one(trials[idx])

    users = sorted(by_model)
    if workers <= 1:
        for u in users:
            run_group(u)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_group, users))

    genuine = []
    impostor = []
    for v, tr in zip(values, trials):
        if tr.label == "genuine":
            genuine.append((tr.model_user, float(v)))
        else:
            impostor.append((tr.model_user, float(v), tr.label))
    scores = ScoreSet(genuine, impostor)

    eer_table: dict[str, dict[str, float]] = {}
    thresholds: dict[str, float] = {}
    curves: dict[str, DetCurve] = {}
    for kind in IMPOSTOR_KINDS:
        subset = scores.filtered(kind)
        if not subset.impostor:
            continue
        curve = far_frr(subset)
        general, threshold = eer(curve)
        eer_table[kind] = {
            "individual": eer_individual(subset),
            "general": general,
        }
        thresholds[kind] = threshold
        curves[kind] = curve

    ident_indices = protocol.resolve_identification_indices(
        {u: len(features[u]["genuine"]) for u in test_users}
    )
    correct = 0
    total = 0
    for u in test_users:
        for idx in ident_indices[u]:
            m = features[u]["genuine"][idx]
            best = None
            for v in test_users:
                cand = (multi_template_score(m, references[v], cfg), v)
                if best is None or cand < best:
                    best = cand
            correct += int(best[1] == u)
            total += 1

    n_trials = {"genuine": 0, "skilled": 0, "random": 0}
    for tr in trials:
        n_trials[tr.label] += 1
    return ExperimentResult(
        n_users=len(test_users),
        n_trials=n_trials,
        eer_table=eer_table,
        thresholds=thresholds,
        identification_correct=correct,
        identification_total=total,
        scores=scores,
        curves=curves,
    )


# ---- Text exports ----------------------------------------------------------


def write_det_curve(path, curve: DetCurve, comment: str | None = None) -> None:
    """Write a swept curve as tab-separated threshold/far/frr lines."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# threshold\tfar\tfrr")
    for t, a, r in curve.points:
        lines.append(f"{t!r}\t{a!r}\t{r!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_score_set(path, scores: ScoreSet, comment: str | None = None) -> None:
    """Write scores as tab-separated user/label/kind/score lines."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# user\tlabel\tkind\tscore")
    for u, s in scores.genuine:
        lines.append(f"{u}\tgenuine\t-\t{s!r}")
    for u, s, k in scores.impostor:
        lines.append(f"{u}\timpostor\t{k}\t{s!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
