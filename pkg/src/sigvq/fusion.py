"""Section-score fusion: combination rules and weight estimation.

A multi-section model produces one distortion per section; these are fused
into a single score. Fixed rules (MIN/MAX/SUM/PRODUCT/SEV) need no training.
Weighted sums derive per-section weights either from the spread of the
user's own training scores (WSD/WSHM/WSLM) or from per-section error rates
or their thresholds (WSRE/WSSE/WSUE/WSUT); in all weighted rules the weights
are non-negative and sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TYPE_CHECKING

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .vq import SectionedModel
    from .signal import FeatureMatrix

# log floor for the PRODUCT rule: distortions can be exactly 0
PRODUCT_LOG_FLOOR = 1e-12

FIXED_STRATEGIES = ("MIN", "MAX", "SUM", "PRODUCT", "SEV")
WEIGHTED_STRATEGIES = ("WSD", "WSHM", "WSLM", "WSRE", "WSSE", "WSUE", "WSUT")
STRATEGIES = FIXED_STRATEGIES + WEIGHTED_STRATEGIES

WEIGHT_SUM_TOL = 1e-9


@dataclass
class FusionSpec:
    """A fusion strategy plus weights for the weighted-sum variants."""

    strategy: str = "SUM"
    weights: list[float] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidConfigError(
                f"unknown fusion strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.weights is not None:
            w = [float(v) for v in self.weights]
            if any(v < 0 for v in w):
                raise InvalidConfigError("fusion weights must be non-negative")
            if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
                raise InvalidConfigError(
                    f"fusion weights must sum to 1 (got {sum(w)!r})"
                )
            self.weights = w
        if self.strategy in WEIGHTED_STRATEGIES and self.weights is None:
            # weights may be attached later (resolved per user or on a
            # development split); combine() checks again at use time
            pass


@dataclass
class SectionStats:
    """Per-section mean/spread of a user's training scores.

    mu[i] and sigma[i] are the mean and population standard deviation of the
    i-th section distortion over the user's own T training signatures scored
    against the user's own model.
    """

    mu: list[float]
    sigma: list[float]
    n_train: int

    def __post_init__(self):
        if len(self.mu) != len(self.sigma):
            raise InvalidConfigError(
                f"mu and sigma lengths differ ({len(self.mu)} vs {len(self.sigma)})"
            )
        if self.n_train < 1:
            raise InvalidInputError("section stats need at least one training score")
        self.mu = [float(v) for v in self.mu]
        self.sigma = [float(v) for v in self.sigma]


def section_score_table(model: "SectionedModel", sigs: Sequence["FeatureMatrix"]) -> np.ndarray:
    """Per-section scores of several signatures against one model.

    Returns an array of shape (len(sigs), n_sections); row j holds the
    normalized section distortions of sigs[j].
    """
    from .vq import section_scores  # deferred: vq imports this module

    if not sigs:
        raise InvalidInputError("need at least one signature")
    return np.stack([section_scores(m, model) for m in sigs])


def train_section_stats(model: "SectionedModel", train_sigs: Sequence["FeatureMatrix"]) -> SectionStats:
    """Estimate per-section score statistics from the user's own training set."""
    table = section_score_table(model, train_sigs)
    mu = table.mean(axis=0)
    sigma = table.std(axis=0)  # population
    return SectionStats(mu=list(mu), sigma=list(sigma), n_train=table.shape[0])


def _inverse_share(values: np.ndarray) -> np.ndarray:
    # weights proportional to 1/v; any exact zero takes the whole mass,
    # split uniformly among the zeros (the limit of 1/v normalization)
    zeros = values == 0.0
    if zeros.any():
        w = np.zeros_like(values)
        w[zeros] = 1.0 / zeros.sum()
        return w
    with np.errstate(over="ignore"):
        inv = 1.0 / values
        total = inv.sum()
    if not np.isfinite(total):
        # 1/v overflows for subnormal v; ratios of the smallest value to the
        # rest express the same shares without leaving the finite range
        ratio = values.min() / values
        return ratio / ratio.sum()
    return inv / inv.sum()


def _proportional_share(values: np.ndarray) -> np.ndarray:
    total = values.sum()
    if total == 0.0:
        return np.full_like(values, 1.0 / len(values))
    if not np.isfinite(total):
        scaled = values / values.max()
        return scaled / scaled.sum()
    return values / total


def compute_weights(strategy: str, inputs) -> list[float]:
    """Per-section weights for a weighted-sum strategy.

    inputs is a SectionStats for the training-score strategies (WSD uses
    sigma, WSHM/WSLM use mu) or a plain sequence: per-section error rates
    for WSRE/WSSE/WSUE, per-section decision thresholds for WSUT.
    """
    if strategy not in WEIGHTED_STRATEGIES:
        raise InvalidConfigError(f"{strategy!r} is not a weighted fusion strategy")
    if isinstance(inputs, SectionStats):
        values = np.asarray(inputs.sigma if strategy == "WSD" else inputs.mu, dtype=float)
    else:
        values = np.asarray(list(inputs), dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise InvalidInputError("weight inputs must be a non-empty 1-D sequence")
    if not np.isfinite(values).all():
        raise InvalidInputError("weight inputs must be finite")
    if (values < 0).any():
        raise InvalidInputError("weight inputs must be non-negative")

    if strategy == "WSD":
        w = _inverse_share(values)
    elif strategy == "WSHM":
        w = _proportional_share(values)
    else:
        # WSLM and all error/threshold based strategies weight each section
        # inversely to its value
        w = _inverse_share(values)
    assert abs(w.sum() - 1.0) <= WEIGHT_SUM_TOL
    return [float(v) for v in w]


def combine(distortions, spec: FusionSpec) -> float:
    """Fuse per-section distortions into one score under a strategy."""
    d = np.asarray(list(distortions), dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise InvalidInputError("need at least one section distortion")
    if not np.isfinite(d).all():
        raise InvalidInputError("section distortions must be finite")
    if (d < 0).any():
        raise InvalidInputError("section distortions must be non-negative")

    s = spec.strategy
    if s == "MIN":
        return float(d.min())
    if s == "MAX":
        return float(d.max())
    if s == "SUM":
        return float(d.sum())
    if s == "PRODUCT":
        return float(np.log(d + PRODUCT_LOG_FLOOR).sum())
    if s == "SEV":
        return float(d.min() + d.max())
    # weighted sums
    if spec.weights is None:
        raise InvalidConfigError(f"fusion strategy {s} needs weights")
    if len(spec.weights) != d.size:
        raise InvalidConfigError(
            f"{len(spec.weights)} weights for {d.size} sections"
        )
    return float(np.dot(np.asarray(spec.weights, dtype=float), d))
