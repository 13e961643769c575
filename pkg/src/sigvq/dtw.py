"""Constrained dynamic time warping baseline matcher.

Asymmetric dynamic programming over the test rows: a cell (i, j) extends
(i-1, j), (i-1, j-1) or (i-1, j-2), so every test vector is consumed exactly
once. Start and end points are relaxed by a margin of cells, and an optional
slope-constrained parallelogram (slopes 1/2 and 2, anchored at the relaxed
corners) prunes the search region to roughly a third of the grid. The final
cost is the best relaxed-endpoint total divided by the test length.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .instrument import DistanceCounter
from .signal import FeatureMatrix

TEMPLATE_COMBINERS = ("MIN", "MEAN", "MEDIAN")


@dataclass
class DtwConfig:
    """Endpoint relaxation, region constraint, and multi-template combiner.

    epsilon=None resolves per call to max(1, round(0.02 * reference_length)).
    """

    epsilon: int | None = None
    use_parallelogram: bool = True
    combiner: str = "MIN"

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 1:
            raise InvalidConfigError("epsilon must be >= 1")
        if self.combiner not in TEMPLATE_COMBINERS:
            raise InvalidConfigError(
                f"unknown combiner {self.combiner!r}; expected one of {TEMPLATE_COMBINERS}"
            )


def _as_rows(data) -> np.ndarray:
    v = data.values if isinstance(data, FeatureMatrix) else np.asarray(data, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise InvalidInputError("expected a non-empty 2-D array of vectors")
    if not np.isfinite(v).all():
        raise InvalidInputError("vectors must be finite")
    return v


def resolve_epsilon(config: DtwConfig, ref_len: int) -> int:
    if config.epsilon is not None:
        return config.epsilon
    return max(1, round(0.02 * ref_len))


def _band(n_rows: int, n_cols: int, eps: int, constrained: bool) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive 0-based [lo, hi] column range per row.

    With the parallelogram on, a cell must be reachable from some relaxed
    start at a slope between 1/2 and 2 and must reach some relaxed end the
    same way; the union over start/end choices is the hull used here. Rows
    where hi < lo are empty.
    """
    i = np.arange(1, n_rows + 1, dtype=float)  # 1-based row index
    if not constrained:
        lo = np.ones(n_rows)
        hi = np.full(n_rows, float(n_cols))
    else:
        lo = np.maximum.reduce([
            np.ones(n_rows),
            np.ceil(1.0 + (i - eps) / 2.0),
            np.ceil(n_cols - eps - 2.0 * (n_rows - i)),
        ])
        hi = np.minimum.reduce([
            np.full(n_rows, float(n_cols)),
            np.floor(eps + 2.0 * (i - 1.0)),
            np.floor(n_cols - (n_rows - eps - i) / 2.0),
        ])
    return lo.astype(int) - 1, hi.astype(int) - 1  # to 0-based


def dtw_distance(
    test,
    reference,
    config: DtwConfig | None = None,
    counter: DistanceCounter | None = None,
) -> float:
    """Length-normalized DTW cost between a test and a reference sequence.

    Local distances are plain Euclidean. Paths may start at any of the first
    epsilon cells of the first test row or the first reference column, and
    may end at any of the last epsilon cells of the last test row or the
    last reference column. Returns +inf (with a warning) when no feasible
    path exists.
    """
    if config is None:
        config = DtwConfig()
    a = _as_rows(test)
    b = _as_rows(reference)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(
            f"test dimension {a.shape[1]} does not match reference dimension {b.shape[1]}"
        )
    n_rows, n_cols = a.shape[0], b.shape[0]
    eps = resolve_epsilon(config, n_cols)
    lo, hi = _band(n_rows, n_cols, eps, config.use_parallelogram)

    inf = float("inf")
    end_candidates: list[float] = []
    prev = np.full(n_cols, inf)
    for i in range(n_rows):
        l, h = lo[i], hi[i]
        if i == 0:
            h = min(h, eps - 1)  # first-row starts exist only up to epsilon
        cur = np.full(n_cols, inf)
        if l <= h:
            diff = a[i, None, :] - b[l : h + 1]
            d = np.sqrt((diff * diff).sum(axis=1))
            if counter is not None:
                counter.add(h - l + 1)
            if i == 0:
                cur[l : h + 1] = d
            else:
                padded = np.concatenate(([inf, inf], prev))
                stepped = np.minimum.reduce([
                    padded[l + 2 : h + 3],  # (i-1, j)
                    padded[l + 1 : h + 2],  # (i-1, j-1)
                    padded[l : h + 1],      # (i-1, j-2)
                ])
                cur[l : h + 1] = d + stepped
                if l == 0 and i <= eps - 1:
                    cur[0] = d[0]  # relaxed start on the first column
        if i >= n_rows - eps - 1:
            end_candidates.append(cur[n_cols - 1])
        prev = cur

    last_row = prev
    end_candidates.extend(last_row[max(0, n_cols - eps - 1) : n_cols - 1])
    best = min(end_candidates)
    if math.isinf(best):
        warnings.warn(
            f"no feasible warping path for lengths {n_rows}x{n_cols} "
            f"(epsilon={eps}, parallelogram={config.use_parallelogram})",
            stacklevel=2,
        )
        return inf
    return float(best) / n_rows


def multi_template_score(
    test,
    references: Sequence,
    config: DtwConfig | None = None,
    counter: DistanceCounter | None = None,
) -> float:
    """Combine the DTW costs of a test against several reference templates."""
    if config is None:
        config = DtwConfig()
    if not len(references):
        raise InvalidInputError("need at least one reference template")
    costs = np.array(
        [dtw_distance(test, ref, config, counter) for ref in references], dtype=float
    )
    if config.combiner == "MIN":
        return float(costs.min())
    if config.combiner == "MEAN":
        return float(costs.mean())
    return float(np.median(costs))
