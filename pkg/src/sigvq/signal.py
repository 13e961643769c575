"""Pen-trajectory types and feature extraction.

A captured signature is a sequence of tablet samples (position, pressure,
pen azimuth/altitude). Feature extraction translates the trajectory to its
center of mass, derives first differences, assembles one of the named
feature sets, and z-normalizes every column per signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

# Feature sets by name; columns are assembled in the listed order.
# x/y are center-of-mass translated, dx/dy/dp are backward first differences
# (first element 0), t is the 0-based sample index. Every column is z-normed.
FEATURE_SETS: dict[str, tuple[str, ...]] = {
    "FS1": ("x", "y", "p", "azimuth", "altitude"),
    "FS2": ("x", "y", "dx", "dy"),
    "FS3": ("x", "y", "p", "dx", "dy", "dp"),
    "FS4": ("x", "y", "p", "dx", "dy"),
    "FS5": ("x", "y", "dx", "dy", "dp"),
    "FS6": ("x", "y", "dx", "dy", "dp", "t"),
}

SIGNATURE_KINDS = ("genuine", "skilled_forgery", "random_forgery")


def feature_dim(feature_set: str) -> int:
    """Number of columns produced by the named feature set."""
    try:
        return len(FEATURE_SETS[feature_set])
    except KeyError:
        raise InvalidConfigError(
            f"unknown feature set {feature_set!r}; expected one of {sorted(FEATURE_SETS)}"
        ) from None


@dataclass(frozen=True)
class Sample:
    """One tablet sample: timestamp, position, pressure, pen angles."""

    t: float
    x: float
    y: float
    p: float
    azimuth: float
    altitude: float


@dataclass
class RawSignature:
    """An ordered pen trajectory plus identity metadata.

    Identity (user_id/kind/index) is carried by the corpus manifest, not by
    the signature file format, so the fields default to neutral values.
    """

    samples: list[Sample]
    sample_rate_hz: float = 100.0
    user_id: str = ""
    kind: str = "genuine"
    index: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.samples:
            raise InvalidInputError("signature has no samples")
        if self.kind not in SIGNATURE_KINDS:
            raise InvalidInputError(
                f"kind {self.kind!r} not in {SIGNATURE_KINDS}"
            )
        if self.sample_rate_hz <= 0:
            raise InvalidInputError("sample_rate_hz must be positive")
        prev = None
        for i, s in enumerate(self.samples):
            for name in ("t", "x", "y", "p", "azimuth", "altitude"):
                v = getattr(s, name)
                if not math.isfinite(v):
                    raise InvalidInputError(f"sample {i}: {name} is not finite")
            if prev is not None and s.t <= prev:
                raise InvalidInputError(
                    f"sample {i}: timestamp {s.t} not strictly increasing"
                )
            prev = s.t

    def __len__(self) -> int:
        return len(self.samples)

    def channel(self, name: str) -> np.ndarray:
        """One raw channel ('t','x','y','p','azimuth','altitude') as a float array."""
        return np.array([getattr(s, name) for s in self.samples], dtype=float)


@dataclass
class FeatureMatrix:
    """Feature vectors for one signature, one row per sample."""

    values: np.ndarray
    feature_set: str
    user_id: str = ""
    kind: str = "genuine"
    index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise InvalidInputError("feature matrix must be 2-D with at least one row")
        if self.values.shape[1] != feature_dim(self.feature_set):
            raise InvalidInputError(
                f"feature matrix width {self.values.shape[1]} does not match "
                f"{self.feature_set} ({feature_dim(self.feature_set)} columns)"
            )
        if not np.isfinite(self.values).all():
            raise InvalidInputError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def znorm(series) -> np.ndarray:
    """Z-normalize a 1-D series with the population standard deviation.

    A zero-variance series maps to all zeros rather than dividing by zero.
    """
    v = np.asarray(series, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError("znorm expects a non-empty 1-D series")
    if not np.isfinite(v).all():
        raise InvalidInputError("znorm input contains non-finite values")
    mean = v.mean()
    std = v.std()  # population (divides by N)
    if std == 0.0:
        return np.zeros_like(v)
    return (v - mean) / std


def _backward_diff(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:] = v[1:] - v[:-1]
    return out


def preprocess(sig: RawSignature, feature_set: str) -> FeatureMatrix:
    """Turn a raw signature into a z-normalized feature matrix.

    Steps, in order: translate x/y so the center of mass sits at the origin;
    take backward first differences of x, y, p (first element 0); assemble
    the feature set's columns, with t the 0-based sample index; z-normalize
    each column independently.
    """
    dim = feature_dim(feature_set)  # validates the name
    n = len(sig)
    x = sig.channel("x")
    y = sig.channel("y")
    p = sig.channel("p")
    x = x - x.mean()
    y = y - y.mean()
    channels = {
        "x": x,
        "y": y,
        "p": p,
        "azimuth": sig.channel("azimuth"),
        "altitude": sig.channel("altitude"),
        "dx": _backward_diff(x),
        "dy": _backward_diff(y),
        "dp": _backward_diff(p),
        "t": np.arange(n, dtype=float),
    }
    cols = [znorm(channels[name]) for name in FEATURE_SETS[feature_set]]
    values = np.column_stack(cols)
    assert values.shape == (n, dim)
    return FeatureMatrix(
        values,
        feature_set,
        user_id=sig.user_id,
        kind=sig.kind,
        index=sig.index,
    )
