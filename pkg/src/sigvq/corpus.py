"""Corpus I/O, synthetic data generation, protocols, model persistence.

File formats (all line-oriented text, diff-friendly):

* Signature ("SIGv1"): header ``SIGv1 <count> <rate_hz>`` then one sample
  per line, ``t x y p azimuth altitude``. Identity (user/kind/index) is
  carried by the corpus manifest, not the file.
* Competition import: first line is the point count, then
  ``X Y timestamp button azimuth altitude pressure`` per line; timestamps
  are re-based to start at 0 and button status is kept as metadata.
* Model ("MSVQv1"): header with user, section sizes, dimension and feature
  set, optional training stats and fusion weights, then the centroid rows
  of each section.
* Manifest: JSON listing each user's genuine and skilled-forgery files,
  with paths relative to the manifest's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, ParseError
from .fusion import SectionStats
from .signal import FEATURE_SETS, FeatureMatrix, RawSignature, Sample, preprocess
from .vq import Codebook, ModelConfig, SectionedModel

MANIFEST_NAME = "manifest.json"
_MANIFEST_FORMAT = "corpus-manifest-v1"


# ---- Manifest ---------------------------------------------------------------


@dataclass
class UserEntry:
    """One user's files, ordered; list position is the signature index."""

    user_id: str
    genuine: list[str] = field(default_factory=list)
    skilled: list[str] = field(default_factory=list)


@dataclass
class CorpusManifest:
    """Index of a signature corpus on disk."""

    users: list[UserEntry]
    sample_rate_hz: float
    source: str = "synthetic"
    root: str = ""  # directory paths are relative to; set on load, not serialized

    def __post_init__(self):
        ids = [u.user_id for u in self.users]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("manifest has duplicate user ids")
        if not self.users:
            raise InvalidInputError("manifest lists no users")

    def user(self, user_id: str) -> UserEntry:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise InvalidInputError(f"user {user_id!r} not in manifest")

    def subset(self, user_ids) -> "CorpusManifest":
        wanted = set(user_ids)
        return CorpusManifest(
            users=[u for u in self.users if u.user_id in wanted],
            sample_rate_hz=self.sample_rate_hz,
            source=self.source,
            root=self.root,
        )


def save_manifest(manifest: CorpusManifest, directory: str) -> str:
    path = os.path.join(directory, MANIFEST_NAME)
    payload = {
        "format": _MANIFEST_FORMAT,
        "source": manifest.source,
        "sample_rate_hz": manifest.sample_rate_hz,
        "users": [
            {"user_id": u.user_id, "genuine": list(u.genuine), "skilled": list(u.skilled)}
            for u in manifest.users
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path: str) -> CorpusManifest:
    """Read a manifest from a JSON file (or a directory containing one)."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ParseError("manifest not found", path=path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON ({exc})", path=path) from None
    if payload.get("format") != _MANIFEST_FORMAT:
        raise ParseError(
            f"unsupported manifest format {payload.get('format')!r}", path=path
        )
    users = [
        UserEntry(
            user_id=item["user_id"],
            genuine=list(item.get("genuine", [])),
            skilled=list(item.get("skilled", [])),
        )
        for item in payload.get("users", [])
    ]
    return CorpusManifest(
        users=users,
        sample_rate_hz=float(payload["sample_rate_hz"]),
        source=str(payload.get("source", "")),
        root=os.path.dirname(os.path.abspath(path)),
    )


# ---- Signature files --------------------------------------------------------

_SIG_MAGIC = "SIGv1"


def write_signature_file(sig: RawSignature, path: str) -> None:
    lines = [f"{_SIG_MAGIC} {len(sig)} {sig.sample_rate_hz!r}"]
    for s in sig.samples:
        lines.append(f"{s.t!r} {s.x!r} {s.y!r} {s.p!r} {s.azimuth!r} {s.altitude!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_signature_file(
    path: str,
    user_id: str = "",
    kind: str = "genuine",
    index: int = 0,
) -> RawSignature:
    """Parse a SIGv1 file; identity fields come from the caller (manifest)."""
    with open(path, encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    lines = [(n, ln) for n, ln in enumerate(raw_lines, start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty signature file", path=path)
    header_no, header = lines[0]
    parts = header.split()
    if len(parts) != 3 or parts[0] != _SIG_MAGIC:
        raise ParseError(
            f"bad header {header!r} (expected '{_SIG_MAGIC} <count> <rate_hz>')",
            path=path,
            line=header_no,
        )
    try:
        count = int(parts[1])
        rate = float(parts[2])
    except ValueError:
        raise ParseError(f"bad header numbers in {header!r}", path=path, line=header_no) from None
    body = lines[1:]
    if len(body) != count:
        raise ParseError(
            f"header promises {count} samples, file has {len(body)}",
            path=path,
            line=body[-1][0] if body else header_no,
        )
    samples = []
    for line_no, line in body:
        cols = line.split()
        if len(cols) != 6:
            raise ParseError(
                f"expected 6 columns (t x y p azimuth altitude), got {len(cols)}",
                path=path,
                line=line_no,
            )
        try:
            values = [float(c) for c in cols]
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", path=path, line=line_no) from None
        samples.append(Sample(*values))
    try:
        return RawSignature(
            samples, sample_rate_hz=rate, user_id=user_id, kind=kind, index=index
        )
    except InvalidInputError as exc:
        raise ParseError(str(exc), path=path) from None


def import_svc(
    path: str,
    user_id: str = "",
    kind: str = "genuine",
    index: int = 0,
    sample_rate_hz: float = 100.0,
) -> RawSignature:
    """Import a competition-style capture file.

    First line: point count. Per point: ``X Y timestamp button azimuth
    altitude pressure``. Timestamps are re-based to start at 0; the pen
    up/down button column is preserved in metadata["button_status"].
    """
    with open(path, encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    lines = [(n, ln) for n, ln in enumerate(raw_lines, start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty capture file", path=path)
    header_no, header = lines[0]
    try:
        count = int(header.split()[0])
    except (ValueError, IndexError):
        raise ParseError(f"bad point count {header!r}", path=path, line=header_no) from None
    if count < 1:
        raise ParseError(f"point count must be positive, got {count}", path=path, line=header_no)
    body = lines[1:]
    if len(body) != count:
        raise ParseError(
            f"header promises {count} points, file has {len(body)}",
            path=path,
            line=body[-1][0] if body else header_no,
        )
    rows = []
    for line_no, line in body:
        cols = line.split()
        if len(cols) != 7:
            raise ParseError(
                f"expected 7 columns (X Y timestamp button azimuth altitude pressure), "
                f"got {len(cols)}",
                path=path,
                line=line_no,
            )
        try:
            rows.append([float(c) for c in cols])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", path=path, line=line_no) from None
    t0 = rows[0][2]
    samples = [
        Sample(t=r[2] - t0, x=r[0], y=r[1], p=r[6], azimuth=r[4], altitude=r[5])
        for r in rows
    ]
    buttons = [int(r[3]) for r in rows]
    try:
        return RawSignature(
            samples,
            sample_rate_hz=sample_rate_hz,
            user_id=user_id,
            kind=kind,
            index=index,
            metadata={"button_status": buttons},
        )
    except InvalidInputError as exc:
        raise ParseError(str(exc), path=path) from None


# ---- Synthetic corpus -------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Parameters of the deterministic synthetic corpus generator.

    Genuine repetitions jitter the user's prototype mildly; skilled
    forgeries keep the spatial shape but distort the dynamics (speed
    profile, pressure) by forgery_dynamic_distortion, which must exceed
    genuine_jitter.
    """

    seed: int = 0
    n_users: int = 40
    genuine_per_user: int = 25
    skilled_per_user: int = 25
    min_len: int = 300
    max_len: int = 600
    sample_rate_hz: float = 100.0
    genuine_jitter: float = 0.03
    forgery_dynamic_distortion: float = 0.18

    def __post_init__(self):
        if self.n_users < 1 or self.genuine_per_user < 1:
            raise InvalidConfigError("need at least one user with one genuine signature")
        if self.skilled_per_user < 0:
            raise InvalidConfigError("skilled_per_user must be >= 0")
        if not (1 <= self.min_len <= self.max_len):
            raise InvalidConfigError("need 1 <= min_len <= max_len")
        if self.genuine_jitter <= 0:
            raise InvalidConfigError("genuine_jitter must be positive")
        if self.forgery_dynamic_distortion <= self.genuine_jitter:
            raise InvalidConfigError(
                "forgery_dynamic_distortion must exceed genuine_jitter"
            )


def _user_rng(spec: SyntheticSpec, user_index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, 1, user_index])


def _sig_rng(spec: SyntheticSpec, user_index: int, kind_code: int, sig_index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, 2, user_index, kind_code, sig_index])


def _draw_style(spec: SyntheticSpec, user_index: int) -> dict:
    """Per-user prototype parameters: sinusoid mixes for the pen trajectory,
    a smooth pressure envelope, slow pen-angle oscillations."""
    rng = _user_rng(spec, user_index)
    style: dict = {}
    for axis, scale in (("x", 1800.0), ("y", 1200.0)):
        n_comp = int(rng.integers(3, 7))
        style[axis] = {
            "freq": rng.uniform(0.5, 3.5, n_comp),
            "phase": rng.uniform(0.0, 2.0 * np.pi, n_comp),
            "amp": scale * rng.uniform(0.25, 1.0, n_comp) / np.arange(1, n_comp + 1),
        }
    style["x_drift"] = rng.uniform(3500.0, 7000.0)
    style["x_off"] = rng.uniform(2500.0, 4500.0)
    style["y_off"] = rng.uniform(3500.0, 6000.0)
    style["p_peak"] = rng.uniform(450.0, 950.0)
    style["p_shape"] = rng.uniform(0.35, 0.9)
    style["p_freq"] = rng.uniform(1.0, 4.0, 3)
    style["p_phase"] = rng.uniform(0.0, 2.0 * np.pi, 3)
    style["p_amp"] = rng.uniform(0.03, 0.12, 3)
    style["az_base"] = rng.uniform(900.0, 2700.0)
    style["az_amp"] = rng.uniform(60.0, 280.0)
    style["az_freq"] = rng.uniform(0.5, 2.0)
    style["az_phase"] = rng.uniform(0.0, 2.0 * np.pi)
    style["alt_base"] = rng.uniform(420.0, 780.0)
    style["alt_amp"] = rng.uniform(25.0, 110.0)
    style["alt_freq"] = rng.uniform(0.5, 2.0)
    style["alt_phase"] = rng.uniform(0.0, 2.0 * np.pi)
    return style


def _sinusoid_mix(params: dict, tau: np.ndarray, rng, shape_jitter: float) -> np.ndarray:
    amps = np.asarray(params["amp"], dtype=float)
    phases = np.asarray(params["phase"], dtype=float)
    if shape_jitter > 0.0:
        amps = amps * (1.0 + shape_jitter * rng.standard_normal(amps.size))
        phases = phases + (np.pi * shape_jitter) * rng.standard_normal(phases.size)
    total = np.zeros_like(tau)
    for a, f, ph in zip(amps, params["freq"], phases):
        total += a * np.sin(2.0 * np.pi * f * tau + ph)
    return total


def _style_channels(
    style: dict, tau: np.ndarray, rng=None, shape_jitter: float = 0.0
) -> dict[str, np.ndarray]:
    """Render the channels of one signature instance.

    shape_jitter > 0 wobbles each sinusoid component's amplitude and phase
    (and the pressure envelope) so the produced static shape genuinely
    differs between renderings; a plain global rescaling would be erased
    by the per-channel z-scoring downstream.
    """
    x = style["x_off"] + style["x_drift"] * tau + _sinusoid_mix(style["x"], tau, rng, shape_jitter)
    y = style["y_off"] + _sinusoid_mix(style["y"], tau, rng, shape_jitter)
    p_shape = style["p_shape"]
    wiggle_amps = np.asarray(style["p_amp"], dtype=float)
    wiggle_phases = np.asarray(style["p_phase"], dtype=float)
    if shape_jitter > 0.0:
        p_shape = p_shape * (1.0 + shape_jitter * rng.standard_normal())
        wiggle_amps = wiggle_amps * (1.0 + shape_jitter * rng.standard_normal(wiggle_amps.size))
        wiggle_phases = wiggle_phases + (np.pi * shape_jitter) * rng.standard_normal(wiggle_phases.size)
    wiggle = np.zeros_like(tau)
    for a, f, ph in zip(wiggle_amps, style["p_freq"], wiggle_phases):
        wiggle += a * np.sin(2.0 * np.pi * f * tau + ph)
    envelope = np.sin(np.pi * np.clip(tau, 0.0, 1.0)) ** p_shape
    p = np.maximum(style["p_peak"] * envelope * (1.0 + wiggle), 5.0)
    az_phase, alt_phase = style["az_phase"], style["alt_phase"]
    az_amp, alt_amp = style["az_amp"], style["alt_amp"]
    if shape_jitter > 0.0:
        az_phase = az_phase + (np.pi * shape_jitter) * rng.standard_normal()
        alt_phase = alt_phase + (np.pi * shape_jitter) * rng.standard_normal()
        az_amp = az_amp * (1.0 + shape_jitter * rng.standard_normal())
        alt_amp = alt_amp * (1.0 + shape_jitter * rng.standard_normal())
    az = style["az_base"] + az_amp * np.sin(
        2.0 * np.pi * style["az_freq"] * tau + az_phase
    )
    alt = style["alt_base"] + alt_amp * np.sin(
        2.0 * np.pi * style["alt_freq"] * tau + alt_phase
    )
    return {"x": x, "y": y, "p": p, "azimuth": az, "altitude": alt}


def _monotone_warp(rng: np.random.Generator, n: int, magnitude: float) -> np.ndarray:
    """A strictly increasing reparameterization of [0, 1].

    Integrates a positive speed profile exp(magnitude * smooth noise), so
    the magnitude directly scales how far the timing deviates from uniform.
    """
    tau = np.linspace(0.0, 1.0, n)
    profile = np.zeros_like(tau)
    for k in (1, 2):
        profile += (rng.uniform(0.4, 1.0) / k) * np.sin(
            2.0 * np.pi * k * tau + rng.uniform(0.0, 2.0 * np.pi)
        )
    speed = np.exp(magnitude * 3.0 * profile)
    steps = np.concatenate([[0.0], (speed[1:] + speed[:-1]) / 2.0])
    warped = np.cumsum(steps)
    return warped / warped[-1]


def _render_instance(
    style: dict,
    rng: np.random.Generator,
    n: int,
    warp_magnitude: float,
    shape_jitter: float,
    pressure_perturb: float,
    sample_rate_hz: float,
    user_id: str,
    kind: str,
    index: int,
) -> RawSignature:
    tau = _monotone_warp(rng, n, warp_magnitude)
    ch = _style_channels(style, tau, rng, shape_jitter)
    grid = np.linspace(0.0, 1.0, n)

    for axis in ("x", "y"):
        ch[axis] = ch[axis] + 1.5 * rng.standard_normal(n)
    if pressure_perturb > 0:
        sway = 1.0 + pressure_perturb * np.sin(
            2.0 * np.pi * rng.uniform(0.5, 2.0) * grid + rng.uniform(0.0, 2.0 * np.pi)
        )
        ch["p"] = ch["p"] * sway
    ch["p"] = np.maximum(ch["p"] + rng.standard_normal(n), 1.0)
    for name in ("azimuth", "altitude"):
        ch[name] = ch[name] + 1.0 * rng.standard_normal(n)

    samples = [
        Sample(
            t=float(i),
            x=float(ch["x"][i]),
            y=float(ch["y"][i]),
            p=float(ch["p"][i]),
            azimuth=float(ch["azimuth"][i]),
            altitude=float(ch["altitude"][i]),
        )
        for i in range(n)
    ]
    return RawSignature(
        samples,
        sample_rate_hz=sample_rate_hz,
        user_id=user_id,
        kind=kind,
        index=index,
    )


def synthesize_signature(
    spec: SyntheticSpec, user_index: int, kind: str, sig_index: int
) -> RawSignature:
    """Deterministically generate one signature of the synthetic corpus."""
    if not (0 <= user_index < spec.n_users):
        raise InvalidInputError(f"user_index {user_index} out of range")
    style = _draw_style(spec, user_index)
    user_id = _user_name(spec, user_index)
    if kind == "genuine":
        rng = _sig_rng(spec, user_index, 0, sig_index)
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        return _render_instance(
            style, rng, n,
            warp_magnitude=spec.genuine_jitter,
            shape_jitter=spec.genuine_jitter,
            pressure_perturb=spec.genuine_jitter * 0.5,
            sample_rate_hz=spec.sample_rate_hz,
            user_id=user_id, kind="genuine", index=sig_index,
        )
    if kind == "skilled_forgery":
        # A skilled forger traces the static appearance (trajectory shape,
        # pressure profile, pen angles) at least as faithfully as a genuine
        # repetition varies, but cannot reproduce the timing: the extra
        # error all goes into the speed profile, i.e. into the dynamics.
        rng = _sig_rng(spec, user_index, 1, sig_index)
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        return _render_instance(
            style, rng, n,
            warp_magnitude=spec.forgery_dynamic_distortion,
            shape_jitter=spec.genuine_jitter * 0.5,
            pressure_perturb=spec.genuine_jitter * 0.5,
            sample_rate_hz=spec.sample_rate_hz,
            user_id=user_id, kind="skilled_forgery", index=sig_index,
        )
    raise InvalidInputError(f"cannot synthesize kind {kind!r}")


def prototype_signature(spec: SyntheticSpec, user_index: int, n: int) -> RawSignature:
    """The user's noise-free prototype rendered at uniform speed (an oracle
    for tests: genuine renderings should sit closer to this than forgeries)."""
    style = _draw_style(spec, user_index)
    tau = np.linspace(0.0, 1.0, n)
    ch = _style_channels(style, tau)
    samples = [
        Sample(
            t=float(i),
            x=float(ch["x"][i]),
            y=float(ch["y"][i]),
            p=float(ch["p"][i]),
            azimuth=float(ch["azimuth"][i]),
            altitude=float(ch["altitude"][i]),
        )
        for i in range(n)
    ]
    return RawSignature(
        samples, sample_rate_hz=spec.sample_rate_hz,
        user_id=_user_name(spec, user_index), kind="genuine", index=0,
    )


def _user_name(spec: SyntheticSpec, user_index: int) -> str:
    width = max(2, len(str(spec.n_users - 1)))
    return f"u{user_index:0{width}d}"


def generate_synthetic_corpus(spec: SyntheticSpec, out_dir: str) -> CorpusManifest:
    """Write a full synthetic corpus plus manifest; fully determined by spec."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for uidx in range(spec.n_users):
        user_id = _user_name(spec, uidx)
        udir = os.path.join(out_dir, user_id)
        os.makedirs(udir, exist_ok=True)
        genuine_paths = []
        for j in range(spec.genuine_per_user):
            sig = synthesize_signature(spec, uidx, "genuine", j)
            rel = f"{user_id}/g{j:02d}.sig"
            write_signature_file(sig, os.path.join(out_dir, rel))
            genuine_paths.append(rel)
        skilled_paths = []
        for j in range(spec.skilled_per_user):
            sig = synthesize_signature(spec, uidx, "skilled_forgery", j)
            rel = f"{user_id}/s{j:02d}.sig"
            write_signature_file(sig, os.path.join(out_dir, rel))
            skilled_paths.append(rel)
        entries.append(UserEntry(user_id=user_id, genuine=genuine_paths, skilled=skilled_paths))
    manifest = CorpusManifest(
        users=entries,
        sample_rate_hz=spec.sample_rate_hz,
        source="synthetic",
        root=os.path.abspath(out_dir),
    )
    save_manifest(manifest, out_dir)
    return manifest


def load_corpus_features(
    manifest: CorpusManifest, feature_set: str, user_ids=None
) -> dict[str, dict[str, list[FeatureMatrix]]]:
    """Parse and preprocess every listed signature (optionally one user subset)."""
    wanted = None if user_ids is None else set(user_ids)
    out: dict[str, dict[str, list[FeatureMatrix]]] = {}
    for entry in manifest.users:
        if wanted is not None and entry.user_id not in wanted:
            continue
        buckets: dict[str, list[FeatureMatrix]] = {"genuine": [], "skilled": []}
        for bucket, kind, paths in (
            ("genuine", "genuine", entry.genuine),
            ("skilled", "skilled_forgery", entry.skilled),
        ):
            for idx, rel in enumerate(paths):
                sig = parse_signature_file(
                    os.path.join(manifest.root, rel),
                    user_id=entry.user_id,
                    kind=kind,
                    index=idx,
                )
                buckets[bucket].append(preprocess(sig, feature_set))
        out[entry.user_id] = buckets
    return out


# ---- Experiment protocol ----------------------------------------------------


@dataclass
class ExperimentProtocol:
    """Which signatures train, which test, and how impostor trials form."""

    train_indices: tuple = (0, 1, 2, 3, 4)
    genuine_test_indices: tuple | None = None  # None: all non-training genuine
    skilled_test_indices: tuple | None = None  # None: all available forgeries
    random_per_other_user: int = 5
    identification_indices: tuple | None = None  # None: last 5 non-training genuine
    dev_user_count: int = 0

    def __post_init__(self):
        self.train_indices = tuple(int(i) for i in self.train_indices)
        if not self.train_indices:
            raise InvalidConfigError("train_indices must not be empty")
        if any(i < 0 for i in self.train_indices):
            raise InvalidConfigError("train_indices must be non-negative")
        if len(set(self.train_indices)) != len(self.train_indices):
            raise InvalidConfigError("train_indices must be unique")
        for name in ("genuine_test_indices", "skilled_test_indices", "identification_indices"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(int(i) for i in v)
                if any(i < 0 for i in v):
                    raise InvalidConfigError(f"{name} must be non-negative")
                setattr(self, name, v)
        if self.genuine_test_indices is not None:
            overlap = set(self.genuine_test_indices) & set(self.train_indices)
            if overlap:
                raise InvalidConfigError(
                    f"genuine test indices overlap training indices: {sorted(overlap)}"
                )
        if self.random_per_other_user < 0:
            raise InvalidConfigError("random_per_other_user must be >= 0")
        if self.dev_user_count < 0:
            raise InvalidConfigError("dev_user_count must be >= 0")

    def resolve_genuine_tests(self, n_genuine: int) -> list[int]:
        if self.genuine_test_indices is not None:
            bad = [i for i in self.genuine_test_indices if i >= n_genuine]
            if bad:
                raise InvalidInputError(f"genuine test indices out of range: {bad}")
            return list(self.genuine_test_indices)
        return [i for i in range(n_genuine) if i not in self.train_indices]

    def resolve_identification_indices(self, n_genuine_by_user: dict) -> dict:
        out = {}
        for u, n in n_genuine_by_user.items():
            if self.identification_indices is not None:
                bad = [i for i in self.identification_indices if i >= n]
                if bad:
                    raise InvalidInputError(
                        f"identification indices out of range for user {u!r}: {bad}"
                    )
                out[u] = list(self.identification_indices)
            else:
                candidates = [i for i in range(n) if i not in self.train_indices]
                out[u] = candidates[-5:]
        return out


@dataclass
class Trial:
    """One verification trial: a test signature scored against a claimed model."""

    model_user: str
    test_user: str
    test_kind: str  # manifest bucket: 'genuine' | 'skilled'
    test_index: int
    label: str      # trial class: 'genuine' | 'skilled' | 'random'
    path: str = ""

    def __post_init__(self):
        if self.test_kind not in ("genuine", "skilled"):
            raise InvalidInputError(f"test_kind {self.test_kind!r} invalid")
        if self.label not in ("genuine", "skilled", "random"):
            raise InvalidInputError(f"label {self.label!r} invalid")


def build_protocol(manifest: CorpusManifest, protocol: ExperimentProtocol) -> list[Trial]:
    """Expand a manifest into the full verification trial list.

    Per user: every non-training (or explicitly listed) genuine signature as
    a genuine trial; every (or explicitly listed) skilled forgery; and the
    first random_per_other_user genuine signatures of every other user as
    random-forgery trials.
    """
    trials: list[Trial] = []
    for entry in manifest.users:
        max_train = max(protocol.train_indices)
        if max_train >= len(entry.genuine):
            raise InvalidInputError(
                f"user {entry.user_id!r} has {len(entry.genuine)} genuine signatures, "
                f"training needs index {max_train}"
            )
        for i in protocol.resolve_genuine_tests(len(entry.genuine)):
            trials.append(
                Trial(entry.user_id, entry.user_id, "genuine", i, "genuine", entry.genuine[i])
            )
        if protocol.skilled_test_indices is not None:
            skilled = list(protocol.skilled_test_indices)
            bad = [i for i in skilled if i >= len(entry.skilled)]
            if bad:
                raise InvalidInputError(
                    f"skilled test indices out of range for user {entry.user_id!r}: {bad}"
                )
        else:
            skilled = list(range(len(entry.skilled)))
        for i in skilled:
            trials.append(
                Trial(entry.user_id, entry.user_id, "skilled", i, "skilled", entry.skilled[i])
            )
        for other in manifest.users:
            if other.user_id == entry.user_id:
                continue
            take = min(protocol.random_per_other_user, len(other.genuine))
            for i in range(take):
                trials.append(
                    Trial(entry.user_id, other.user_id, "genuine", i, "random", other.genuine[i])
                )
    return trials


# ---- Model persistence ------------------------------------------------------

_MODEL_MAGIC = "MSVQv1"


def save_model(model: SectionedModel, path: str) -> None:
    """Write a model as versioned text; loading reproduces scores bit-exactly."""
    if not model.user_id or any(c.isspace() for c in model.user_id):
        raise InvalidInputError(
            f"model user_id {model.user_id!r} must be non-empty without whitespace"
        )
    lines = [
        f"{_MODEL_MAGIC} {model.user_id} {model.n_sections} {model.dim} "
        f"{model.config.feature_set}"
    ]
    lines.append("sizes " + " ".join(str(cb.size) for cb in model.sections))
    if model.train_stats is not None:
        st = model.train_stats
        lines.append(f"stats {st.n_train}")
        lines.append("mu " + " ".join(repr(v) for v in st.mu))
        lines.append("sigma " + " ".join(repr(v) for v in st.sigma))
    for s, cb in enumerate(model.sections):
        lines.append(f"section {s} {cb.size}")
        for row in cb.centroids:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> SectionedModel:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    lines = [(n, ln.strip()) for n, ln in enumerate(raw, start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty model file", path=path)
    pos = 0

    def take(expected: str | None = None) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 1
            raise ParseError(
                f"truncated model file (expected {expected or 'more content'})",
                path=path,
                line=last,
            )
        item = lines[pos]
        pos += 1
        return item

    line_no, header = take("header")
    parts = header.split()
    if len(parts) != 5 or parts[0] != _MODEL_MAGIC:
        raise ParseError(
            f"unsupported model header {header!r} (expected '{_MODEL_MAGIC} ...')",
            path=path,
            line=line_no,
        )
    user_id = parts[1]
    try:
        n_sections = int(parts[2])
        dim = int(parts[3])
    except ValueError:
        raise ParseError("bad section count or dimension", path=path, line=line_no) from None
    feature_set = parts[4]
    if feature_set not in FEATURE_SETS:
        raise ParseError(f"unknown feature set {feature_set!r}", path=path, line=line_no)

    line_no, sizes_line = take("sizes")
    tokens = sizes_line.split()
    if tokens[0] != "sizes" or len(tokens) != n_sections + 1:
        raise ParseError(
            f"expected 'sizes' with {n_sections} entries", path=path, line=line_no
        )
    try:
        sizes = [int(v) for v in tokens[1:]]
    except ValueError:
        raise ParseError("non-integer codebook size", path=path, line=line_no) from None

    stats = None
    line_no, nxt = take("stats, weights or section")
    if nxt.startswith("stats"):
        try:
            n_train = int(nxt.split()[1])
        except (IndexError, ValueError):
            raise ParseError("bad stats line", path=path, line=line_no) from None
        mu_no, mu_line = take("mu")
        sg_no, sg_line = take("sigma")
        mu_tok, sg_tok = mu_line.split(), sg_line.split()
        if mu_tok[0] != "mu" or len(mu_tok) != n_sections + 1:
            raise ParseError(f"expected 'mu' with {n_sections} values", path=path, line=mu_no)
        if sg_tok[0] != "sigma" or len(sg_tok) != n_sections + 1:
            raise ParseError(f"expected 'sigma' with {n_sections} values", path=path, line=sg_no)
        try:
            stats = SectionStats(
                mu=[float(v) for v in mu_tok[1:]],
                sigma=[float(v) for v in sg_tok[1:]],
                n_train=n_train,
            )
        except ValueError:
            raise ParseError("non-numeric stats", path=path, line=mu_no) from None
        line_no, nxt = take("section")

    sections = []
    for s in range(n_sections):
        tokens = nxt.split()
        if tokens[:2] != ["section", str(s)] or len(tokens) != 3:
            raise ParseError(f"expected 'section {s} <size>'", path=path, line=line_no)
        try:
            size = int(tokens[2])
        except ValueError:
            raise ParseError("bad section size", path=path, line=line_no) from None
        if size != sizes[s]:
            raise ParseError(
                f"section {s} size {size} contradicts header size {sizes[s]}",
                path=path,
                line=line_no,
            )
        rows = []
        for _ in range(size):
            row_no, row_line = take("centroid row")
            cols = row_line.split()
            if len(cols) != dim:
                raise ParseError(
                    f"centroid row has {len(cols)} values, expected {dim}",
                    path=path,
                    line=row_no,
                )
            try:
                rows.append([float(c) for c in cols])
            except ValueError:
                raise ParseError("non-numeric centroid value", path=path, line=row_no) from None
        sections.append(Codebook(np.array(rows, dtype=float)))
        line_no, nxt = take("'end'" if s == n_sections - 1 else "next section")
    if nxt != "end":
        raise ParseError(f"expected 'end', got {nxt!r}", path=path, line=line_no)
    if pos != len(lines):
        raise ParseError("unexpected content after 'end'", path=path, line=lines[pos][0])

    config = ModelConfig(
        n_sections=n_sections,
        codebook_size=max(sizes),
        feature_set=feature_set,
    )
    return SectionedModel(
        user_id=user_id, sections=sections, config=config, train_stats=stats
    )
