"""Command-line interface.

Subcommands: synth (generate a synthetic corpus), enroll (train and save
one user's model), verify (score one signature against a saved model),
identify (rank saved models for one signature), eval (run a full
verification/identification experiment over a corpus), bench (distance
and storage accounting against the elastic-matching baseline).

Configuration comes from an optional JSON file with sections "model",
"fusion", "dtw", "protocol" and "synthetic"; individual flags override
single fields. Unknown keys are rejected. The effective configuration is
echoed into the outputs so results are self-describing; the --workers
flag only parallelizes scoring and is deliberately not part of it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .corpus import (
    ExperimentProtocol,
    SyntheticSpec,
    generate_synthetic_corpus,
    load_corpus_features,
    load_manifest,
    load_model,
    parse_signature_file,
    save_model,
)
from .dtw import DtwConfig
from .errors import InvalidConfigError, InvalidInputError, SigvqError
from .evaluation import (
    benchmark_counts,
    run_dtw_experiment,
    run_experiment,
    write_det_curve,
    write_score_set,
)
from .fusion import (
    FIXED_STRATEGIES,
    WEIGHTED_STRATEGIES,
    FusionSpec,
    compute_weights,
)
from .signal import FEATURE_SETS, preprocess
from .vq import ModelConfig, model_score, train_user_model
from .fusion import train_section_stats

_PROG = "sigvq"


# ---- Configuration ----------------------------------------------------------


def _fields_with_defaults(cls) -> dict:
    out = {}
    for f in dataclasses.fields(cls):
        if f.default is not dataclasses.MISSING:
            v = f.default
            out[f.name] = list(v) if isinstance(v, tuple) else v
        elif f.default_factory is not dataclasses.MISSING:  # pragma: no cover
            out[f.name] = f.default_factory()
    return out


def default_config() -> dict:
    return {
        "model": _fields_with_defaults(ModelConfig),
        "fusion": {"strategy": "SUM", "weights": None},
        "dtw": _fields_with_defaults(DtwConfig),
        "protocol": _fields_with_defaults(ExperimentProtocol),
        "synthetic": _fields_with_defaults(SyntheticSpec),
    }


def load_run_config(path: str | None) -> dict:
    """The defaults, deep-merged with the JSON file at path (if given).

    Unknown sections or keys are errors: a typo must not silently fall
    back to a default.
    """
    config = default_config()
    if path is None:
        return config
    try:
        with open(path, encoding="utf-8") as fh:
            loaded = json.load(fh)
    except FileNotFoundError:
        raise InvalidConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config file {path} is not valid JSON ({exc})") from None
    if not isinstance(loaded, dict):
        raise InvalidConfigError("config file must hold a JSON object")
    for section, content in loaded.items():
        if section not in config:
            raise InvalidConfigError(f"unknown config section {section!r}")
        if not isinstance(content, dict):
            raise InvalidConfigError(f"config section {section!r} must be an object")
        for key, value in content.items():
            if key not in config[section]:
                raise InvalidConfigError(f"unknown config key '{section}.{key}'")
            config[section][key] = value
    return config


def _override(config: dict, section: str, key: str, value) -> None:
    if value is not None:
        config[section][key] = value


def _config_json(config: dict, sections) -> str:
    return json.dumps({s: config[s] for s in sections}, sort_keys=True)


def _indices(text: str):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip() != "")
    except ValueError:
        raise InvalidConfigError(f"expected comma-separated integers, got {text!r}") from None


def _weights(text: str):
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise InvalidConfigError(f"expected comma-separated numbers, got {text!r}") from None


def make_model_config(c: dict) -> ModelConfig:
    return ModelConfig(**c)


def make_protocol(c: dict) -> ExperimentProtocol:
    c = dict(c)
    for key in ("train_indices", "genuine_test_indices", "skilled_test_indices",
                "identification_indices"):
        if c[key] is not None:
            c[key] = tuple(c[key])
    return ExperimentProtocol(**c)


def make_dtw_config(c: dict) -> DtwConfig:
    return DtwConfig(**c)


def make_synthetic_spec(c: dict) -> SyntheticSpec:
    return SyntheticSpec(**c)


# ---- Model-file fusion helpers ----------------------------------------------


def _fusion_for_model(model, strategy: str, weights) -> FusionSpec:
    """Fusion spec for scoring against one saved model.

    Fixed strategies and explicit weights apply directly; the
    training-score weighted strategies derive per-model weights from the
    stats stored in the model file. Error-based strategies need weights
    estimated by the experiment runner and passed explicitly.
    """
    if weights is not None:
        return FusionSpec(strategy, list(weights))
    if strategy in FIXED_STRATEGIES:
        return FusionSpec(strategy)
    if strategy not in WEIGHTED_STRATEGIES:
        raise InvalidConfigError(f"unknown fusion strategy {strategy!r}")
    if strategy in ("WSD", "WSHM", "WSLM"):
        if model.train_stats is None:
            raise InvalidConfigError(
                f"{strategy} needs training statistics, but the model file for "
                f"user {model.user_id!r} stores none"
            )
        return FusionSpec(strategy, compute_weights(strategy, model.train_stats))
    raise InvalidConfigError(
        f"{strategy} weights are estimated from held-out data; pass --weights"
    )


def _model_paths(items) -> list[str]:
    paths = []
    for item in items:
        if os.path.isdir(item):
            inside = sorted(
                os.path.join(item, name)
                for name in os.listdir(item)
                if name.endswith(".msvq")
            )
            if not inside:
                raise InvalidInputError(f"no .msvq model files in directory {item}")
            paths.extend(inside)
        else:
            paths.append(item)
    return paths


# ---- Subcommands ------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    for key in ("seed", "n_users", "genuine_per_user", "skilled_per_user",
                "min_len", "max_len", "genuine_jitter", "forgery_dynamic_distortion"):
        _override(config, "synthetic", key, getattr(args, key))
    spec = make_synthetic_spec(config["synthetic"])
    manifest = generate_synthetic_corpus(spec, args.out)
    print("config: " + _config_json(config, ["synthetic"]))
    print(
        f"wrote {len(manifest.users)} users x ({spec.genuine_per_user} genuine + "
        f"{spec.skilled_per_user} skilled) signatures to {args.out}"
    )
    return 0


def cmd_enroll(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    _override(config, "model", "feature_set", args.feature_set)
    _override(config, "model", "n_sections", args.sections)
    _override(config, "model", "codebook_size", args.codebook_size)
    if args.train_indices is not None:
        config["protocol"]["train_indices"] = list(_indices(args.train_indices))
    model_config = make_model_config(config["model"])
    protocol = make_protocol(config["protocol"])

    manifest = load_manifest(args.corpus)
    features = load_corpus_features(
        manifest, model_config.feature_set, user_ids=[args.user]
    )
    if args.user not in features:
        raise InvalidInputError(f"user {args.user!r} not in corpus manifest")
    genuine = features[args.user]["genuine"]
    bad = [i for i in protocol.train_indices if i >= len(genuine)]
    if bad:
        raise InvalidInputError(
            f"training indices out of range for user {args.user!r}: {bad}"
        )
    train = [genuine[i] for i in protocol.train_indices]
    model = train_user_model(train, model_config, user_id=args.user)
    model.train_stats = train_section_stats(model, train)
    out = args.out if args.out else f"{args.user}.msvq"
    save_model(model, out)
    print("config: " + _config_json(config, ["model"]))
    sizes = "/".join(str(cb.size) for cb in model.sections)
    print(
        f"enrolled {args.user}: {model.n_sections} section(s), codebook sizes {sizes}, "
        f"feature set {model_config.feature_set} -> {out}"
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    _override(config, "fusion", "strategy", args.fusion)
    if args.weights is not None:
        config["fusion"]["weights"] = _weights(args.weights)

    model = load_model(args.model)
    spec = _fusion_for_model(model, config["fusion"]["strategy"], config["fusion"]["weights"])
    sig = parse_signature_file(args.signature)
    matrix = preprocess(sig, model.config.feature_set)
    score, sections = model_score(matrix, model, spec)
    print("config: " + _config_json(config, ["fusion"]))
    print(f"user: {model.user_id}")
    print(f"score: {score!r}")
    print("sections: " + " ".join(repr(v) for v in sections))
    if args.threshold is not None:
        decision = "ACCEPT" if score <= args.threshold else "REJECT"
        print(f"decision: {decision} (threshold {args.threshold!r})")
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    _override(config, "fusion", "strategy", args.fusion)
    if args.weights is not None:
        config["fusion"]["weights"] = _weights(args.weights)

    models = [load_model(p) for p in _model_paths(args.models)]
    ids = [m.user_id for m in models]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("duplicate user ids among the model files")
    feature_sets = {m.config.feature_set for m in models}
    if len(feature_sets) != 1:
        raise InvalidInputError(
            f"model files disagree on the feature set: {sorted(feature_sets)}"
        )
    sig = parse_signature_file(args.signature)
    matrix = preprocess(sig, feature_sets.pop())
    strategy, weights = config["fusion"]["strategy"], config["fusion"]["weights"]
    ranked = sorted(
        (
            (model_score(matrix, m, _fusion_for_model(m, strategy, weights))[0], m.user_id)
            for m in models
        ),
    )
    print("config: " + _config_json(config, ["fusion"]))
    print(f"identified: {ranked[0][1]}")
    for rank, (score, user) in enumerate(ranked, start=1):
        print(f"{rank}. {user} {score!r}")
    return 0


def _print_eval(res, mode: str) -> None:
    trials = " ".join(f"{k}={v}" for k, v in sorted(res.n_trials.items()))
    print(f"mode: {mode}")
    print(f"users: {res.n_users}  trials: {trials}")
    print(f"{'':<20}{'individual':>12}{'general':>12}")
    for kind in ("random", "skilled"):
        if kind not in res.eer_table:
            continue
        row = res.eer_table[kind]
        print(
            f"{kind + ' forgeries':<20}{row['individual']:>12.4f}{row['general']:>12.4f}"
        )
    if res.identification_total:
        print(
            f"identification: {res.identification_correct}/{res.identification_total} "
            f"(rate {res.identification_rate:.4f})"
        )


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    _override(config, "model", "feature_set", args.feature_set)
    _override(config, "model", "n_sections", args.sections)
    _override(config, "model", "codebook_size", args.codebook_size)
    _override(config, "fusion", "strategy", args.fusion)
    if args.weights is not None:
        config["fusion"]["weights"] = _weights(args.weights)
    if args.train_indices is not None:
        config["protocol"]["train_indices"] = list(_indices(args.train_indices))
    _override(config, "protocol", "random_per_other_user", args.random_per_other_user)
    _override(config, "protocol", "dev_user_count", args.dev_users)
    _override(config, "dtw", "epsilon", args.epsilon)
    if args.no_parallelogram:
        config["dtw"]["use_parallelogram"] = False
    _override(config, "dtw", "combiner", args.combiner)

    mode = "dtw" if args.dtw else "vq"
    sections = ["model", "fusion", "protocol"] if mode == "vq" else ["dtw", "model", "protocol"]
    model_config = make_model_config(config["model"])
    protocol = make_protocol(config["protocol"])

    manifest = load_manifest(args.corpus)
    features = load_corpus_features(manifest, model_config.feature_set)
    if mode == "dtw":
        res = run_dtw_experiment(
            features, protocol, make_dtw_config(config["dtw"]), workers=args.workers
        )
    else:
        res = run_experiment(
            features,
            protocol,
            model_config,
            fusion_strategy=config["fusion"]["strategy"],
            fusion_weights=config["fusion"]["weights"],
            workers=args.workers,
        )
    print("config: " + _config_json(config, sections))
    _print_eval(res, mode)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "config": {s: config[s] for s in sections},
            "mode": mode,
            "results": res.to_dict(),
        }
        results_path = os.path.join(args.out, "results.json")
        with open(results_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        comment = f"mode={mode} " + _config_json(config, sections)
        write_score_set(os.path.join(args.out, "scores.txt"), res.scores, comment)
        for kind, curve in res.curves.items():
            write_det_curve(
                os.path.join(args.out, f"det_{kind}.txt"), curve, comment
            )
        print(f"wrote {results_path}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    _override(config, "dtw", "epsilon", args.epsilon)
    if args.no_parallelogram:
        config["dtw"]["use_parallelogram"] = False
    report = benchmark_counts(
        num_templates=args.templates,
        test_len=args.test_len,
        template_len=args.template_len,
        codebook_size=args.codebook_size,
        n_sections=args.sections,
        measure=not args.no_measure,
        dim=args.dim,
        seed=args.seed,
        dtw_config=make_dtw_config(config["dtw"]),
    )
    print("config: " + _config_json(config, ["dtw"]))
    print(
        f"setup: {report.num_templates} templates of {report.template_len} samples, "
        f"test of {report.test_len} samples, codebook size {report.codebook_size}, "
        f"{report.n_sections} section(s)"
    )
    print("per-verification distance evaluations:")
    print(f"  elastic matching (analytic): {report.dtw_distance_evals:.1f}")
    print(f"  vq quantization  (analytic): {report.vq_distance_evals}")
    print(f"  speedup: {report.speedup:.1f}x")
    if report.measured_dtw_evals is not None:
        print(
            f"  elastic matching (measured): {report.measured_dtw_evals} "
            f"({report.dtw_measured_ratio:.2f}x of analytic)"
        )
        print(
            f"  vq quantization  (measured): {report.measured_vq_evals} "
            f"({report.vq_measured_ratio:.2f}x of analytic)"
        )
    print("per-user reference storage (vectors):")
    print(f"  elastic templates: {report.storage_dtw}")
    print(f"  single codebook: {report.storage_vq}")
    print(f"  sectioned codebooks: {report.storage_msvq}")
    print(f"  reduction vs templates: {report.storage_reduction:.1f}x")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(
                {"config": {"dtw": config["dtw"]}, "results": report.to_dict()},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


# ---- Parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_PROG,
        description="Signature verification with sectioned vector-quantization models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--users", type=int, dest="n_users")
    p.add_argument("--genuine", type=int, dest="genuine_per_user")
    p.add_argument("--skilled", type=int, dest="skilled_per_user")
    p.add_argument("--min-len", type=int, dest="min_len")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--jitter", type=float, dest="genuine_jitter")
    p.add_argument("--distortion", type=float, dest="forgery_dynamic_distortion")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("enroll", help="train and save one user's model")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest path")
    p.add_argument("--user", required=True)
    p.add_argument("--out", help="model file path (default <user>.msvq)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--feature-set", choices=sorted(FEATURE_SETS))
    p.add_argument("--sections", type=int)
    p.add_argument("--codebook-size", type=int)
    p.add_argument("--train-indices", help="comma-separated genuine indices")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="score one signature against a saved model")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--signature", required=True, help="signature file")
    p.add_argument("--threshold", type=float, help="accept iff score <= threshold")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--fusion", choices=sorted(FIXED_STRATEGIES + WEIGHTED_STRATEGIES))
    p.add_argument("--weights", help="comma-separated section weights")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identify", help="rank saved models for one signature")
    p.add_argument("--models", required=True, nargs="+",
                   help="model files and/or directories of .msvq files")
    p.add_argument("--signature", required=True)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--fusion", choices=sorted(FIXED_STRATEGIES + WEIGHTED_STRATEGIES))
    p.add_argument("--weights", help="comma-separated section weights")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("eval", help="run a full experiment over a corpus")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest path")
    p.add_argument("--out", help="directory for results.json, scores and curves")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--feature-set", choices=sorted(FEATURE_SETS))
    p.add_argument("--sections", type=int)
    p.add_argument("--codebook-size", type=int)
    p.add_argument("--fusion", choices=sorted(FIXED_STRATEGIES + WEIGHTED_STRATEGIES))
    p.add_argument("--weights", help="comma-separated section weights")
    p.add_argument("--train-indices", help="comma-separated genuine indices")
    p.add_argument("--random-per-other-user", type=int, dest="random_per_other_user")
    p.add_argument("--dev-users", type=int, help="users reserved for weight estimation")
    p.add_argument("--dtw", action="store_true", help="run the elastic-matching baseline")
    p.add_argument("--epsilon", type=int, help="elastic-matching anchor slack")
    p.add_argument("--no-parallelogram", action="store_true")
    p.add_argument("--combiner", choices=("MIN", "MEAN", "MEDIAN"))
    p.add_argument("--workers", type=int, default=1,
                   help="scoring threads (does not affect results)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="distance and storage accounting vs the baseline")
    p.add_argument("--templates", type=int, default=5)
    p.add_argument("--test-len", type=int, default=454)
    p.add_argument("--template-len", type=int, default=454)
    p.add_argument("--codebook-size", type=int, default=128)
    p.add_argument("--sections", type=int, default=1)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-measure", action="store_true", help="analytic numbers only")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--epsilon", type=int)
    p.add_argument("--no-parallelogram", action="store_true")
    p.add_argument("--out", help="write the report as JSON to this file")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SigvqError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{_PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
