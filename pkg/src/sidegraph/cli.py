"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 enumeration budget exceeded,
4 a checked property failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import alignment, codec, experiments
from .graphs import (
    CapabilityError,
    LabelledGraph,
    canonicalize,
    distinct_labelings,
    enumerate_structures,
)
from .model import JointEdgeDistribution, SourceVariant, entropy_report, sample_pair

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class CheckFailed(AssertionError):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _setting(args, config: dict, name: str, default=None):
    """Flag value if given, else config file value, else default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _resolve_dist(args, config: dict) -> JointEdgeDistribution:
    if args.model_file:
        return JointEdgeDistribution.from_json(Path(args.model_file))
    doc = dict(config.get("model", {"model": "subsampling", "p": 0.5, "gamma": 0.5}))
    if args.model == "subsampling" or args.p is not None or args.gamma is not None:
        doc = {
            "model": "subsampling",
            "p": args.p if args.p is not None else doc.get("p", 0.5),
            "gamma": args.gamma if args.gamma is not None else doc.get("gamma", 0.5),
        }
    elif args.model is not None:
        raise ConfigError(f"unknown model {args.model!r}")
    return JointEdgeDistribution.from_json(doc)


def _read_graph(path: str) -> LabelledGraph:
    try:
        return LabelledGraph.from_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sample(args, config) -> None:
    dist = _resolve_dist(args, config)
    n = int(_setting(args, config, "n", 6))
    seed = int(_setting(args, config, "seed", DEFAULT_SEED))
    ga, gb = sample_pair(dist, n, np.random.default_rng(seed))
    _emit(ga.to_text() + "\n" + gb.to_text() + "\n", args.output)


def cmd_entropy(args, config) -> None:
    rep = entropy_report(_resolve_dist(args, config))
    lines = [
        f"H(A)={rep.H_A:.6g}",
        f"H(B)={rep.H_B:.6g}",
        f"H(A,B)={rep.H_AB:.6g}",
        f"H(A|B)={rep.H_A_given_B:.6g}",
        f"H(B|A)={rep.H_B_given_A:.6g}",
    ]
    _emit("\n".join(lines) + "\n", args.output)


def cmd_align(args, config) -> None:
    ga, gb = _read_graph(args.ga), _read_graph(args.gb)
    res = alignment.optimize_alignment(ga, gb, args.sense)
    text = (
        f"value={res.value}\ncount={res.count}\n"
        f"witness={' '.join(map(str, res.witness.one_based()))}\n"
    )
    _emit(text, args.output)


def cmd_deanonymize(args, config) -> None:
    dist = _resolve_dist(args, config)
    ga, gb = _read_graph(args.ga), _read_graph(args.sb)
    est = alignment.map_deanonymize(ga, canonicalize(gb), dist)
    _emit(est.to_text() + "\n", args.output)


def cmd_codec_sim(args, config) -> None:
    dist = _resolve_dist(args, config)
    trials = int(_setting(args, config, "trials", 1000))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    variant = SourceVariant.parse(_setting(args, config, "variant", "GraphGivenStructure"))
    seed = int(_setting(args, config, "seed", DEFAULT_SEED))
    cfg = codec.CodecConfig(
        int(_setting(args, config, "n", 4)),
        dist,
        variant,
        float(_setting(args, config, "rate", 1.0)),
        float(_setting(args, config, "delta", 0.5)),
        seed,
    )
    res = codec.simulate_error_rate(cfg, trials, np.random.default_rng(seed))
    header = "variant,n,R,delta,seed,trials,errors,none_typical,ambiguous,bound\n"
    row = (
        f"{variant.name},{cfg.n},{cfg.rate_bits_per_pair!r},{cfg.delta!r},{seed},{trials},"
        f"{res.errors},{res.none_typical},{res.ambiguous},{res.bound!r}\n"
    )
    _emit(header + row, args.output)


def cmd_experiment(args, config) -> None:
    doc = dict(config)
    if args.spec:
        doc.update(_load_config(args.spec))
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.output:
        doc["output"] = args.output
    doc.setdefault("seed", DEFAULT_SEED)
    spec = experiments.ExperimentSpec.from_json(doc)
    rows = experiments.RUNNERS[spec.kind](spec)
    text = experiments.to_csv(rows, spec.kind)
    _emit(text, spec.output)
    if spec.kind is experiments.ExperimentKind.SandwichCheck and not experiments.sandwich_passed(rows):
        raise CheckFailed("a conditional-entropy inequality is violated")


def cmd_oracle(args, config) -> None:
    n = int(_setting(args, config, "n", 3))
    k = int(_setting(args, config, "k", 1))
    lines = []
    for key in enumerate_structures(n, k):
        lines.append(f"{' '.join(map(str, key.canonical_edges))}\tlabelings={distinct_labelings(key)}")
    _emit("\n".join(lines) + "\n", args.output)


COMMANDS = {
    "sample": cmd_sample,
    "entropy": cmd_entropy,
    "align": cmd_align,
    "deanonymize": cmd_deanonymize,
    "codec-sim": cmd_codec_sim,
    "experiment": cmd_experiment,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidegraph", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default settings; flags override it")
    common.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--output", "-o", help="write results here instead of stdout")
    common.add_argument("--workers", type=int, default=1, help="accepted for compatibility; results never depend on it")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="'subsampling' (uses --p/--gamma)")
    model.add_argument("--model-file", help="JSON joint distribution")
    model.add_argument("--p", type=float)
    model.add_argument("--gamma", type=float)

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sample", parents=[common, model], help="draw a CER graph pair")
    p.add_argument("--n", type=int)
    sub.add_parser("entropy", parents=[common, model], help="per-pair entropies of the model")
    p = sub.add_parser("align", parents=[common], help="exact graph alignment")
    p.add_argument("--ga", required=True)
    p.add_argument("--gb", required=True)
    p.add_argument("--sense", choices=["max", "min"], default="max")
    p = sub.add_parser("deanonymize", parents=[common, model], help="MAP labelling of a structure")
    p.add_argument("--ga", required=True)
    p.add_argument("--sb", required=True, help="any labelled representative of the structure")
    p = sub.add_parser("codec-sim", parents=[common, model], help="Monte Carlo codec error rate")
    p.add_argument("--n", type=int)
    p.add_argument("--variant")
    p.add_argument("--rate", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--trials", type=int)
    p = sub.add_parser("experiment", parents=[common], help="run an experiment spec")
    p.add_argument("--spec", help="ExperimentSpec JSON file")
    p = sub.add_parser("oracle", parents=[common], help="enumerate structures and labelling counts")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        COMMANDS[args.command](args, config)
    except CapabilityError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ConfigError, ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
