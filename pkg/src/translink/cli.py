"""The `translink` command.

Subcommands: compare, link, summarize, synth, oracle, table1. Options given
on the command line override the same settings from `--config`; everything
else keeps its documented default. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("file_a", nargs="?", default=None, help="CSV for file A (the larger side)")
    p.add_argument("file_b", nargs="?", default=None, help="CSV for file B")
    p.add_argument("--config", default=None, metavar="PATH", help="run configuration file")
    p.add_argument("--out", default=None, metavar="DIR", help="output directory")
    p.add_argument(
        "--syllable-map", default=None, metavar="PATH",
        help="pinyin/Wade-Giles syllable table (default: the shipped table)",
    )


def _add_compare_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jw-threshold", type=float, default=None, metavar="T",
                   help="Jaro-Winkler cutoff for the near-miss name level")
    p.add_argument("--filter", action=argparse.BooleanOptionalAction, default=None,
                   dest="filter_structural",
                   help="drop pairs that disagree structurally on every field")


def _add_chain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed for the whole run")
    p.add_argument("--iters", type=int, default=None, help="Gibbs iterations")
    p.add_argument("--burn-in", type=int, default=None, help="iterations discarded from the front")
    p.add_argument("--thin", type=int, default=None, help="keep every k-th retained draw")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimate", choices=("joint", "marginal"), default=None,
                   help="point-estimate rule for the links export")
    p.add_argument("--group-column", default=None, metavar="NAME",
                   help="B-side extra column holding group labels for match rates")
    p.add_argument("--trace-params", action=argparse.BooleanOptionalAction, default=None,
                   help="also write the per-iteration parameter trace")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (outputs do not depend on this)")


def _resolve_config(args: argparse.Namespace, need_files: bool = True):
    from .tableio import RunConfig, load_run_config

    if args.config is not None:
        cfg = load_run_config(args.config, require_files=False)
    else:
        cfg = RunConfig(file_a="", file_b="")
    overrides = {
        "file_a": args.file_a,
        "file_b": args.file_b,
        "syllable_map": getattr(args, "syllable_map", None),
        "jw_threshold": getattr(args, "jw_threshold", None),
        "filter_structural": getattr(args, "filter_structural", None),
        "iterations": getattr(args, "iters", None),
        "burn_in": getattr(args, "burn_in", None),
        "thin": getattr(args, "thin", None),
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
        "estimate": getattr(args, "estimate", None),
        "group_column": getattr(args, "group_column", None),
        "trace_params": getattr(args, "trace_params", None),
        "threads": getattr(args, "threads", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    if need_files and not (cfg.file_a and cfg.file_b):
        raise ConfigError(
            "both input files are required: pass them as positional arguments "
            "or set [files] a/b in the --config file"
        )
    cfg.validate()
    return cfg


def _print_histograms(histograms: dict) -> None:
    for field, hist in histograms.items():
        body = "  ".join(f"level {lvl}: {cnt}" for lvl, cnt in sorted(hist.items()))
        print(f"  {field:<12} {body}")


def _cmd_compare(args: argparse.Namespace) -> int:
    from . import pipeline

    cfg = _resolve_config(args)
    info = pipeline.run_compare(cfg)
    print(f"compared {info['n_a']} x {info['n_b']} records -> {info['out_dir']}")
    _print_histograms(info["histograms"])
    return 0


def _print_link_summary(info: dict) -> None:
    lo, hi = info["link_count_interval"]
    print(
        f"{info['n_draws']} posterior draws over {info['n_a']} x {info['n_b']} records "
        f"-> {info['out_dir']}"
    )
    print(
        f"links ({info['estimate']} mode): {info['estimated_links']}; "
        f"posterior link count mode {info['link_count_mode']}, "
        f"mean {info['link_count_mean']:.1f}, 95% interval [{lo}, {hi}]"
    )
    if info["violations"]:
        pairs = "; ".join(
            f"A record {a} claimed by B records {', '.join(str(j) for j in js)}"
            for a, js in info["violations"]
        )
        print(f"warning: marginal estimate is not one-to-one ({pairs})")
    rates = ", ".join(
        f"{g}: {'NA' if r is None else format(r, '.3f')}" for g, r in sorted(info["group_rates"].items())
    )
    print(f"group match rates: {rates}")


def _cmd_link(args: argparse.Namespace) -> int:
    from . import pipeline

    cfg = _resolve_config(args)
    info = pipeline.run_link(cfg)
    _print_link_summary(info)
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    from . import pipeline

    cfg = _resolve_config(args)
    info = pipeline.run_summarize(cfg, args.draws)
    _print_link_summary(info)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    from . import pipeline

    cfg = _resolve_config(args)
    info = pipeline.run_oracle(cfg)
    print(f"enumerated {info['n_states']} matchings -> {info['out_dir']}")
    dist = ", ".join(f"{k}: {v:.4f}" for k, v in sorted(info["link_count_dist"].items()))
    print(f"posterior link count: {dist}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    from . import pipeline
    from .synth import SynthConfig

    cfg = SynthConfig(
        n_a=args.n_a,
        n_b=args.n_b,
        overlap=args.overlap,
        romanization_mix=args.romanization_mix,
        typo_rate=args.typo_rate,
        zip_pool=args.zip_pool,
        zip_agreement=args.zip_agreement,
        age_noise=args.age_noise,
        seed=args.seed,
    )
    info = pipeline.run_synth(cfg, args.out)
    print(
        f"wrote {info['n_a']} A records, {info['n_b']} B records, "
        f"{info['true_links']} true links -> {info['out_dir']}"
    )
    return 0


def _cmd_table1(args: argparse.Namespace) -> int:
    from . import pipeline

    threshold = args.jw_threshold if args.jw_threshold is not None else 0.9
    rows = pipeline.table1_rows(threshold)
    print(f"{'name_a':<8} {'name_b':<8} {'jw':>5}  level")
    for a, b, score, level in rows:
        print(f"{a:<8} {b:<8} {score:>5.2f}  {level}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="translink",
        description="Bayesian record linkage across two files of romanized names.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("compare", help="build and store the comparison matrix")
    _add_input_args(p)
    _add_compare_args(p)
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (outputs do not depend on this)")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("link", help="run the full linkage pipeline")
    _add_input_args(p)
    _add_compare_args(p)
    _add_chain_args(p)
    _add_output_args(p)
    p.set_defaults(handler=_cmd_link)

    p = sub.add_parser("summarize", help="recompute summaries from a stored draws file")
    p.add_argument("draws", help="draws.bin from an earlier link run")
    _add_input_args(p)
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    _add_output_args(p)
    p.set_defaults(handler=_cmd_summarize)

    p = sub.add_parser("oracle", help="exact posterior by enumeration (small instances)")
    _add_input_args(p)
    _add_compare_args(p)
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("synth", help="generate a synthetic linked pair of files")
    p.add_argument("--n-a", type=int, default=500, help="records in file A")
    p.add_argument("--n-b", type=int, default=100, help="records in file B")
    p.add_argument("--overlap", type=float, default=0.6,
                   help="fraction of B that truly appears in A")
    p.add_argument("--romanization-mix", type=float, default=0.5,
                   help="probability a matched A name uses the alternate romanization")
    p.add_argument("--typo-rate", type=float, default=0.02,
                   help="per-character substitution rate in matched names")
    p.add_argument("--zip-pool", type=int, default=25, help="distinct zip codes to draw from")
    p.add_argument("--zip-agreement", type=float, default=0.95,
                   help="probability a matched pair keeps the same zip")
    p.add_argument("--age-noise", type=int, default=2,
                   help="max absolute age jitter for matched pairs")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", default="synth-out", metavar="DIR", help="output directory")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("table1", help="print the worked surname example as a self-check")
    p.add_argument("--jw-threshold", type=float, default=None, metavar="T",
                   help="Jaro-Winkler cutoff for the near-miss name level")
    p.set_defaults(handler=_cmd_table1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"translink: configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"translink: data error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        print("translink: interrupted", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 -- the CLI boundary maps everything
        print(f"translink: internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
