"""End-to-end runs behind the command-line interface.

Each entry point executes its stages in order (ingest, compare, sample,
summarize), writes its files into the configured output directory, and
finishes with a manifest of everything that determines the result: resolved
configuration, seed, library versions, and content digests of inputs and
outputs. Identical invocations produce byte-identical directories. A failure
in any stage raises with the stage name tagged onto the message and removes
whatever partial outputs this run had written.
"""
from __future__ import annotations

import csv
import hashlib
import platform
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import (
    build_matrix,
    compare_name,
    default_schemas,
    level_histogram,
    save_matrix,
    structural_nonlink_mask,
)
from .errors import ConfigError, DataError
from .oracle import enumerate_posterior
from .posterior import (
    LinkProbabilityTable,
    PointEstimate,
    estimate,
    group_match_rate,
    link_probabilities,
    posterior_link_count,
    write_group_rates_csv,
    write_link_probabilities_csv,
    write_record_summary_csv,
)
from .sampler import (
    ChainConfig,
    ModelParams,
    PosteriorDraws,
    load_draws,
    run_chain,
    save_draws,
    write_param_trace_csv,
)
from .stringmetrics import jaro_winkler
from .synth import SynthConfig, generate, write_record_csv, write_truth_csv
from .tableio import NOLINK, RecordTable, RunConfig, ingest, write_rejects_csv
from .translit import SyllableMap, default_syllable_map, load_syllable_map

__all__ = [
    "run_compare",
    "run_link",
    "run_summarize",
    "run_oracle",
    "run_synth",
    "table1_rows",
    "WORKED_EXAMPLE_A",
    "WORKED_EXAMPLE_B",
]

# The four-by-three surname example the documentation and the `table1`
# self-check work through: one same-system pair, one Wade-Giles/pinyin pair,
# one near-miss, and assorted clear non-matches.
WORKED_EXAMPLE_A = ("wang", "tsai", "chen", "zheng")
WORKED_EXAMPLE_B = ("wang", "cai", "zhen")


@contextmanager
def _stage(name: str):
    """Tag any error raised inside with the stage it came from."""
    try:
        yield
    except (ConfigError, DataError) as exc:
        raise type(exc)(f"[{name}] {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"[{name}] {exc}") from exc


@dataclass
class _Outputs:
    """Files written by one run; discarded together if the run fails."""

    out_dir: Path
    written: list[Path] = field(default_factory=list)

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def note(self, p: Path) -> None:
        """Track a file produced as a side effect (e.g. the matrix sidecar)."""
        self.written.append(p)

    def discard_all(self) -> None:
        for p in self.written:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


@contextmanager
def _run_outputs(out_dir):
    out = _Outputs(Path(out_dir))
    try:
        out.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"[setup] cannot create output directory {out_dir}: {exc}") from exc
    try:
        yield out
    except BaseException:
        out.discard_all()
        raise


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _apply_thread_cap(config: RunConfig) -> None:
    if config.threads is None:
        return
    with _stage("setup"):
        import numba

        numba.set_num_threads(min(config.threads, numba.config.NUMBA_NUM_THREADS))


def _load_map(config: RunConfig) -> SyllableMap:
    with _stage("setup"):
        if config.syllable_map is None:
            return default_syllable_map()
        return load_syllable_map(config.syllable_map)


def _ingest_both(config: RunConfig):
    with _stage("ingest"):
        table_a, rejects_a = ingest(config.file_a)
        table_b, rejects_b = ingest(config.file_b)
        if config.group_column is not None and config.group_column not in table_b.extras:
            raise ConfigError(
                f"group column {config.group_column!r} not found in {config.file_b}; "
                f"extra columns present: {sorted(table_b.extras) or 'none'}"
            )
    return table_a, table_b, rejects_a + rejects_b


def _build(config: RunConfig, table_a: RecordTable, table_b: RecordTable, smap: SyllableMap):
    with _stage("compare"):
        schemas = default_schemas(config.jw_threshold)
        matrix = build_matrix(table_a, table_b, schemas, smap)
        eligible = None
        if config.filter_structural:
            eligible = ~structural_nonlink_mask(matrix)
    return matrix, eligible


def _config_block(pairs: list[tuple[str, str]]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def _run_config_pairs(config: RunConfig, command: str) -> list[tuple[str, str]]:
    pairs = [("command", command)]
    for name in (
        "file_a", "file_b", "syllable_map", "jw_threshold", "filter_structural",
        "iterations", "burn_in", "thin", "seed", "estimate", "group_column",
        "trace_params", "threads",
    ):
        pairs.append((name, repr(getattr(config, name))))
    return pairs


def _write_manifest(
    out: _Outputs,
    config_pairs: list[tuple[str, str]],
    inputs: list[tuple[str, Path | None]],
    seed: int,
) -> Path:
    """Written last: digests cover every other file the run produced."""
    block = _config_block(config_pairs)
    lines = [
        f"tool = translink {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"numba = {__import__('numba').__version__}",
        f"seed = {seed}",
        f"config_hash = sha256:{hashlib.sha256(block.encode()).hexdigest()}",
        "",
        "[config]",
        block.rstrip("\n"),
        "",
        "[inputs]",
    ]
    for label, p in inputs:
        if p is None:
            lines.append(f"{label} = builtin")
        else:
            lines.append(f"{label} = sha256:{_sha256(Path(p))}")
    lines += ["", "[outputs]"]
    produced = sorted(out.written, key=lambda p: p.name)
    manifest_path = out.path("manifest.txt")
    for p in produced:
        lines.append(f"{p.name} = sha256:{_sha256(p)}")
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path


# ---------------------------------------------------------------------------
# compare


def run_compare(config: RunConfig) -> dict:
    """Ingest both files and emit the comparison matrix plus histograms."""
    config.validate()
    _apply_thread_cap(config)
    smap = _load_map(config)
    with _run_outputs(config.out_dir) as out:
        table_a, table_b, rejects = _ingest_both(config)
        matrix, _ = _build(config, table_a, table_b, smap)
        with _stage("write"):
            matrix_path = out.path("comparison.bin")
            save_matrix(matrix, matrix_path)
            out.note(matrix_path.with_name(matrix_path.name + ".schema.txt"))
            write_rejects_csv(rejects, out.path("rejects.csv"))
            histograms = {f.name: level_histogram(matrix, f.name) for f in matrix.fields}
            _write_manifest(
                out,
                _run_config_pairs(config, "compare"),
                [
                    ("file_a", Path(config.file_a)),
                    ("file_b", Path(config.file_b)),
                    ("syllable_map", Path(config.syllable_map) if config.syllable_map else None),
                ],
                config.seed,
            )
    return {
        "n_a": matrix.n_a,
        "n_b": matrix.n_b,
        "histograms": histograms,
        "out_dir": str(out.out_dir),
    }


# ---------------------------------------------------------------------------
# link (the full pipeline) and summarize (reuse of a draws file)


def _write_links_export(
    path,
    est: PointEstimate,
    table: LinkProbabilityTable,
    table_a: RecordTable,
    table_b: RecordTable,
) -> None:
    """links_<estimate>.csv: the chosen matching with its posterior support
    and the pass-through columns from both files (A-side coordinates and the
    like), ready for downstream joins."""
    extras_b = list(table_b.extras)
    extras_a = list(table_a.extras)
    conflicted = {j for _, js in est.violations for j in js}
    header = ["record_b", "record_a", "probability", "conflict"]
    header += [f"b_{name}" for name in extras_b]
    header += [f"a_{name}" for name in extras_a]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(len(est.z_hat)):
            v = int(est.z_hat[j])
            if v < est.n_a:
                target, prob = table_a.ids[v], table.probs[j, v]
            else:
                target, prob = NOLINK, table.nolink[j]
            row = [table_b.ids[j], target, f"{prob:.6f}", "yes" if j in conflicted else ""]
            row += [table_b.extras[name][j] for name in extras_b]
            for name in extras_a:
                row.append(table_a.extras[name][v] if v < est.n_a else "")
            w.writerow(row)


def _write_summaries(
    out: _Outputs,
    config: RunConfig,
    draws: PosteriorDraws,
    table_a: RecordTable,
    table_b: RecordTable,
) -> dict:
    with _stage("summarize"):
        table = link_probabilities(draws)
        est = estimate(draws, config.estimate)
        counts = posterior_link_count(draws)
        write_link_probabilities_csv(
            table, out.path("link_probs.csv"), ids_a=table_a.ids, ids_b=table_b.ids
        )
        write_record_summary_csv(
            draws, out.path("summary.csv"), ids_a=table_a.ids, ids_b=table_b.ids
        )
        if config.group_column is not None:
            labels = table_b.extras[config.group_column]
        else:
            labels = ["all"] * len(table_b)
        rates = group_match_rate(est, labels)
        write_group_rates_csv(rates, out.path("group_rates.csv"))
        _write_links_export(
            out.path(f"links_{config.estimate}.csv"), est, table, table_a, table_b
        )
    return {
        "n_a": draws.n_a,
        "n_b": draws.n_b,
        "n_draws": draws.n_draws,
        "estimate": config.estimate,
        "estimated_links": int((est.z_hat < est.n_a).sum()),
        "violations": est.violations,
        "link_count_mode": counts.mode,
        "link_count_mean": counts.mean,
        "link_count_interval": (counts.lower, counts.upper),
        "group_rates": rates,
        "out_dir": str(out.out_dir),
    }


def run_link(config: RunConfig) -> dict:
    """The full pipeline: ingest, compare, sample, summarize, manifest."""
    config.validate()
    _apply_thread_cap(config)
    smap = _load_map(config)
    with _run_outputs(config.out_dir) as out:
        table_a, table_b, rejects = _ingest_both(config)
        matrix, eligible = _build(config, table_a, table_b, smap)
        with _stage("sample"):
            hyper = ModelParams.flat(matrix.fields)
            chain = ChainConfig(
                iterations=config.iterations,
                burn_in=config.burn_in,
                seed=config.seed,
                thin=config.thin,
            )
            draws = run_chain(
                matrix, hyper, chain, eligible=eligible, track_params=config.trace_params
            )
            save_draws(draws, out.path("draws.bin"))
            if config.trace_params:
                write_param_trace_csv(draws, matrix.fields, out.path("param_trace.csv"))
        info = _write_summaries(out, config, draws, table_a, table_b)
        with _stage("write"):
            write_rejects_csv(rejects, out.path("rejects.csv"))
            _write_manifest(
                out,
                _run_config_pairs(config, "link"),
                [
                    ("file_a", Path(config.file_a)),
                    ("file_b", Path(config.file_b)),
                    ("syllable_map", Path(config.syllable_map) if config.syllable_map else None),
                ],
                config.seed,
            )
    return info


def run_summarize(config: RunConfig, draws_path) -> dict:
    """Recompute every summary file from a stored draws file."""
    config.validate()
    with _run_outputs(config.out_dir) as out:
        table_a, table_b, rejects = _ingest_both(config)
        with _stage("load"):
            draws = load_draws(draws_path, n_a=len(table_a))
            if draws.n_b != len(table_b):
                raise DataError(
                    f"{draws_path} holds draws for {draws.n_b} records, "
                    f"but {config.file_b} has {len(table_b)}"
                )
        info = _write_summaries(out, config, draws, table_a, table_b)
        with _stage("write"):
            write_rejects_csv(rejects, out.path("rejects.csv"))
            _write_manifest(
                out,
                _run_config_pairs(config, "summarize"),
                [
                    ("file_a", Path(config.file_a)),
                    ("file_b", Path(config.file_b)),
                    ("draws", Path(draws_path)),
                ],
                config.seed,
            )
    return info


# ---------------------------------------------------------------------------
# oracle


def run_oracle(config: RunConfig) -> dict:
    """Exact enumeration on a tiny instance; writes the marginals file."""
    config.validate()
    smap = _load_map(config)
    with _run_outputs(config.out_dir) as out:
        table_a, table_b, rejects = _ingest_both(config)
        matrix, eligible = _build(config, table_a, table_b, smap)
        with _stage("oracle"):
            hyper = ModelParams.flat(matrix.fields)
            try:
                post = enumerate_posterior(matrix, hyper, eligible=eligible)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            marginals = post.link_marginals()
            nolink = post.nolink_probs()
            with open(out.path("oracle_marginals.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["record_b", "record_a", "probability"])
                for j in range(matrix.n_b):
                    for i in range(matrix.n_a):
                        w.writerow([table_b.ids[j], table_a.ids[i], f"{marginals[j, i]:.10f}"])
                    w.writerow([table_b.ids[j], NOLINK, f"{nolink[j]:.10f}"])
        with _stage("write"):
            write_rejects_csv(rejects, out.path("rejects.csv"))
            _write_manifest(
                out,
                _run_config_pairs(config, "oracle"),
                [("file_a", Path(config.file_a)), ("file_b", Path(config.file_b))],
                config.seed,
            )
    return {
        "n_states": post.n_states,
        "link_count_dist": post.link_count_dist(),
        "out_dir": str(out.out_dir),
    }


# ---------------------------------------------------------------------------
# synth


def run_synth(config: SynthConfig, out_dir) -> dict:
    """Generate a synthetic instance and write a.csv, b.csv, truth.csv."""
    with _stage("synth"):
        config.validate()
        table_a, table_b, truth = generate(config)
    with _run_outputs(out_dir) as out:
        with _stage("write"):
            write_record_csv(table_a, out.path("a.csv"))
            write_record_csv(table_b, out.path("b.csv"))
            write_truth_csv(truth, table_a.ids, table_b.ids, out.path("truth.csv"))
            pairs = [("command", "synth")]
            for name in (
                "n_a", "n_b", "overlap", "romanization_mix", "typo_rate",
                "zip_pool", "zip_agreement", "age_noise", "seed",
            ):
                pairs.append((name, repr(getattr(config, name))))
            _write_manifest(out, pairs, [("name_pool", None)], config.seed)
    return {
        "n_a": config.n_a,
        "n_b": config.n_b,
        "true_links": truth.n_links,
        "out_dir": str(out.out_dir),
    }


# ---------------------------------------------------------------------------
# the worked example


def table1_rows(jw_threshold: float = 0.9) -> list[tuple[str, str, float, int]]:
    """The 12 comparisons of the documentation's surname example.

    Returns (name_a, name_b, jaro_winkler_score, level) for every pair,
    B-major: all A names against the first B name, then the second, ...
    """
    smap = default_syllable_map()
    rows = []
    for b in WORKED_EXAMPLE_B:
        for a in WORKED_EXAMPLE_A:
            score = jaro_winkler(a, b)
            level = compare_name(a, b, smap, jw_threshold)
            rows.append((a, b, score, level))
    return rows
