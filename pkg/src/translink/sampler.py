"""Gibbs sampler over bipartite linkage structures.

The model: each record in file B links to at most one record in file A (and
vice versa); a linked pair's field comparisons are draws from the match
distribution m, every other pair's from the non-match distribution u, fields
independent. m and u get Dirichlet priors per field; the matching itself has
a beta-weighted prior under which only the number of links matters, so
neither file's size dictates the match rate.

One sampler iteration draws m/u from their conjugate full conditionals given
the current matching, then sweeps the B records resampling each link
assignment from its full conditional. Everything is driven by a single
seeded numpy Generator -- the same seed reproduces draws bit for bit.
"""
from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .comparison import ComparisonMatrix, FieldSchema
from .errors import ConfigError, DataError

__all__ = [
    "LinkageState",
    "ModelParams",
    "ChainConfig",
    "PosteriorDraws",
    "SamplerWorkspace",
    "pair_log_ratio",
    "tally_counts",
    "sample_params",
    "sample_z",
    "make_workspace",
    "run_chain",
    "save_draws",
    "load_draws",
    "write_param_trace_csv",
]

_log = logging.getLogger(__name__)

# Probability floor applied before taking logs. Dirichlet draws with positive
# concentration are almost surely positive, but a draw can underflow; the
# floor keeps every log ratio finite, as the hyperparameters are meant to.
_P_FLOOR = 1e-300


@dataclass
class LinkageState:
    """A bipartite matching: z[j] is the A index linked to B record j
    (0-based), or n_a + j when j is unlinked."""

    n_a: int
    z: np.ndarray

    @classmethod
    def empty(cls, n_a: int, n_b: int) -> "LinkageState":
        return cls(n_a, np.arange(n_a, n_a + n_b, dtype=np.int32))

    @property
    def n_b(self) -> int:
        return len(self.z)

    @property
    def n_links(self) -> int:
        return int((self.z < self.n_a).sum())

    def is_linked(self, j: int) -> bool:
        return bool(self.z[j] < self.n_a)

    def linked_pairs(self):
        """Yield (i, j) for every linked pair."""
        for j, v in enumerate(self.z):
            if v < self.n_a:
                yield int(v), j

    def validate(self) -> None:
        if self.z.ndim != 1 or self.z.dtype != np.int32:
            raise ValueError("z must be a 1-d int32 array")
        linked = self.z < self.n_a
        links = self.z[linked]
        if links.size and links.min() < 0:
            raise ValueError("negative link index")
        if np.unique(links).size != links.size:
            raise ValueError("one-to-one violated: an A record linked twice")
        j_idx = np.arange(len(self.z), dtype=np.int32)
        expected = self.n_a + j_idx[~linked]
        if not np.array_equal(self.z[~linked], expected):
            raise ValueError("unlinked entries must hold the n_a + j sentinel")


@dataclass
class ModelParams:
    """Current m/u tables plus their hyperparameters.

    m[k][l-1] is the probability a linked pair shows level l on field k;
    u is the same for non-linked pairs. alpha/beta are the Dirichlet
    concentrations, alpha_pi/beta_pi the matching-prior weights.
    """

    m: list[np.ndarray]
    u: list[np.ndarray]
    alpha: list[np.ndarray]
    beta: list[np.ndarray]
    alpha_pi: float = 1.0
    beta_pi: float = 1.0

    @classmethod
    def flat(
        cls,
        schemas: tuple[FieldSchema, ...],
        alpha_pi: float = 1.0,
        beta_pi: float = 1.0,
    ) -> "ModelParams":
        """Uniform hyperparameters (all ones) and uniform starting tables."""
        alpha = [np.ones(f.levels) for f in schemas]
        beta = [np.ones(f.levels) for f in schemas]
        m = [a / a.sum() for a in alpha]
        u = [b / b.sum() for b in beta]
        return cls(m=m, u=u, alpha=alpha, beta=beta, alpha_pi=alpha_pi, beta_pi=beta_pi)

    def validate(self) -> None:
        if len({len(self.m), len(self.u), len(self.alpha), len(self.beta)}) != 1:
            raise ValueError("m, u, alpha, beta must cover the same fields")
        for k, (m, u, a, b) in enumerate(zip(self.m, self.u, self.alpha, self.beta)):
            for name, vec in (("m", m), ("u", u)):
                if (vec < 0).any() or abs(vec.sum() - 1.0) > 1e-9:
                    raise ValueError(f"{name}[{k}] is not a probability vector")
            for name, vec in (("alpha", a), ("beta", b)):
                if (vec <= 0).any():
                    raise ValueError(f"{name}[{k}] must be strictly positive")
            if not (len(m) == len(u) == len(a) == len(b)):
                raise ValueError(f"field {k}: level-count mismatch")
        if self.alpha_pi <= 0 or self.beta_pi <= 0:
            raise ValueError("alpha_pi and beta_pi must be strictly positive")


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 10_000
    burn_in: int = 1_000
    seed: int = 0
    thin: int = 1
    scan_order: str = "fixed"

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.scan_order not in ("fixed", "random"):
            raise ConfigError(f"scan_order must be 'fixed' or 'random', got {self.scan_order!r}")

    @property
    def n_kept(self) -> int:
        return -((self.iterations - self.burn_in) // -self.thin)


@dataclass
class PosteriorDraws:
    """Retained matching draws; draws[h, j] uses the LinkageState convention."""

    n_a: int
    n_b: int
    draws: np.ndarray
    config: ChainConfig | None = None
    param_trace: list[tuple[list[np.ndarray], list[np.ndarray]]] | None = None

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    def state(self, h: int) -> LinkageState:
        return LinkageState(self.n_a, self.draws[h].copy())


def _check_dims(matrix: ComparisonMatrix, params: ModelParams) -> None:
    if len(params.alpha) != len(matrix.fields):
        raise ValueError(
            f"params cover {len(params.alpha)} fields, matrix has {len(matrix.fields)}"
        )
    for k, f in enumerate(matrix.fields):
        if len(params.alpha[k]) != f.levels or len(params.beta[k]) != f.levels:
            raise ValueError(f"field {f.name}: hyperparameter length != {f.levels}")


def pair_log_ratio(matrix: ComparisonMatrix, params: ModelParams, i: int, j: int) -> float:
    """Log likelihood ratio (match vs non-match) for pair (i, j).

    Sum over observed fields of log m/u at the pair's level; missing fields
    contribute nothing.
    """
    total = 0.0
    for k in range(len(matrix.fields)):
        if matrix.missing[j, i, k]:
            continue
        lvl = int(matrix.codes[j, i, k]) - 1
        m_p = max(float(params.m[k][lvl]), _P_FLOOR)
        u_p = max(float(params.u[k][lvl]), _P_FLOOR)
        total += math.log(m_p) - math.log(u_p)
    return total


def _field_totals(matrix: ComparisonMatrix) -> list[np.ndarray]:
    """Observed level counts per field over all n_a * n_b pairs."""
    out = []
    for k, f in enumerate(matrix.fields):
        plane = matrix.codes[:, :, k].reshape(-1)
        counts = np.bincount(plane, minlength=f.levels + 1)[1 : f.levels + 1]
        out.append(counts.astype(np.float64))
    return out


def tally_counts(
    matrix: ComparisonMatrix,
    state: LinkageState,
    totals: list[np.ndarray] | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Level counts among linked pairs and among all other pairs, per field.

    Missing comparisons are excluded from both tallies.
    """
    if totals is None:
        totals = _field_totals(matrix)
    linked_j = np.nonzero(state.z < matrix.n_a)[0]
    linked_i = state.z[linked_j]
    a_counts, b_counts = [], []
    for k, f in enumerate(matrix.fields):
        codes = matrix.codes[linked_j, linked_i, k]
        a = np.bincount(codes, minlength=f.levels + 1)[1 : f.levels + 1].astype(np.float64)
        a_counts.append(a)
        b_counts.append(totals[k] - a)
    return a_counts, b_counts


def sample_params(
    matrix: ComparisonMatrix,
    state: LinkageState,
    hyper: ModelParams,
    rng: np.random.Generator,
    totals: list[np.ndarray] | None = None,
) -> ModelParams:
    """Conjugate update of the m/u tables given the current matching.

    Draw order is fixed for reproducibility: field by field, m before u.
    """
    _check_dims(matrix, hyper)
    a_counts, b_counts = tally_counts(matrix, state, totals)
    m, u = [], []
    for k in range(len(matrix.fields)):
        m.append(rng.dirichlet(hyper.alpha[k] + a_counts[k]))
        u.append(rng.dirichlet(hyper.beta[k] + b_counts[k]))
    return ModelParams(
        m=m, u=u, alpha=hyper.alpha, beta=hyper.beta,
        alpha_pi=hyper.alpha_pi, beta_pi=hyper.beta_pi,
    )


@dataclass
class SamplerWorkspace:
    """Pattern-collapsed view of a comparison matrix.

    Pairs sharing levels, missingness and filter-eligibility across all
    fields form one pattern; the sweep only ever weighs patterns.
    """

    pattern_ids: np.ndarray      # (n_b, n_a) uint16
    order: np.ndarray            # (n_b, n_a) int32: A indices grouped by pattern
    offsets: np.ndarray          # (n_b, P+1) int64 group boundaries into order
    pattern_levels: np.ndarray   # (P, K) uint8, 0 = missing
    pattern_eligible: np.ndarray # (P,) bool
    totals: list[np.ndarray]

    @property
    def n_patterns(self) -> int:
        return int(self.pattern_levels.shape[0])


def make_workspace(matrix: ComparisonMatrix, eligible: np.ndarray | None = None) -> SamplerWorkspace:
    """Factor the matrix into comparison patterns.

    eligible, if given, is a (n_b, n_a) bool array; False marks pairs that
    may never be linked (structural non-links). They still count as
    non-links for the u tallies.
    """
    n_b, n_a, K = matrix.codes.shape
    if eligible is not None and (eligible.shape != (n_b, n_a) or eligible.dtype != np.bool_):
        raise ValueError("eligible must be bool of shape (n_b, n_a)")

    key = np.zeros((n_b, n_a), np.int64)
    mult = 1
    for k in range(K):
        key += matrix.codes[:, :, k].astype(np.int64) * mult
        mult *= matrix.fields[k].levels + 1
    if eligible is not None:
        key = key * 2 + eligible.astype(np.int64)

    uniq, inv = np.unique(key, return_inverse=True)
    P = len(uniq)
    if P > np.iinfo(np.uint16).max:
        raise ValueError(f"too many distinct comparison patterns ({P})")
    pattern_ids = inv.reshape(n_b, n_a).astype(np.uint16)

    dec = uniq.copy()
    if eligible is not None:
        pattern_eligible = (dec % 2).astype(bool)
        dec //= 2
    else:
        pattern_eligible = np.ones(P, np.bool_)
    pattern_levels = np.zeros((P, K), np.uint8)
    for k in range(K):
        base = matrix.fields[k].levels + 1
        pattern_levels[:, k] = dec % base
        dec //= base

    order = np.argsort(pattern_ids, kind="stable", axis=1).astype(np.int32)
    counts = np.zeros((n_b, P), np.int64)
    rows = np.repeat(np.arange(n_b), n_a)
    np.add.at(counts, (rows, pattern_ids.reshape(-1)), 1)
    offsets = np.zeros((n_b, P + 1), np.int64)
    np.cumsum(counts, axis=1, out=offsets[:, 1:])

    return SamplerWorkspace(
        pattern_ids=pattern_ids,
        order=order,
        offsets=offsets,
        pattern_levels=pattern_levels,
        pattern_eligible=pattern_eligible,
        totals=_field_totals(matrix),
    )


def _pattern_log_ratios(
    workspace: SamplerWorkspace, params: ModelParams, prior_only: bool
) -> np.ndarray:
    P, K = workspace.pattern_levels.shape
    llr = np.zeros(P, np.float64)
    if not prior_only:
        for k in range(K):
            lv = workspace.pattern_levels[:, k].astype(np.int64)
            obs = lv > 0
            m_p = np.maximum(params.m[k][lv[obs] - 1], _P_FLOOR)
            u_p = np.maximum(params.u[k][lv[obs] - 1], _P_FLOOR)
            llr[obs] += np.log(m_p) - np.log(u_p)
    llr[~workspace.pattern_eligible] = -np.inf
    return llr


def sample_z(
    matrix: ComparisonMatrix,
    state: LinkageState,
    params: ModelParams,
    rng: np.random.Generator,
    workspace: SamplerWorkspace | None = None,
    prior_only: bool = False,
    js: np.ndarray | None = None,
) -> LinkageState:
    """One full sweep of link-assignment updates; returns a new state.

    For each B record j (ascending order unless js says otherwise), the full
    conditional weighs every still-available A record i by
    exp(pair_log_ratio(i, j)) * (n + alpha_pi) / ((n_a - n)(n_b - n - 1 + beta_pi))
    where n is the number of links among the other B records, against weight
    1 for the no-link option.
    """
    _check_dims(matrix, params)
    if workspace is None:
        workspace = make_workspace(matrix)
    llr = _pattern_log_ratios(workspace, params, prior_only)
    if js is None:
        js = np.arange(matrix.n_b, dtype=np.int64)
    z = state.z.copy()
    _kernels.gibbs_sweep(
        z, matrix.n_a, workspace.pattern_ids, workspace.order, workspace.offsets,
        llr, float(params.alpha_pi), float(params.beta_pi), js, rng,
    )
    return LinkageState(matrix.n_a, z)


def run_chain(
    matrix: ComparisonMatrix,
    hyper: ModelParams,
    config: ChainConfig,
    eligible: np.ndarray | None = None,
    prior_only: bool = False,
    track_params: bool = False,
) -> PosteriorDraws:
    """Run the Gibbs sampler from an empty matching.

    Each iteration draws the m/u tables, then sweeps the link assignments;
    states after burn-in are kept every `thin` iterations. prior_only
    flattens the likelihood (every pair ratio forced to 1) so the chain
    samples the matching prior -- used to validate the prior is respected.
    """
    config.validate()
    hyper.validate()
    _check_dims(matrix, hyper)
    rng = np.random.default_rng(config.seed)
    workspace = make_workspace(matrix, eligible)
    state = LinkageState.empty(matrix.n_a, matrix.n_b)

    n_keep = config.n_kept
    draws = np.empty((n_keep, matrix.n_b), np.int32)
    trace: list | None = [] if track_params else None
    kept = 0
    for it in range(config.iterations):
        params = sample_params(matrix, state, hyper, rng, totals=workspace.totals)
        if config.scan_order == "random":
            js = rng.permutation(matrix.n_b).astype(np.int64)
        else:
            js = np.arange(matrix.n_b, dtype=np.int64)
        state = sample_z(
            matrix, state, params, rng,
            workspace=workspace, prior_only=prior_only, js=js,
        )
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws[kept] = state.z
            kept += 1
            if track_params:
                trace.append(([v.copy() for v in params.m], [v.copy() for v in params.u]))
        if (it + 1) % 1000 == 0:
            _log.debug("iteration %d/%d, %d links", it + 1, config.iterations, state.n_links)
    assert kept == n_keep
    return PosteriorDraws(
        n_a=matrix.n_a, n_b=matrix.n_b, draws=draws, config=config, param_trace=trace
    )


# ---------------------------------------------------------------------------
# Draw storage: 8-byte header (uint32 draw count, uint32 n_b), then row-major
# little-endian int32 entries. Entries are 1-based on disk: a link stores the
# A index in 1..n_a, no-link stores n_a + j with j 1-based.

def save_draws(draws: PosteriorDraws, path) -> None:
    header = struct.pack("<II", draws.n_draws, draws.n_b)
    body = (draws.draws.astype(np.int64) + 1).astype("<i4").tobytes()
    Path(path).write_bytes(header + body)


def load_draws(path, n_a: int) -> PosteriorDraws:
    """Read draws back; n_a is needed to interpret the no-link sentinels."""
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise DataError(f"{path}: truncated draws file")
    H, n_b = struct.unpack_from("<II", buf, 0)
    expected = 8 + H * n_b * 4
    if len(buf) != expected:
        raise DataError(f"{path}: expected {expected} bytes, got {len(buf)}")
    flat = np.frombuffer(buf, dtype="<i4", count=H * n_b, offset=8)
    draws = (flat.astype(np.int64).reshape(H, n_b) - 1).astype(np.int32)
    j_idx = np.arange(n_b, dtype=np.int32)
    bad = (draws < 0) | ((draws >= n_a) & (draws != n_a + j_idx))
    if bad.any():
        h, j = np.argwhere(bad)[0]
        raise DataError(
            f"{path}: entry at draw {h}, record {j} is neither a link nor "
            f"that record's no-link sentinel (n_a={n_a})"
        )
    return PosteriorDraws(n_a=n_a, n_b=n_b, draws=draws)


def write_param_trace_csv(draws: PosteriorDraws, fields: tuple[FieldSchema, ...], path) -> None:
    """Long-format m/u trace: one row per kept iteration, side, field, level."""
    if draws.param_trace is None:
        raise ValueError("chain was run without track_params")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["draw", "side", "field", "level", "probability"])
        for h, (m, u) in enumerate(draws.param_trace):
            for side, tables in (("m", m), ("u", u)):
                for k, vec in enumerate(tables):
                    for lvl, p in enumerate(vec, start=1):
                        w.writerow([h, side, fields[k].name, lvl, f"{p:.10g}"])
