"""Posterior summaries and linkage-quality diagnostics over stored draws.

Everything here is a pure function of a PosteriorDraws matrix: empirical
link-probability tables, joint- and marginal-mode point estimates, link-count
summaries, per-record concentration diagnostics, and per-group match rates,
plus the delimited-text exports for each.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .sampler import LinkageState, PosteriorDraws
from .tableio import NOLINK

__all__ = [
    "LinkProbabilityTable",
    "PointEstimate",
    "LinkCountSummary",
    "link_probabilities",
    "estimate",
    "posterior_link_count",
    "concentration_ratio",
    "distinct_match_counts",
    "group_match_rate",
    "write_link_probabilities_csv",
    "write_record_summary_csv",
    "write_links_csv",
    "write_group_rates_csv",
]


@dataclass
class LinkProbabilityTable:
    """Per-record empirical distributions over link partners.

    probs[j, i] is the fraction of draws linking B record j to A record i;
    nolink[j] the fraction leaving j unlinked. Each row of probs plus its
    nolink entry sums to 1.
    """

    n_a: int
    n_b: int
    probs: np.ndarray
    nolink: np.ndarray

    def validate(self) -> None:
        if self.probs.shape != (self.n_b, self.n_a) or self.nolink.shape != (self.n_b,):
            raise ValueError("probability table shape mismatch")
        if (self.probs < 0).any() or (self.probs > 1).any():
            raise ValueError("probabilities outside [0, 1]")
        totals = self.probs.sum(axis=1) + self.nolink
        if np.abs(totals - 1.0).max() > 1e-9:
            raise ValueError("per-record probabilities do not sum to 1")

    def candidates(self, j: int, top: int | None = None) -> list[tuple[int, float]]:
        """Link candidates for record j with positive probability, most
        probable first (ties by ascending A index)."""
        row = self.probs[j]
        idx = np.lexsort((np.arange(self.n_a), -row))
        out = [(int(i), float(row[i])) for i in idx if row[i] > 0.0]
        return out if top is None else out[:top]


def link_probabilities(draws: PosteriorDraws) -> LinkProbabilityTable:
    """Empirical frequency of every link candidate (and of no-link) per record."""
    if draws.n_draws < 1:
        raise ValueError("need at least one draw")
    H = draws.n_draws
    probs = np.zeros((draws.n_b, draws.n_a))
    nolink = np.zeros(draws.n_b)
    for j in range(draws.n_b):
        counts = np.bincount(draws.draws[:, j], minlength=draws.n_a + draws.n_b)
        probs[j] = counts[: draws.n_a] / H
        nolink[j] = counts[draws.n_a + j] / H
    table = LinkProbabilityTable(n_a=draws.n_a, n_b=draws.n_b, probs=probs, nolink=nolink)
    table.validate()
    return table


@dataclass
class PointEstimate:
    """A single matching distilled from the draws.

    kind "joint" is the most frequent complete draw and is always a valid
    matching. kind "marginal" takes each record's highest-probability option
    independently; the result can violate one-to-one, in which case the
    offending records are listed in `violations` (never silently repaired).

    tie_report entries: for joint, each tied alternative draw (as an array);
    for marginal, (j, options) tuples where options are the tied choices
    (None meaning no-link).
    """

    kind: str
    z_hat: np.ndarray
    n_a: int
    tie_report: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def is_valid_matching(self) -> bool:
        return not self.violations

    def state(self) -> LinkageState:
        if not self.is_valid_matching:
            raise ValueError("marginal-mode estimate violates one-to-one; no valid state")
        return LinkageState(self.n_a, self.z_hat.copy())


def _joint_mode(draws: PosteriorDraws) -> PointEstimate:
    rows, first_pos, counts = np.unique(
        draws.draws, axis=0, return_index=True, return_counts=True
    )
    best = counts.max()
    tied = np.nonzero(counts == best)[0]
    # plurality, ties broken by earliest appearance in the chain
    winner = tied[np.argmin(first_pos[tied])]
    tie_report = [rows[t].copy() for t in tied if t != winner]
    return PointEstimate(
        kind="joint",
        z_hat=rows[winner].copy(),
        n_a=draws.n_a,
        tie_report=tie_report,
    )


def _marginal_mode(draws: PosteriorDraws) -> PointEstimate:
    table = link_probabilities(draws)
    z_hat = np.empty(draws.n_b, np.int32)
    tie_report = []
    for j in range(draws.n_b):
        row = table.probs[j]
        best_link = float(row.max()) if draws.n_a else 0.0
        top = max(best_link, table.nolink[j])
        tied_links = [int(i) for i in np.nonzero(row == top)[0]]
        options: list[int | None] = list(tied_links)
        if table.nolink[j] == top:
            options.append(None)
        if len(options) > 1:
            tie_report.append((j, tuple(options)))
        # no-link wins any tie it is part of; link ties go to the smallest index
        if table.nolink[j] == top:
            z_hat[j] = draws.n_a + j
        else:
            z_hat[j] = tied_links[0]
    violations = []
    linked = z_hat < draws.n_a
    targets = z_hat[linked]
    js = np.nonzero(linked)[0]
    for i in np.unique(targets):
        claimants = js[targets == i]
        if len(claimants) > 1:
            violations.append((int(i), tuple(int(j) for j in claimants)))
    return PointEstimate(
        kind="marginal",
        z_hat=z_hat,
        n_a=draws.n_a,
        tie_report=tie_report,
        violations=violations,
    )


def estimate(draws: PosteriorDraws, kind: str) -> PointEstimate:
    """Point estimate of the matching; kind is 'joint' or 'marginal'.

    No default on purpose: the two estimators answer different questions and
    the caller must pick one.
    """
    if draws.n_draws < 1:
        raise ValueError("need at least one draw")
    if kind == "joint":
        return _joint_mode(draws)
    if kind == "marginal":
        return _marginal_mode(draws)
    raise ValueError(f"kind must be 'joint' or 'marginal', got {kind!r}")


@dataclass(frozen=True)
class LinkCountSummary:
    mode: int
    mean: float
    lower: int
    upper: int


def _nearest_rank(sorted_values: np.ndarray, q: float) -> int:
    """Empirical quantile by the nearest-rank rule (no interpolation)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return int(sorted_values[rank - 1])


def posterior_link_count(draws: PosteriorDraws) -> LinkCountSummary:
    """Mode, mean and central 95% interval of the number of links per draw."""
    if draws.n_draws < 1:
        raise ValueError("need at least one draw")
    counts = (draws.draws < draws.n_a).sum(axis=1)
    values, freq = np.unique(counts, return_counts=True)
    # ties on the mode go to the smaller count
    mode = int(values[np.argmax(freq)])
    ordered = np.sort(counts)
    return LinkCountSummary(
        mode=mode,
        mean=float(counts.mean()),
        lower=_nearest_rank(ordered, 0.025),
        upper=_nearest_rank(ordered, 0.975),
    )


def concentration_ratio(table: LinkProbabilityTable, j: int, c: int) -> float:
    """Mass on record j's c most probable link candidates (no-link excluded).

    Near-1 values at small c mean the posterior has settled on a short list
    of partners; values below 1 - nolink mean the link mass is spread out.
    """
    if c < 1:
        raise ValueError("c must be >= 1")
    row = np.sort(table.probs[j])[::-1]
    return float(row[: min(c, table.n_a)].sum())


def distinct_match_counts(draws: PosteriorDraws) -> np.ndarray:
    """How many different A records each B record links to across the draws
    (no-link not counted). High counts flag records the posterior cannot
    place."""
    out = np.empty(draws.n_b, np.int64)
    for j in range(draws.n_b):
        col = draws.draws[:, j]
        out[j] = len(np.unique(col[col < draws.n_a]))
    return out


def group_match_rate(
    est: PointEstimate,
    labels: Sequence,
    universe: Iterable | None = None,
) -> dict:
    """Fraction of each group's records that the estimate links.

    labels[j] is record j's group. universe, if given, fixes which groups are
    reported; a requested group with no records gets None (undefined, not 0).
    """
    if len(labels) != len(est.z_hat):
        raise ValueError(f"need one label per record ({len(est.z_hat)}), got {len(labels)}")
    linked = est.z_hat < est.n_a
    members: dict = {}
    for j, g in enumerate(labels):
        members.setdefault(g, []).append(j)
    groups = list(universe) if universe is not None else sorted(members, key=repr)
    out = {}
    for g in groups:
        js = members.get(g)
        out[g] = float(linked[js].mean()) if js else None
    return out


# ---------------------------------------------------------------------------
# delimited-text exports
#
# Every writer accepts optional id sequences for the two files; without them
# rows fall back to 0-based positional indices. The pipeline always passes
# the real record ids.


def _ids(ids: Sequence[str] | None, n: int, what: str) -> list[str]:
    if ids is None:
        return [str(k) for k in range(n)]
    if len(ids) != n:
        raise ValueError(f"{what}: expected {n} ids, got {len(ids)}")
    return [str(x) for x in ids]


def write_link_probabilities_csv(
    table: LinkProbabilityTable,
    path,
    ids_a: Sequence[str] | None = None,
    ids_b: Sequence[str] | None = None,
    min_probability: float = 0.0,
) -> None:
    """Long-format table: one row per (record, candidate) with positive mass,
    plus each record's no-link row."""
    a = _ids(ids_a, table.n_a, "ids_a")
    b = _ids(ids_b, table.n_b, "ids_b")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["record_b", "record_a", "probability"])
        for j in range(table.n_b):
            for i, p in table.candidates(j):
                if p >= min_probability and p > 0.0:
                    w.writerow([b[j], a[i], f"{p:.6f}"])
            w.writerow([b[j], NOLINK, f"{table.nolink[j]:.6f}"])


def write_record_summary_csv(
    draws: PosteriorDraws,
    path,
    ids_a: Sequence[str] | None = None,
    ids_b: Sequence[str] | None = None,
) -> None:
    """Per-record diagnostics: no-link mass, top five candidates, the one- and
    three-candidate concentration ratios, and the distinct-partner count."""
    table = link_probabilities(draws)
    distinct = distinct_match_counts(draws)
    a = _ids(ids_a, table.n_a, "ids_a")
    b = _ids(ids_b, table.n_b, "ids_b")
    header = ["record_b", "p_nolink"]
    for r in range(1, 6):
        header += [f"candidate_{r}", f"p_{r}"]
    header += ["r1", "r3", "distinct_candidates"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(table.n_b):
            row = [b[j], f"{table.nolink[j]:.6f}"]
            cands = table.candidates(j, top=5)
            for r in range(5):
                if r < len(cands):
                    i, p = cands[r]
                    row += [a[i], f"{p:.6f}"]
                else:
                    row += ["", ""]
            row += [
                f"{concentration_ratio(table, j, 1):.6f}",
                f"{concentration_ratio(table, j, 3):.6f}",
                str(int(distinct[j])),
            ]
            w.writerow(row)


def write_links_csv(
    est: PointEstimate,
    path,
    ids_a: Sequence[str] | None = None,
    ids_b: Sequence[str] | None = None,
) -> None:
    """The estimated matching, one row per B record; unlinked records carry
    the no-link token. Conflicted records (marginal mode) are marked."""
    n_b = len(est.z_hat)
    a = _ids(ids_a, est.n_a, "ids_a")
    b = _ids(ids_b, n_b, "ids_b")
    conflicted = {j for _, js in est.violations for j in js}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["record_b", "record_a", "conflict"])
        for j in range(n_b):
            v = int(est.z_hat[j])
            target = a[v] if v < est.n_a else NOLINK
            w.writerow([b[j], target, "yes" if j in conflicted else ""])


def write_group_rates_csv(rates: dict, path) -> None:
    """Group match rates; undefined (empty-group) rates export as NA."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "match_rate"])
        for g, rate in rates.items():
            w.writerow([g, "NA" if rate is None else f"{rate:.6f}"])
