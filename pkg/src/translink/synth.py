"""Synthetic two-file instances with known ground truth.

File B is generated first: romanized (pinyin) names assembled from the
shipped syllable inventory, zips from a small pool, integer ages. A chosen
fraction of B records get a true partner planted in file A -- a copy pushed
through the error processes the model is built for: some partners store the
Wade-Giles romanization instead of pinyin, characters suffer substitution
typos, zips occasionally churn, ages jitter by a bounded amount. The rest of
file A is filled with independent decoys. The true matching comes back
alongside the two tables, so recovery can be scored exactly.
"""
from __future__ import annotations

import csv
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .sampler import LinkageState
from .tableio import NOLINK, RecordTable
from .translit import SyllableMap, default_syllable_map, to_wade_giles

__all__ = ["SynthConfig", "generate", "write_record_csv", "write_truth_csv"]


@dataclass(frozen=True)
class SynthConfig:
    n_a: int
    n_b: int
    overlap: float
    name_pool: SyllableMap | None = None
    romanization_mix: float = 0.5
    typo_rate: float = 0.02
    zip_pool: int = 25
    zip_agreement: float = 0.95
    age_noise: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.n_a < 1 or self.n_b < 1:
            raise ConfigError("n_a and n_b must be >= 1")
        for name in ("overlap", "romanization_mix", "typo_rate", "zip_agreement"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.age_noise < 0:
            raise ConfigError("age_noise must be >= 0")
        if self.zip_pool < 2:
            raise ConfigError("zip_pool must be >= 2 (matches need a different zip to churn to)")
        if self.n_a < round(self.n_b * self.overlap):
            raise ConfigError(
                f"infeasible sizes: {round(self.n_b * self.overlap)} true links "
                f"cannot fit in a file of {self.n_a} records"
            )

    @property
    def n_true_links(self) -> int:
        return int(round(self.n_b * self.overlap))


def _syllables(pool: SyllableMap) -> list[str]:
    return sorted(pool.pairs)


def _random_name(rng: np.random.Generator, syllables: list[str]) -> tuple[str, str]:
    """(first, last): a 1-2 syllable given name and a 1-syllable surname."""
    last = syllables[rng.integers(0, len(syllables))]
    n_syl = 1 + int(rng.random() < 0.5)
    first = "".join(syllables[rng.integers(0, len(syllables))] for _ in range(n_syl))
    return first, last


def _typo(rng: np.random.Generator, name: str, rate: float) -> str:
    if rate <= 0.0:
        return name
    chars = list(name)
    for pos, ch in enumerate(chars):
        if rng.random() < rate:
            pool = string.ascii_lowercase.replace(ch, "")
            chars[pos] = pool[rng.integers(0, len(pool))]
    return "".join(chars)


def generate(config: SynthConfig) -> tuple[RecordTable, RecordTable, LinkageState]:
    """Build (file A, file B, true matching) from the config's seed.

    The same seed always produces identical tables and truth.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    pool = config.name_pool if config.name_pool is not None else default_syllable_map()
    syllables = _syllables(pool)

    zips = [f"{z:05d}" for z in rng.choice(90000, size=config.zip_pool, replace=False) + 10000]

    # file B: the reference side
    b_first, b_last, b_zip, b_age = [], [], [], []
    for _ in range(config.n_b):
        first, last = _random_name(rng, syllables)
        b_first.append(first)
        b_last.append(last)
        b_zip.append(zips[rng.integers(0, len(zips))])
        b_age.append(int(rng.integers(18, 91)))

    # which B records are truly present in A, and where
    n_links = config.n_true_links
    matched_js = np.sort(rng.choice(config.n_b, size=n_links, replace=False))
    a_slots = rng.permutation(config.n_a)[:n_links]
    z = np.arange(config.n_a, config.n_a + config.n_b, dtype=np.int32)
    z[matched_js] = a_slots

    # file A: independent decoys everywhere, true partners overwritten after
    a_first, a_last, a_zip, a_age = [], [], [], []
    for _ in range(config.n_a):
        first, last = _random_name(rng, syllables)
        a_first.append(first)
        a_last.append(last)
        a_zip.append(zips[rng.integers(0, len(zips))])
        a_age.append(int(rng.integers(18, 91)))

    for j, i in zip(matched_js, a_slots):
        first, last = b_first[j], b_last[j]
        if rng.random() < config.romanization_mix:
            # this partner's file stores the Wade-Giles romanization
            first = to_wade_giles(first, pool).wade_giles
            last = to_wade_giles(last, pool).wade_giles
        a_first[i] = _typo(rng, first, config.typo_rate)
        a_last[i] = _typo(rng, last, config.typo_rate)
        if rng.random() < config.zip_agreement:
            a_zip[i] = b_zip[j]
        else:
            others = [zp for zp in zips if zp != b_zip[j]]
            a_zip[i] = others[rng.integers(0, len(others))]
        if config.age_noise > 0:
            jitter = int(rng.integers(-config.age_noise, config.age_noise + 1))
        else:
            jitter = 0
        a_age[i] = int(np.clip(b_age[j] + jitter, 0, 130))

    # pass-through extras: coordinates on A, a crude region label on B
    lat = np.round(35.6 + 0.6 * rng.random(config.n_a), 6)
    lon = np.round(-79.2 + 0.6 * rng.random(config.n_a), 6)
    groups = [("east", "west")[rng.integers(0, 2)] for _ in range(config.n_b)]

    table_a = RecordTable(
        ids=[f"a{k + 1:05d}" for k in range(config.n_a)],
        first_names=a_first,
        last_names=a_last,
        zips=a_zip,
        ages=a_age,
        extras={"lat": [str(v) for v in lat], "lon": [str(v) for v in lon]},
        source="synthetic-a",
    )
    table_b = RecordTable(
        ids=[f"b{k + 1:05d}" for k in range(config.n_b)],
        first_names=b_first,
        last_names=b_last,
        zips=b_zip,
        ages=b_age,
        extras={"group": groups},
        source="synthetic-b",
    )
    truth = LinkageState(config.n_a, z)
    truth.validate()
    return table_a, table_b, truth


def write_record_csv(table: RecordTable, path) -> None:
    """Standard ingestion CSV: id,first_name,last_name,zip,age plus extras."""
    extra_names = list(table.extras)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "first_name", "last_name", "zip", "age"] + extra_names)
        for k in range(len(table.ids)):
            row = [
                table.ids[k],
                table.first_names[k] or "",
                table.last_names[k] or "",
                table.zips[k] or "",
                "" if table.ages[k] is None else str(table.ages[k]),
            ]
            row += [table.extras[name][k] for name in extra_names]
            w.writerow(row)


def write_truth_csv(truth: LinkageState, ids_a, ids_b, path) -> None:
    """One row per B record: its true A partner or the no-link token."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["record_b", "record_a"])
        for j in range(truth.n_b):
            v = int(truth.z[j])
            w.writerow([ids_b[j], ids_a[v] if v < truth.n_a else NOLINK])
