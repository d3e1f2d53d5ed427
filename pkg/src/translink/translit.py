"""Pinyin/Wade-Giles syllable handling.

The shipped correspondence table drives everything here: a romanized name is
segmented into pinyin syllables by greedy longest match and converted to its
Wade-Giles spelling syllable by syllable. Apostrophe and diacritic
conventions are properties of the data file, not of this code -- the shipped
table is ASCII-normalized (apostrophes omitted, u-umlaut written u).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import DataError

__all__ = [
    "SyllableMap",
    "NameVariant",
    "load_syllable_map",
    "default_syllable_map",
    "segment_pinyin",
    "to_wade_giles",
    "has_distinct_variant",
]

_SYLLABLE_RE = re.compile(r"[a-z]+\Z")
_SEPARATORS = re.compile(r"[-\s]+")


@dataclass(frozen=True)
class SyllableMap:
    """Pinyin syllable -> Wade-Giles spelling, plus the key-length bound
    that the greedy segmenter scans down from."""

    pairs: Mapping[str, str]
    max_key_len: int

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, syllable: str) -> bool:
        return syllable in self.pairs


@dataclass(frozen=True)
class NameVariant:
    """A name with its transliteration bookkeeping.

    pinyin is the separator-stripped normalized form the segmentation was
    computed from (or the name unchanged when unsegmentable); joining
    segmentation with no separator reproduces it.
    """

    pinyin: str
    wade_giles: str
    segmentation: tuple[str, ...]
    unsegmentable: bool


def load_syllable_map(path) -> SyllableMap:
    """Read a syllable table: one `pinyin,wade_giles` row per line, `#` comments.

    Both columns must already be normalized lowercase ASCII letters.
    Malformed or duplicate rows raise DataError naming the line number.
    """
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cols = line.split(",")
            if len(cols) != 2:
                raise DataError(
                    f"{path}: line {lineno}: expected two comma-separated "
                    f"columns, got {len(cols)}"
                )
            pinyin, wade_giles = cols[0].strip(), cols[1].strip()
            if not _SYLLABLE_RE.match(pinyin) or not _SYLLABLE_RE.match(wade_giles):
                raise DataError(
                    f"{path}: line {lineno}: syllables must be lowercase "
                    f"ASCII letters, got {pinyin!r},{wade_giles!r}"
                )
            if pinyin in pairs:
                raise DataError(
                    f"{path}: line {lineno}: duplicate pinyin syllable {pinyin!r}"
                )
            pairs[pinyin] = wade_giles
    if not pairs:
        raise DataError(f"{path}: no syllable rows found")
    return SyllableMap(pairs=pairs, max_key_len=max(len(k) for k in pairs))


@lru_cache(maxsize=1)
def default_syllable_map() -> SyllableMap:
    """The table shipped with the package."""
    ref = resources.files("translink").joinpath("data/pinyin_wadegiles.csv")
    with resources.as_file(ref) as path:
        return load_syllable_map(path)


def segment_pinyin(name: str, smap: SyllableMap) -> tuple[tuple[str, ...], bool]:
    """Split a normalized name into pinyin syllables.

    Greedy longest match, no backtracking. Hyphens and spaces are hard
    syllable boundaries and are removed. If any residue cannot be matched,
    the whole name is returned as a single token with the flag False.
    """
    parts = [p for p in _SEPARATORS.split(name) if p]
    if not parts:
        return (name,), False
    syllables: list[str] = []
    for part in parts:
        seg = _segment_part(part, smap)
        if seg is None:
            return (name,), False
        syllables.extend(seg)
    return tuple(syllables), True


def _segment_part(part: str, smap: SyllableMap) -> list[str] | None:
    out: list[str] = []
    pos = 0
    n = len(part)
    while pos < n:
        took = None
        upper = min(smap.max_key_len, n - pos)
        for length in range(upper, 0, -1):
            candidate = part[pos : pos + length]
            if candidate in smap.pairs:
                took = candidate
                break
        if took is None:
            return None
        out.append(took)
        pos += len(took)
    return out


def to_wade_giles(name: str, smap: SyllableMap) -> NameVariant:
    """Convert a normalized pinyin name to its Wade-Giles spelling.

    Syllables are mapped independently and joined with no separator.
    Unsegmentable names map to themselves and are flagged.
    """
    syllables, ok = segment_pinyin(name, smap)
    if not ok:
        return NameVariant(
            pinyin=name, wade_giles=name, segmentation=syllables, unsegmentable=True
        )
    joined = "".join(syllables)
    converted = "".join(smap.pairs[s] for s in syllables)
    return NameVariant(
        pinyin=joined, wade_giles=converted, segmentation=syllables, unsegmentable=False
    )


def has_distinct_variant(name: str, smap: SyllableMap) -> bool:
    """True iff the Wade-Giles form differs from the name as given."""
    return to_wade_giles(name, smap).wade_giles != name
