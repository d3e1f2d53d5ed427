"""Deterministic string comparison primitives for romanized name fields.

Pure scalar reference implementations with no third-party dependencies.
The vectorized kernel used to build full comparison matrices is verified
against these functions in the test suite.
"""
from __future__ import annotations

import unicodedata

__all__ = ["normalize", "jaro", "jaro_winkler", "levenshtein"]

# Winkler prefix adjustment: standard constants (common-prefix bonus capped
# at 4 characters). prefix_scale * _MAX_PREFIX must stay <= 1 so scores
# cannot leave [0, 1]; the ValueError below enforces the usual 0.25 bound.
_MAX_PREFIX = 4


def normalize(s: str) -> str:
    """Canonical form used for all name/zip comparisons.

    Lowercases, trims, collapses internal whitespace and strips diacritics
    (NFKD decomposition, combining marks dropped), so pinyin tone marks and
    u-umlaut reduce to plain ASCII letters.
    """
    decomposed = unicodedata.normalize("NFKD", s)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return " ".join(stripped.lower().split())


def jaro(a: str, b: str) -> float:
    """Jaro similarity in [0, 1].

    Characters match if equal and within a window of
    floor(max(|a|,|b|)/2) - 1 positions (clamped to >= 0, i.e. adjacent-only
    for very short strings). Transpositions are half the number of aligned
    matched characters that differ. Two empty strings score 1.0; one empty
    string scores 0.0.
    """
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    la, lb = len(a), len(b)
    window = max(la, lb) // 2 - 1
    if window < 0:
        window = 0

    a_hit = [False] * la
    b_hit = [False] * lb
    matches = 0
    for i, ca in enumerate(a):
        lo = i - window if i - window > 0 else 0
        hi = i + window + 1 if i + window + 1 < lb else lb
        for j in range(lo, hi):
            if not b_hit[j] and b[j] == ca:
                a_hit[i] = True
                b_hit[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0

    # Align the two matched subsequences in order; each position where they
    # disagree counts as half a transposition.
    matched_b = [b[j] for j in range(lb) if b_hit[j]]
    k = 0
    mismatches = 0
    for i in range(la):
        if a_hit[i]:
            if a[i] != matched_b[k]:
                mismatches += 1
            k += 1

    m = matches
    return (m / la + m / lb + (m - mismatches / 2.0) / m) / 3.0


def jaro_winkler(a: str, b: str, prefix_scale: float = 0.1) -> float:
    """Jaro-Winkler similarity: Jaro plus a common-prefix bonus.

    score = jaro + prefix_len * prefix_scale * (1 - jaro), with the shared
    prefix counted up to 4 characters. Raises ValueError if prefix_scale is
    outside [0, 0.25] (larger values could push scores past 1).
    """
    if not 0.0 <= prefix_scale <= 0.25:
        raise ValueError(
            f"prefix_scale must be in [0, 0.25], got {prefix_scale!r}"
        )
    base = jaro(a, b)
    prefix = 0
    for ca, cb in zip(a, b):
        if ca != cb or prefix >= _MAX_PREFIX:
            break
        prefix += 1
    return base + prefix * prefix_scale * (1.0 - base)


def levenshtein(a: str, b: str) -> int:
    """Edit distance (unit-cost insert/delete/substitute), two-row DP."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]
