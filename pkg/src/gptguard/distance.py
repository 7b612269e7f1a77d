"""Damerau-Levenshtein edit distance (unrestricted, adjacent transpositions).

This is the distance used for typosquat and lookalike-domain scoring. It is
the true Damerau-Levenshtein metric (insert, delete, substitute, transpose
two adjacent characters, each unit cost), not the restricted
optimal-string-alignment variant: e.g. distance("ca", "abc") == 2, where the
restricted variant would report 3. The test suite checks it against a
brute-force edit-sequence search.
"""

from __future__ import annotations


def damerau_levenshtein(a: str, b: str) -> int:
    """Minimum number of unit edits (insert/delete/substitute/adjacent
    transpose) turning `a` into `b`."""
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la

    inf = la + lb
    # d has two sentinel rows/columns (index 0 is the sentinel, index 1 is
    # the empty prefix), per the classic alphabet-indexed formulation.
    d = [[inf] * (lb + 2) for _ in range(la + 2)]
    d[1][1] = 0
    for i in range(1, la + 1):
        d[i + 1][1] = i
    for j in range(1, lb + 1):
        d[1][j + 1] = j

    last_row: dict[str, int] = {}
    for i in range(1, la + 1):
        ca = a[i - 1]
        last_col = 0
        row = d[i + 1]
        prev_row = d[i]
        for j in range(1, lb + 1):
            cb = b[j - 1]
            k = last_row.get(cb, 0)
            l = last_col
            if ca == cb:
                cost = 0
                last_col = j
            else:
                cost = 1
            row[j + 1] = min(
                prev_row[j] + cost,  # substitution / match
                row[j] + 1,  # insertion
                prev_row[j + 1] + 1,  # deletion
                d[k][l] + (i - k - 1) + 1 + (j - l - 1),  # transposition
            )
        last_row[ca] = i
    return d[la + 1][lb + 1]


def within_distance(a: str, b: str, limit: int) -> bool:
    """Cheap length pre-filter before the full distance computation."""
    if abs(len(a) - len(b)) > limit:
        return False
    return damerau_levenshtein(a, b) <= limit
