"""Deterministic subset enumeration and index maps.

Ground sets are 1-based throughout: ``[m]`` means ``{1, ..., m}``.  A subset
is a strictly increasing tuple of ints.  The lexicographic enumeration order
fixed here is load-bearing: every delivery pipeline emits its signals by
iterating subsets in this order, so the order determines the byte layout of
every transmission log.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient C(n, k); 0 when k < 0 or k > n."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


@lru_cache(maxsize=None)
def _subsets(m: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(1, m + 1), k))


def enumerate_subsets(m: int, k: int) -> list[tuple[int, ...]]:
    """All k-subsets of [m] in lexicographic order.

    Returns C(m, k) strictly increasing tuples.  The order is a pure
    function of (m, k) and is identical across runs and platforms.
    """
    if m < 0:
        raise ValueError(f"ground-set size must be nonnegative, got {m}")
    if k < 0 or k > m:
        raise ValueError(f"subset size {k} outside 0..{m}")
    return list(_subsets(m, k))


def position_in(subset: tuple[int, ...], element: int) -> int:
    """1-based position of ``element`` within the sorted tuple ``subset``.

    This is the inverse of element access: position_in(V, V[j-1]) == j.
    """
    try:
        return subset.index(element) + 1
    except ValueError:
        raise ValueError(f"{element} is not a member of {subset}") from None


@lru_cache(maxsize=None)
def _rank_table(m: int, k: int) -> dict[tuple[int, ...], int]:
    return {s: i for i, s in enumerate(_subsets(m, k))}


def subset_rank(m: int, subset: tuple[int, ...]) -> int:
    """0-based index of ``subset`` within enumerate_subsets(m, len(subset)).

    Backed by a memoized lookup table when the enumeration is small enough
    to hold; computed combinatorially otherwise.
    """
    k = len(subset)
    if k > m:
        raise ValueError(f"subset size {k} exceeds ground-set size {m}")
    if binomial(m, k) <= 1 << 20:
        rank = _rank_table(m, k).get(tuple(subset))
        if rank is None:
            raise ValueError(f"{subset} is not a sorted subset of [{m}]")
        return rank
    rank = 0
    prev = 0
    for j, v in enumerate(subset):
        if v <= prev or v > m:
            raise ValueError(f"{subset} is not a sorted subset of [{m}]")
        for w in range(prev + 1, v):
            rank += binomial(m - w, k - j - 1)
        prev = v
    return rank
