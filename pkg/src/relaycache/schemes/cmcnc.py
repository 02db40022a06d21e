"""Centralized coded multicast with combination network coding (``cmcnc``).

The baseline ignores the relay layer during placement: file n splits into
C(K, t') subfiles indexed by t'-subsets S of the *global* user set, with
t' = K*M/N, and user k caches exactly the subfiles with k in S.  Delivery
forms one coded signal per (t'+1)-subset S — the XOR of the subfiles each
member of S is missing — then splits it into r equal parts, expands them
with an (h, r) MDS code, and ships piece i over server edge i.  Relays
forward every piece to all of their neighbors; any user sees r distinct
piece indices (its own relay subset) and can rebuild every signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from ..combinatorics import binomial, enumerate_subsets, subset_rank
from ..erasure import ErasureCode, decode as mds_decode, encode as mds_encode, xor_bytes
from ..topology import Network
from .common import (
    FileLibrary,
    GridError,
    IncompleteReceptionError,
    Record,
    SubpacketizationError,
    TransmissionLog,
    fmt_subset,
    parse_subset,
    validate_demand,
)


def cmcnc_grid_t(net: Network, n_files: int, M) -> int:
    """Replication degree t' = K*M/N; GridError if M is off the grid."""
    t = Fraction(M) * net.K / n_files
    if t.denominator != 1 or not 0 <= t <= net.K:
        step = Fraction(n_files, net.K)
        raise GridError(f"M={M} is not a multiple of N/K = {step} within [0, {n_files}]")
    return int(t)


@dataclass(frozen=True)
class SubsetCache:
    """Uncoded placement over (n, S)-indexed subfiles, S a t'-subset of [K]."""

    net: Network
    lib: FileLibrary
    storage: Fraction
    t: int
    subfile_bytes: int

    def subfile(self, n: int, S: tuple[int, ...]) -> bytes:
        offset = subset_rank(self.net.K, S) * self.subfile_bytes
        return self.lib.file(n)[offset : offset + self.subfile_bytes]

    def has(self, user: int, key: tuple) -> bool:
        n, S = key
        return (user + 1) in S

    def get(self, user: int, key: tuple) -> bytes:
        if not self.has(user, key):
            raise KeyError(f"user {user} does not cache {key}")
        n, S = key
        return self.subfile(n, S)

    def keys(self, user: int) -> Iterator[tuple]:
        k = user + 1
        for n in range(1, self.lib.n_files + 1):
            for S in enumerate_subsets(self.net.K, self.t):
                if k in S:
                    yield (n, S)

    def cached_bits(self, user: int) -> int:
        per_file = binomial(self.net.K - 1, self.t - 1)
        return self.lib.n_files * per_file * self.subfile_bytes * 8

    def signature(self, user: int) -> frozenset:
        return frozenset(self.keys(user))

    def materialize(self, user: int) -> dict:
        return {key: self.get(user, key) for key in self.keys(user)}


def cmcnc_place(net: Network, lib: FileLibrary, M) -> SubsetCache:
    """Split files over user subsets; file size must allow the r-way split too."""
    t = cmcnc_grid_t(net, lib.n_files, M)
    nsub = net.r * binomial(net.K, t)
    if lib.file_bytes % nsub != 0:
        raise SubpacketizationError(
            f"file size {lib.file_bytes} bytes must be divisible by {nsub} "
            f"(= r * C(K, t') units)"
        )
    return SubsetCache(
        net=net,
        lib=lib,
        storage=Fraction(M),
        t=t,
        subfile_bytes=lib.file_bytes // binomial(net.K, t),
    )


def _label(S: tuple[int, ...], piece: int) -> str:
    return f"cm:S={fmt_subset(S)}:p={piece}"


def cmcnc_deliver(
    net: Network,
    cache: SubsetCache,
    demand: tuple[int, ...],
    code: ErasureCode,
) -> TransmissionLog:
    validate_demand(net, cache.lib.n_files, demand)
    if (code.n, code.k) != (net.h, net.r):
        raise ValueError(
            f"need an ({net.h}, {net.r}) code, got ({code.n}, {code.k})"
        )
    log = TransmissionLog()
    K, t = net.K, cache.t
    if t + 1 > K:
        return log
    part_bytes = cache.subfile_bytes // net.r
    for S in enumerate_subsets(K, t + 1):
        signal = bytes(cache.subfile_bytes)
        for k in S:
            rest = tuple(x for x in S if x != k)
            signal = xor_bytes(signal, cache.subfile(demand[k - 1], rest))
        parts = [signal[j * part_bytes : (j + 1) * part_bytes] for j in range(net.r)]
        pieces = mds_encode(code, parts)
        for i in range(1, net.h + 1):
            rec = Record(_label(S, i), pieces[i - 1])
            log.add_server(i, rec)
            for u in net._neighbors[i - 1]:
                log.forward(i, u, rec)
    return log


def cmcnc_decode(
    net: Network,
    user: int,
    cache: SubsetCache,
    demand: tuple[int, ...],
    received: Mapping[int, Sequence[Record]],
    code: ErasureCode,
) -> bytes:
    V = net.users[user]
    me = user + 1
    K, t = net.K, cache.t

    by_signal: dict[tuple[int, ...], dict[int, bytes]] = {}
    for i in V:
        for rec in received.get(i, ()):
            f = rec.fields()
            by_signal.setdefault(parse_subset(f["S"]), {})[int(f["p"])] = rec.payload

    extracted: dict[tuple[int, ...], bytes] = {}
    if t + 1 <= K:
        for S in enumerate_subsets(K, t + 1):
            if me not in S:
                continue
            pieces = by_signal.get(S, {})
            missing = [i for i in V if i not in pieces]
            if missing:
                raise IncompleteReceptionError(
                    f"user {user} lacks piece(s) of signal S={fmt_subset(S)} "
                    f"from relay(s) {missing}"
                )
            signal = b"".join(mds_decode(code, [(i, pieces[i]) for i in V]))
            for k in S:
                if k == me:
                    continue
                rest = tuple(x for x in S if x != k)
                signal = xor_bytes(signal, cache.get(user, (demand[k - 1], rest)))
            extracted[tuple(x for x in S if x != me)] = signal

    parts = []
    for S in enumerate_subsets(K, t):
        if me in S:
            parts.append(cache.get(user, (demand[user], S)))
        else:
            parts.append(extracted[S])
    return b"".join(parts)
