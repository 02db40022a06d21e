"""Per-file MDS broadcast delivery (``broadcast-mds``).

The fallback that wins when there are more users per relay than files:
every user caches the same M/N prefix of every file, and delivery ignores
demands on the server side entirely.  For each file, the uncached suffix is
split into r parts, expanded into h pieces with an (h, r) MDS code, and
piece i goes over server edge i.  A relay forwards to each neighbor only
the piece of the one file that neighbor asked for, so each user collects r
distinct pieces of its file's suffix and erasure-decodes it.

When the suffix does not split evenly into r parts it is zero-padded; the
true byte length rides in the label (``octets=``) and is trimmed on decode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from ..erasure import ErasureCode, decode as mds_decode, encode as mds_encode
from ..topology import Network
from .common import (
    FileLibrary,
    IncompleteReceptionError,
    Record,
    SubpacketizationError,
    TransmissionLog,
    validate_demand,
)


def prefix_bytes_for(lib: FileLibrary, n_files_declared: int, M) -> int:
    """Cached prefix length: M/N of the file, which must be whole bytes."""
    m = Fraction(M, n_files_declared)
    if not 0 <= m <= 1:
        raise ValueError(f"M={M} outside 0..{n_files_declared}")
    prefix = m * lib.file_bytes
    if prefix.denominator != 1:
        raise SubpacketizationError(
            f"file size {lib.file_bytes} bytes times M/N = {m} is not a whole "
            f"number of bytes; need a multiple of {m.denominator}"
        )
    return int(prefix)


@dataclass(frozen=True)
class PrefixCache:
    """Every user caches the first ``prefix_bytes`` of every file."""

    net: Network
    lib: FileLibrary
    storage: Fraction
    prefix_bytes: int

    def has(self, user: int, key: int) -> bool:
        return 1 <= key <= self.lib.n_files and self.prefix_bytes > 0

    def get(self, user: int, key: int) -> bytes:
        if not self.has(user, key):
            raise KeyError(f"user {user} does not cache a prefix of file {key}")
        return self.lib.file(key)[: self.prefix_bytes]

    def keys(self, user: int) -> Iterator[int]:
        if self.prefix_bytes > 0:
            yield from range(1, self.lib.n_files + 1)

    def cached_bits(self, user: int) -> int:
        return self.lib.n_files * self.prefix_bytes * 8

    def signature(self, user: int) -> frozenset:
        return frozenset(self.keys(user))

    def materialize(self, user: int) -> dict:
        return {n: self.get(user, n) for n in self.keys(user)}


def broadcast_place(net: Network, lib: FileLibrary, M) -> PrefixCache:
    return PrefixCache(
        net=net,
        lib=lib,
        storage=Fraction(M),
        prefix_bytes=prefix_bytes_for(lib, lib.n_files, M),
    )


def _label(n: int, piece: int, octets: int) -> str:
    return f"bc:n={n}:p={piece}:octets={octets}"


def broadcast_mds_deliver(
    net: Network,
    lib: FileLibrary,
    M,
    demand: tuple[int, ...],
    code: ErasureCode,
) -> TransmissionLog:
    validate_demand(net, lib.n_files, demand)
    if (code.n, code.k) != (net.h, net.r):
        raise ValueError(f"need an ({net.h}, {net.r}) code, got ({code.n}, {code.k})")
    log = TransmissionLog()
    prefix = prefix_bytes_for(lib, lib.n_files, M)
    suffix = lib.file_bytes - prefix
    if suffix == 0:
        return log
    part_bytes = -(-suffix // net.r)  # ceil; zero-pad the tail part
    for n in range(1, lib.n_files + 1):
        data = lib.file(n)[prefix:] + bytes(part_bytes * net.r - suffix)
        parts = [data[j * part_bytes : (j + 1) * part_bytes] for j in range(net.r)]
        pieces = mds_encode(code, parts)
        for i in range(1, net.h + 1):
            log.add_server(i, Record(_label(n, i, suffix), pieces[i - 1]))
    for i in range(1, net.h + 1):
        by_file = {rec.fields()["n"]: rec for rec in log.server_edges[i]}
        for u in net._neighbors[i - 1]:
            log.forward(i, u, by_file[str(demand[u])])
    return log


def broadcast_decode(
    net: Network,
    user: int,
    cache: PrefixCache,
    demand: tuple[int, ...],
    received: Mapping[int, Sequence[Record]],
    code: ErasureCode,
) -> bytes:
    want = demand[user]
    prefix = cache.lib.file(want)[: cache.prefix_bytes] if cache.prefix_bytes else b""
    suffix_len = cache.lib.file_bytes - cache.prefix_bytes
    if suffix_len == 0:
        return prefix

    V = net.users[user]
    pieces = []
    octets = suffix_len
    for i in V:
        match = None
        for rec in received.get(i, ()):
            f = rec.fields()
            if int(f["n"]) == want:
                match = (i, rec.payload)
                octets = int(f["octets"])
        if match is None:
            raise IncompleteReceptionError(
                f"user {user} received no piece of file {want} from relay {i}"
            )
        pieces.append(match)
    suffix = b"".join(mds_decode(code, pieces))[:octets]
    return prefix + suffix
