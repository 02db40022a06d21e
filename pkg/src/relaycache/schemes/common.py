"""Shared plumbing for the placement/delivery/decode pipelines.

Conventions used by every scheme:

* Files, subfiles, signals, and pieces are ``bytes``; sizes are exact and
  all arithmetic on them is bit-exact (XOR, slicing, GF(256) scaling).
* A demand vector is a tuple of length K mapping user index (0-based
  position in ``net.users``) to a requested file id in 1..N.
* Every transmitted signal is a :class:`Record` with a canonical label, so
  two runs of the same experiment produce byte-identical logs.
* Relays can only forward what they received: :meth:`TransmissionLog.forward`
  rejects a record that is not already on that relay's server edge.

Cache objects are lazy views over the library: they answer membership and
content queries per user without materializing every subfile.  They all
expose ``has(user, key)``, ``get(user, key)``, ``keys(user)``,
``cached_bits(user)``, ``signature(user)`` and ``materialize(user)``; the
key shape is scheme-specific.  ``get`` raises ``KeyError`` for anything the
user did not cache, which keeps decoders honest about what they may read.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from ..topology import Network


class GridError(ValueError):
    """Storage size M is off the scheme's memory grid (t would be fractional)."""


class SubpacketizationError(ValueError):
    """File size is not divisible into the required number of equal subfiles."""


class IncompleteReceptionError(RuntimeError):
    """A decoder is missing signals from one of its relays."""


@dataclass(frozen=True)
class FileLibrary:
    """N files of identical size, as opaque byte buffers."""

    files: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if not self.files:
            raise ValueError("library needs at least one file")
        size = len(self.files[0])
        if size < 1:
            raise ValueError("files must be nonempty")
        if any(len(f) != size for f in self.files):
            raise ValueError("all files must have the same size")

    @property
    def n_files(self) -> int:
        return len(self.files)

    @property
    def file_bytes(self) -> int:
        return len(self.files[0])

    @property
    def file_bits(self) -> int:
        return 8 * len(self.files[0])

    def file(self, n: int) -> bytes:
        if not 1 <= n <= len(self.files):
            raise ValueError(f"file id {n} outside 1..{len(self.files)}")
        return self.files[n - 1]


def random_library(n_files: int, file_bytes: int, seed: int) -> FileLibrary:
    rng = random.Random(seed)
    return FileLibrary(tuple(rng.randbytes(file_bytes) for _ in range(n_files)))


# ---------------------------------------------------------------------------
# Demand vectors


def validate_demand(net: Network, n_files: int, demand: tuple[int, ...]) -> None:
    if len(demand) != net.K:
        raise ValueError(f"demand has {len(demand)} entries for {net.K} users")
    if any(not 1 <= d <= n_files for d in demand):
        raise ValueError(f"demand values must lie in 1..{n_files}")


def distinct_demand(net: Network, n_files: int) -> tuple[int, ...]:
    """User j requests file j; requires at least K files."""
    if n_files < net.K:
        raise ValueError(f"distinct demands need N >= K ({n_files} < {net.K})")
    return tuple(range(1, net.K + 1))


def uniform_demand(net: Network, file_id: int = 1) -> tuple[int, ...]:
    return (file_id,) * net.K


def random_demand(net: Network, n_files: int, rng: random.Random) -> tuple[int, ...]:
    return tuple(rng.randint(1, n_files) for _ in range(net.K))


def all_demands(net: Network, n_files: int) -> Iterator[tuple[int, ...]]:
    """All N^K demand vectors in lexicographic order."""
    import itertools

    return itertools.product(range(1, n_files + 1), repeat=net.K)


# ---------------------------------------------------------------------------
# Signals and logs


def fmt_subset(subset: tuple[int, ...]) -> str:
    return ".".join(map(str, subset)) if subset else "-"


def parse_subset(text: str) -> tuple[int, ...]:
    if text == "-":
        return ()
    return tuple(int(x) for x in text.split("."))


class Record(NamedTuple):
    """One signal on one edge: canonical label plus payload bytes."""

    label: str
    payload: bytes

    @property
    def bits(self) -> int:
        return 8 * len(self.payload)

    def fields(self) -> dict[str, str]:
        parts = self.label.split(":")
        return dict(p.split("=", 1) for p in parts[1:])


@dataclass
class TransmissionLog:
    """Every signal on every server->relay and relay->user edge.

    Relay edges may only carry records already present on that relay's
    server edge (relays have no other input).
    """

    server_edges: dict[int, list[Record]] = field(default_factory=dict)
    relay_edges: dict[tuple[int, int], list[Record]] = field(default_factory=dict)
    _seen: dict[int, set[str]] = field(default_factory=dict, repr=False)

    def add_server(self, relay: int, rec: Record) -> None:
        self.server_edges.setdefault(relay, []).append(rec)
        self._seen.setdefault(relay, set()).add(rec.label)

    def forward(self, relay: int, user: int, rec: Record) -> None:
        if rec.label not in self._seen.get(relay, ()):
            raise ValueError(
                f"relay {relay} cannot forward {rec.label!r}: not on its server edge"
            )
        self.relay_edges.setdefault((relay, user), []).append(rec)

    def server_bits(self, relay: int) -> int:
        return sum(r.bits for r in self.server_edges.get(relay, ()))

    def relay_bits(self, relay: int, user: int) -> int:
        return sum(r.bits for r in self.relay_edges.get((relay, user), ()))

    def to_user(self, user: int) -> dict[int, list[Record]]:
        return {
            relay: records
            for (relay, u), records in self.relay_edges.items()
            if u == user
        }

    def to_dict(self) -> dict:
        return {
            "server_edges": [
                {
                    "relay": relay,
                    "signals": [
                        {"label": r.label, "bits": r.bits, "payload": r.payload.hex()}
                        for r in records
                    ],
                }
                for relay, records in sorted(self.server_edges.items())
            ],
            "relay_edges": [
                {
                    "relay": relay,
                    "user": user,
                    "signals": [
                        {"label": r.label, "bits": r.bits, "payload": r.payload.hex()}
                        for r in records
                    ],
                }
                for (relay, user), records in sorted(self.relay_edges.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
