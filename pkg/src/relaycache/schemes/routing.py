"""Uncoded routing delivery on top of the class-symmetric placement.

Same caches and subfile layout as the ``proposed`` scheme, but the server
ships every missing subfile verbatim instead of XOR-combining them.  The
copy index picks the path: subfile ``(d_V, T, l)`` for user V travels via
relay V[l], so each relay-to-user edge carries exactly the C(Kt-1, t)
missing subfiles with that user's copy index for the relay.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..combinatorics import enumerate_subsets, position_in
from ..topology import Network
from .common import (
    IncompleteReceptionError,
    Record,
    TransmissionLog,
    fmt_subset,
    parse_subset,
    validate_demand,
)
from .proposed import GroupedCache


def _label(relay: int, V: tuple[int, ...], T: tuple[int, ...], l: int) -> str:
    return f"rt:i={relay}:V={fmt_subset(V)}:T={fmt_subset(T)}:l={l}"


def routing_deliver(
    net: Network, cache: GroupedCache, demand: tuple[int, ...]
) -> TransmissionLog:
    validate_demand(net, cache.lib.n_files, demand)
    log = TransmissionLog()
    kt, t = net.num_classes, cache.t
    for i in range(1, net.h + 1):
        for u in net._neighbors[i - 1]:
            V = net.users[u]
            l = position_in(V, i)
            label = net.class_of[u]
            for T in enumerate_subsets(kt, t):
                if label in T:
                    continue
                rec = Record(_label(i, V, T, l), cache.subfile(demand[u], T, l))
                log.add_server(i, rec)
                log.forward(i, u, rec)
    return log


def routing_decode(
    net: Network,
    user: int,
    cache: GroupedCache,
    demand: tuple[int, ...],
    received: Mapping[int, Sequence[Record]],
) -> bytes:
    V = net.users[user]
    mine = net.class_of[user]
    kt, t = net.num_classes, cache.t

    delivered: dict[tuple[tuple[int, ...], int], bytes] = {}
    for i in V:
        for rec in received.get(i, ()):
            f = rec.fields()
            if parse_subset(f["V"]) != V:
                continue
            delivered[(parse_subset(f["T"]), int(f["l"]))] = rec.payload

    parts = []
    for T in enumerate_subsets(kt, t):
        for l in range(1, net.r + 1):
            if mine in T:
                parts.append(cache.get(user, (demand[user], T, l)))
            else:
                piece = delivered.get((T, l))
                if piece is None:
                    raise IncompleteReceptionError(
                        f"user {user} is missing subfile (T={fmt_subset(T)}, l={l}); "
                        f"nothing received from relay {V[l - 1]}"
                    )
                parts.append(piece)
    return b"".join(parts)
