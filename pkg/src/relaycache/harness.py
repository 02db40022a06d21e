"""End-to-end simulation runs and exact rate accounting.

Rates are exact rationals throughout: every per-edge bit count is an
integer multiple of a common subfile size, so measured rates and closed-form
rates either match exactly or not at all — no tolerances.  Floats appear
only in the entropy-based subpacketization approximation.

R1 is the worst server->relay edge load divided by the file size F; R2 the
worst relay->user edge load.  All schemes here load their edges uniformly,
and :func:`run_scheme` asserts that symmetry instead of assuming it.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .combinatorics import binomial
from .erasure import ErasureCode, make_code
from .schemes.broadcast import broadcast_decode, broadcast_mds_deliver, broadcast_place
from .schemes.cmcnc import cmcnc_decode, cmcnc_deliver, cmcnc_grid_t, cmcnc_place
from .schemes.common import FileLibrary, all_demands, random_demand, random_library
from .schemes.proposed import (
    proposed_decode,
    proposed_deliver,
    proposed_place,
    storage_grid_t,
)
from .schemes.routing import routing_decode, routing_deliver
from .topology import Network

SCHEME_IDS = ("proposed", "routing", "cmcnc", "broadcast-mds")

EXHAUSTIVE_CAP = 4096


@dataclass(frozen=True)
class RatePoint:
    """(M, R1, R2) plus the per-file subfile count, tagged formula/measured."""

    M: Fraction
    r1: Fraction
    r2: Fraction
    subpacketization: int | None
    source: str

    def to_dict(self) -> dict:
        return {
            "M": str(self.M),
            "R1": str(self.r1),
            "R2": str(self.r2),
            "subpacketization": self.subpacketization,
            "source": self.source,
        }


def _check_params(K: int, h: int, r: int, N: int) -> int:
    """Validate shared parameters; returns the class count Kt = K*r/h."""
    if min(K, h, r, N) < 1 or r > h:
        raise ValueError(f"bad parameters K={K}, h={h}, r={r}, N={N}")
    kt = Fraction(K * r, h)
    if kt.denominator != 1:
        raise ValueError(f"K*r/h = {kt} is not an integer; not a resolvable geometry")
    return int(kt)


def _grid_int(value: Fraction) -> int | None:
    return int(value) if value.denominator == 1 else None


def _closed_form_r1(users: int, m: Fraction, r: int) -> Fraction:
    """Coded-multicast server rate over ``users`` sharing-candidates."""
    return Fraction(users) * (1 - m) / (r * (1 + users * m))


def formula_rates(scheme: str, K: int, h: int, r: int, N: int, M) -> RatePoint:
    """Closed-form rate point for one scheme.

    On the scheme's memory grid this is the exact closed form; between grid
    points, rates come from memory sharing (the lower convex envelope of
    the grid points).  Subpacketization is only defined on the grid.
    """
    kt = _check_params(K, h, r, N)
    M = Fraction(M)
    m = M / N
    if not 0 <= m <= 1:
        raise ValueError(f"M={M} outside 0..{N}")

    if scheme == "routing":
        t = _grid_int(kt * m)
        return RatePoint(
            M=M,
            r1=Fraction(K, h) * (1 - m),
            r2=(1 - m) / r,
            subpacketization=r * binomial(kt, t) if t is not None else None,
            source="formula",
        )
    if scheme == "proposed":
        t = _grid_int(kt * m)
        if t is not None:
            r1 = _closed_form_r1(kt, m, r)
        else:
            r1 = _scheme_envelope(kt, kt, N, r).value(M)
        return RatePoint(
            M=M,
            r1=r1,
            r2=(1 - m) / r,
            subpacketization=r * binomial(kt, t) if t is not None else None,
            source="formula",
        )
    if scheme == "cmcnc":
        t = _grid_int(K * m)
        if t is not None:
            r1 = _closed_form_r1(K, m, r)
        else:
            r1 = _scheme_envelope(K, K, N, r).value(M)
        return RatePoint(
            M=M,
            r1=r1,
            r2=r1,
            subpacketization=r * binomial(K, t) if t is not None else None,
            source="formula",
        )
    if scheme == "broadcast-mds":
        return RatePoint(
            M=M,
            r1=Fraction(N, r) * (1 - m),
            r2=(1 - m) / r,
            subpacketization=r,
            source="formula",
        )
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEME_IDS}")


def _scheme_envelope(users: int, steps: int, N: int, r: int) -> "Envelope":
    points = []
    for j in range(steps + 1):
        M = Fraction(j * N, steps)
        points.append((M, _closed_form_r1(users, M / N, r)))
    return memory_sharing_envelope(points)


def achievable_rate(K: int, h: int, r: int, N: int, M) -> RatePoint:
    """Best achievable (R1, R2) combining multicast and per-file broadcast.

    At each grid point R1 is the smaller of the class-symmetric multicast
    rate and the per-file broadcast rate (N/r)(1-m) — the latter wins when
    there are more classes than files and caches are small.  Off-grid
    values come from the lower convex envelope of those points.
    """
    kt = _check_params(K, h, r, N)
    M = Fraction(M)
    if not 0 <= M <= N:
        raise ValueError(f"M={M} outside 0..{N}")
    points = []
    for j in range(kt + 1):
        Mj = Fraction(j * N, kt)
        mj = Mj / N
        r1 = min(_closed_form_r1(kt, mj, r), Fraction(N, r) * (1 - mj))
        points.append((Mj, r1))
    env = memory_sharing_envelope(points)
    return RatePoint(
        M=M,
        r1=env.value(M),
        r2=(1 - M / N) / r,
        subpacketization=None,
        source="formula",
    )


# ---------------------------------------------------------------------------
# Memory sharing


@dataclass(frozen=True)
class Envelope:
    """Lower convex envelope of (M, value) points; piecewise linear."""

    vertices: tuple[tuple[Fraction, Fraction], ...]

    def value(self, M) -> Fraction:
        M = Fraction(M)
        left, right, w = self._segment(M)
        return w * left[1] + (1 - w) * right[1]

    def combination(self, M) -> list[tuple[Fraction, Fraction]]:
        """Corner points and weights whose mix achieves the envelope at M."""
        M = Fraction(M)
        left, right, w = self._segment(M)
        if w == 1:
            return [(left[0], Fraction(1))]
        if w == 0:
            return [(right[0], Fraction(1))]
        return [(left[0], w), (right[0], 1 - w)]

    def _segment(self, M: Fraction):
        xs = [v[0] for v in self.vertices]
        if not xs[0] <= M <= xs[-1]:
            raise ValueError(f"M={M} outside the envelope range {xs[0]}..{xs[-1]}")
        j = bisect.bisect_left(xs, M)
        if xs[j] == M:
            return self.vertices[j], self.vertices[j], Fraction(1)
        left, right = self.vertices[j - 1], self.vertices[j]
        w = (right[0] - M) / (right[0] - left[0])
        return left, right, w


def memory_sharing_envelope(points: Iterable[tuple]) -> Envelope:
    """Lower convex envelope of distinct-(M, value) points."""
    pts = sorted((Fraction(x), Fraction(y)) for x, y in points)
    if not pts:
        raise ValueError("need at least one point")
    if len({x for x, _ in pts}) != len(pts):
        raise ValueError("points must have distinct M values")
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return Envelope(vertices=tuple(hull))


# ---------------------------------------------------------------------------
# Ratio analytics


def binary_entropy_nats(p) -> float:
    """-p ln p - (1-p) ln(1-p), with 0 ln 0 = 0."""
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError(f"p={p} outside [0, 1]")
    acc = 0.0
    if p > 0:
        acc -= p * math.log(p)
    if p < 1:
        acc -= (1 - p) * math.log(1 - p)
    return acc


@dataclass(frozen=True)
class ComparisonRatios:
    """Multicast-vs-cmcnc advantage at one memory point."""

    r1_ratio: Fraction
    r2_ratio: Fraction
    subpack_ratio_exact: Fraction | None
    subpack_ratio_approx: float

    def to_dict(self) -> dict:
        return {
            "r1_ratio": str(self.r1_ratio),
            "r2_ratio": str(self.r2_ratio),
            "subpack_ratio_exact": (
                str(self.subpack_ratio_exact)
                if self.subpack_ratio_exact is not None
                else None
            ),
            "subpack_ratio_approx": self.subpack_ratio_approx,
        }


def comparison_ratios(K: int, h: int, r: int, N: int, M) -> ComparisonRatios:
    """Rate and subpacketization quotients of the class-symmetric scheme
    over cmcnc.

    The exact subfile-count quotient C(Kt, Kt*m)/C(K, K*m) needs M on both
    grids and is None otherwise; the entropy approximation
    exp(-K (1 - r/h) H_e(m)) is always returned and is only order-of-
    magnitude accurate.
    """
    kt = _check_params(K, h, r, N)
    M = Fraction(M)
    m = M / N
    if not 0 <= m <= 1:
        raise ValueError(f"M={M} outside 0..{N}")
    r1_ratio = (Fraction(1, K) + m) / (Fraction(1, kt) + m)
    r2_ratio = Fraction(1, K) + m
    t, tp = _grid_int(kt * m), _grid_int(K * m)
    exact = None
    if t is not None and tp is not None:
        exact = Fraction(binomial(kt, t), binomial(K, tp))
    approx = math.exp(-K * (1 - r / h) * binary_entropy_nats(m))
    return ComparisonRatios(
        r1_ratio=r1_ratio,
        r2_ratio=r2_ratio,
        subpack_ratio_exact=exact,
        subpack_ratio_approx=approx,
    )


# ---------------------------------------------------------------------------
# Simulation harness


def scheme_file_divisor(net: Network, n_files: int, M, scheme: str) -> int:
    """Byte divisor that makes every split in ``scheme`` exact at this M."""
    if scheme in ("proposed", "routing"):
        t = storage_grid_t(net, n_files, M)
        return net.r * binomial(net.num_classes, t)
    if scheme == "cmcnc":
        t = cmcnc_grid_t(net, n_files, M)
        return net.r * binomial(net.K, t)
    if scheme == "broadcast-mds":
        m = Fraction(M) / n_files
        if not 0 <= m <= 1:
            raise ValueError(f"M={M} outside 0..{n_files}")
        return net.r * m.denominator
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEME_IDS}")


def auto_file_bytes(
    net: Network, n_files: int, M_values: Sequence, schemes: Sequence[str]
) -> int:
    """Smallest file size (bytes) exact for every (scheme, M) combination."""
    size = 1
    for scheme in schemes:
        for M in M_values:
            size = math.lcm(size, scheme_file_divisor(net, n_files, M, scheme))
    return size


@dataclass(frozen=True)
class SchemeReport:
    """Outcome of one place->deliver->decode run."""

    scheme: str
    h: int
    r: int
    K: int
    num_classes: int
    n_files: int
    file_bits: int
    demand: tuple[int, ...]
    measured: RatePoint
    formula: RatePoint
    formula_match: bool
    decode_ok: bool
    log_digest: str

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "h": self.h,
            "r": self.r,
            "K": self.K,
            "Ktilde": self.num_classes,
            "N": self.n_files,
            "F_bits": self.file_bits,
            "demand": list(self.demand),
            "measured": self.measured.to_dict(),
            "formula": self.formula.to_dict(),
            "formula_match": self.formula_match,
            "decode_ok": self.decode_ok,
            "log_digest": self.log_digest,
        }


def _measure(net: Network, log, file_bits: int) -> tuple[Fraction, Fraction]:
    server = [log.server_bits(i) for i in range(1, net.h + 1)]
    relay = [
        log.relay_bits(i, u)
        for i in range(1, net.h + 1)
        for u in net._neighbors[i - 1]
    ]
    assert len(set(server)) == 1, f"server edges are not symmetric: {server}"
    assert len(set(relay)) == 1, f"relay edges are not symmetric: {relay}"
    return Fraction(max(server), file_bits), Fraction(max(relay), file_bits)


def _pipeline(net: Network, lib: FileLibrary, M, scheme: str, code: ErasureCode | None):
    """Returns (cache, deliver(demand) -> log, decode(user, demand, received))."""
    if scheme == "proposed":
        cache = proposed_place(net, lib, M)
        return (
            cache,
            lambda d: proposed_deliver(net, cache, d),
            lambda u, d, rx: proposed_decode(net, u, cache, d, rx),
        )
    if scheme == "routing":
        cache = proposed_place(net, lib, M)
        return (
            cache,
            lambda d: routing_deliver(net, cache, d),
            lambda u, d, rx: routing_decode(net, u, cache, d, rx),
        )
    if scheme == "cmcnc":
        cache = cmcnc_place(net, lib, M)
        mds = code if code is not None else make_code(net.h, net.r)
        return (
            cache,
            lambda d: cmcnc_deliver(net, cache, d, mds),
            lambda u, d, rx: cmcnc_decode(net, u, cache, d, rx, mds),
        )
    if scheme == "broadcast-mds":
        cache = broadcast_place(net, lib, M)
        mds = code if code is not None else make_code(net.h, net.r)
        return (
            cache,
            lambda d: broadcast_mds_deliver(net, lib, M, d, mds),
            lambda u, d, rx: broadcast_decode(net, u, cache, d, rx, mds),
        )
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEME_IDS}")


def _subpack(net: Network, n_files: int, M, scheme: str) -> int:
    if scheme == "broadcast-mds":
        return net.r
    return scheme_file_divisor(net, n_files, M, scheme)


def run_scheme(
    net: Network,
    lib: FileLibrary,
    M,
    demand: tuple[int, ...],
    scheme: str,
    code: ErasureCode | None = None,
) -> SchemeReport:
    """Execute place->deliver->decode and compare measured rates to formulas."""
    report, _ = run_scheme_with_log(net, lib, M, demand, scheme, code)
    return report


def run_scheme_with_log(
    net: Network,
    lib: FileLibrary,
    M,
    demand: tuple[int, ...],
    scheme: str,
    code: ErasureCode | None = None,
):
    """Like :func:`run_scheme` but also returns the transmission log."""
    M = Fraction(M)
    cache, deliver, decode_user = _pipeline(net, lib, M, scheme, code)
    log = deliver(demand)
    r1, r2 = _measure(net, log, lib.file_bits)
    decode_ok = all(
        decode_user(u, demand, log.to_user(u)) == lib.file(demand[u])
        for u in range(net.K)
    )
    measured = RatePoint(
        M=M,
        r1=r1,
        r2=r2,
        subpacketization=_subpack(net, lib.n_files, M, scheme),
        source="measured",
    )
    formula = formula_rates(scheme, net.K, net.h, net.r, lib.n_files, M)
    report = SchemeReport(
        scheme=scheme,
        h=net.h,
        r=net.r,
        K=net.K,
        num_classes=net.num_classes,
        n_files=lib.n_files,
        file_bits=lib.file_bits,
        demand=tuple(demand),
        measured=measured,
        formula=formula,
        formula_match=(r1 == formula.r1 and r2 == formula.r2),
        decode_ok=decode_ok,
        log_digest=log.digest(),
    )
    return report, log


@dataclass(frozen=True)
class VerificationReport:
    """Decode verification over many demand vectors."""

    scheme: str
    n_files: int
    M: Fraction
    mode: str
    seed: int | None
    runs: int
    failures: tuple[tuple, ...]
    worst_server_bits: int
    worst_relay_bits: int
    rate_pairs: tuple[tuple[Fraction, Fraction], ...]
    demand_independent: bool
    library_seed: int
    file_bytes: int

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "N": self.n_files,
            "M": str(self.M),
            "mode": self.mode,
            "seed": self.seed,
            "runs": self.runs,
            "failures": [list(f) for f in self.failures],
            "worst_server_bits": self.worst_server_bits,
            "worst_relay_bits": self.worst_relay_bits,
            "rate_pairs": [[str(a), str(b)] for a, b in self.rate_pairs],
            "demand_independent": self.demand_independent,
            "library_seed": self.library_seed,
            "file_bytes": self.file_bytes,
            "passed": self.passed,
        }


def verify_all_demands(
    net: Network,
    n_files: int,
    M,
    scheme: str,
    mode: str = "exhaustive",
    seed: int | None = None,
    count: int | None = None,
    file_bytes: int | None = None,
) -> VerificationReport:
    """Run deliver->decode for many demand vectors against one placement.

    ``exhaustive`` covers all N^K demand vectors and refuses above
    EXHAUSTIVE_CAP; ``sampled`` draws ``count`` vectors from a generator
    seeded with ``seed``.  The library is seeded and recorded, so any
    failure is replayable.
    """
    M = Fraction(M)
    if mode == "exhaustive":
        total = n_files**net.K
        if total > EXHAUSTIVE_CAP:
            raise ValueError(
                f"exhaustive verification needs N^K <= {EXHAUSTIVE_CAP}, "
                f"got {total}; use sampled mode"
            )
        demands: Iterable[tuple[int, ...]] = all_demands(net, n_files)
    elif mode == "sampled":
        if seed is None or count is None:
            raise ValueError("sampled mode needs seed and count")
        rng = random.Random(seed)
        demands = [random_demand(net, n_files, rng) for _ in range(count)]
    else:
        raise ValueError(f"unknown mode {mode!r}; expected exhaustive or sampled")

    library_seed = seed if seed is not None else 0
    if file_bytes is None:
        file_bytes = auto_file_bytes(net, n_files, [M], [scheme])
    lib = random_library(n_files, file_bytes, seed=library_seed)

    cache, deliver, decode_user = _pipeline(net, lib, M, scheme, None)
    failures = []
    rate_pairs = []
    worst_server = worst_relay = 0
    runs = 0
    for demand in demands:
        runs += 1
        log = deliver(demand)
        server = max(log.server_bits(i) for i in range(1, net.h + 1))
        relay = max(
            (
                log.relay_bits(i, u)
                for i in range(1, net.h + 1)
                for u in net._neighbors[i - 1]
            ),
            default=0,
        )
        worst_server = max(worst_server, server)
        worst_relay = max(worst_relay, relay)
        pair = (Fraction(server, lib.file_bits), Fraction(relay, lib.file_bits))
        if pair not in rate_pairs:
            rate_pairs.append(pair)
        for u in range(net.K):
            try:
                out = decode_user(u, demand, log.to_user(u))
            except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
                failures.append((demand, u, f"{type(exc).__name__}: {exc}"))
                continue
            if out != lib.file(demand[u]):
                failures.append((demand, u, "decoded bytes differ"))
    return VerificationReport(
        scheme=scheme,
        n_files=n_files,
        M=M,
        mode=mode,
        seed=seed,
        runs=runs,
        failures=tuple(failures),
        worst_server_bits=worst_server,
        worst_relay_bits=worst_relay,
        rate_pairs=tuple(rate_pairs),
        demand_independent=len(rate_pairs) <= 1,
        library_seed=library_seed,
        file_bytes=file_bytes,
    )
