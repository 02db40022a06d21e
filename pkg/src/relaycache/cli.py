"""Command-line front end.

Subcommands:

* ``topology`` — build or load a network, validate it, print a summary,
  optionally save the canonical topology file.
* ``run`` — one scheme, one demand vector: dump the transmission log and a
  report with measured-vs-formula rates.
* ``verify`` — exhaustive or sampled decode verification.
* ``sweep`` — (M grid) x (schemes) simulation table as CSV, formula and
  measured columns side by side.
* ``compare`` — closed-form rate/subpacketization quotients of the
  class-symmetric scheme over cmcnc.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
Rates in CSV output are exact fraction strings so identical configurations
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .harness import (
    SCHEME_IDS,
    auto_file_bytes,
    comparison_ratios,
    run_scheme,
    run_scheme_with_log,
    verify_all_demands,
)
from .schemes.common import (
    GridError,
    SubpacketizationError,
    distinct_demand,
    random_demand,
    random_library,
    uniform_demand,
)
from .topology import (
    Network,
    NotResolvableError,
    affine_plane,
    combination_network,
    load_network,
    save_network,
)

DEFAULT_SCHEMES = ("proposed", "routing", "cmcnc")
DEMAND_MODES = ("distinct", "all-same", "seeded-random", "exhaustive")


class ConfigError(ValueError):
    """Invalid command line or configuration file."""


@dataclass
class ExperimentConfig:
    command: str
    net: Network
    topology_spec: str
    n_files: int | None = None
    file_bits: int | str = "auto"
    m_values: list[Fraction] = field(default_factory=list)
    schemes: list[str] = field(default_factory=list)
    demand_mode: str = "distinct"
    count: int = 100
    seed: int = 0
    out: Path | None = None
    fmt: str = "csv"


def _build_network(spec: str) -> Network:
    if ":" in spec:
        kind, _, params = spec.partition(":")
        try:
            if kind == "comb":
                h, r = (int(x) for x in params.split(","))
                return combination_network(h, r)
            if kind == "affine":
                return affine_plane(int(params))
        except NotResolvableError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad topology spec {spec!r}: {exc}") from None
        raise ConfigError(f"unknown topology generator {kind!r} (use comb: or affine:)")
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"topology file {spec!r} does not exist")
    return load_network(path)


def _parse_m_values(text: str, net: Network, n_files: int) -> list[Fraction]:
    if text == "grid":
        kt = net.num_classes
        return [Fraction(j * n_files, kt) for j in range(kt + 1)]
    try:
        values = [Fraction(part) for part in text.split(",") if part != ""]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad --M value list {text!r}") from None
    if not values:
        raise ConfigError("--M list is empty")
    for v in values:
        if not 0 <= v <= n_files:
            raise ConfigError(f"M={v} outside 0..{n_files}")
    return values


def _parse_schemes(text: str) -> list[str]:
    names = list(DEFAULT_SCHEMES) if text == "all" else text.split(",")
    for name in names:
        if name not in SCHEME_IDS:
            raise ConfigError(
                f"unknown scheme {name!r}; expected one of {SCHEME_IDS} or 'all'"
            )
    return names


_FLAG_DEFAULTS = {
    "topology": None,
    "N": None,
    "F": "auto",
    "M": "grid",
    "schemes": "all",
    "demands": None,
    "count": 100,
    "seed": 0,
    "out": None,
    "format": "csv",
}


def _argument_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaycache",
        description="Coded caching over resolvable two-hop relay networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("topology", "run", "verify", "sweep", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON file with flag defaults")
        p.add_argument("--topology", help="comb:h,r | affine:q | file")
        p.add_argument("--N", type=int, help="number of files")
        p.add_argument("--F", help="file size in bits, or 'auto'")
        p.add_argument("--M", help="comma list of sizes, or 'grid'")
        p.add_argument("--schemes", help="comma list, or 'all'")
        p.add_argument("--demands", choices=DEMAND_MODES)
        p.add_argument("--count", type=int, help="sampled demand count")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", dest="format", choices=("csv", "structured"))
    return parser


def _merge_config_file(ns: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config JSON; explicit flags win."""
    from_file: dict = {}
    if ns.config is not None:
        path = Path(ns.config)
        if not path.exists():
            raise ConfigError(f"config file {ns.config!r} does not exist")
        try:
            from_file = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file {ns.config!r}: {exc}") from None
        if not isinstance(from_file, dict):
            raise ConfigError("config file must contain a JSON object")
        unknown = set(from_file) - set(_FLAG_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config file field(s): {sorted(unknown)}")
    for key, default in _FLAG_DEFAULTS.items():
        if getattr(ns, key) is None:
            setattr(ns, key, from_file.get(key, default))
    for key in ("N", "count", "seed"):
        value = getattr(ns, key)
        if value is not None and not isinstance(value, int):
            raise ConfigError(f"config field {key!r} must be an integer")
    return ns


def parse_config(argv: list[str]) -> ExperimentConfig:
    """Validate argv (plus optional --config file) into an ExperimentConfig.

    A ConfigError names the first offending field; command-line flags
    override config-file values.
    """
    parser = _argument_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit:
        raise ConfigError("invalid command line (see usage above)") from None
    ns = _merge_config_file(ns)

    if ns.topology is None:
        raise ConfigError("--topology is required (flag or config file)")
    if ns.command != "topology" and ns.N is None:
        raise ConfigError(f"--N is required for {ns.command}")
    net = _build_network(ns.topology)
    cfg = ExperimentConfig(
        command=ns.command,
        net=net,
        topology_spec=ns.topology,
        n_files=ns.N,
        seed=ns.seed,
        count=ns.count,
        out=Path(ns.out) if ns.out else None,
        fmt=ns.format,
    )
    if ns.command == "topology":
        return cfg

    if ns.N is None or ns.N < 1:
        raise ConfigError(f"--N must be positive, got {ns.N}")
    cfg.m_values = _parse_m_values(ns.M, net, ns.N)
    cfg.schemes = _parse_schemes(ns.schemes)
    if ns.command == "run" and len(cfg.schemes) > 1:
        raise ConfigError("run takes a single scheme (use --schemes <name>)")

    if ns.F == "auto":
        cfg.file_bits = "auto"
    else:
        try:
            bits = int(ns.F)
        except ValueError:
            raise ConfigError(
                f"--F must be an integer bit count or 'auto', got {ns.F!r}"
            ) from None
        if bits < 8 or bits % 8:
            raise ConfigError(f"--F must be a positive multiple of 8, got {bits}")
        cfg.file_bits = bits

    if ns.demands is None:
        # Distinct demands need one file per user; fall back when short.
        cfg.demand_mode = "distinct" if ns.N >= net.K else "seeded-random"
    else:
        cfg.demand_mode = ns.demands
    if cfg.demand_mode == "distinct" and ns.N < net.K:
        raise ConfigError(f"--demands distinct needs N >= K ({ns.N} < {net.K})")
    if cfg.demand_mode == "exhaustive" and ns.command != "verify":
        raise ConfigError("--demands exhaustive is only valid for verify")
    if ns.command == "verify" and cfg.demand_mode in ("distinct", "all-same"):
        raise ConfigError("verify needs --demands exhaustive or seeded-random")
    return cfg


def _file_bytes(cfg: ExperimentConfig) -> int:
    if cfg.file_bits == "auto":
        return auto_file_bytes(cfg.net, cfg.n_files, cfg.m_values, cfg.schemes)
    return int(cfg.file_bits) // 8


def _demand(cfg: ExperimentConfig) -> tuple[int, ...]:
    if cfg.demand_mode == "distinct":
        return distinct_demand(cfg.net, cfg.n_files)
    if cfg.demand_mode == "all-same":
        return uniform_demand(cfg.net, 1)
    import random as _random

    return random_demand(cfg.net, cfg.n_files, _random.Random(cfg.seed))


def _ensure_out(cfg: ExperimentConfig) -> Path | None:
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


def _cmd_topology(cfg: ExperimentConfig) -> int:
    net = cfg.net
    print(
        f"h={net.h} r={net.r} K={net.K} Ktilde={net.num_classes} "
        f"(valid resolvable design)"
    )
    for idx, cls in enumerate(net.classes, start=1):
        members = " ".join("{" + ",".join(map(str, net.users[i])) + "}" for i in cls)
        print(f"class {idx}: {members}")
    out = _ensure_out(cfg)
    if out is not None:
        save_network(net, out / "topology.json")
        print(f"saved {out / 'topology.json'}")
    return 0


def _cmd_run(cfg: ExperimentConfig) -> int:
    if len(cfg.m_values) != 1:
        raise ConfigError("run takes a single --M value")
    scheme = cfg.schemes[0]
    lib = random_library(cfg.n_files, _file_bytes(cfg), cfg.seed)
    demand = _demand(cfg)
    M = cfg.m_values[0]
    report, log = run_scheme_with_log(cfg.net, lib, M, demand, scheme)

    out = _ensure_out(cfg)
    if out is not None:
        (out / f"run_{scheme}_log.json").write_text(log.to_json())
        (out / f"run_{scheme}_report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    ok = report.decode_ok and report.formula_match
    print(
        f"{scheme}: M={M} R1={report.measured.r1} R2={report.measured.r2} "
        f"decode={'ok' if report.decode_ok else 'FAIL'} "
        f"formula={'match' if report.formula_match else 'MISMATCH'} "
        f"signals={sum(len(v) for v in log.server_edges.values())}"
    )
    return 0 if ok else 1


def _cmd_verify(cfg: ExperimentConfig) -> int:
    mode = "exhaustive" if cfg.demand_mode == "exhaustive" else "sampled"
    out = _ensure_out(cfg)
    reports = []
    ok = True
    for scheme in cfg.schemes:
        for M in cfg.m_values:
            report = verify_all_demands(
                cfg.net,
                cfg.n_files,
                M,
                scheme,
                mode=mode,
                seed=cfg.seed if mode == "sampled" else None,
                count=cfg.count if mode == "sampled" else None,
            )
            reports.append(report)
            ok = ok and report.passed
            good = report.runs - len({(f[0]) for f in report.failures})
            print(f"{scheme} M={M}: {good}/{report.runs} demand vectors decode")
    if out is not None:
        payload = [r.to_dict() for r in reports]
        (out / "verify.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )
    return 0 if ok else 1


SWEEP_COLUMNS = (
    "scheme,h,r,K,Ktilde,N,M,R1_formula,R1_measured,R2_formula,R2_measured,"
    "subpacketization,decode_ok"
)


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    lib = random_library(cfg.n_files, _file_bytes(cfg), cfg.seed)
    demand = _demand(cfg)
    rows = []
    reports = []
    ok = True
    for scheme in cfg.schemes:
        for M in sorted(cfg.m_values):
            report = run_scheme(cfg.net, lib, M, demand, scheme)
            reports.append(report)
            ok = ok and report.decode_ok and report.formula_match
            rows.append(
                ",".join(
                    [
                        scheme,
                        str(report.h),
                        str(report.r),
                        str(report.K),
                        str(report.num_classes),
                        str(report.n_files),
                        str(M),
                        str(report.formula.r1),
                        str(report.measured.r1),
                        str(report.formula.r2),
                        str(report.measured.r2),
                        str(report.formula.subpacketization),
                        "true" if report.decode_ok else "false",
                    ]
                )
            )
    csv_text = SWEEP_COLUMNS + "\n" + "\n".join(rows) + "\n"
    out = _ensure_out(cfg)
    if cfg.fmt == "structured":
        text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
        if out is not None:
            (out / "sweep.json").write_text(text)
        else:
            print(text, end="")
    else:
        if out is not None:
            (out / "sweep.csv").write_text(csv_text)
        else:
            print(csv_text, end="")
    if out is not None:
        print(f"sweep {'ok' if ok else 'FAILED'}: {len(rows)} cells -> {out}")
    return 0 if ok else 1


COMPARE_COLUMNS = (
    "h,r,K,Ktilde,N,M,r1_ratio,r2_ratio,subpack_ratio_exact,subpack_ratio_approx"
)


def _cmd_compare(cfg: ExperimentConfig) -> int:
    net = cfg.net
    rows = []
    records = []
    for M in sorted(cfg.m_values):
        ratios = comparison_ratios(net.K, net.h, net.r, cfg.n_files, M)
        records.append({"M": str(M), **ratios.to_dict()})
        rows.append(
            ",".join(
                [
                    str(net.h),
                    str(net.r),
                    str(net.K),
                    str(net.num_classes),
                    str(cfg.n_files),
                    str(M),
                    str(ratios.r1_ratio),
                    str(ratios.r2_ratio),
                    str(ratios.subpack_ratio_exact)
                    if ratios.subpack_ratio_exact is not None
                    else "",
                    repr(ratios.subpack_ratio_approx),
                ]
            )
        )
    out = _ensure_out(cfg)
    if cfg.fmt == "structured":
        text = json.dumps(records, indent=2, sort_keys=True) + "\n"
        if out is not None:
            (out / "compare.json").write_text(text)
        else:
            print(text, end="")
    else:
        text = COMPARE_COLUMNS + "\n" + "\n".join(rows) + "\n"
        if out is not None:
            (out / "compare.csv").write_text(text)
        else:
            print(text, end="")
    return 0


def execute(cfg: ExperimentConfig) -> int:
    """Dispatch a validated config; returns the process exit code."""
    handlers = {
        "topology": _cmd_topology,
        "run": _cmd_run,
        "verify": _cmd_verify,
        "sweep": _cmd_sweep,
        "compare": _cmd_compare,
    }
    try:
        return handlers[cfg.command](cfg)
    except (ConfigError, NotResolvableError, GridError, SubpacketizationError) as exc:
        _error_record(exc)
        return 2


def _error_record(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except (ConfigError, NotResolvableError, ValueError) as exc:
        _error_record(exc)
        return 2
    return execute(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
