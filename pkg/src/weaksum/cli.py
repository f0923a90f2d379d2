"""Command-line front end: analyze -> synthesize -> simulate -> audit.

Every subcommand reads and writes JSON files, so stages can be run
separately and diffed.  Exit codes: 0 ok, 1 invalid input, 2 failed check
or internal fault, 3 oracle requested but skipped.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import audit as audit_mod
from .errors import CorrectnessError, RetryExhausted, WeakSumError
from .pattern import load_pattern
from .protocol import simulate
from .ratecalc import format_fraction, optimal_rate, rate_report
from .scheme import load_scheme, save_scheme, synthesize

logger = logging.getLogger("weaksum")

EXIT_OK, EXIT_INVALID, EXIT_FAIL, EXIT_SKIPPED = 0, 1, 2, 3
DEFAULT_SURROGATE = 3


@dataclass
class RunConfig:
    subcommand: str
    pattern_path: Path | None = None
    scheme_path: Path | None = None
    out_path: Path | None = None
    q: int = 2
    seed: int = 0
    oracle: bool = False
    rounds: int = 1
    surrogate_prime: int = DEFAULT_SURROGATE


def _write_json(path: Path | None, obj) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _summary_line(analysis) -> str:
    parts = [f"case={analysis.case_label.value}", f"a*={analysis.a_star}"]
    if analysis.lp_solution is not None:
        parts.append(f"b*={format_fraction(analysis.lp_solution.b_star)}")
    parts.append(f"R*={format_fraction(analysis.rate)}")
    return " ".join(parts)


def cmd_analyze(cfg: RunConfig) -> int:
    pattern = load_pattern(cfg.pattern_path)
    analysis, _ = optimal_rate(pattern)
    _write_json(cfg.out_path, rate_report(analysis))
    print(_summary_line(analysis))
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig) -> int:
    pattern = load_pattern(cfg.pattern_path)
    analysis, _ = optimal_rate(pattern)
    scheme = synthesize(pattern, analysis, seed=cfg.seed, q=cfg.q)
    if cfg.out_path is not None:
        cfg.out_path.parent.mkdir(parents=True, exist_ok=True)
        save_scheme(scheme, cfg.out_path)
    print(f"case={scheme.case_label.value} L={scheme.L} source_dim={scheme.source_dim} "
          f"p={scheme.p} retries={scheme.retry_count} hash={scheme.hash[:16]}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    scheme = load_scheme(cfg.scheme_path)
    transcripts = simulate(scheme, cfg.rounds, cfg.seed)
    _write_json(cfg.out_path, {
        "scheme_hash": scheme.hash,
        "seed": cfg.seed,
        "rounds": [t.to_json() for t in transcripts],
    })
    print(f"rounds={len(transcripts)} decoded=ok message_len={scheme.L}")
    return EXIT_OK


def _oracle_records(scheme, cfg: RunConfig) -> tuple[list[dict], str | None]:
    """Re-synthesize at the surrogate prime and cross-check every pair."""
    pattern = scheme.pattern
    analysis, _ = optimal_rate(pattern)
    try:
        small = synthesize(pattern, analysis, seed=scheme.seed, q=cfg.q,
                           prime=cfg.surrogate_prime)
    except RetryExhausted:
        return [], f"surrogate F_{cfg.surrogate_prime} never reached generic position"
    if not audit_mod.oracle_feasible(small):
        n = small.K * small.L + small.source_dim
        return [], f"{small.p}^{n} atoms exceed the enumeration limit"
    return audit_mod.oracle_crosscheck(small, pattern), None


def cmd_audit(cfg: RunConfig) -> int:
    scheme = load_scheme(cfg.scheme_path)
    pattern = load_pattern(cfg.pattern_path) if cfg.pattern_path else scheme.pattern
    analysis, _ = optimal_rate(pattern)
    report = audit_mod.converse_audit(scheme, pattern, analysis)
    skipped = None
    if cfg.oracle:
        report.oracle, skipped = _oracle_records(scheme, cfg)
        if skipped:
            report.notes.append(f"oracle skipped: {skipped}")
    _write_json(cfg.out_path, report.to_json())
    failed = report.failures()
    for item in failed:
        print(f"FAIL {item.check} {item.subject}: {format_fraction(item.value)} "
              f"{item.relation} {format_fraction(item.bound)}")
    bad_oracle = [o for o in report.oracle if not o["ok"]]
    for o in bad_oracle:
        print(f"FAIL oracle pair {o['pair']}: rank {o['rank_mi']} vs enumeration {o['oracle']}")
    print(f"audit {'pass' if report.passed else 'FAIL'}: {len(report.items)} checks, "
          f"{len(report.oracle)} oracle pairs" + (f" ({skipped})" if skipped else ""))
    if not report.passed:
        return EXIT_FAIL
    return EXIT_SKIPPED if skipped else EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    scheme = load_scheme(cfg.scheme_path)
    records, skipped = _oracle_records(scheme, cfg)
    _write_json(cfg.out_path, {"scheme_hash": scheme.hash, "surrogate_prime": cfg.surrogate_prime,
                               "pairs": records, "skipped": skipped})
    if skipped:
        print(f"oracle skipped: {skipped}")
        return EXIT_SKIPPED
    ok = all(r["ok"] for r in records)
    print(f"oracle {'agree' if ok else 'DISAGREE'} on {len(records)} pairs")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weaksum", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--pattern", type=Path)
        sp.add_argument("--scheme", type=Path)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--q", type=int, default=2, help="base field size (prime)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rounds", type=int, default=1)
        sp.add_argument("--oracle", action="store_true")
        sp.add_argument("--surrogate-prime", type=int, default=DEFAULT_SURROGATE,
                        help="small prime used for brute-force enumeration")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    seed = ns.seed
    env = os.environ.get("WSS_SEED")
    if env:
        seed = int(env, 0)
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed {seed} is not a 64-bit unsigned value")
    return RunConfig(ns.subcommand, ns.pattern, ns.scheme, ns.out, ns.q, seed,
                     ns.oracle, ns.rounds, ns.surrogate_prime)


_NEEDS = {
    "analyze": ("pattern_path",),
    "synthesize": ("pattern_path",),
    "simulate": ("scheme_path",),
    "audit": ("scheme_path",),
    "oracle": ("scheme_path",),
}


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        for attr in _NEEDS[cfg.subcommand]:
            path = getattr(cfg, attr)
            if path is None or not path.exists():
                flag = "--" + attr.split("_")[0]
                print(f"REJECT_INPUT: {flag} must name an existing file", file=sys.stderr)
                return EXIT_INVALID
        if cfg.rounds < 0:
            raise ValueError("--rounds must be non-negative")
        return COMMANDS[cfg.subcommand](cfg)
    except RetryExhausted as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    except CorrectnessError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    except WeakSumError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, ValueError) else EXIT_FAIL
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"REJECT_INPUT: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
