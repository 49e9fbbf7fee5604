"""Command-line entry point: ``icokd <subcommand> [options]``.

Subcommands
-----------
simulate     Monte Carlo protocol session; per-round records plus a summary.
attack-scan  Analytic vs switch-evaluated detection for random attack parameters.
fig-mi       Information curves against the detection probability.
theorem1     Undetectable joint attacks: family vs non-family trials.
dco          Two-way definite-order protocol, optionally with a probe attack.
optics       Sagnac interferometer intensities (``--table`` for all settings).

Exit status is 0 on success, 1 when a module assertion fails or a file cannot
be written, and 2 for invalid arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import secrets
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import attacks, dco, optics, procmat, protocol
from .attacks import AttackParams

SEED_ENV = "ICOKD_SEED"
PARAM_FIELDS = ("F", "Fp", "x", "y", "xp", "yp")
SIMULATE_ATTACKS = ("none", "intercept-z", "yves-intercept-z", "family", "params:F=..,Fp=..,x=..,y=..,xp=..,yp=..")
DCO_ATTACKS = ("none", "probe", "usd-probe")
SCAN_FIELDS = ("F", "Fp", "x", "y", "xp", "yp", "p_detect", "p_detect_numeric", "p_error")
FIG_MI_FIELDS = ("d", "H_ZA", "H_AB_z", "H_AB_x_lower", "H_AB_x_upper")
OPTICS_FIELDS = ("alice_angle", "bob_angle", "P", "P_setting", "detection_ratio")


class AttackSpecError(ValueError):
    """Invalid ``--attack`` value; the message names the offending field."""


def parse_attack(spec: str, seed: int = 0):
    """Parse an ``--attack`` value for ``simulate``.

    ``none``, ``intercept-z``, ``yves-intercept-z``, ``family`` (a random
    undetectable joint attack drawn from ``seed``) or
    ``params:F=..,Fp=..,x=..,y=..,xp=..,yp=..`` with omitted fields at their
    defaults (F = F' = 1, angles 0).
    """
    spec = spec.strip()
    if spec == "none":
        return None
    if spec == "intercept-z":
        return AttackParams.intercept_z()
    if spec == "yves-intercept-z":
        return AttackParams.yves_intercept_z()
    if spec == "family":
        return procmat.random_family_attack(np.random.default_rng(seed))
    if spec.startswith("params:"):
        values = {}
        for item in filter(None, spec[len("params:"):].split(",")):
            name, sep, raw = item.partition("=")
            name = name.strip()
            if not sep:
                raise AttackSpecError(f"attack field {name!r}: expected name=value")
            if name not in PARAM_FIELDS:
                raise AttackSpecError(f"attack field {name!r}: unknown (expected one of {', '.join(PARAM_FIELDS)})")
            try:
                values[name] = float(raw)
            except ValueError:
                raise AttackSpecError(f"attack field {name!r}: not a number: {raw!r}") from None
        try:
            return AttackParams(**values)
        except ValueError as e:
            field = next((f for f in PARAM_FIELDS if str(e).startswith(f + " ")), "params")
            raise AttackSpecError(f"attack field {field!r}: {e}") from None
    raise AttackSpecError(f"attack field 'attack': unknown value {spec!r} (expected one of {', '.join(SIMULATE_ATTACKS)})")


def parse_dco_attack(spec: str):
    if spec == "none":
        return None
    if spec == "probe":
        return dco.probe_only()
    if spec == "usd-probe":
        return dco.usd_probe()
    raise AttackSpecError(f"attack field 'attack': unknown value {spec!r} (expected one of {', '.join(DCO_ATTACKS)})")


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else ``$ICOKD_SEED``, else a fresh one printed to stderr."""
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise AttackSpecError(f"field {SEED_ENV!r}: not an integer: {env!r}") from None
    seed = secrets.randbits(32)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return protocol.fmt(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _open_out(path: str | None):
    if path is None:
        return sys.stdout
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise OSError(f"cannot write {path}: directory {p.parent} does not exist")
    return open(p, "w", newline="")


def emit_table(rows: Sequence[dict], fields: Sequence[str], out: str | None, fmt_name: str) -> None:
    """Write rows as CSV (fixed headers) or as a JSON list of objects."""
    rows = [{k: _clean(r[k]) for k in fields} for r in rows]
    stream = _open_out(out)
    try:
        if fmt_name == "csv":
            w = csv.DictWriter(stream, fieldnames=list(fields), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        else:
            stream.write(json.dumps(rows, indent=1) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def emit_document(doc: dict, out: str | None) -> None:
    stream = _open_out(out)
    try:
        stream.write(json.dumps(_clean(doc), indent=1) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def summary_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".summary.json"))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed)
    attack = parse_attack(args.attack, seed)
    config = {"rounds": args.rounds, "attack": args.attack}
    t = protocol.run_session(args.rounds, attack, seed=seed, workers=args.workers, config=config)
    doc = protocol.summary_document(t)
    if args.out is None:
        emit_document(doc, None)
        return 0
    stream = _open_out(args.out)
    with stream:
        protocol.write_records(t.records(), stream, args.format)
    emit_document(doc, summary_path(args.out))
    print(json.dumps(doc["stats"]))
    return 0


def cmd_attack_scan(args) -> int:
    seed = resolve_seed(args.seed)
    if args.attack is not None:
        p = parse_attack(args.attack, seed)
        if not isinstance(p, AttackParams):
            raise AttackSpecError("attack field 'attack': attack-scan needs an (F, F', x, y, x', y') attack")
        params = [p]
    else:
        rng = np.random.default_rng(seed)
        params = [AttackParams.random(rng) for _ in range(args.trials)]
    rows = []
    for p in params:
        row = {f: getattr(p, f) for f in PARAM_FIELDS}
        row["p_detect"] = attacks.p_detect_analytic(p)
        row["p_detect_numeric"] = attacks.p_detect_numeric(p)
        row["p_error"] = attacks.p_error(p)
        if abs(row["p_detect"] - row["p_detect_numeric"]) > 1e-9:
            raise AssertionError(f"analytic and switch detection differ for {p}")
        rows.append(row)
    emit_table(rows, SCAN_FIELDS, args.out, args.format)
    return 0


def _d_grid(spec: str):
    """``N`` evenly spaced points on [0, 1/8], or a comma-separated list."""
    if "," not in spec:
        try:
            n = int(spec)
        except ValueError:
            raise AttackSpecError(f"field 'd-grid': not a count or list: {spec!r}") from None
        if n < 2:
            raise AttackSpecError("field 'd-grid': need at least 2 points")
        return n
    try:
        grid = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise AttackSpecError(f"field 'd-grid': not a list of numbers: {spec!r}") from None
    if any(not 0.0 <= d <= 0.125 for d in grid):
        raise AttackSpecError("field 'd-grid': values must lie in [0, 1/8]")
    return grid


def cmd_fig_mi(args) -> int:
    rows = attacks.fig_mi_table(_d_grid(args.d_grid))
    emit_table(rows, FIG_MI_FIELDS, args.out, args.format)
    return 0


def cmd_theorem1(args) -> int:
    seed = resolve_seed(args.seed)
    report = procmat.theorem1_verify(args.trials, seed=seed, workers=args.workers)
    doc = {"seed": seed, **report.as_dict()}
    emit_document(doc, args.out)
    return 0 if report.passed else 1


def cmd_dco(args) -> int:
    seed = resolve_seed(args.seed)
    eve = parse_dco_attack(args.attack)
    rates = dco.run_two_way(args.rounds, eve, seed=seed)
    doc = {"seed": seed, "config": {"rounds": args.rounds, "attack": args.attack},
           "stats": rates, "exact": dco.exact_rates(eve)}
    emit_document(doc, args.out)
    return 0


def cmd_optics(args) -> int:
    if args.table:
        emit_table(optics.table_sweep(), OPTICS_FIELDS, args.out, args.format)
        return 0
    cfg = optics.OpticalConfig(args.input, args.alice, args.bob, args.eve)
    emit_document(optics.sagnac_run(cfg), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _angle(text: str) -> float:
    """Radians, or a multiple of pi such as ``pi/4`` or ``-pi/2``."""
    t = text.strip().replace(" ", "")
    if "pi" not in t:
        return float(t)
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    num, _, den = t.partition("/")
    coef = num.replace("pi", "").rstrip("*") or "1"
    try:
        return sign * float(coef) * math.pi / (float(den) if den else 1.0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV}, else a fresh seed printed to stderr)")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--workers", type=int, default=protocol.default_workers())

    parser = argparse.ArgumentParser(prog="icokd", description="Key distribution through a quantum switch.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo protocol session")
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--attack", default="none", help=" | ".join(SIMULATE_ATTACKS))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack-scan", parents=[common], help="detection over random attack parameters")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--attack", default=None, help="single params:... attack instead of random ones")
    p.set_defaults(func=cmd_attack_scan)

    p = sub.add_parser("fig-mi", parents=[common], help="information curves against detection")
    p.add_argument("--d-grid", default="51", help="point count on [0, 1/8] or comma-separated d values")
    p.set_defaults(func=cmd_fig_mi)

    p = sub.add_parser("theorem1", parents=[common], help="undetectable joint attacks")
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_theorem1)

    p = sub.add_parser("dco", parents=[common], help="two-way definite-order protocol")
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--attack", default="none", help=" | ".join(DCO_ATTACKS))
    p.set_defaults(func=cmd_dco)

    p = sub.add_parser("optics", parents=[common], help="Sagnac interferometer model")
    p.add_argument("--table", action="store_true", help="sweep all eight same-basis settings")
    p.add_argument("--input", choices=tuple(optics.CIRCULAR), default="+i")
    p.add_argument("--alice", type=_angle, default=0.0)
    p.add_argument("--bob", type=_angle, default=0.0)
    p.add_argument("--eve", type=_angle, default=None)
    p.set_defaults(func=cmd_optics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("rounds", "trials"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be at least 1")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except AttackSpecError as e:
        print(f"icokd {args.command}: {e}", file=sys.stderr)
        return 2
    except AssertionError as e:
        print(f"icokd {args.command}: assertion failed: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"icokd {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
