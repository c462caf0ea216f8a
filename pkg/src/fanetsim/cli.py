"""Command-line front end.

    fanetsim run --protocol hirol --speed 20 --seeds 1,2
    fanetsim sweep --speeds 5,10,15,20 --seeds 1-10 --out results/
    fanetsim train-ann --out weights.txt

Settings come from defaults, then a ``key = value`` config file, then flags.
Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .ann import load_weights, save_weights
from .experiments import SweepError, SweepSpec, format_overhead, format_table, run_cell, run_sweep
from .scenario import PROTOCOLS, SWEEP_SPEEDS, Scenario, ScenarioError
from .training import train_classifier

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# ---- value parsing -----------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_like(default, text: str, key: str):
    """Convert ``text`` to the type of ``default``."""
    text = text.strip()
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, str):
        return text
    if isinstance(default, tuple):
        elem = default[0] if default else 0.0
        return tuple(_parse_like(elem, t, key) for t in text.split(",") if t.strip())
    if key == "positions":
        return tuple(tuple(float(c) for c in p.split(",")) for p in text.split(";") if p.strip())
    if key == "flows":
        return tuple(tuple(int(c) for c in p.split(":")) for p in text.split(",") if p.strip())
    raise ValueError(f"{key} cannot be set from text")


def _nested_defaults(sc: Scenario) -> dict:
    out = {}
    for f in dataclasses.fields(sc):
        v = getattr(sc, f.name)
        if dataclasses.is_dataclass(v):
            for g in dataclasses.fields(v):
                out[f"{f.name}.{g.name}"] = getattr(v, g.name)
        else:
            out[f.name] = v
    return out


def apply_settings(sc: Scenario, settings: Mapping[str, str], errs: Optional[list] = None) -> Scenario:
    """Return ``sc`` with textual ``settings`` applied; dotted keys reach nested params.

    Bad keys or values raise ConfigError, unless an ``errs`` list is passed, in
    which case they are appended to it and the good settings still applied.
    """
    known = _nested_defaults(sc)
    collect = errs is not None
    errs = [] if errs is None else errs
    top, nested = {}, {}
    for key, text in settings.items():
        if key not in known:
            errs.append(f"unknown key {key!r}")
            continue
        try:
            value = _parse_like(known[key], text, key.split(".")[-1])
        except ValueError as exc:
            errs.append(f"{key}: {exc}")
            continue
        if "." in key:
            group, name = key.split(".", 1)
            nested.setdefault(group, {})[name] = value
        else:
            top[key] = value
    if errs and not collect:
        raise ConfigError(errs)
    for group, changes in nested.items():
        top[group] = dataclasses.replace(getattr(sc, group), **changes)
    return sc.replace(**top)


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    out, errs = {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append(f"{path}:{n}: expected key = value")
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    if errs:
        raise ConfigError(errs)
    return out


def parse_int_list(text: str) -> list[int]:
    """``"1,2,5-7"`` -> [1, 2, 5, 6, 7]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


FLAG_KEYS = {
    "protocol": "protocol",
    "speed": "speed",
    "nodes": "node_count",
    "area": "arena",
    "sim_time": "sim_time",
    "packet_size": "packet_size",
    "range": "radio_range",
}


def parse_scenario(config: Optional[str] = None, flags: Optional[Mapping[str, str]] = None,
                   env: Optional[Mapping[str, str]] = None) -> Scenario:
    """Defaults < config file < flags; ``HIROL_SEED`` fills the seed only if nothing else does."""
    env = os.environ if env is None else env
    settings: dict[str, str] = {}
    if env.get("HIROL_SEED"):
        settings["seed"] = env["HIROL_SEED"]
    if config:
        settings.update(read_config(config))
    settings.update(flags or {})
    errs: list = []
    sc = apply_settings(Scenario(), settings, errs)
    errs += sc.errors()
    if errs:
        raise ConfigError(errs)
    return sc


# ---- argument handling -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value scenario file")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--speed", help="node speed in m/s")
    p.add_argument("--nodes", help="number of UAVs")
    p.add_argument("--area", metavar="X,Y,Z", help="arena extents in metres")
    p.add_argument("--sim-time", dest="sim_time", help="simulated seconds")
    p.add_argument("--packet-size", dest="packet_size", help="data packet bytes")
    p.add_argument("--range", help="radio range in metres")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any scenario field, dotted for nested params (repeatable)")
    p.add_argument("--seeds", help="seed list, e.g. 1,2,5-8")
    p.add_argument("--ann-weights", dest="ann_weights", metavar="PATH", help="pre-trained classifier weights")
    p.add_argument("--train-ann", dest="train_ann", action="store_true",
                   help="train the classifier before running")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fanetsim", description="FANET routing simulator (OLSR, DSR, HIROL)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p_run = sub.add_parser("run", help="simulate one scenario per seed")
    _scenario_args(p_run)
    p_run.add_argument("--out", metavar="DIR", help="write CSVs here")
    p_sweep = sub.add_parser("sweep", help="protocols x speeds x seeds with table output")
    _scenario_args(p_sweep)
    p_sweep.add_argument("--speeds", help=f"comma list (default {','.join(f'{s:g}' for s in SWEEP_SPEEDS)})")
    p_sweep.add_argument("--protocols", default=",".join(PROTOCOLS))
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.add_argument("--out", metavar="DIR", default="results")
    p_train = sub.add_parser("train-ann", help="train the link classifier and save its weights")
    _scenario_args(p_train)
    p_train.add_argument("--out", metavar="PATH", default="ann_weights.txt")
    return parser


def _flag_settings(args) -> dict[str, str]:
    out = {}
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            out[key] = v
    for item in args.set:
        if "=" not in item:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        k, v = item.split("=", 1)
        out[k.strip()] = v
    return out


def _weights(args, sc: Scenario, save_to: Optional[Path] = None):
    if args.ann_weights:
        try:
            return load_weights(args.ann_weights)
        except (OSError, ValueError) as exc:
            raise ConfigError([f"cannot load ANN weights {args.ann_weights}: {exc}"]) from exc
    if not args.train_ann:
        return None
    res = train_classifier(sc)
    print(f"trained classifier: holdout accuracy {res.holdout_accuracy:.3f} "
          f"(majority {res.majority_accuracy:.3f}, {len(res.train) + len(res.holdout)} samples)")
    if save_to is not None:
        save_to.parent.mkdir(parents=True, exist_ok=True)
        save_weights(res.net, save_to)
    return res.net


def cmd_run(args) -> int:
    sc = parse_scenario(args.config, _flag_settings(args))
    net = _weights(args, sc)
    seeds = parse_int_list(args.seeds) if args.seeds else [sc.seed]
    reports = []
    for seed in seeds:
        res = run_cell(sc.replace(seed=seed), net)
        r = res.report
        reports.append(r)
        print(f"{r.protocol} speed={r.speed:g} seed={r.seed}: pdr={r.pdr:.4f} "
              f"delay={r.mean_delay * 1e3:.2f} ms throughput={r.throughput:.1f} b/s "
              f"control={r.control_processing_ms:.0f} ms overhead={r.overhead_ratio:.3f} "
              f"sent={r.sent} delivered={r.delivered} dropped={r.dropped}")
    if args.out:
        from .metrics import emit_report
        for path in emit_report(reports, args.out):
            print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = parse_scenario(args.config, _flag_settings(args))
    try:
        protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
        speeds = parse_float_list(args.speeds) if args.speeds else list(SWEEP_SPEEDS)
        seeds = parse_int_list(args.seeds) if args.seeds else list(range(1, 11))
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    out = Path(args.out)
    net = _weights(args, sc, out / "ann_weights.txt")
    spec = SweepSpec(protocols, speeds, seeds, sc, out, jobs=args.jobs,
                     overhead_speed=sc.speed if sc.speed in speeds else None)
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    t0 = time.perf_counter()
    total = len(spec.cells())
    done = [0]

    def progress(res):
        done[0] += 1
        r = res.report
        print(f"[{done[0]}/{total}] {r.protocol} speed={r.speed:g} seed={r.seed} pdr={r.pdr:.4f}", flush=True)

    result = run_sweep(spec, net, progress)
    print(f"\n{total} runs in {time.perf_counter() - t0:.1f} s\n")
    print("Packet delivery ratio")
    print(format_table(result.reports, "pdr"))
    print("\nMean end-to-end delay (ms)")
    print(format_table(result.reports, "delay", 2))
    print("\nThroughput (bits/s)")
    print(format_table(result.reports, "throughput", 1))
    if result.overhead:
        print(f"\nControl processing per message batch (ms, speed {spec.overhead_speed:g})")
        print(format_overhead(result.overhead))
    for path in result.written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    sc = parse_scenario(args.config, _flag_settings(args))
    res = train_classifier(sc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(res.net, out)
    print(f"samples: {len(res.train)} train, {len(res.holdout)} holdout "
          f"(stable fraction {res.train.stable_fraction:.3f})")
    print(f"accuracy: train {res.train_accuracy:.4f}, holdout {res.holdout_accuracy:.4f}, "
          f"majority baseline {res.majority_accuracy:.4f}")
    print(f"final loss {res.history[-1]:.5f}; wrote {out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "train-ann": cmd_train}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError) as exc:
        for e in getattr(exc, "errors", [str(exc)]):
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # anything else is a simulator fault
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
