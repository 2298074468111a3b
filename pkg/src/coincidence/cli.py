"""Command line: ``coincidence {rate,metrics,sweep,simulate,histogram,characterize}``.

Exit status: 0 success, 2 configuration error, 3 domain error, 4 I/O or
tag-format error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .device import pump_power_for_rate, rate_per_watt, triplet_generation_rate
from .errors import ConfigError, DomainError, TagFormatError
from .metrics import analyze, min_detectable_rate
from .montecarlo import RunConfig, simulate
from .rng import derive_seed
from .sweeps import FIGURES, figure_rows
from .tags import characterize, histogram, read_tags, write_tags

EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 2, 3, 4


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out:
        _atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _load(args):
    return cfgmod.load(args.config, args.override)


# --- commands ------------------------------------------------------------------------


def cmd_rate(args) -> int:
    a = _load(args)
    if a.device is None or a.pump is None:
        raise ConfigError("rate needs device, pump and bands sections")
    r = triplet_generation_rate(a.device, a.pump, a.bands)
    k = rate_per_watt(a.device, a.pump, a.bands)
    r_min = min_detectable_rate(a.channels, a.pump.t_rep)
    doc = {
        "rate_hz": r.rate,
        "p_s": r.p_s,
        "t_rep_s": a.pump.t_rep,
        "pump_power_w": a.pump.average_power,
        "rate_per_watt": k,
        "max_power_w": a.pump.max_power,
        "r_min_hz": r_min,
        "inversions": [],
    }
    targets = [("r_min", r_min)] if math.isfinite(r_min) and r_min > 0 else []
    targets += [(f"target_{i}", t) for i, t in enumerate(args.target_rate or [])]
    for label, target in targets:
        p = pump_power_for_rate(a.device, a.pump, a.bands, target)
        doc["inversions"].append({"label": label, "rate_hz": target, "pump_power_w": p.power, "over_cap": p.over_cap})
    _emit(_dump_json(doc), args.out)
    return 0


def cmd_metrics(args) -> int:
    a = _load(args)
    report = analyze(a.channels, a.source, args.n_target)
    doc = {
        "source": {"t_rep_s": a.source.t_rep, "rate_hz": a.source.rate, "p_gen_noise": a.source.p_gen_noise,
                   "from_device": a.source_from_device},
        "metrics": report.to_dict(),
    }
    _emit(_dump_json(doc), args.out)
    return 0


def cmd_sweep(args) -> int:
    a = _load(args)
    kinds = FIGURES if args.figure == "all" else (args.figure,)
    out = Path(args.out) if args.out else None
    if out is None and len(kinds) > 1:
        raise ConfigError("--out is required when writing several figures")
    for kind in kinds:
        rows = figure_rows(kind, a, args.workers)
        text = rows_to_csv(rows)
        if out is None:
            sys.stdout.write(text)
            continue
        target = out / f"{kind}.csv" if (len(kinds) > 1 or out.suffix != ".csv") else out
        _atomic_write(target, text)
        if args.plot:
            from .plotting import render

            render(kind, rows, target.with_suffix(".png"))
    return 0


def cmd_simulate(args) -> int:
    a = _load(args)
    sim = a.simulation
    cycles = args.cycles or int(sim.get("cycles", 10_000_000))
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    ext = ".csv" if args.csv else ".tags"
    runs = [("bright", a.source, seed)]
    if args.dark:
        runs.append(("dark", a.source.switched_off(), derive_seed(seed, 1)))
    report = {}
    for name, source, s in runs:
        summary, tags = simulate(RunConfig(cycles, s, source, a.channels, emit_tags=True))
        write_tags(out / f"{name}{ext}", tags)
        _atomic_write(out / f"{name}_summary.json", summary.to_json())
        report[name] = {"seed": s, "p_arrival": source.p_arrival, "p_gen_noise": source.p_gen_noise,
                        "summary": summary.to_dict()}
    sys.stdout.write(_dump_json(report))
    return 0


def cmd_histogram(args) -> int:
    tags = read_tags(args.tags)
    h = histogram(tags, args.max_delay)
    _emit(h.to_csv(), args.out)
    return 0


def cmd_characterize(args) -> int:
    a = _load(args)
    bright, dark = read_tags(args.bright), read_tags(args.dark)
    result = characterize(bright, dark, a.channels, args.max_delay)
    _emit(_dump_json(result.to_dict()), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"config file or name (default: ${cfgmod.CONFIG_DIR_ENV}/default.json, then reference)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="replace a config leaf by dotted path, in the config's units")
    common.add_argument("--out", help="output file or directory (default: stdout)")
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="coincidence", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("rate", parents=[common], help="triplet generation rate and pump-power inversions")
    s.add_argument("--target-rate", type=float, action="append", help="rate (Hz) to invert for pump power")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("metrics", parents=[common], help="analytic metrics report")
    s.add_argument("--n-target", type=float, default=100)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("sweep", parents=[common], help="figure curves as CSV (and PNG)")
    s.add_argument("--figure", choices=FIGURES + ("all",), default="all")
    s.add_argument("--no-plot", dest="plot", action="store_false", help="skip figure rendering")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo run writing tag files")
    s.add_argument("--cycles", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--dark", action="store_true", help="also simulate a source-off run")
    s.add_argument("--csv", action="store_true", help="write the text tag format")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("histogram", parents=[common], help="coincidence histogram of a tag file")
    s.add_argument("--tags", required=True)
    s.add_argument("--max-delay", type=int, default=10)
    s.set_defaults(func=cmd_histogram)

    s = sub.add_parser("characterize", parents=[common], help="estimate the generation rate from bright/dark tags")
    s.add_argument("--bright", required=True)
    s.add_argument("--dark", required=True)
    s.add_argument("--max-delay", type=int, default=10)
    s.set_defaults(func=cmd_characterize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (TagFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
