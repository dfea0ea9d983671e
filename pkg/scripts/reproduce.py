#!/usr/bin/env python3
"""Reproduce every bundled preset's result files in one sweep.

Each preset maps to its natural subcommand (scenario -> run, sweep ->
sweep, calibration -> calibrate); results land under --out in the same
layout the CLI uses, so the figures package can render straight from the
output directory.  Desk scale finishes on a laptop; full scale matches
the publication replicate counts.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from notesim.cli import main as cli_main
from notesim.experiments import load_preset, preset_names

FRACTION_AXIS = "adversary.fraction_bad"


def plan_for(name: str, scale: str, out: str | None,
             jobs: int, thresholds: bool) -> list[list[str]]:
    """CLI argument vectors that reproduce one preset."""
    preset = load_preset(name, scale)
    common = ["--scale", scale]
    if out:
        sub = {"scenario": "runs", "sweep": "sweeps",
               "calibration": "calibration"}[preset.kind]
        common += ["--out", str(Path(out) / sub / name)]
    if preset.kind == "scenario":
        return [["run", name, "--jobs", str(jobs), *common]]
    if preset.kind == "calibration":
        return [["calibrate", name, *common[2:]]]  # calibrate has no --scale
    cmds = [["sweep", name, "--jobs", str(jobs), *common]]
    if thresholds and FRACTION_AXIS in (preset.axes or {}):
        tcommon = list(common)
        if out:
            tcommon[-1] = str(Path(out) / "thresholds" / name)
        cmds.append(["threshold", name, "--jobs", str(jobs), *tcommon])
    return cmds


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="run all bundled presets (or a subset) end to end")
    parser.add_argument("--only", help="comma-separated preset names "
                                       "(default: all)")
    parser.add_argument("--scale", choices=("desk", "full"), default="desk",
                        help="replicate-count scale (default desk)")
    parser.add_argument("--out", help="base output directory "
                                      "(default $NOTESIM_DATA_DIR)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel replicate processes")
    parser.add_argument("--thresholds", action="store_true",
                        help="also scan attack thresholds for sweeps with "
                             "a fraction-bad axis")
    parser.add_argument("--list", action="store_true",
                        help="print the plan without running")
    args = parser.parse_args(argv)

    names = preset_names()
    if args.only:
        wanted = [w.strip() for w in args.only.split(",") if w.strip()]
        unknown = sorted(set(wanted) - set(names))
        if unknown:
            parser.error(f"unknown presets: {unknown}; available: {names}")
        names = wanted

    plans = [(name, cmd) for name in names
             for cmd in plan_for(name, args.scale, args.out, args.jobs,
                                 args.thresholds)]
    if args.list:
        for name, cmd in plans:
            print(" ".join(["notesim", *cmd]))
        return 0

    failures = []
    for name, cmd in plans:
        print(f"=== {name}: notesim {' '.join(cmd)}", flush=True)
        t0 = time.perf_counter()
        code = cli_main(cmd)
        print(f"=== {name}: exit {code} in {time.perf_counter() - t0:.0f}s",
              flush=True)
        if code != 0:
            failures.append((name, code))
    if failures:
        print(f"failed: {failures}", file=sys.stderr)
        return 1
    print(f"reproduced {len(plans)} preset commands")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
