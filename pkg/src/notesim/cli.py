"""Command-line entry point: ingest, run, sweep, threshold, calibrate.

Every subcommand writes CSV artifacts under an output directory (flag
--out, else $NOTESIM_DATA_DIR, else ./notesim-data) plus a JSON sidecar
recording the exact configuration, so any result file can be traced back
to the settings that produced it.  Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
from pathlib import Path

from .experiments import (CalibrationSearch, Preset, ResultsWriter,
                          aggregate, apply_axis, calibrate,
                          critical_threshold, load_preset, load_preset_file,
                          preset_names, replicate_artifacts, run_scenario,
                          sweep, write_aggregate_csv, write_calibration_csv)
from .network import scan_ratings_tsv
from .scorer import write_note_params_csv, write_rater_params_csv

HEADLINE_METRICS = ("suppression", "pollution", "waste", "infiltration",
                    "publication_rate")


class UsageError(Exception):
    """Bad flags or configuration; reported on stderr with exit code 2."""


# ===== Output locations =====


def data_dir() -> Path:
    """Base directory for default outputs, from NOTESIM_DATA_DIR."""
    return Path(os.environ.get("NOTESIM_DATA_DIR", "notesim-data"))


def _out_dir(arg, *parts) -> Path:
    out = Path(arg) if arg else data_dir().joinpath(*parts)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_sidecar(path: Path, payload: dict) -> None:
    """Record the exact configuration next to the result files."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")


# ===== Scenario resolution =====


def _resolve_preset(ref: str, scale: str) -> Preset:
    """Load a preset by name, or any scenario file by explicit path."""
    looks_like_path = os.sep in ref or ref.endswith((".toml", ".json"))
    if looks_like_path or Path(ref).is_file():
        try:
            return load_preset_file(ref, scale)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from exc
    try:
        return load_preset(ref, scale)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc


def _scenario_ref(args) -> str:
    if (args.scenario_pos and args.scenario
            and args.scenario_pos != args.scenario):
        raise UsageError("scenario named twice (positional and --scenario)")
    ref = args.scenario or args.scenario_pos
    if not ref:
        raise UsageError("a scenario is required (positional or --scenario)")
    return ref


def _override(scenario, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["base_seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        if args.replicates < 1:
            raise UsageError("--replicates must be at least 1")
        changes["n_replicates"] = args.replicates
    return dataclasses.replace(scenario, **changes) if changes else scenario


# ===== Subcommands =====


def cmd_ingest(args) -> int:
    """Stream a ratings TSV into note/rater degree-table CSVs."""
    tsv = Path(args.ratings_tsv)
    if not tsv.is_file():
        raise UsageError(f"ratings file not found: {tsv}")
    prefix = Path(args.out) if args.out else data_dir() / "degrees" / tsv.stem
    prefix.parent.mkdir(parents=True, exist_ok=True)
    tables, stats = scan_ratings_tsv(tsv, args.min_note_degree,
                                     args.min_rater_degree)
    paths = tables.to_csv(prefix)
    print(f"notes: {stats.n_notes_seen} seen, {stats.n_notes_kept} kept "
          f"(degree >= {args.min_note_degree})")
    print(f"raters: {stats.n_raters_seen} seen, {stats.n_raters_kept} kept "
          f"(degree >= {args.min_rater_degree})")
    print(f"ratings: {stats.n_edges} distinct (rater, note) pairs")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_run(args) -> int:
    """Run one scenario's replicates; write results, aggregate, params."""
    preset = _resolve_preset(_scenario_ref(args), args.scale)
    if preset.kind != "scenario":
        raise UsageError(f"{preset.name} is a {preset.kind} preset; "
                         f"`run` needs a scenario")
    cfg = _override(preset.scenario, args)
    out = _out_dir(args.out, "runs", cfg.name)
    _write_sidecar(out / "run_config.json",
                   {"command": "run", "scenario": dataclasses.asdict(cfg)})

    results = run_scenario(cfg, jobs=args.jobs)
    writer = ResultsWriter(out / "results.csv")
    writer.path.unlink(missing_ok=True)
    for res in results:
        writer.append(res)

    failures = [r for r in results if r.error is not None]
    succeeded = [r for r in results if r.error is None]
    if succeeded:
        rows = aggregate(results)
        write_aggregate_csv(out / "aggregate.csv", rows)
        _, pipe = replicate_artifacts(cfg, succeeded[0].index)
        write_note_params_csv(out / "note_params.csv", pipe.params,
                              pipe.published)
        write_rater_params_csv(out / "rater_params.csv", pipe.params,
                               pipe.removed_raters)
        by_key = {(r.frame, r.metric): r for r in rows}
        for metric in HEADLINE_METRICS:
            row = by_key.get(("overall", metric))
            if row is not None and row.mean is not None:
                print(f"overall {metric}: mean={row.mean:.4f} "
                      f"stderr={row.stderr:.4f} (n={row.n_defined})")
    for res in failures:
        print(f"replicate {res.index} failed: {res.error}", file=sys.stderr)
    print(f"wrote {out / 'results.csv'} ({len(results)} replicates)")
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    """Run a sweep preset's grid into a long results CSV, resumably."""
    preset = _resolve_preset(_scenario_ref(args), args.scale)
    if preset.kind != "sweep":
        raise UsageError(f"{preset.name} is a {preset.kind} preset; "
                         f"`sweep` needs a sweep")
    grid = preset.grid()
    grid = dataclasses.replace(grid, template=_override(grid.template, args))
    out = _out_dir(args.out, "sweeps", preset.name)
    _write_sidecar(out / "run_config.json",
                   {"command": "sweep",
                    "template": dataclasses.asdict(grid.template),
                    "axes": {k: list(v) for k, v in grid.axes.items()}})
    path = sweep(grid, out, jobs=args.jobs, resume=args.resume)
    n_points = len(grid.points())
    print(f"wrote {path} ({n_points} grid points x "
          f"{grid.template.n_replicates} replicates)")
    return 0


def _condition_points(axes: dict) -> list[dict]:
    if not axes:
        return [{}]
    names = list(axes)
    return [dict(zip(names, combo))
            for combo in itertools.product(*(axes[n] for n in names))]


FRACTION_AXIS = "adversary.fraction_bad"


def cmd_threshold(args) -> int:
    """Scan adversary fraction for the attack-success threshold per condition."""
    preset = _resolve_preset(_scenario_ref(args), args.scale)
    if preset.kind not in ("scenario", "sweep"):
        raise UsageError(f"{preset.name} is a {preset.kind} preset; "
                         f"`threshold` needs a scenario or sweep")
    condition_axes = dict(preset.axes or {})
    resolution, max_fraction = args.resolution, args.max_fraction
    if FRACTION_AXIS in condition_axes:
        fractions = sorted(condition_axes.pop(FRACTION_AXIS))
        if resolution is None and len(fractions) > 1:
            resolution = fractions[1] - fractions[0]
        if max_fraction is None:
            max_fraction = fractions[-1]
    resolution = 0.05 if resolution is None else resolution
    max_fraction = 0.5 if max_fraction is None else max_fraction

    template = _override(preset.scenario, args)
    out = _out_dir(args.out, "thresholds", preset.name)
    _write_sidecar(out / "run_config.json",
                   {"command": "threshold", "metric": args.metric,
                    "level": args.level, "resolution": resolution,
                    "max_fraction": max_fraction,
                    "template": dataclasses.asdict(template),
                    "condition_axes": {k: list(v)
                                       for k, v in condition_axes.items()}})

    axis_names = list(condition_axes)
    header = ([f"axis:{a}" for a in axis_names]
              + ["metric", "level", "resolution", "threshold",
                 "bracket_low", "bracket_high"])
    lines = [",".join(header)]
    for point in _condition_points(condition_axes):
        cfg = template
        for key, value in point.items():
            cfg = apply_axis(cfg, key, value)
        result = critical_threshold(cfg, metric=args.metric,
                                    level=args.level, resolution=resolution,
                                    max_fraction=max_fraction,
                                    jobs=args.jobs)
        cells = [f"{point[a]:g}" for a in axis_names]
        cells += [result.metric, f"{result.level:g}",
                  f"{result.resolution:g}",
                  "" if result.threshold is None else f"{result.threshold:g}",
                  *("" if b is None else f"{b:g}" for b in result.bracket)]
        lines.append(",".join(cells))
        shown = "none" if result.threshold is None else f"{result.threshold:g}"
        where = " ".join(f"{a}={point[a]:g}" for a in axis_names) or "base"
        print(f"{where}: threshold={shown} bracket={result.bracket}")
    path = out / "threshold.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return 0


def cmd_calibrate(args) -> int:
    """Random-search population parameters matching a target rating mix."""
    search = CalibrationSearch()
    ref = args.scenario or args.scenario_pos
    if ref:
        preset = _resolve_preset(ref, "desk")
        if preset.kind != "calibration":
            raise UsageError(f"{preset.name} is a {preset.kind} preset; "
                             f"`calibrate` needs a calibration preset")
        search = preset.search
    changes = {}
    if args.draws is not None:
        changes["n_draws"] = int(float(args.draws))
    if args.pairs is not None:
        changes["n_pairs"] = int(float(args.pairs))
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if changes:
        search = dataclasses.replace(search, **changes)

    result = calibrate(search, seed=args.seed or 0)
    out = _out_dir(args.out, "calibration")
    _write_sidecar(out / "run_config.json",
                   {"command": "calibrate", "seed": args.seed or 0,
                    "search": dataclasses.asdict(search)})
    write_calibration_csv(out / "calibration.csv", result)
    print(f"accepted {result.n_accepted} of {result.n_draws} draws "
          f"(acceptance rate {result.acceptance_rate:.6g})")
    print(f"wrote {out / 'calibration.csv'}")
    return 0


def cmd_presets(args) -> int:
    """List the bundled presets with kind and source line."""
    for name in preset_names():
        preset = load_preset(name)
        print(f"{name:<16} {preset.kind:<12} {preset.source}")
    return 0


# ===== Parser =====


def _add_scenario_flags(parser) -> None:
    parser.add_argument("scenario_pos", nargs="?", metavar="SCENARIO",
                        help="preset name or scenario file path")
    parser.add_argument("--scenario",
                        help="preset name or scenario file path")
    parser.add_argument("--scale", choices=("desk", "full"), default="desk",
                        help="preset replicate-count scale (default desk)")
    parser.add_argument("--seed", type=int,
                        help="override the scenario base seed")
    parser.add_argument("--replicates", type=int,
                        help="override the replicate count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="notesim",
        description="Simulate community note rating and scoring: synthetic "
                    "populations, bipartite rating graphs, matrix-"
                    "factorization scoring, and attack experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest",
                       help="turn a ratings TSV into degree-table CSVs")
    p.add_argument("ratings_tsv", help="TSV with noteId and "
                                       "raterParticipantId columns")
    p.add_argument("--out", help="output file prefix")
    p.add_argument("--min-note-degree", type=int, default=5,
                   help="drop notes with fewer ratings (default 5)")
    p.add_argument("--min-rater-degree", type=int, default=10,
                   help="drop raters with fewer ratings (default 10)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run one scenario's replicates")
    _add_scenario_flags(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes (default 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter-sweep grid")
    _add_scenario_flags(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes (default 1)")
    p.add_argument("--resume", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="skip (point, replicate) pairs already in the "
                        "manifest (default on)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("threshold",
                       help="scan adversary fraction for breakdown "
                            "thresholds")
    _add_scenario_flags(p)
    p.add_argument("--metric", choices=("suppression", "pollution"),
                   default="suppression",
                   help="targeted metric to threshold (default suppression)")
    p.add_argument("--level", type=float, default=0.9,
                   help="success level the metric must reach (default 0.9)")
    p.add_argument("--resolution", type=float,
                   help="fraction step (default: sweep axis spacing, "
                        "else 0.05)")
    p.add_argument("--max-fraction", type=float,
                   help="largest fraction to scan (default: sweep axis "
                        "max, else 0.5)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes (default 1)")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("calibrate",
                       help="search population parameters matching the "
                            "target rating mix")
    p.add_argument("scenario_pos", nargs="?", metavar="SCENARIO",
                   help="calibration preset name (optional)")
    p.add_argument("--scenario", help="calibration preset name")
    p.add_argument("--draws", help="number of random draws (accepts 1e5)")
    p.add_argument("--pairs", help="rating pairs per Monte Carlo estimate")
    p.add_argument("--epsilon", type=float,
                   help="acceptance distance on the rating mix")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("presets", help="inspect bundled presets")
    psub = p.add_subparsers(dest="presets_command", required=True)
    pl = psub.add_parser("list", help="list preset names")
    pl.set_defaults(func=cmd_presets)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        detail = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {detail}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 1
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
