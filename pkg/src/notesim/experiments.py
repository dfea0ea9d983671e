"""Scenario configs, replicate execution, sweeps, thresholds, calibration.

A scenario bundles everything one simulated dataset needs: a population
spec, global rating-model parameters, a network recipe, an adversary
config, fit hyperparameters, and replication bookkeeping.  Replicates are
independently seeded, individually reproducible, and reduce to a flat
row-per-replicate CSV that downstream tooling only ever has to group by.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .adversary import (AdversaryConfig, mark_bad, sample_graph_ratings,
                        targeted_mask)
from .metrics import MetricReport, build_report, removed_ids_to_mask
from .network import (DegreeTables, HomophilyTarget, complete_graph,
                      ingest_degree_tables, measure_ingroup_bias, rewire,
                      sample_seed_graph, synth_degree_tables)
from .population import (HELPFUL, NOT_HELPFUL, SOMEWHAT, GlobalParams,
                         GroupedNormal, PopulationSpec, sample_population,
                         sign_groups)
from .scorer import FitHyper, PipelineResult, score_pipeline

logger = logging.getLogger(__name__)


# ===== Configuration =====


@dataclass(frozen=True)
class NetworkConfig:
    """How the rating graph is built before any ratings are drawn.

    degree_source is "complete", "synthetic", or a path to a ratings TSV
    whose degree tables should be ingested.  target_edges None means 92
    edges per note, the standard density, so sweeps over the note count
    scale the edge budget automatically.  homophily_p, when set, rewires
    the sampled graph so that fraction p of edges stay in-group; it must be
    None for complete graphs, which cannot be rewired into anything else.
    """

    degree_source: str = "synthetic"
    target_edges: int | None = None
    homophily_p: float | None = None
    n_pair_swaps: int = 1_000_000

    def __post_init__(self):
        if self.degree_source == "complete" and self.homophily_p is not None:
            raise ValueError("complete graphs cannot be rewired; "
                             "homophily_p must be None")
        if self.homophily_p is not None and not 0.0 <= self.homophily_p <= 1.0:
            raise ValueError("homophily_p must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified experiment condition."""

    name: str
    population: PopulationSpec
    global_params: GlobalParams = field(default_factory=GlobalParams)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    fit: FitHyper = field(default_factory=FitHyper)
    filter_enabled: bool = True
    n_replicates: int = 1
    base_seed: int = 0
    randomize_phi: bool = False

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")


@dataclass
class ReplicateResult:
    """Everything one replicate produced, or its failure record."""

    scenario: str
    index: int
    seed: int
    phi: int = 1
    realized_eh: float | None = None
    n_raters: int = 0
    n_notes: int = 0
    rater_group_sizes: tuple[int, int] = (0, 0)
    note_group_sizes: tuple[int, int] = (0, 0)
    rating_mix: tuple[float, float, float] | None = None
    n_removed: int = 0
    epochs_run: int = 0
    converged: bool = False
    runtime_s: float = 0.0
    overall: MetricReport | None = None
    targeted: MetricReport | None = None
    nontargeted: MetricReport | None = None
    error: str | None = None


# ===== Seeding =====

_STREAMS = ("population", "adversary", "tables", "graph", "rewire",
            "ratings", "fit", "phi")


def replicate_seeds(base_seed: int, index: int) -> dict[str, int]:
    """Independent integer seeds for every random stage of one replicate."""
    ss = np.random.SeedSequence([base_seed, index])
    words = ss.generate_state(len(_STREAMS), np.uint32)
    return {name: int(w) for name, w in zip(_STREAMS, words)}


# ===== Replicate execution =====


EDGES_PER_NOTE = 92


def _build_graph(cfg: ScenarioConfig, seeds: dict[str, int]):
    net = cfg.network
    if net.degree_source == "complete":
        return None
    if net.degree_source == "synthetic":
        edges = net.target_edges
        if edges is None:
            edges = EDGES_PER_NOTE * cfg.population.n_notes
        tables = synth_degree_tables(cfg.population.n_notes,
                                     cfg.population.n_raters,
                                     edges, seeds["tables"])
    else:
        tables = ingest_degree_tables(net.degree_source)
    return sample_seed_graph(tables, cfg.population.n_notes, seeds["graph"])


def replicate_artifacts(cfg: ScenarioConfig,
                        index: int = 0) -> tuple[ReplicateResult,
                                                 PipelineResult]:
    """Run one replicate and return (summary, full scoring output).

    The scoring output carries the fitted parameters and statuses, so a
    caller can serialize per-note and per-rater estimates for any
    replicate it can name.
    """
    t0 = time.perf_counter()
    seeds = replicate_seeds(cfg.base_seed, index)
    phi = int(cfg.adversary.phi)
    if cfg.randomize_phi:
        phi = 1 if np.random.default_rng(seeds["phi"]).random() < 0.5 else -1
    adv = replace(cfg.adversary, phi=phi)

    graph = _build_graph(cfg, seeds)
    spec = cfg.population
    if graph is not None and graph.n_raters != spec.n_raters:
        spec = replace(spec, n_raters=graph.n_raters)
    pop = sample_population(spec, seeds["population"])
    pop = mark_bad(pop, adv, seeds["adversary"])
    if graph is None:
        graph = complete_graph(spec.n_raters, spec.n_notes)

    # In-group structure acts on realized bias signs, not latent groups.
    rater_signs = sign_groups(pop.rater_bias)
    note_signs = sign_groups(pop.note_bias)
    if cfg.network.homophily_p is not None:
        graph, stats = rewire(graph, rater_signs, note_signs,
                              HomophilyTarget(cfg.network.homophily_p),
                              n_pair_swaps=cfg.network.n_pair_swaps,
                              seed=seeds["rewire"])
        realized_eh = stats.realized_eh
    else:
        realized_eh = measure_ingroup_bias(graph, rater_signs, note_signs)

    rated = sample_graph_ratings(cfg.global_params, pop, graph, adv,
                                 seeds["ratings"])
    hyper = replace(cfg.fit, seed=seeds["fit"])
    result = score_pipeline(rated, hyper, cfg.filter_enabled)

    removed_mask = removed_ids_to_mask(result.removed_raters, pop.n_raters)
    bad_mask = pop.rater_is_bad
    tgt = targeted_mask(pop, adv)
    frames = {}
    for name, subset in (("overall", None), ("targeted", tgt),
                         ("nontargeted", ~tgt)):
        frames[name] = build_report(pop.note_intercept, pop.note_bias,
                                    pop.rater_bias, result.published,
                                    result.params, removed_mask, bad_mask,
                                    subset=subset)

    r = rated.ratings
    mix = (float(np.mean(r == HELPFUL)), float(np.mean(r == SOMEWHAT)),
           float(np.mean(r == NOT_HELPFUL)))
    summary = ReplicateResult(
        scenario=cfg.name, index=index, seed=seeds["population"], phi=phi,
        realized_eh=float(realized_eh),
        n_raters=pop.n_raters, n_notes=pop.n_notes,
        rater_group_sizes=(int(np.sum(rater_signs > 0)),
                           int(np.sum(rater_signs < 0))),
        note_group_sizes=(int(np.sum(note_signs > 0)),
                          int(np.sum(note_signs < 0))),
        rating_mix=mix, n_removed=int(result.removed_raters.size),
        epochs_run=result.params.epochs_run,
        converged=result.params.converged,
        runtime_s=time.perf_counter() - t0,
        overall=frames["overall"], targeted=frames["targeted"],
        nontargeted=frames["nontargeted"])
    return summary, result


def run_replicate(cfg: ScenarioConfig, index: int) -> ReplicateResult:
    """Run one independently seeded replicate of a scenario."""
    return replicate_artifacts(cfg, index)[0]


def _run_replicate_safe(cfg: ScenarioConfig, index: int) -> ReplicateResult:
    try:
        return run_replicate(cfg, index)
    except Exception as exc:  # noqa: BLE001 - failure rows must survive
        logger.exception("replicate %s/%d failed", cfg.name, index)
        seeds = replicate_seeds(cfg.base_seed, index)
        return ReplicateResult(scenario=cfg.name, index=index,
                               seed=seeds["population"],
                               error=f"{type(exc).__name__}: {exc}")


def run_scenario(cfg: ScenarioConfig, jobs: int = 1) -> list[ReplicateResult]:
    """Run every replicate; failures become error rows, never silent drops."""
    indices = list(range(cfg.n_replicates))
    if jobs <= 1:
        return [_run_replicate_safe(cfg, i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_replicate_safe, cfg, i) for i in indices]
        return [f.result() for f in futures]


# ===== Aggregation =====


@dataclass(frozen=True)
class AggregateRow:
    """Mean and standard error of one metric over a scenario's replicates."""

    scenario: str
    frame: str
    metric: str
    mean: float | None
    stderr: float | None
    n_defined: int
    n_total: int
    single_replicate: bool = False


def _mean_stderr(values: list[float]):
    if not values:
        return None, None
    if len(values) == 1:
        return float(values[0]), 0.0
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def aggregate(results: list[ReplicateResult]) -> list[AggregateRow]:
    """Reduce replicates to per-metric means with standard errors.

    Undefined metric values are excluded and counted; a metric undefined in
    every replicate aggregates to an undefined row.  Error replicates are
    skipped entirely, but at least one successful replicate is required.
    """
    ok = [r for r in results if r.error is None]
    if not ok:
        raise ValueError("no successful replicates to aggregate")
    scenario = ok[0].scenario
    n_total = len(ok)
    rows = []
    for frame in ("overall", "targeted", "nontargeted"):
        reports = [getattr(r, frame) for r in ok]
        for name in MetricReport.__dataclass_fields__:
            vals = [getattr(rep, name, None) if rep is not None else None
                    for rep in reports]
            defined = [float(v) for v in vals if v is not None]
            mean, stderr = _mean_stderr(defined)
            rows.append(AggregateRow(scenario, frame, name, mean, stderr,
                                     len(defined), n_total,
                                     single_replicate=n_total == 1))
    extras = {
        "realized_eh": [r.realized_eh for r in ok],
        "rating_mix_h": [r.rating_mix[0] if r.rating_mix else None for r in ok],
        "rating_mix_sh": [r.rating_mix[1] if r.rating_mix else None for r in ok],
        "rating_mix_nh": [r.rating_mix[2] if r.rating_mix else None for r in ok],
        "n_removed": [float(r.n_removed) for r in ok],
        "runtime_s": [r.runtime_s for r in ok],
    }
    for name, vals in extras.items():
        defined = [float(v) for v in vals if v is not None]
        mean, stderr = _mean_stderr(defined)
        rows.append(AggregateRow(scenario, "dataset", name, mean, stderr,
                                 len(defined), n_total,
                                 single_replicate=n_total == 1))
    return rows


# ===== Axis paths and sweeps =====


def apply_axis(cfg: ScenarioConfig, path: str, value) -> ScenarioConfig:
    """Return a copy of cfg with one dotted-path field replaced.

    Two virtual leaves exist on grouped-normal fields: "polarization" sets
    symmetric group means +-value keeping the current (shared) sd, and "sd"
    sets a shared sd keeping the current means.
    """
    parts = path.split(".")
    return _apply_parts(cfg, parts, value)


def _apply_parts(obj, parts: list[str], value):
    head = parts[0]
    if len(parts) == 1:
        if isinstance(obj, GroupedNormal) and head == "polarization":
            if obj.sd_plus != obj.sd_minus:
                raise ValueError("polarization shorthand needs a shared sd")
            return GroupedNormal.symmetric(float(value), obj.sd_plus)
        if isinstance(obj, GroupedNormal) and head == "sd":
            return replace(obj, sd_plus=float(value), sd_minus=float(value))
        if not hasattr(obj, head):
            raise ValueError(f"unknown config field: {head}")
        return replace(obj, **{head: value})
    child = getattr(obj, head, None)
    if child is None or not dataclasses.is_dataclass(child):
        raise ValueError(f"unknown config section: {head}")
    return replace(obj, **{head: _apply_parts(child, parts[1:], value)})


@dataclass(frozen=True)
class SweepGrid:
    """A template scenario and an ordered axis -> values mapping."""

    template: ScenarioConfig
    axes: dict[str, tuple]
    max_points: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "axes",
                           {k: tuple(v) for k, v in self.axes.items()})
        if not self.axes:
            raise ValueError("a sweep needs at least one axis")
        total = 1
        for values in self.axes.values():
            if not values:
                raise ValueError("every axis needs at least one value")
            total *= len(values)
        if total > self.max_points:
            raise ValueError(f"grid has {total} points, over the "
                             f"max_points={self.max_points} guard")

    def points(self) -> list[dict]:
        """Cartesian product in row-major order of the axis dict."""
        grids = [[]]
        for name, values in self.axes.items():
            grids = [g + [(name, v)] for g in grids for v in values]
        return [dict(g) for g in grids]

    def scenario_at(self, point: dict) -> ScenarioConfig:
        cfg = self.template
        for path, value in point.items():
            cfg = apply_axis(cfg, path, value)
        return replace(cfg, name=f"{self.template.name}@{point_key(point)}")


def point_key(point: dict) -> str:
    """Stable text key for one grid point, used in manifests and names."""
    return "|".join(f"{k}={point[k]!r}" for k in point)


# ===== Results CSV =====

_FRAME_PREFIXES = ("overall", "targeted", "nontargeted")
_METRIC_NAMES = tuple(MetricReport.__dataclass_fields__)
_BASE_COLUMNS = ("scenario", "replicate", "seed", "phi", "realized_eh",
                 "n_raters", "n_notes", "n_removed", "epochs_run",
                 "converged", "runtime_s", "rating_mix_h", "rating_mix_sh",
                 "rating_mix_nh", "error")


def csv_columns(axis_names: tuple[str, ...] = ()) -> list[str]:
    """Full results-CSV header for the given sweep axes (empty for runs)."""
    cols = list(_BASE_COLUMNS[:3])
    cols += [f"axis:{a}" for a in axis_names]
    cols += _BASE_COLUMNS[3:]
    for frame in _FRAME_PREFIXES:
        cols += [f"{frame}_{m}" for m in _METRIC_NAMES]
    return cols


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def result_row(res: ReplicateResult, point: dict | None = None,
               axis_names: tuple[str, ...] = ()) -> list[str]:
    """Flatten one replicate to CSV cells matching csv_columns(axis_names)."""
    mix = res.rating_mix or (None, None, None)
    cells = [res.scenario, res.index, res.seed]
    cells += [(point or {}).get(a) for a in axis_names]
    cells += [res.phi, res.realized_eh, res.n_raters, res.n_notes,
              res.n_removed, res.epochs_run, res.converged, res.runtime_s,
              mix[0], mix[1], mix[2], res.error]
    for frame in _FRAME_PREFIXES:
        report = getattr(res, frame)
        if report is None:
            cells += [None] * len(_METRIC_NAMES)
        else:
            d = report.as_dict()
            cells += [d[m] for m in _METRIC_NAMES]
    return [_fmt(c) for c in cells]


class ResultsWriter:
    """Append-only results CSV with a header written exactly once."""

    def __init__(self, path, axis_names: tuple[str, ...] = ()):
        self.path = Path(path)
        self.axis_names = tuple(axis_names)
        self.columns = csv_columns(self.axis_names)

    def append(self, res: ReplicateResult, point: dict | None = None):
        new = not self.path.exists() or self.path.stat().st_size == 0
        with open(self.path, "a", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            if new:
                writer.writerow(self.columns)
            writer.writerow(result_row(res, point, self.axis_names))


def write_aggregate_csv(path, rows: list[AggregateRow]):
    """Write scenario-level means and standard errors."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scenario", "frame", "metric", "mean", "stderr",
                         "n_defined", "n_total", "single_replicate"])
        for row in rows:
            writer.writerow([row.scenario, row.frame, row.metric,
                             _fmt(row.mean), _fmt(row.stderr),
                             row.n_defined, row.n_total,
                             _fmt(row.single_replicate)])


# ===== Sweeps =====


def _manifest_path(out_dir: Path) -> Path:
    return out_dir / "sweep.manifest"


def _load_manifest(out_dir: Path) -> set[str]:
    path = _manifest_path(out_dir)
    if not path.exists():
        return set()
    return {line.rstrip("\n") for line in path.read_text().splitlines()
            if line.strip()}


def sweep(grid: SweepGrid, out_dir, jobs: int = 1,
          resume: bool = True) -> Path:
    """Run a grid of scenarios into out_dir/results.csv, resumably.

    Every (grid point, replicate) pair appends one CSV row and one manifest
    line; pairs already in the manifest are skipped, so rerunning a finished
    sweep rewrites nothing.  Returns the results CSV path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    axis_names = tuple(grid.axes)
    writer = ResultsWriter(out_dir / "results.csv", axis_names)
    done = _load_manifest(out_dir) if resume else set()
    if not resume:
        _manifest_path(out_dir).unlink(missing_ok=True)
        writer.path.unlink(missing_ok=True)
    pending = []
    for point in grid.points():
        cfg = grid.scenario_at(point)
        for index in range(cfg.n_replicates):
            mark = f"{point_key(point)}#{index}"
            if mark in done:
                continue
            pending.append((point, cfg, index, mark))
    if not pending:
        return writer.path

    def finish(item, res):
        point, _, _, mark = item
        writer.append(res, point)
        with open(_manifest_path(out_dir), "a", encoding="utf-8") as handle:
            handle.write(mark + "\n")

    if jobs <= 1:
        for item in pending:
            finish(item, _run_replicate_safe(item[1], item[2]))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(item, pool.submit(_run_replicate_safe, item[1],
                                          item[2])) for item in pending]
            for item, future in futures:
                finish(item, future.result())
    return writer.path


# ===== Critical thresholds =====


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of an ascending scan for an attack-success threshold."""

    metric: str
    level: float
    resolution: float
    scanned: tuple[tuple[float, float | None], ...]
    threshold: float | None
    bracket: tuple[float | None, float | None]


def critical_threshold(template: ScenarioConfig, metric: str = "suppression",
                       level: float = 0.9, resolution: float = 0.05,
                       max_fraction: float = 0.5,
                       jobs: int = 1) -> ThresholdResult:
    """Smallest scanned adversary fraction whose mean targeted metric
    reaches level.

    Scans fraction_bad upward from 0 in resolution steps, running the
    template's replicates at each point, and stops at the first crossing.
    The bracket holds the last sub-level fraction and the crossing one; a
    scan that never crosses returns threshold None with an open bracket.
    """
    if metric not in ("suppression", "pollution"):
        raise ValueError("metric must be suppression or pollution")
    scanned = []
    below = None
    fraction = 0.0
    while fraction <= max_fraction + 1e-12:
        cfg = replace(template,
                      adversary=replace(template.adversary,
                                        fraction_bad=fraction),
                      name=f"{template.name}@fraction_bad={fraction:g}")
        results = run_scenario(cfg, jobs=jobs)
        vals = [getattr(r.targeted, metric) for r in results
                if r.error is None and r.targeted is not None
                and getattr(r.targeted, metric) is not None]
        mean = float(np.mean(vals)) if vals else None
        scanned.append((fraction, mean))
        if mean is not None and mean >= level:
            return ThresholdResult(metric, level, resolution,
                                   tuple(scanned), fraction,
                                   (below, fraction))
        below = fraction
        fraction = round(fraction + resolution, 10)
    return ThresholdResult(metric, level, resolution, tuple(scanned),
                           None, (below, None))


# ===== Calibration =====


@dataclass(frozen=True)
class CalibrationSearch:
    """Random-search settings for matching the observed rating mix."""

    n_draws: int = 1000
    n_pairs: int = 10_000
    epsilon: float = 0.0012
    target_mix: tuple[float, float, float] = (0.596, 0.030, 0.374)
    intercept_mean_bounds: tuple[float, float] = (-1.0, 1.0)
    sigma_bounds: tuple[float, float] = (0.0, 1.0)
    gamma_bounds: tuple[float, float] = (0.0, 100.0)


@dataclass(frozen=True)
class CalibrationResult:
    """Accepted parameter draws plus acceptance statistics."""

    columns: tuple[str, ...]
    accepted: np.ndarray
    n_draws: int
    n_accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_draws if self.n_draws else 0.0

    def histogram(self, column: str, bins: int = 20):
        idx = self.columns.index(column)
        return np.histogram(self.accepted[:, idx], bins=bins)


_CAL_COLUMNS = ("intercept_mean", "note_intercept_sd", "rater_intercept_sd",
                "gamma", "frac_helpful", "frac_somewhat", "frac_not_helpful",
                "distance")


def _mix_distance(mix, target) -> float:
    ph, ps, pn = mix
    return ((ph - target[0]) ** 2 + (pn - target[2]) ** 2
            + (ps - target[1]) ** 2)


def estimate_mix(intercept_mean: float, note_intercept_sd: float,
                 rater_intercept_sd: float, gamma: float, rng,
                 n_pairs: int = 10_000,
                 base: PopulationSpec | None = None,
                 global_params: GlobalParams | None = None):
    """Monte Carlo mean rating mix (helpful, somewhat, not helpful)."""
    base = base or PopulationSpec(n_raters=1, n_notes=1)
    g = global_params or GlobalParams()
    i_u = rng.normal(intercept_mean, rater_intercept_sd, n_pairs)
    i_n = rng.normal(intercept_mean, note_intercept_sd, n_pairs)
    f_u = rng.normal(base.rater_bias.mean_plus, base.rater_bias.sd_plus,
                     n_pairs)
    f_n = rng.normal(base.note_bias.mean_plus, base.note_bias.sd_plus,
                     n_pairs)
    s = g.mu + i_u + i_n + f_u * f_n
    a = gamma * (0.5 - s)
    with np.errstate(over="ignore"):
        w_h, w_n = np.exp(-a), np.exp(a)
    z = 1.0 + w_h + w_n
    return (float(np.mean(w_h / z)), float(np.mean(1.0 / z)),
            float(np.mean(w_n / z)))


def calibrate(search: CalibrationSearch, seed: int = 0,
              base: PopulationSpec | None = None,
              global_params: GlobalParams | None = None) -> CalibrationResult:
    """Accept rating-model parameters whose mean rating mix matches target.

    Draws a shared intercept mean, the two intercept sds, and the rating
    sharpness gamma uniformly inside the search bounds, estimates the mean
    rating mix over n_pairs Monte Carlo rater/note pairs, and accepts draws
    whose squared mix distance is below epsilon.  Bias sds stay at the base
    spec's values.
    """
    base = base or PopulationSpec(n_raters=1, n_notes=1)
    g = global_params or GlobalParams()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    lo_m, hi_m = search.intercept_mean_bounds
    lo_s, hi_s = search.sigma_bounds
    lo_g, hi_g = search.gamma_bounds
    rows = []
    for _ in range(search.n_draws):
        mean = rng.uniform(lo_m, hi_m)
        sd_n = rng.uniform(lo_s, hi_s)
        sd_u = rng.uniform(lo_s, hi_s)
        gamma = rng.uniform(lo_g, hi_g)
        mix = estimate_mix(mean, sd_n, sd_u, gamma, rng, search.n_pairs,
                           base, g)
        dist = _mix_distance(mix, search.target_mix)
        if dist < search.epsilon:
            rows.append((mean, sd_n, sd_u, gamma) + mix + (dist,))
    accepted = (np.asarray(rows, dtype=float) if rows
                else np.zeros((0, len(_CAL_COLUMNS))))
    return CalibrationResult(_CAL_COLUMNS, accepted, search.n_draws,
                             len(rows))


def write_calibration_csv(path, result: CalibrationResult):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(result.columns)
        for row in result.accepted:
            writer.writerow([_fmt(float(v)) for v in row])


# ===== Preset library =====

_PRESET_DIR = Path(__file__).resolve().parent / "presets"


def _grouped_normal(raw: dict) -> GroupedNormal:
    if set(raw) <= {"rho", "sd"}:
        return GroupedNormal.symmetric(raw.get("rho", 0.0), raw.get("sd", 0.5))
    return GroupedNormal(**raw)


def _population(raw: dict) -> PopulationSpec:
    raw = dict(raw)
    for key in ("rater_bias", "note_bias"):
        if key in raw:
            raw[key] = _grouped_normal(raw[key])
    return PopulationSpec(**raw)


_SECTION_KEYS = {"kind", "source", "n_replicates_desk", "n_replicates_full",
                 "population", "global", "network", "adversary", "fit",
                 "filter_enabled", "base_seed", "randomize_phi", "axes",
                 "search"}


def _scenario_from_raw(name: str, raw: dict, scale: str) -> ScenarioConfig:
    unknown = set(raw) - _SECTION_KEYS
    if unknown:
        raise ValueError(f"preset {name} has unknown keys: {sorted(unknown)}")
    counts = {"desk": raw.get("n_replicates_desk", 10),
              "full": raw.get("n_replicates_full", 50)}
    if scale not in counts:
        raise ValueError("scale must be 'desk' or 'full'")
    return ScenarioConfig(
        name=name,
        population=_population(raw["population"]),
        global_params=GlobalParams(**raw.get("global", {})),
        network=NetworkConfig(**raw.get("network", {})),
        adversary=AdversaryConfig(**raw.get("adversary", {})),
        fit=FitHyper(**raw.get("fit", {})),
        filter_enabled=raw.get("filter_enabled", True),
        n_replicates=counts[scale],
        base_seed=raw.get("base_seed", 0),
        randomize_phi=raw.get("randomize_phi", False))


@dataclass(frozen=True)
class Preset:
    """A named scenario, sweep, or calibration search with its doc line."""

    name: str
    kind: str
    source: str
    scenario: ScenarioConfig | None = None
    axes: dict[str, tuple] | None = None
    search: CalibrationSearch | None = None

    def grid(self) -> SweepGrid:
        if self.kind != "sweep":
            raise ValueError(f"preset {self.name} is not a sweep")
        return SweepGrid(self.scenario, self.axes)


def _read_preset_file(path: Path) -> dict:
    if path.suffix == ".toml":
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def preset_names() -> list[str]:
    paths = sorted(_PRESET_DIR.glob("*.toml")) + sorted(
        _PRESET_DIR.glob("*.json"))
    return [p.stem for p in paths]


def load_preset(name: str, scale: str = "desk") -> Preset:
    """Load one named preset at desk or full replicate counts."""
    for suffix in (".toml", ".json"):
        path = _PRESET_DIR / f"{name}{suffix}"
        if path.exists():
            break
    else:
        raise KeyError(f"unknown preset: {name!r}; "
                       f"available: {preset_names()}")
    return _preset_from_raw(name, _read_preset_file(path), scale)


def load_preset_file(path, scale: str = "desk") -> Preset:
    """Load a scenario, sweep, or calibration file from an explicit path."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    return _preset_from_raw(path.stem, _read_preset_file(path), scale)


def _preset_from_raw(name: str, raw: dict, scale: str) -> Preset:
    kind = raw.get("kind", "scenario")
    if kind not in ("scenario", "sweep", "calibration"):
        raise ValueError(f"preset {name} has unknown kind {kind!r}")
    source = raw.get("source", "")
    if kind == "calibration":
        search_raw = raw.get("search", {})
        search_raw = {k: tuple(v) if isinstance(v, list) else v
                      for k, v in search_raw.items()}
        return Preset(name=name, kind=kind, source=source,
                      search=CalibrationSearch(**search_raw))
    scenario = _scenario_from_raw(name, raw, scale)
    axes = None
    if kind == "sweep":
        axes = {k: tuple(v) for k, v in raw.get("axes", {}).items()}
        if not axes:
            raise ValueError(f"sweep preset {name} has no axes")
    return Preset(name=name, kind=kind, source=source,
                  scenario=scenario, axes=axes)
