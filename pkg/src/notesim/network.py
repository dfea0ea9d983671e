"""Bipartite rater-note graphs: empirical degree ingestion, synthetic degree
tables, stub-matching construction, and homophily-controlled rewiring.

The graph is a simple bipartite graph (each rater rates a note at most once)
stored as parallel edge arrays.  Degree realism comes from degree tables that
are either ingested from a ratings TSV dump or synthesized from bounded
discrete power laws.  In-group bias is imposed afterwards by degree-preserving
double-edge swaps that drive the fraction of same-group edges to a target p,
so the expected in-group bias is E_h = 2p - 1.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

NOTE_DEGREE_FLOOR = 5
RATER_DEGREE_FLOOR = 10


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# ===== Degree tables =====


@dataclass
class DegreeTables:
    """Histograms of note and rater degrees: parallel (degree, count) arrays."""

    note_degrees: np.ndarray      # int64, distinct degree values, ascending
    note_counts: np.ndarray
    rater_degrees: np.ndarray
    rater_counts: np.ndarray
    source: str = "synthetic"

    def __post_init__(self):
        for deg, cnt in ((self.note_degrees, self.note_counts),
                         (self.rater_degrees, self.rater_counts)):
            if len(deg) != len(cnt):
                raise ValueError("degree and count arrays must align")
            if len(deg) == 0:
                raise ValueError("degree table has no entries")
            if np.any(cnt <= 0) or np.any(deg <= 0):
                raise ValueError("degrees and counts must be positive")

    @property
    def n_notes(self) -> int:
        return int(self.note_counts.sum())

    @property
    def n_raters(self) -> int:
        return int(self.rater_counts.sum())

    @property
    def total_note_stubs(self) -> int:
        return int((self.note_degrees * self.note_counts).sum())

    @property
    def total_rater_stubs(self) -> int:
        return int((self.rater_degrees * self.rater_counts).sum())

    def mean_note_degree(self) -> float:
        return self.total_note_stubs / self.n_notes

    def mean_rater_degree(self) -> float:
        return self.total_rater_stubs / self.n_raters

    def sample_note_degrees(self, rng, size: int) -> np.ndarray:
        p = self.note_counts / self.note_counts.sum()
        return rng.choice(self.note_degrees, size=size, replace=True, p=p)

    def sample_rater_degrees(self, rng, size: int) -> np.ndarray:
        p = self.rater_counts / self.rater_counts.sum()
        return rng.choice(self.rater_degrees, size=size, replace=True, p=p)

    def to_csv(self, prefix) -> tuple[Path, Path]:
        """Write {prefix}.notes.csv and {prefix}.raters.csv as degree,count tables."""
        prefix = Path(prefix)
        paths = (prefix.with_suffix(prefix.suffix + ".notes.csv"),
                 prefix.with_suffix(prefix.suffix + ".raters.csv"))
        for path, deg, cnt in zip(paths, (self.note_degrees, self.rater_degrees),
                                  (self.note_counts, self.rater_counts)):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["degree", "count"])
                for d, c in zip(deg, cnt):
                    w.writerow([int(d), int(c)])
        return paths

    @classmethod
    def from_csv(cls, prefix, source="file") -> "DegreeTables":
        prefix = Path(prefix)
        sides = []
        for suffix in (".notes.csv", ".raters.csv"):
            path = prefix.with_suffix(prefix.suffix + suffix)
            if not path.exists():
                raise FileNotFoundError(f"degree table not found: {path}")
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows or rows[0] != ["degree", "count"]:
                raise ValueError(f"{path}: expected header 'degree,count'")
            deg = np.array([int(r[0]) for r in rows[1:]], dtype=np.int64)
            cnt = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
            sides.append((deg, cnt))
        return cls(note_degrees=sides[0][0], note_counts=sides[0][1],
                   rater_degrees=sides[1][0], rater_counts=sides[1][1], source=source)


@dataclass(frozen=True)
class IngestStats:
    """Counts observed while streaming a ratings TSV into degree tables."""

    n_notes_seen: int
    n_raters_seen: int
    n_edges: int
    n_notes_kept: int
    n_raters_kept: int


def scan_ratings_tsv(tsv_path, min_note_degree: int = NOTE_DEGREE_FLOOR,
                     min_rater_degree: int = RATER_DEGREE_FLOOR,
                     ) -> tuple[DegreeTables, IngestStats]:
    """Stream a ratings TSV (noteId / raterParticipantId columns) into degree tables.

    Duplicate (rater, note) rows collapse to a single edge.  Degrees are
    counted on the deduplicated graph; the minimum-degree thresholds only
    select which entries enter each side's table.  Returns the tables
    together with before/after entity counts.
    """
    tsv_path = Path(tsv_path)
    note_deg: dict = {}
    rater_deg: dict = {}
    seen = set()
    with open(tsv_path, newline="") as fh:
        header = fh.readline()
        if not header.strip():
            raise ValueError(f"{tsv_path}: empty ratings file")
        cols = header.rstrip("\n").split("\t")
        try:
            note_col = cols.index("noteId")
            rater_col = cols.index("raterParticipantId")
        except ValueError:
            raise ValueError(f"{tsv_path}: header lacks noteId/raterParticipantId columns")
        width = max(note_col, rater_col)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) <= width:
                raise ValueError(f"{tsv_path}:{lineno}: expected at least {width + 1} columns")
            note, rater = parts[note_col], parts[rater_col]
            if not note or not rater:
                raise ValueError(f"{tsv_path}:{lineno}: empty noteId or raterParticipantId")
            key = (rater, note)
            if key in seen:
                continue
            seen.add(key)
            note_deg[note] = note_deg.get(note, 0) + 1
            rater_deg[rater] = rater_deg.get(rater, 0) + 1
    if not note_deg:
        raise ValueError(f"{tsv_path}: no data rows")
    note_kept = [d for d in note_deg.values() if d >= min_note_degree]
    rater_kept = [d for d in rater_deg.values() if d >= min_rater_degree]
    if not note_kept or not rater_kept:
        raise ValueError(f"{tsv_path}: no entries survive the degree thresholds")

    def histogram(values):
        vals, counts = np.unique(np.array(values, dtype=np.int64), return_counts=True)
        return vals, counts

    nd, nc = histogram(note_kept)
    rd, rc = histogram(rater_kept)
    tables = DegreeTables(note_degrees=nd, note_counts=nc, rater_degrees=rd,
                          rater_counts=rc, source=str(tsv_path))
    stats = IngestStats(n_notes_seen=len(note_deg),
                        n_raters_seen=len(rater_deg), n_edges=len(seen),
                        n_notes_kept=len(note_kept),
                        n_raters_kept=len(rater_kept))
    return tables, stats


def ingest_degree_tables(tsv_path, min_note_degree: int = NOTE_DEGREE_FLOOR,
                         min_rater_degree: int = RATER_DEGREE_FLOOR) -> DegreeTables:
    """Degree tables from a ratings TSV; see scan_ratings_tsv."""
    return scan_ratings_tsv(tsv_path, min_note_degree, min_rater_degree)[0]


# ===== Synthetic degree tables =====


def _power_law_mean(alpha: float, lo: int, hi: int) -> float:
    k = np.arange(lo, hi + 1, dtype=np.float64)
    w = k ** (-alpha)
    return float((k * w).sum() / w.sum())


def solve_power_law_exponent(target_mean: float, lo: int, hi: int) -> float:
    """Bisect the exponent of a bounded discrete power law to a target mean degree."""
    if not (lo < target_mean < hi):
        raise ValueError(f"target mean {target_mean} outside degree bounds [{lo}, {hi}]")
    a, b = 0.01, 8.0
    if _power_law_mean(a, lo, hi) < target_mean:
        raise ValueError("target mean unreachable even at the flattest exponent")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if _power_law_mean(mid, lo, hi) > target_mean:
            a = mid
        else:
            b = mid
        if b - a < 1e-12:
            break
    return 0.5 * (a + b)


def _draw_power_law(rng, n, alpha, lo, hi) -> np.ndarray:
    k = np.arange(lo, hi + 1, dtype=np.float64)
    p = k ** (-alpha)
    p /= p.sum()
    return rng.choice(np.arange(lo, hi + 1, dtype=np.int64), size=n, replace=True, p=p)


def synth_degree_tables(n_notes: int, n_raters: int, target_edges: int, seed, *,
                        uniform: bool = False,
                        note_degree_cap: int = 600,
                        rater_degree_cap: int = 1200) -> DegreeTables:
    """Synthesize degree tables when no ratings dump is available.

    Note degrees come from a bounded discrete power law with floor 5 whose
    exponent is bisected so the expected total lands on target_edges; rater
    degrees (floor 10) are drawn the same way and then rescaled so the two
    sides' stub totals match exactly.
    """
    if uniform:
        if target_edges % n_notes or target_edges % n_raters:
            raise ValueError("uniform tables need target_edges divisible by both sides")
        nd = target_edges // n_notes
        rd = target_edges // n_raters
        if nd < NOTE_DEGREE_FLOOR or rd < RATER_DEGREE_FLOOR:
            raise ValueError("uniform degrees fall below the floors")
        return DegreeTables(note_degrees=np.array([nd]), note_counts=np.array([n_notes]),
                            rater_degrees=np.array([rd]), rater_counts=np.array([n_raters]))

    rng = _rng(seed)
    note_cap = min(note_degree_cap, max(n_raters, NOTE_DEGREE_FLOOR + 1))
    rater_cap = min(rater_degree_cap, max(n_notes, RATER_DEGREE_FLOOR + 1))
    alpha_n = solve_power_law_exponent(target_edges / n_notes, NOTE_DEGREE_FLOOR, note_cap)
    alpha_u = solve_power_law_exponent(target_edges / n_raters, RATER_DEGREE_FLOOR, rater_cap)
    note_seq = _draw_power_law(rng, n_notes, alpha_n, NOTE_DEGREE_FLOOR, note_cap)
    rater_seq = _draw_power_law(rng, n_raters, alpha_u, RATER_DEGREE_FLOOR, rater_cap)

    # rescale rater degrees so both sides have identical stub totals
    total = int(note_seq.sum())
    scale = total / rater_seq.sum()
    rater_seq = np.maximum(RATER_DEGREE_FLOOR, np.rint(rater_seq * scale).astype(np.int64))
    diff = total - int(rater_seq.sum())
    step = 1 if diff > 0 else -1
    idx = rng.permutation(n_raters)
    j = 0
    while diff != 0:
        u = idx[j % n_raters]
        j += 1
        if step < 0 and rater_seq[u] <= RATER_DEGREE_FLOOR:
            continue
        rater_seq[u] += step
        diff -= step

    def histogram(values):
        vals, counts = np.unique(values, return_counts=True)
        return vals, counts

    nd, nc = histogram(note_seq)
    rd, rc = histogram(rater_seq)
    return DegreeTables(note_degrees=nd, note_counts=nc, rater_degrees=rd, rater_counts=rc)


# ===== Rating graph =====


@dataclass
class RatingGraph:
    """Simple bipartite graph as parallel edge arrays; ratings filled in later."""

    n_raters: int
    n_notes: int
    edge_raters: np.ndarray    # int64 rater index per edge
    edge_notes: np.ndarray     # int64 note index per edge
    ratings: np.ndarray | None = None

    @property
    def n_edges(self) -> int:
        return len(self.edge_raters)

    def note_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_notes, minlength=self.n_notes)

    def rater_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_raters, minlength=self.n_raters)

    def packed_edges(self) -> np.ndarray:
        return (self.edge_raters.astype(np.int64) << 32) | self.edge_notes.astype(np.int64)

    def has_duplicate_edges(self) -> bool:
        return len(np.unique(self.packed_edges())) != self.n_edges

    def validate(self):
        if self.edge_raters.shape != self.edge_notes.shape:
            raise ValueError("edge arrays must align")
        if self.n_edges and (self.edge_raters.min() < 0 or self.edge_raters.max() >= self.n_raters):
            raise ValueError("rater index out of range")
        if self.n_edges and (self.edge_notes.min() < 0 or self.edge_notes.max() >= self.n_notes):
            raise ValueError("note index out of range")
        if self.has_duplicate_edges():
            raise ValueError("duplicate (rater, note) edges")
        if self.ratings is not None and len(self.ratings) != self.n_edges:
            raise ValueError("ratings array must align with edges")

    def copy(self) -> "RatingGraph":
        return RatingGraph(self.n_raters, self.n_notes, self.edge_raters.copy(),
                           self.edge_notes.copy(),
                           None if self.ratings is None else self.ratings.copy())


def complete_graph(n_raters: int, n_notes: int) -> RatingGraph:
    """Every rater rates every note."""
    er = np.repeat(np.arange(n_raters, dtype=np.int64), n_notes)
    en = np.tile(np.arange(n_notes, dtype=np.int64), n_raters)
    return RatingGraph(n_raters=n_raters, n_notes=n_notes, edge_raters=er, edge_notes=en)


@njit(cache=True)
def _seed_fill_core(remaining, deg_values, deg_cdf, rng):  # pragma: no cover
    """Fill note stubs rater by rater, each rater connecting its drawn degree
    to distinct notes chosen uniformly among notes with unfilled stubs.
    Returns (edge_raters, edge_notes, n_raters)."""
    n_notes = remaining.shape[0]
    total = 0
    for i in range(n_notes):
        total += remaining[i]
    active = np.arange(n_notes)
    n_active = n_notes
    edge_raters = np.empty(total, dtype=np.int64)
    edge_notes = np.empty(total, dtype=np.int64)
    filled = 0
    rater = 0
    while n_active > 0:
        k = np.searchsorted(deg_cdf, rng.random(), side="right")
        if k >= deg_values.shape[0]:
            k = deg_values.shape[0] - 1
        d = deg_values[k]
        if d > n_active:
            d = n_active                  # truncated rater: the pool ran short
        # partial Fisher-Yates: move d distinct notes to the front of active
        for i in range(d):
            j = i + np.int64(rng.random() * (n_active - i))
            active[i], active[j] = active[j], active[i]
        for i in range(d):
            note = active[i]
            edge_raters[filled] = rater
            edge_notes[filled] = note
            filled += 1
            remaining[note] -= 1
        # swap filled notes out of the pool
        i = 0
        while i < d:
            note = active[i]
            if remaining[note] == 0:
                active[i] = active[n_active - 1]
                active[n_active - 1] = note
                n_active -= 1
                if d > n_active:
                    d = n_active
            else:
                i += 1
        rater += 1
    return edge_raters, edge_notes, rater


def sample_seed_graph(tables: DegreeTables, n_notes: int, seed) -> RatingGraph:
    """Build a graph by stub filling: sample each note's rating count from the
    tables, then add raters one at a time, connecting each new rater's drawn
    degree to distinct notes chosen uniformly among notes that still need
    ratings.  Note degrees are exact; rater degrees truncate only when the
    unfilled pool runs short, so the rater count is emergent.  The graph is
    simple by construction.
    """
    rng = _rng(seed)
    remaining = tables.sample_note_degrees(rng, n_notes).astype(np.int64)
    weights = tables.rater_counts / tables.rater_counts.sum()
    deg_cdf = np.cumsum(weights)
    deg_values = tables.rater_degrees.astype(np.int64)
    edge_raters, edge_notes, n_raters = _seed_fill_core(remaining, deg_values,
                                                        deg_cdf, rng)
    return RatingGraph(n_raters=int(n_raters), n_notes=n_notes,
                       edge_raters=edge_raters, edge_notes=edge_notes)


# ===== Homophily rewiring =====


@dataclass(frozen=True)
class HomophilyTarget:
    """Probability p that a rewired edge joins a rater and note of the same group."""

    p: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("homophily p must lie in [0, 1]")

    @property
    def expected_ingroup_bias(self) -> float:
        return 2.0 * self.p - 1.0


@dataclass
class RewireStats:
    attempts: int
    accepted_rebalance: int
    accepted_mixing: int
    nominal_eh: float
    realized_eh: float
    saturated: bool


def measure_ingroup_bias(graph: RatingGraph, rater_groups, note_groups) -> float:
    """E_h = 2 e_h / E - 1, e_h = number of edges whose endpoints share a group."""
    if graph.n_edges == 0:
        raise ValueError("cannot measure in-group bias of an empty graph")
    same = rater_groups[graph.edge_raters] == note_groups[graph.edge_notes]
    return 2.0 * float(np.count_nonzero(same)) / graph.n_edges - 1.0


def balanced_groups(degrees) -> np.ndarray:
    """Split entities into +-1 groups with near-equal total degree.

    Greedy largest-degree-first assignment to the lighter side; used to build
    group labels under which a full same-group (or full cross-group) wiring is
    degree-feasible, so extreme homophily targets are reachable.
    """
    degrees = np.asarray(degrees)
    groups = np.empty(len(degrees), dtype=np.int64)
    s_plus = 0
    s_minus = 0
    for i in np.argsort(-degrees, kind="stable"):
        if s_plus <= s_minus:
            groups[i] = 1
            s_plus += int(degrees[i])
        else:
            groups[i] = -1
            s_minus += int(degrees[i])
    return groups


@njit(cache=True)
def _rewire_core(edge_u, edge_n, rater_plus, note_plus, quota, rng,
                 n_swaps, max_tries):  # pragma: no cover
    """Double-edge swaps in two phases: rebalance the same-group edge count to
    the quota, then alignment-preserving mixing until n_swaps pair swaps have
    been accepted (or max_tries proposals are spent).
    Returns (tries, accepted_rebalance, accepted_mixing, saturated)."""
    n_edges = edge_u.shape[0]
    occupied = {np.int64(0)}          # packed (u << 32) | n for duplicate checks
    occupied.clear()
    for i in range(n_edges):
        occupied.add((edge_u[i] << 32) | edge_n[i])

    # bucket edges by (rater_plus, note_plus): pp, pm, mp, mm
    sizes = np.zeros(4, dtype=np.int64)
    which = np.empty(n_edges, dtype=np.int8)
    for i in range(n_edges):
        b = (0 if rater_plus[edge_u[i]] else 2) + (0 if note_plus[edge_n[i]] else 1)
        which[i] = b
        sizes[b] += 1
    buckets = np.empty((4, n_edges), dtype=np.int64)
    slot = np.empty(n_edges, dtype=np.int64)
    fill = np.zeros(4, dtype=np.int64)
    for i in range(n_edges):
        b = which[i]
        buckets[b, fill[b]] = i
        slot[i] = fill[b]
        fill[b] += 1

    same = sizes[0] + sizes[3]        # pp + mm
    tries = 0
    acc_re = 0
    acc_mix = 0
    saturated = False
    stall = 0
    stall_limit = 100                 # consecutive failed partner searches before a pause
    burst = max(10_000, n_edges // 100)

    def bucket_remove(b, i):
        s = slot[i]
        last = buckets[b, sizes[b] - 1]
        buckets[b, s] = last
        slot[last] = s
        sizes[b] -= 1

    def bucket_add(b, i):
        buckets[b, sizes[b]] = i
        slot[i] = sizes[b]
        which[i] = b
        sizes[b] += 1

    # Rebalancing moves the same-group count toward the quota in steps of 2 by
    # pairing a (plus, minus) edge with a (minus, plus) edge (or the same-group
    # buckets for the opposite direction).  When duplicate collisions stall it,
    # a burst of alignment-preserving mixing reshuffles partners and the
    # rebalance resumes; two consecutive zero-progress cycles mean the quota is
    # structurally out of reach.  Any leftover budget is spent on mixing, which
    # keeps the same-group count fixed.
    MODE_REBALANCE, MODE_BURST, MODE_FINAL = 0, 1, 2
    mode = MODE_REBALANCE
    burst_left = 0
    zero_cycles = 0
    cycle_accepts = 0
    while acc_re + acc_mix < n_swaps and tries < max_tries:
        if mode == MODE_REBALANCE:
            if abs(same - quota) < 2:
                mode = MODE_FINAL
                continue
            if same < quota:
                b1, b2 = 1, 2        # cross pair -> two same-group edges
            else:
                b1, b2 = 0, 3        # same pair -> two cross edges
            if sizes[b1] == 0 or sizes[b2] == 0:
                saturated = True
                mode = MODE_FINAL
                continue
            if stall >= stall_limit:
                if cycle_accepts == 0:
                    zero_cycles += 1
                else:
                    zero_cycles = 0
                stall = 0
                cycle_accepts = 0
                if zero_cycles >= 3:
                    saturated = True
                    mode = MODE_FINAL
                else:
                    burst_left = burst
                    mode = MODE_BURST
                continue
            e1 = buckets[b1, int(rng.random() * sizes[b1])]
            u1, n1 = edge_u[e1], edge_n[e1]
            found = False
            for _p in range(64):      # retry partners for the picked edge
                tries += 1
                e2 = buckets[b2, int(rng.random() * sizes[b2])]
                u2, n2 = edge_u[e2], edge_n[e2]
                k1 = (u1 << 32) | n2
                k2 = (u2 << 32) | n1
                if k1 in occupied or k2 in occupied:
                    if tries >= max_tries:
                        break
                    continue
                found = True
                break
            if not found:
                stall += 1
                continue
            stall = 0
            cycle_accepts += 1
            occupied.remove((u1 << 32) | n1)
            occupied.remove((u2 << 32) | n2)
            occupied.add(k1)
            occupied.add(k2)
            edge_n[e1] = n2
            edge_n[e2] = n1
            bucket_remove(b1, e1)
            bucket_remove(b2, e2)
            if same < quota:         # both new edges same-group
                bucket_add(0 if rater_plus[u1] else 3, e1)
                bucket_add(0 if rater_plus[u2] else 3, e2)
                same += 2
            else:                    # both new edges cross-group
                bucket_add(1 if rater_plus[u1] else 2, e1)
                bucket_add(1 if rater_plus[u2] else 2, e2)
                same -= 2
            acc_re += 1
        else:
            if mode == MODE_BURST and burst_left == 0:
                mode = MODE_REBALANCE
                continue
            burst_left -= 1
            tries += 1
            e1 = int(rng.random() * n_edges)
            e2 = int(rng.random() * n_edges)
            if e1 == e2:
                continue
            u1, n1 = edge_u[e1], edge_n[e1]
            u2, n2 = edge_u[e2], edge_n[e2]
            if u1 == u2 or n1 == n2:
                continue
            a_old = (1 if rater_plus[u1] == note_plus[n1] else 0) + \
                    (1 if rater_plus[u2] == note_plus[n2] else 0)
            a_new = (1 if rater_plus[u1] == note_plus[n2] else 0) + \
                    (1 if rater_plus[u2] == note_plus[n1] else 0)
            if a_new != a_old:
                continue
            k1 = (u1 << 32) | n2
            k2 = (u2 << 32) | n1
            if k1 in occupied or k2 in occupied:
                continue
            occupied.remove((u1 << 32) | n1)
            occupied.remove((u2 << 32) | n2)
            occupied.add(k1)
            occupied.add(k2)
            edge_n[e1] = n2
            edge_n[e2] = n1
            # keep buckets coherent so the rebalance can resume after a burst
            b_old1 = which[e1]
            b_old2 = which[e2]
            bucket_remove(b_old1, e1)
            bucket_remove(b_old2, e2)
            bucket_add((0 if rater_plus[u1] else 2) + (0 if note_plus[n2] else 1), e1)
            bucket_add((0 if rater_plus[u2] else 2) + (0 if note_plus[n1] else 1), e2)
            acc_mix += 1

    if abs(same - quota) >= 2 and not saturated:
        saturated = True              # tries exhausted before reaching the quota

    return tries, acc_re, acc_mix, saturated


def rewire(graph: RatingGraph, rater_groups, note_groups, target: HomophilyTarget,
           n_pair_swaps: int = 1_000_000, seed=0, max_tries: int | None = None,
           warn_tol: float = 0.05) -> tuple[RatingGraph, RewireStats]:
    """Drive the same-group edge fraction to target.p with degree-preserving swaps.

    Groups are +-1 arrays per side.  The quota round(p * E) is approached with
    paired cross/same conversions, then alignment-preserving mixing swaps
    randomize the wiring at the fixed quota until n_pair_swaps pair swaps have
    been accepted.  Degrees on both sides are untouched; no duplicate edge is
    ever created.  If the quota is unreachable (group and degree structure
    make the split infeasible, or max_tries runs out) the result saturates and
    a warning is logged when |realized - nominal| exceeds warn_tol.
    """
    out = graph.copy()
    rng = _rng(seed)
    quota = int(round(target.p * graph.n_edges))
    if max_tries is None:
        max_tries = 25 * n_pair_swaps
    rater_plus = np.asarray(rater_groups) > 0
    note_plus = np.asarray(note_groups) > 0
    tries, acc_re, acc_mix, saturated = _rewire_core(
        out.edge_raters, out.edge_notes, rater_plus, note_plus,
        np.int64(quota), rng, np.int64(n_pair_swaps), np.int64(max_tries))
    realized = measure_ingroup_bias(out, np.asarray(rater_groups), np.asarray(note_groups))
    stats = RewireStats(attempts=int(tries), accepted_rebalance=int(acc_re),
                        accepted_mixing=int(acc_mix),
                        nominal_eh=target.expected_ingroup_bias,
                        realized_eh=realized, saturated=bool(saturated))
    if abs(realized - stats.nominal_eh) > warn_tol:
        log.warning("rewiring saturated: realized E_h %.4f vs nominal %.4f",
                    realized, stats.nominal_eh)
    return out, stats
