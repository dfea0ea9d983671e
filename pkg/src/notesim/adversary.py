"""Bad-rater behavior as a probability transform over honest rating behavior.

A bad rater targets notes it believes will be published (true i_n at or above
the helpful threshold) and, when its per-note suppression draw fires, swaps
the HELPFUL and NOT HELPFUL probabilities of its honest distribution.
Indiscriminate raters attack every such note; coordinated raters attack only
notes on the opposite side of their shared target sign phi (phi * f_n < 0).
Bad raters perceive the true note parameters, which makes them the worst
case for the scorer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import RatingGraph, _rng
from .population import (GlobalParams, NoteProfile, Population, RaterProfile,
                         RatingProbs, draw_ratings_batch, honest_probs,
                         score_probs_batch)

INDISCRIMINATE = "indiscriminate"
COORDINATED = "coordinated"
MODES = (INDISCRIMINATE, COORDINATED)

HELPFUL_THRESHOLD = 0.4


@dataclass(frozen=True)
class AdversaryConfig:
    """Who attacks, how often, and which notes they go after."""

    fraction_bad: float = 0.0
    behavior_rate: float = 1.0
    mode: str = INDISCRIMINATE
    phi: int = 1
    helpful_threshold: float = HELPFUL_THRESHOLD

    def __post_init__(self):
        if not (0.0 <= self.fraction_bad <= 1.0):
            raise ValueError("fraction_bad must lie in [0, 1]")
        if not (0.0 <= self.behavior_rate <= 1.0):
            raise ValueError("behavior_rate must lie in [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.phi not in (-1, 1):
            raise ValueError("phi must be -1 or +1")


def assign_bad(n_raters: int, cfg: AdversaryConfig, seed) -> np.ndarray:
    """Independent Bernoulli(fraction_bad) bad flag per rater."""
    rng = _rng(seed)
    return rng.random(n_raters) < cfg.fraction_bad


def mark_bad(pop: Population, cfg: AdversaryConfig, seed) -> Population:
    """Population copy with the bad flags drawn for this config."""
    bad = assign_bad(pop.n_raters, cfg, seed)
    return Population(spec=pop.spec, rater_intercept=pop.rater_intercept,
                      rater_bias=pop.rater_bias, rater_group=pop.rater_group,
                      rater_is_bad=bad, note_intercept=pop.note_intercept,
                      note_bias=pop.note_bias, note_group=pop.note_group)


def _wants_attack(cfg: AdversaryConfig, i_n, f_n):
    """Whether a bad rater would target this note at all (suppression aside)."""
    likely_published = i_n >= cfg.helpful_threshold
    if cfg.mode == INDISCRIMINATE:
        return likely_published
    return likely_published & (cfg.phi * f_n < 0)


def effective_probs(g: GlobalParams, rater: RaterProfile, note: NoteProfile,
                    cfg: AdversaryConfig, rng: np.random.Generator) -> RatingProbs:
    """Rating distribution for one pair; may swap H and NH for a bad rater.

    Consumes exactly one uniform from rng per call, honest or not, matching
    the per-edge stream layout of effective_probs_batch.
    """
    probs = honest_probs(g, rater, note)
    suppressing = rng.random() < cfg.behavior_rate
    if (rater.is_bad and suppressing
            and bool(_wants_attack(cfg, note.intercept, note.bias))):
        return RatingProbs(probs.p_not_helpful, probs.p_somewhat, probs.p_helpful)
    return probs


def effective_probs_batch(g: GlobalParams, pop: Population, graph: RatingGraph,
                          cfg: AdversaryConfig, rng: np.random.Generator):
    """Per-edge (p_helpful, p_somewhat, p_not) with bad-rater swaps applied.

    One suppression uniform is drawn per edge regardless of the rater's flag,
    so the attack pattern for a fixed rng seed does not shift when
    fraction_bad changes.
    """
    u, n = graph.edge_raters, graph.edge_notes
    s = (g.mu + pop.rater_intercept[u] + pop.note_intercept[n]
         + pop.rater_bias[u] * pop.note_bias[n])
    ph, ps, pn = score_probs_batch(g, s)
    suppressing = rng.random(graph.n_edges) < cfg.behavior_rate
    attack = (pop.rater_is_bad[u] & suppressing
              & _wants_attack(cfg, pop.note_intercept[n], pop.note_bias[n]))
    ph, pn = np.where(attack, pn, ph), np.where(attack, ph, pn)
    return ph, ps, pn


def sample_graph_ratings(g: GlobalParams, pop: Population, graph: RatingGraph,
                         cfg: AdversaryConfig, seed) -> RatingGraph:
    """Graph copy with ratings drawn from the effective distributions."""
    rng = _rng(seed)
    ph, ps, _ = effective_probs_batch(g, pop, graph, cfg, rng)
    ratings = draw_ratings_batch(ph, ps, rng)
    return RatingGraph(graph.n_raters, graph.n_notes, graph.edge_raters,
                       graph.edge_notes, ratings)


def targeted_mask(pop: Population, cfg: AdversaryConfig) -> np.ndarray:
    """Notes on the attacked side of the bias axis: phi * f_n < 0.

    This is the grouping used to report attack outcomes, so it is defined for
    every note regardless of its helpfulness.
    """
    return cfg.phi * pop.note_bias < 0
