"""Synthetic rater and note populations and the three-outcome rating model.

Each rater u carries a helpfulness intercept i_u and a bias factor f_u,
each note n an intercept i_n and bias f_n.  The latent agreement score of a
rater-note pair is

    s = mu + i_u + i_n + f_u * f_n

and the probability of each rating outcome follows a three-way softmax
sharpened by gamma around the neutral score 1/2:

    a     = gamma * (1/2 - s)
    p_H   = exp(-a) / (1 + exp(-a) + exp(a))      rating 1.0
    p_NH  = exp(+a) / (1 + exp(-a) + exp(a))      rating 0.0
    p_SH  = 1 - p_H - p_NH                        rating 0.5

Intercepts are drawn from a single normal per side; bias factors are drawn
from a group-conditional normal (Plus / Minus), which is how population
polarization is controlled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

HELPFUL = 1.0
SOMEWHAT = 0.5
NOT_HELPFUL = 0.0

RATING_VALUES = np.array([HELPFUL, SOMEWHAT, NOT_HELPFUL])


class Group(enum.IntEnum):
    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class GlobalParams:
    """Shared constants of the rating model."""

    mu: float = 0.17        # global propensity to rate Helpful
    gamma: float = 30.0     # softmax sharpness; 0 = uniform thirds

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


@dataclass(frozen=True)
class GroupedNormal:
    """Group-conditional normal for bias factors: N(mean_plus, sd_plus) or N(mean_minus, sd_minus)."""

    mean_plus: float = 0.0
    mean_minus: float = 0.0
    sd_plus: float = 0.0
    sd_minus: float = 0.0

    def __post_init__(self):
        if self.sd_plus < 0 or self.sd_minus < 0:
            raise ValueError("bias sds must be >= 0")

    @property
    def polarization(self) -> float:
        # rho = (mean_plus - mean_minus) / 2
        return 0.5 * (self.mean_plus - self.mean_minus)

    @classmethod
    def symmetric(cls, rho: float, sd: float) -> "GroupedNormal":
        """Mirror-image groups: means +-rho, common sd."""
        return cls(mean_plus=rho, mean_minus=-rho, sd_plus=sd, sd_minus=sd)


@dataclass(frozen=True)
class PopulationSpec:
    """Sizes and distribution parameters of one synthetic population."""

    n_raters: int
    n_notes: int
    rater_intercept_mean: float = 0.25
    rater_intercept_sd: float = 0.2
    note_intercept_mean: float = 0.25
    note_intercept_sd: float = 0.5
    rater_bias: GroupedNormal = field(default_factory=lambda: GroupedNormal.symmetric(0.0, 0.5))
    note_bias: GroupedNormal = field(default_factory=lambda: GroupedNormal.symmetric(0.0, 0.5))

    def __post_init__(self):
        if self.n_raters <= 0 or self.n_notes <= 0:
            raise ValueError("population sizes must be positive")
        if self.rater_intercept_sd < 0 or self.note_intercept_sd < 0:
            raise ValueError("intercept sds must be >= 0")

    @property
    def rater_polarization(self) -> float:
        return self.rater_bias.polarization

    @property
    def note_polarization(self) -> float:
        return self.note_bias.polarization


@dataclass(frozen=True)
class RaterProfile:
    intercept: float
    bias: float
    group: Group
    is_bad: bool = False


@dataclass(frozen=True)
class NoteProfile:
    intercept: float
    bias: float
    group: Group


@dataclass
class Population:
    """Struct-of-arrays population sample; profiles are views for scalar APIs."""

    spec: PopulationSpec
    rater_intercept: np.ndarray
    rater_bias: np.ndarray
    rater_group: np.ndarray          # int8, +1 / -1
    rater_is_bad: np.ndarray         # bool, all False until the adversary module marks some
    note_intercept: np.ndarray
    note_bias: np.ndarray
    note_group: np.ndarray

    @property
    def n_raters(self) -> int:
        return self.rater_intercept.shape[0]

    @property
    def n_notes(self) -> int:
        return self.note_intercept.shape[0]

    def rater(self, u: int) -> RaterProfile:
        return RaterProfile(float(self.rater_intercept[u]), float(self.rater_bias[u]),
                            Group(int(self.rater_group[u])), bool(self.rater_is_bad[u]))

    def note(self, n: int) -> NoteProfile:
        return NoteProfile(float(self.note_intercept[n]), float(self.note_bias[n]),
                           Group(int(self.note_group[n])))


def _rng(seed) -> np.random.Generator:
    # Philox: counter-based, stream documented and stable across platforms.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _sample_side(rng, n, intercept_mean, intercept_sd, bias: GroupedNormal):
    group = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    intercept = intercept_mean + intercept_sd * rng.standard_normal(n)
    z = rng.standard_normal(n)
    mean = np.where(group > 0, bias.mean_plus, bias.mean_minus)
    sd = np.where(group > 0, bias.sd_plus, bias.sd_minus)
    return group, intercept, mean + sd * z


def sample_population(spec: PopulationSpec, seed) -> Population:
    """Draw a population; fair-coin group split, group-conditional bias normals."""
    rng = _rng(seed)
    rg, ri, rb = _sample_side(rng, spec.n_raters, spec.rater_intercept_mean,
                              spec.rater_intercept_sd, spec.rater_bias)
    ng, ni, nb = _sample_side(rng, spec.n_notes, spec.note_intercept_mean,
                              spec.note_intercept_sd, spec.note_bias)
    return Population(spec=spec, rater_intercept=ri, rater_bias=rb, rater_group=rg,
                      rater_is_bad=np.zeros(spec.n_raters, dtype=bool),
                      note_intercept=ni, note_bias=nb, note_group=ng)


def sign_groups(bias: np.ndarray) -> np.ndarray:
    """Group labels +-1 from realized bias signs (zero counts as Plus).

    In-group rating behavior is defined on the sign of the bias an entity
    actually carries, not on the latent component it was drawn from, so
    homophily rewiring and the in-group bias measure both use these labels.
    """
    return np.where(np.asarray(bias) >= 0, 1, -1).astype(np.int8)


# ===== Rating probabilities =====


@dataclass(frozen=True)
class RatingProbs:
    p_helpful: float
    p_somewhat: float
    p_not_helpful: float

    def __post_init__(self):
        for p in (self.p_helpful, self.p_somewhat, self.p_not_helpful):
            if not (0.0 <= p <= 1.0):
                raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.p_helpful + self.p_somewhat + self.p_not_helpful - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_helpful, self.p_somewhat, self.p_not_helpful])


def pair_score(g: GlobalParams, rater, note) -> float:
    """Latent agreement score s = mu + i_u + i_n + f_u*f_n."""
    return g.mu + rater.intercept + note.intercept + rater.bias * note.bias


def score_probs_batch(g: GlobalParams, scores: np.ndarray):
    """Vectorized softmax over (helpful, somewhat, not) for an array of scores.

    Stable for any gamma: the largest exponent is subtracted before
    exponentiation, so gamma*|1/2 - s| far beyond 700 cannot overflow.
    """
    a = g.gamma * (0.5 - np.asarray(scores, dtype=np.float64))
    m = np.abs(a)
    eh = np.exp(-a - m)            # helpful logit  = -a
    es = np.exp(-m)                # somewhat logit =  0
    en = np.exp(a - m)             # not logit      = +a
    z = eh + es + en
    return eh / z, es / z, en / z


def honest_probs(g: GlobalParams, rater, note) -> RatingProbs:
    """Outcome probabilities for an honest rating of `note` by `rater`."""
    ph, ps, pn = score_probs_batch(g, np.array([pair_score(g, rater, note)]))
    return RatingProbs(float(ph[0]), float(ps[0]), float(pn[0]))


def draw_rating(probs: RatingProbs, rng: np.random.Generator) -> float:
    """Sample one rating value in {1.0, 0.5, 0.0}."""
    u = rng.random()
    if u < probs.p_helpful:
        return HELPFUL
    if u < probs.p_helpful + probs.p_somewhat:
        return SOMEWHAT
    return NOT_HELPFUL


def draw_ratings_batch(p_helpful, p_somewhat, rng: np.random.Generator) -> np.ndarray:
    """Vectorized categorical draw; one uniform per edge, same cutpoints as draw_rating."""
    u = rng.random(len(p_helpful))
    out = np.full(len(p_helpful), NOT_HELPFUL)
    out[u < p_helpful + p_somewhat] = SOMEWHAT
    out[u < p_helpful] = HELPFUL
    return out
