"""Evaluation metrics: confusion counts, error rates, excess values,
true-vs-fitted correlations, filter efficacy, and category fractions.

A note is truly helpful when i_n > 0.4 and |f_n| < 0.5.  Rates with an empty
denominator are None, and stay None through serialization (empty CSV cell),
so an undefined rate can never masquerade as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .scorer import PUBLISH_ABS_BIAS_MAX, PUBLISH_INTERCEPT_MIN, FittedParams

TRULY_INTERCEPT_MIN = PUBLISH_INTERCEPT_MIN
TRULY_ABS_BIAS_MAX = PUBLISH_ABS_BIAS_MAX


def truly_helpful(i_n, f_n) -> np.ndarray:
    """Ground-truth publishable mask: i_n > 0.4 and |f_n| < 0.5, both strict."""
    i_n = np.asarray(i_n, dtype=np.float64)
    f_n = np.asarray(f_n, dtype=np.float64)
    return (i_n > TRULY_INTERCEPT_MIN) & (np.abs(f_n) < TRULY_ABS_BIAS_MAX)


# ===== Confusion and error rates =====


@dataclass(frozen=True)
class ConfusionCounts:
    """Published x truly-helpful contingency counts (p = published, h = helpful)."""

    n_ph: int
    n_pbar_h: int
    n_p_hbar: int
    n_pbar_hbar: int

    def __post_init__(self):
        if min(self.n_ph, self.n_pbar_h, self.n_p_hbar, self.n_pbar_hbar) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_ph + self.n_pbar_h + self.n_p_hbar + self.n_pbar_hbar


def _subset_mask(n, subset):
    if subset is None:
        return np.ones(n, dtype=bool)
    subset = np.asarray(subset)
    if subset.dtype != bool:
        raise ValueError("subset must be a boolean mask")
    return subset


def confusion(i_n, f_n, published, subset=None) -> ConfusionCounts:
    """Count the four published/helpful cells over the subset."""
    helpful = truly_helpful(i_n, f_n)
    published = np.asarray(published, dtype=bool)
    keep = _subset_mask(published.size, subset)
    h = helpful[keep]
    p = published[keep]
    return ConfusionCounts(n_ph=int(np.sum(p & h)),
                           n_pbar_h=int(np.sum(~p & h)),
                           n_p_hbar=int(np.sum(p & ~h)),
                           n_pbar_hbar=int(np.sum(~p & ~h)))


def _ratio(num: int, den: int):
    return num / den if den else None


@dataclass(frozen=True)
class ErrorRates:
    """The four error rates plus the publication rate; None when undefined."""

    suppression: float | None
    pollution: float | None
    infiltration: float | None
    waste: float | None
    publication_rate: float | None


def error_rates(c: ConfusionCounts) -> ErrorRates:
    """Conditional error rates from confusion counts.

    suppression = P(unpublished | helpful), pollution = P(unhelpful | published),
    infiltration = P(published | unhelpful), waste = P(helpful | unpublished).
    """
    return ErrorRates(
        suppression=_ratio(c.n_pbar_h, c.n_pbar_h + c.n_ph),
        pollution=_ratio(c.n_p_hbar, c.n_p_hbar + c.n_ph),
        infiltration=_ratio(c.n_p_hbar, c.n_p_hbar + c.n_pbar_hbar),
        waste=_ratio(c.n_pbar_h, c.n_pbar_h + c.n_pbar_hbar),
        publication_rate=_ratio(c.n_ph + c.n_p_hbar, c.total),
    )


# ===== Excess helpfulness and bias =====


@dataclass(frozen=True)
class ExcessValues:
    """Relative shift of the published/unpublished sets against their ideals.

    excess_help_pub = (mean i_n of published) / (mean i_n of publishable) - 1,
    and likewise for the unpublished vs unpublishable sets; the bias variants
    compare mean |f_n|.  None when a set is empty or a reference mean is 0.
    """

    excess_help_pub: float | None
    excess_help_unpub: float | None
    excess_bias_pub: float | None
    excess_bias_unpub: float | None


def _excess(values, got: np.ndarray, ideal: np.ndarray):
    if not got.any() or not ideal.any():
        return None
    reference = float(values[ideal].mean())
    if reference == 0.0:
        return None
    return float(values[got].mean()) / reference - 1.0


def excess_values(i_n, f_n, published, subset=None) -> ExcessValues:
    i_n = np.asarray(i_n, dtype=np.float64)
    f_n = np.asarray(f_n, dtype=np.float64)
    published = np.asarray(published, dtype=bool)
    keep = _subset_mask(published.size, subset)
    helpful = truly_helpful(i_n, f_n)[keep]
    p = published[keep]
    i_s = i_n[keep]
    b_s = np.abs(f_n[keep])
    return ExcessValues(
        excess_help_pub=_excess(i_s, p, helpful),
        excess_help_unpub=_excess(i_s, ~p, ~helpful),
        excess_bias_pub=_excess(b_s, p, helpful),
        excess_bias_unpub=_excess(b_s, ~p, ~helpful),
    )


# ===== Correlations =====


def _pearson(x: np.ndarray, y: np.ndarray):
    if x.size < 2:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(xc @ xc))
    sy = float(np.sqrt(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return None
    return float((xc @ yc) / (sx * sy))


@dataclass(frozen=True)
class Correlations:
    corr_help: float | None
    corr_bias_abs: float | None
    corr_bias_signed: float | None


def correlations(note_i, note_f, rater_f, fitted: FittedParams) -> Correlations:
    """Pearson correlations of true vs fitted note parameters.

    The factorization only determines f-hat up to a global sign, so the sign
    is canonicalized against the raters first: flip all f-hat values when
    sum_u f_u * f_u_hat is negative.
    """
    note_i = np.asarray(note_i, dtype=np.float64)
    note_f = np.asarray(note_f, dtype=np.float64)
    rater_f = np.asarray(rater_f, dtype=np.float64)
    flip = -1.0 if float(rater_f @ fitted.f_u_hat) < 0.0 else 1.0
    return Correlations(
        corr_help=_pearson(note_i, fitted.i_n_hat),
        corr_bias_abs=_pearson(np.abs(note_f), np.abs(fitted.f_n_hat)),
        corr_bias_signed=_pearson(note_f, flip * fitted.f_n_hat),
    )


# ===== Filter efficacy =====


@dataclass(frozen=True)
class FilterEfficacy:
    recall: float | None
    precision: float | None


def filter_efficacy(removed, bad) -> FilterEfficacy:
    """recall = removed fraction of bad raters; precision = bad fraction of removed."""
    removed = np.asarray(removed, dtype=bool)
    bad = np.asarray(bad, dtype=bool)
    hits = int(np.sum(removed & bad))
    return FilterEfficacy(recall=_ratio(hits, int(bad.sum())),
                          precision=_ratio(hits, int(removed.sum())))


def removed_ids_to_mask(removed_ids, n_raters: int) -> np.ndarray:
    mask = np.zeros(n_raters, dtype=bool)
    mask[np.asarray(removed_ids, dtype=np.int64)] = True
    return mask


# ===== Category fractions =====


def category_fractions(i_n, f_n, published, subset=None) -> np.ndarray:
    """Fractions of (unhelpful+pub, helpful+unpub, helpful+pub, unhelpful+unpub)."""
    c = confusion(i_n, f_n, published, subset)
    if c.total == 0:
        raise ValueError("category_fractions needs a non-empty subset")
    return np.array([c.n_p_hbar, c.n_pbar_h, c.n_ph, c.n_pbar_hbar],
                    dtype=np.float64) / c.total


# ===== Assembled report =====


@dataclass(frozen=True)
class MetricReport:
    """Every per-replicate evaluation quantity for one note subset."""

    suppression: float | None
    pollution: float | None
    infiltration: float | None
    waste: float | None
    publication_rate: float | None
    excess_help_pub: float | None
    excess_help_unpub: float | None
    excess_bias_pub: float | None
    excess_bias_unpub: float | None
    corr_help: float | None
    corr_bias_abs: float | None
    corr_bias_signed: float | None
    filter_recall: float | None
    filter_precision: float | None
    frac_unhelpful_pub: float | None
    frac_helpful_unpub: float | None
    frac_helpful_pub: float | None
    frac_unhelpful_unpub: float | None

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_report(note_i, note_f, rater_f, published, fitted: FittedParams,
                 removed_mask, bad_mask, subset=None) -> MetricReport:
    """Assemble the full report; the subset restricts note-level quantities only.

    Filter efficacy is a rater-level quantity, so it ignores the subset and is
    repeated identically across subset reports of the same replicate.
    """
    c = confusion(note_i, note_f, published, subset)
    rates = error_rates(c)
    ex = excess_values(note_i, note_f, published, subset)
    keep = _subset_mask(np.asarray(published).size, subset)
    sub_fit = FittedParams(mu_hat=fitted.mu_hat, i_u_hat=fitted.i_u_hat,
                           i_n_hat=fitted.i_n_hat[keep],
                           f_u_hat=fitted.f_u_hat,
                           f_n_hat=fitted.f_n_hat[keep])
    corr = correlations(np.asarray(note_i)[keep], np.asarray(note_f)[keep],
                        rater_f, sub_fit)
    eff = filter_efficacy(removed_mask, bad_mask)
    if c.total:
        frac = category_fractions(note_i, note_f, published, subset)
        frac_tuple = tuple(float(x) for x in frac)
    else:
        frac_tuple = (None, None, None, None)
    return MetricReport(
        suppression=rates.suppression, pollution=rates.pollution,
        infiltration=rates.infiltration, waste=rates.waste,
        publication_rate=rates.publication_rate,
        excess_help_pub=ex.excess_help_pub,
        excess_help_unpub=ex.excess_help_unpub,
        excess_bias_pub=ex.excess_bias_pub,
        excess_bias_unpub=ex.excess_bias_unpub,
        corr_help=corr.corr_help, corr_bias_abs=corr.corr_bias_abs,
        corr_bias_signed=corr.corr_bias_signed,
        filter_recall=eff.recall, filter_precision=eff.precision,
        frac_unhelpful_pub=frac_tuple[0], frac_helpful_unpub=frac_tuple[1],
        frac_helpful_pub=frac_tuple[2], frac_unhelpful_unpub=frac_tuple[3],
    )
