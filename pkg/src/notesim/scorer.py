"""Note scoring: regularized matrix-factorization fit, publication decisions,
and the two-thirds helpfulness filter with a single refit pass.

Each rating is modeled as r_un = mu + i_u + i_n + f_u * f_n.  Intercepts
capture rater generosity and note helpfulness; the factor product captures
bias alignment.  A note is published when its fitted intercept is high and its
fitted bias is small.  Raters whose firm ratings disagree too often with the
fitted statuses are removed and the model is refit from scratch without them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .network import RatingGraph, _rng

PUBLISH_INTERCEPT_MIN = 0.4
PUBLISH_ABS_BIAS_MAX = 0.5

# A note is firmly unhelpful when its fitted intercept falls below
# -0.05 - 0.8*|fitted bias|, the production scorer's negative-status rule.
# Notes between the two firm statuses are undecided and do not anchor the
# rater-consistency filter.
UNHELPFUL_INTERCEPT_CEIL = -0.05
UNHELPFUL_BIAS_SLOPE = 0.8

STATUS_HELPFUL = 1
STATUS_UNDECIDED = 0
STATUS_UNHELPFUL = -1

MU_PENALTY_MODES = ("per-rating", "once")
REG_WEIGHTINGS = ("per-rating", "per-entity")

STEP_SHRINK_FLOOR = 2.0 ** -40


class OptimizationError(RuntimeError):
    """Raised when step shrinking bottoms out without an acceptable step."""


# ===== Configuration and results =====


@dataclass(frozen=True)
class FitHyper:
    """Hyperparameters of the regularized least-squares fit.

    reg_weighting picks where the ridge terms sit: "per-rating" counts an
    entity's penalty once per rating it appears in, "per-entity" once total.
    mu_penalty does the same for the global intercept alone.

    staged holds the factors at their initial values until the intercepts
    plateau (relative loss change below tol), then releases them. Intercepts
    enter predictions linearly and factors through a product, so letting the
    additive part converge first leaves a residual whose row and column means
    are near zero; the factors then grow to explain interaction structure
    instead of racing the intercepts for consensus signal. This speeds up
    convergence and keeps trajectories comparable across seeds.
    """

    lambda_i: float = 0.15
    lambda_f: float = 0.03
    learning_rate: float = 0.2
    max_epochs: int = 2000
    tol: float = 1e-7
    init_scale: float = 0.05
    seed: int = 0
    mu_penalty: str = "per-rating"
    reg_weighting: str = "per-rating"
    preconditioned: bool = True
    staged: bool = True

    def __post_init__(self):
        if self.lambda_i < 0 or self.lambda_f < 0:
            raise ValueError("lambda_i and lambda_f must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")
        if self.mu_penalty not in MU_PENALTY_MODES:
            raise ValueError(f"mu_penalty must be one of {MU_PENALTY_MODES}")
        if self.reg_weighting not in REG_WEIGHTINGS:
            raise ValueError(f"reg_weighting must be one of {REG_WEIGHTINGS}")


@dataclass
class FittedParams:
    """Point estimates from one fit, plus convergence bookkeeping."""

    mu_hat: float
    i_u_hat: np.ndarray
    i_n_hat: np.ndarray
    f_u_hat: np.ndarray
    f_n_hat: np.ndarray
    final_loss: float = 0.0
    epochs_run: int = 0
    converged: bool = False
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0),
                                     repr=False)


@dataclass
class PipelineResult:
    """Final fit and statuses, the removal set, and the pre-filter phase."""

    params: FittedParams
    published: np.ndarray          # bool, per note
    removed_raters: np.ndarray     # int64, sorted rater ids
    first_params: FittedParams
    first_published: np.ndarray


# ===== Loss and gradients =====


def _rating_arrays(graph: RatingGraph):
    if graph.ratings is None:
        raise ValueError("graph has no ratings attached")
    if graph.ratings.size == 0:
        raise ValueError("fit needs at least one rating")
    return graph.edge_raters, graph.edge_notes, graph.ratings


def _rated_masks(graph: RatingGraph):
    rated_u = np.bincount(graph.edge_raters, minlength=graph.n_raters) > 0
    rated_n = np.bincount(graph.edge_notes, minlength=graph.n_notes) > 0
    return rated_u, rated_n


def _mu_multiplicity(hyper: FitHyper, n_ratings: int) -> int:
    return n_ratings if hyper.mu_penalty == "per-rating" else 1


def _reg_weights(graph: RatingGraph, hyper: FitHyper):
    """Ridge weight per entity: its rating count, or 1 for any rated entity.

    Per-rating weighting reads the loss with the penalty terms inside the
    per-rating sum, so an entity's penalty scales with how often it is rated.
    Either way unrated entities get weight 0 and stay untouched by the fit.
    """
    deg_u = np.bincount(graph.edge_raters, minlength=graph.n_raters)
    deg_n = np.bincount(graph.edge_notes, minlength=graph.n_notes)
    if hyper.reg_weighting == "per-rating":
        return deg_u.astype(np.float64), deg_n.astype(np.float64)
    return (deg_u > 0).astype(np.float64), (deg_n > 0).astype(np.float64)


def loss(params: FittedParams, graph: RatingGraph, hyper: FitHyper) -> float:
    """Squared error plus weighted ridge penalties (see _reg_weights)."""
    u, n, r = _rating_arrays(graph)
    w_u, w_n = _reg_weights(graph, hyper)
    resid = r - (params.mu_hat + params.i_u_hat[u] + params.i_n_hat[n]
                 + params.f_u_hat[u] * params.f_n_hat[n])
    i_u, i_n = params.i_u_hat, params.i_n_hat
    f_u, f_n = params.f_u_hat, params.f_n_hat
    mu_sq = params.mu_hat ** 2 * _mu_multiplicity(hyper, r.size)
    return float(resid @ resid
                 + hyper.lambda_i * (i_u @ (w_u * i_u) + i_n @ (w_n * i_n)
                                     + mu_sq)
                 + hyper.lambda_f * (f_u @ (w_u * f_u) + f_n @ (w_n * f_n)))


def gradients(params: FittedParams, graph: RatingGraph, hyper: FitHyper):
    """Analytic gradient of loss; zero for entities without ratings."""
    u, n, r = _rating_arrays(graph)
    w_u, w_n = _reg_weights(graph, hyper)
    f_u_e = params.f_u_hat[u]
    f_n_e = params.f_n_hat[n]
    d = 2.0 * (params.mu_hat + params.i_u_hat[u] + params.i_n_hat[n]
               + f_u_e * f_n_e - r)
    g_mu = float(d.sum() + 2.0 * hyper.lambda_i * params.mu_hat
                 * _mu_multiplicity(hyper, r.size))
    g_iu = np.bincount(u, weights=d, minlength=graph.n_raters) \
        + 2.0 * hyper.lambda_i * w_u * params.i_u_hat
    g_in = np.bincount(n, weights=d, minlength=graph.n_notes) \
        + 2.0 * hyper.lambda_i * w_n * params.i_n_hat
    g_fu = np.bincount(u, weights=d * f_n_e, minlength=graph.n_raters) \
        + 2.0 * hyper.lambda_f * w_u * params.f_u_hat
    g_fn = np.bincount(n, weights=d * f_u_e, minlength=graph.n_notes) \
        + 2.0 * hyper.lambda_f * w_n * params.f_n_hat
    return g_mu, g_iu, g_in, g_fu, g_fn


# ===== Fit =====


@njit(cache=True)
def _mf_loss(u, n, r, mu, i_u, i_n, f_u, f_n, lam_i, lam_f, mu_mult,
             w_u, w_n):
    acc = 0.0
    for e in range(u.size):
        a = u[e]
        b = n[e]
        resid = r[e] - (mu + i_u[a] + i_n[b] + f_u[a] * f_n[b])
        acc += resid * resid
    reg = lam_i * mu * mu * mu_mult
    for a in range(i_u.size):
        reg += w_u[a] * (lam_i * i_u[a] * i_u[a] + lam_f * f_u[a] * f_u[a])
    for b in range(i_n.size):
        reg += w_n[b] * (lam_i * i_n[b] * i_n[b] + lam_f * f_n[b] * f_n[b])
    return acc + reg


@njit(cache=True)
def _mf_grads(u, n, r, mu, i_u, i_n, f_u, f_n, lam_i, lam_f, mu_mult,
              w_u, w_n, g_iu, g_in, g_fu, g_fn, h_fu, h_fn):
    """Fused gradient pass; also accumulates factor curvatures. Returns g_mu."""
    g_mu = 0.0
    for a in range(i_u.size):
        g_iu[a] = 2.0 * lam_i * w_u[a] * i_u[a]
        g_fu[a] = 2.0 * lam_f * w_u[a] * f_u[a]
        h_fu[a] = 0.0
    for b in range(i_n.size):
        g_in[b] = 2.0 * lam_i * w_n[b] * i_n[b]
        g_fn[b] = 2.0 * lam_f * w_n[b] * f_n[b]
        h_fn[b] = 0.0
    for e in range(u.size):
        a = u[e]
        b = n[e]
        fu = f_u[a]
        fn = f_n[b]
        d = 2.0 * (mu + i_u[a] + i_n[b] + fu * fn - r[e])
        g_mu += d
        g_iu[a] += d
        g_in[b] += d
        g_fu[a] += d * fn
        g_fn[b] += d * fu
        h_fu[a] += fn * fn
        h_fn[b] += fu * fu
    return g_mu + 2.0 * lam_i * mu * mu_mult


def fit(graph: RatingGraph, hyper: FitHyper) -> FittedParams:
    """Full-batch descent with step-halving; loss never increases."""
    u, n, r = _rating_arrays(graph)
    n_ratings = r.size
    mu_mult = float(_mu_multiplicity(hyper, n_ratings))
    lam_i, lam_f = hyper.lambda_i, hyper.lambda_f
    rated_u, rated_n = _rated_masks(graph)

    rng = _rng(hyper.seed)
    s = hyper.init_scale
    mu = float(rng.uniform(-s, s))
    i_u = rng.uniform(-s, s, size=graph.n_raters)
    i_n = rng.uniform(-s, s, size=graph.n_notes)
    f_u = rng.uniform(-s, s, size=graph.n_raters)
    f_n = rng.uniform(-s, s, size=graph.n_notes)
    i_u[~rated_u] = 0.0
    f_u[~rated_u] = 0.0
    i_n[~rated_n] = 0.0
    f_n[~rated_n] = 0.0

    w_u, w_n = _reg_weights(graph, hyper)
    deg_u = np.bincount(u, minlength=graph.n_raters).astype(np.float64)
    deg_n = np.bincount(n, minlength=graph.n_notes).astype(np.float64)
    h_mu = 2.0 * (n_ratings + lam_i * mu_mult)
    h_iu = np.maximum(2.0 * (deg_u + lam_i * w_u), 1e-12)
    h_in = np.maximum(2.0 * (deg_n + lam_i * w_n), 1e-12)
    g_iu = np.empty(graph.n_raters)
    g_fu = np.empty(graph.n_raters)
    h_fu = np.empty(graph.n_raters)
    g_in = np.empty(graph.n_notes)
    g_fn = np.empty(graph.n_notes)
    h_fn = np.empty(graph.n_notes)

    current = _mf_loss(u, n, r, mu, i_u, i_n, f_u, f_n, lam_i, lam_f, mu_mult,
                       w_u, w_n)
    history = [float(current)]
    shrink = 1.0
    converged = False
    epochs = 0
    factors_frozen = hyper.staged
    for _ in range(hyper.max_epochs):
        g_mu = _mf_grads(u, n, r, mu, i_u, i_n, f_u, f_n, lam_i, lam_f,
                         mu_mult, w_u, w_n, g_iu, g_in, g_fu, g_fn, h_fu, h_fn)
        if hyper.preconditioned:
            step_mu = g_mu / h_mu
            step_iu = g_iu / h_iu
            step_in = g_in / h_in
            step_fu = g_fu / np.maximum(2.0 * (h_fu + lam_f * w_u), 1e-12)
            step_fn = g_fn / np.maximum(2.0 * (h_fn + lam_f * w_n), 1e-12)
        else:
            step_mu, step_iu, step_in = g_mu, g_iu, g_in
            step_fu, step_fn = g_fu, g_fn
        if factors_frozen:
            step_fu = np.zeros_like(g_fu)
            step_fn = np.zeros_like(g_fn)
        while True:
            step = hyper.learning_rate * shrink
            mu_c = mu - step * step_mu
            i_u_c = i_u - step * step_iu
            i_n_c = i_n - step * step_in
            f_u_c = f_u - step * step_fu
            f_n_c = f_n - step * step_fn
            candidate = _mf_loss(u, n, r, mu_c, i_u_c, i_n_c, f_u_c, f_n_c,
                                 lam_i, lam_f, mu_mult, w_u, w_n)
            if np.isfinite(candidate) and candidate <= current:
                break
            shrink *= 0.5
            if shrink < STEP_SHRINK_FLOOR:
                raise OptimizationError(
                    f"no acceptable step at epoch {epochs}: "
                    f"loss {current:.6g}, step factor {shrink:.3g}")
        assert candidate <= current
        mu, i_u, i_n, f_u, f_n = mu_c, i_u_c, i_n_c, f_u_c, f_n_c
        previous = current
        current = candidate
        history.append(float(current))
        epochs += 1
        shrink = min(1.0, shrink * 2.0)
        if previous - current <= hyper.tol * max(current, 1e-12):
            if factors_frozen:
                factors_frozen = False
            else:
                converged = True
                break

    return FittedParams(mu_hat=float(mu), i_u_hat=i_u, i_n_hat=i_n,
                        f_u_hat=f_u, f_n_hat=f_n,
                        final_loss=float(current), epochs_run=epochs,
                        converged=converged,
                        loss_history=np.array(history))


# ===== Gauge normalization =====


def canonicalize_gauge(params: FittedParams,
                       graph: RatingGraph | None = None) -> FittedParams:
    """Center the factor means, absorbing the shift into the intercepts.

    The prediction mu + i_u + i_n + f_u * f_n is invariant under the tilt
    f_u -> f_u - a, i_n -> i_n + a * (f_n - b) together with its mirror on
    the other side and a cross correction to mu.  The regularizer is not
    invariant: it often prefers a tilted point where a shared factor
    component stands in for intercept signal at the cheaper factor penalty,
    which leaves the raw i_n_hat flattened and pushes |f_n_hat| across the
    publication cut.  Status thresholds read the intercept as the consensus
    estimate and the factor as the bias dimension, so before thresholding we
    move to the unique gauge point with mean-zero factors on both sides.
    Predictions are untouched; only the parameter split changes.

    When a graph is given, entities with no ratings in it keep their fitted
    values and do not enter the means; they have no predictions to preserve.
    """
    if graph is None:
        on_u = np.ones(params.f_u_hat.size, dtype=bool)
        on_n = np.ones(params.f_n_hat.size, dtype=bool)
    else:
        on_u, on_n = _rated_masks(graph)
    m_u = float(params.f_u_hat[on_u].mean()) if on_u.any() else 0.0
    m_n = float(params.f_n_hat[on_n].mean()) if on_n.any() else 0.0
    f_u = np.where(on_u, params.f_u_hat - m_u, params.f_u_hat)
    f_n = np.where(on_n, params.f_n_hat - m_n, params.f_n_hat)
    return FittedParams(
        mu_hat=params.mu_hat + m_u * m_n,
        i_u_hat=np.where(on_u, params.i_u_hat + m_n * f_u, params.i_u_hat),
        i_n_hat=np.where(on_n, params.i_n_hat + m_u * f_n, params.i_n_hat),
        f_u_hat=f_u, f_n_hat=f_n,
        final_loss=params.final_loss, epochs_run=params.epochs_run,
        converged=params.converged, loss_history=params.loss_history)


# ===== Publication decision =====


def decide_status(params: FittedParams) -> np.ndarray:
    """Per-note publication: intercept above 0.4 and |bias| below 0.5."""
    return (params.i_n_hat > PUBLISH_INTERCEPT_MIN) \
        & (np.abs(params.f_n_hat) < PUBLISH_ABS_BIAS_MAX)


def note_statuses(params: FittedParams) -> np.ndarray:
    """Three-way fitted status per note: +1 helpful, -1 unhelpful, 0 undecided.

    Helpful is the publication rule; unhelpful needs an intercept below
    -0.05 - 0.8*|bias|.  Everything in between is undecided.
    """
    out = np.zeros(params.i_n_hat.shape[0], dtype=np.int8)
    out[decide_status(params)] = STATUS_HELPFUL
    unhelpful = params.i_n_hat < (UNHELPFUL_INTERCEPT_CEIL
                                  - UNHELPFUL_BIAS_SLOPE
                                  * np.abs(params.f_n_hat))
    out[unhelpful] = STATUS_UNHELPFUL
    return out


# ===== Helpfulness filter =====


def helpfulness_filter(graph: RatingGraph, statuses: np.ndarray) -> np.ndarray:
    """Raters whose firm ratings match firm statuses less than two thirds of
    the time.

    Only ratings of exactly 1 or 0 on notes with a firm status count: a
    rating of 1 matches a helpful note and a rating of 0 matches an
    unhelpful one.  Ratings of undecided notes say nothing about a rater's
    reliability and are excluded from both sides of the fraction.  Raters
    with no countable ratings are retained.  Returns sorted removed ids.
    """
    u, n, r = _rating_arrays(graph)
    firm = ((r == 1.0) | (r == 0.0)) & (statuses[n] != STATUS_UNDECIDED)
    match = ((r == 1.0) & (statuses[n] == STATUS_HELPFUL)) \
        | ((r == 0.0) & (statuses[n] == STATUS_UNHELPFUL))
    denom = np.bincount(u[firm], minlength=graph.n_raters)
    matches = np.bincount(u[match], minlength=graph.n_raters)
    removed = 3 * matches < 2 * denom
    return np.nonzero(removed)[0].astype(np.int64)


# ===== Pipeline =====


def _zero_params(graph: RatingGraph) -> FittedParams:
    return FittedParams(mu_hat=0.0,
                        i_u_hat=np.zeros(graph.n_raters),
                        i_n_hat=np.zeros(graph.n_notes),
                        f_u_hat=np.zeros(graph.n_raters),
                        f_n_hat=np.zeros(graph.n_notes))


def score_pipeline(graph: RatingGraph, hyper: FitHyper,
                   filter_enabled: bool = True) -> PipelineResult:
    """Fit, decide, filter, and refit from scratch without removed raters.

    Both fits are gauge-normalized before statuses are decided, so the
    reported parameters are always in the mean-zero-factor gauge.
    """
    no_removals = np.zeros(0, dtype=np.int64)
    first = canonicalize_gauge(fit(graph, hyper), graph)
    rated = np.bincount(graph.edge_notes, minlength=graph.n_notes) > 0
    first_statuses = np.where(rated, note_statuses(first), STATUS_UNDECIDED)
    first_pub = (first_statuses == STATUS_HELPFUL)
    if not filter_enabled:
        return PipelineResult(first, first_pub, no_removals, first, first_pub)
    removed = helpfulness_filter(graph, first_statuses)
    if removed.size == 0:
        return PipelineResult(first, first_pub, no_removals, first, first_pub)
    keep = ~np.isin(graph.edge_raters, removed)
    sub = RatingGraph(n_raters=graph.n_raters, n_notes=graph.n_notes,
                      edge_raters=graph.edge_raters[keep],
                      edge_notes=graph.edge_notes[keep],
                      ratings=graph.ratings[keep])
    if sub.ratings.size == 0:
        second = _zero_params(graph)
        return PipelineResult(second, np.zeros(graph.n_notes, dtype=bool),
                              removed, first, first_pub)
    second = canonicalize_gauge(fit(sub, hyper), sub)
    pub = decide_status(second) & (np.bincount(
        sub.edge_notes, minlength=graph.n_notes) > 0)
    return PipelineResult(second, pub, removed, first, first_pub)


# ===== Serialization =====


def write_note_params_csv(path, params: FittedParams,
                          published: np.ndarray) -> None:
    """CSV of per-note estimates: note_id,i_hat,f_hat,status."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["note_id", "i_hat", "f_hat", "status"])
        for j in range(params.i_n_hat.size):
            writer.writerow([j, float(params.i_n_hat[j]), float(params.f_n_hat[j]),
                             "published" if published[j] else "not_published"])


def write_rater_params_csv(path, params: FittedParams,
                           removed_raters: np.ndarray) -> None:
    """CSV of per-rater estimates: rater_id,i_hat,f_hat,removed."""
    removed = np.zeros(params.i_u_hat.size, dtype=bool)
    removed[removed_raters] = True
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rater_id", "i_hat", "f_hat", "removed"])
        for j in range(params.i_u_hat.size):
            writer.writerow([j, float(params.i_u_hat[j]), float(params.f_u_hat[j]),
                             "true" if removed[j] else "false"])
