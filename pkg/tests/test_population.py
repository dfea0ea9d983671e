import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from notesim.population import (HELPFUL, NOT_HELPFUL, SOMEWHAT, GlobalParams, Group,
                                GroupedNormal, Population, PopulationSpec, RatingProbs,
                                draw_rating, draw_ratings_batch, honest_probs, pair_score,
                                sample_population, score_probs_batch, _rng)

G = GlobalParams()


def test_defaults():
    assert G.mu == 0.17
    assert G.gamma == 30.0


def test_pair_score_worked_point():
    pop = PopulationSpec(n_raters=1, n_notes=1)
    r = sample_population(pop, 0).rater(0)
    # hand-built profiles, not sampled ones, for the worked point
    from notesim.population import NoteProfile, RaterProfile
    rater = RaterProfile(intercept=0.25, bias=0.0, group=Group.PLUS)
    note = NoteProfile(intercept=0.25, bias=0.0, group=Group.PLUS)
    assert pair_score(G, rater, note) == pytest.approx(0.67)


def test_probs_worked_point():
    # mu=0.17, i_u=i_n=0.25, f=0 -> s=0.67, a=-5.1
    # frozen from a 40-digit evaluation of the softmax
    from notesim.population import NoteProfile, RaterProfile
    rater = RaterProfile(intercept=0.25, bias=0.0, group=Group.PLUS)
    note = NoteProfile(intercept=0.25, bias=0.0, group=Group.MINUS)
    p = honest_probs(G, rater, note)
    assert p.p_helpful == pytest.approx(0.993903478671, abs=1e-10)
    assert p.p_somewhat == pytest.approx(0.00605957762004, abs=1e-10)
    assert p.p_not_helpful == pytest.approx(3.69437090435e-5, abs=1e-12)


def test_probs_neutral_score_is_uniform():
    ph, ps, pn = score_probs_batch(G, np.array([0.5]))
    assert ph[0] == pytest.approx(1 / 3, abs=1e-15)
    assert ps[0] == pytest.approx(1 / 3, abs=1e-15)
    assert pn[0] == pytest.approx(1 / 3, abs=1e-15)


def test_probs_gamma_zero_is_uniform():
    g0 = GlobalParams(mu=0.17, gamma=0.0)
    ph, ps, pn = score_probs_batch(g0, np.array([-5.0, 0.0, 0.9, 42.0]))
    assert np.allclose(ph, 1 / 3) and np.allclose(ps, 1 / 3) and np.allclose(pn, 1 / 3)


def test_probs_extreme_scores_no_overflow():
    # gamma*(1/2-s) can exceed 700; stable softmax must not overflow
    ph, ps, pn = score_probs_batch(G, np.array([-1e3, 1e3]))
    assert np.all(np.isfinite(ph)) and np.all(np.isfinite(ps)) and np.all(np.isfinite(pn))
    assert ph[0] == pytest.approx(0.0, abs=1e-300)
    assert ph[1] == pytest.approx(1.0)


def test_probs_normalization_million_draws():
    # acceptance property: sums within 1e-12 over 1e6 random scores
    rng = _rng(123)
    scores = rng.uniform(-3, 3, size=1_000_000)
    gammas = GlobalParams(mu=0.17, gamma=float(rng.uniform(0, 100)))
    ph, ps, pn = score_probs_batch(gammas, scores)
    total = ph + ps + pn
    assert float(np.max(np.abs(total - 1.0))) <= 1e-12
    assert float(np.min([ph.min(), ps.min(), pn.min()])) >= 0.0


def test_p_helpful_monotone_in_score():
    scores = np.linspace(-2, 2, 401)
    ph, _, pn = score_probs_batch(G, scores)
    assert np.all(np.diff(ph) >= 0)
    assert np.all(np.diff(pn) <= 0)


@given(st.floats(-50, 50), st.floats(0, 100))
@settings(max_examples=200, deadline=None)
def test_probs_always_valid(score, gamma):
    ph, ps, pn = score_probs_batch(GlobalParams(gamma=gamma), np.array([score]))
    assert 0.0 <= ph[0] <= 1.0 and 0.0 <= ps[0] <= 1.0 and 0.0 <= pn[0] <= 1.0
    assert ph[0] + ps[0] + pn[0] == pytest.approx(1.0, abs=1e-12)


def test_rating_probs_validation():
    with pytest.raises(ValueError):
        RatingProbs(0.9, 0.2, 0.1)
    with pytest.raises(ValueError):
        RatingProbs(-0.1, 0.55, 0.55)
    RatingProbs(0.2, 0.3, 0.5)  # fine


def test_population_spec_validation():
    with pytest.raises(ValueError):
        PopulationSpec(n_raters=0, n_notes=10)
    with pytest.raises(ValueError):
        PopulationSpec(n_raters=10, n_notes=10, rater_intercept_sd=-1.0)
    with pytest.raises(ValueError):
        GroupedNormal(sd_plus=-0.2)


def test_polarization_property():
    gn = GroupedNormal.symmetric(0.8, 0.25)
    assert gn.polarization == pytest.approx(0.8)
    assert GroupedNormal(mean_plus=0.5, mean_minus=-0.1).polarization == pytest.approx(0.3)


def test_sample_population_statistics():
    spec = PopulationSpec(n_raters=100_000, n_notes=1000,
                          rater_bias=GroupedNormal.symmetric(0.6, 0.1))
    pop = sample_population(spec, seed=7)
    # sample mean of i_u within 0.25 +- 0.002 (3 sigma at sd=0.2, n=1e5)
    assert abs(pop.rater_intercept.mean() - 0.25) < 0.002
    # fair-coin group split within 0.5 +- 0.005
    plus_frac = np.mean(pop.rater_group > 0)
    assert abs(plus_frac - 0.5) < 0.005
    # group-conditional bias means land on the spec means
    assert pop.rater_bias[pop.rater_group > 0].mean() == pytest.approx(0.6, abs=0.01)
    assert pop.rater_bias[pop.rater_group < 0].mean() == pytest.approx(-0.6, abs=0.01)
    assert not pop.rater_is_bad.any()


def test_sample_population_deterministic():
    spec = PopulationSpec(n_raters=500, n_notes=300)
    a = sample_population(spec, seed=42)
    b = sample_population(spec, seed=42)
    assert np.array_equal(a.rater_intercept, b.rater_intercept)
    assert np.array_equal(a.note_bias, b.note_bias)
    assert np.array_equal(a.rater_group, b.rater_group)
    c = sample_population(spec, seed=43)
    assert not np.array_equal(a.rater_intercept, c.rater_intercept)


def test_profile_views():
    spec = PopulationSpec(n_raters=5, n_notes=5)
    pop = sample_population(spec, seed=1)
    r = pop.rater(2)
    assert r.intercept == pop.rater_intercept[2]
    assert r.group in (Group.PLUS, Group.MINUS)
    n = pop.note(4)
    assert n.bias == pop.note_bias[4]


def test_draw_rating_frequencies():
    probs = RatingProbs(0.6, 0.1, 0.3)
    rng = _rng(99)
    draws = np.array([draw_rating(probs, rng) for _ in range(100_000)])
    assert np.mean(draws == HELPFUL) == pytest.approx(0.6, abs=0.01)
    assert np.mean(draws == SOMEWHAT) == pytest.approx(0.1, abs=0.01)
    assert np.mean(draws == NOT_HELPFUL) == pytest.approx(0.3, abs=0.01)


def test_draw_ratings_batch_matches_frequencies():
    rng = _rng(5)
    ph = np.full(200_000, 0.25)
    ps = np.full(200_000, 0.5)
    vals = draw_ratings_batch(ph, ps, rng)
    assert np.mean(vals == HELPFUL) == pytest.approx(0.25, abs=0.01)
    assert np.mean(vals == SOMEWHAT) == pytest.approx(0.5, abs=0.01)
    assert set(np.unique(vals)) <= {HELPFUL, SOMEWHAT, NOT_HELPFUL}
