import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plca import (FitConfig, PlcaModel, ShapeError, Termination, ValidationError, build_empirical,
                  em_step, fit, fobj, init_model, kld)
from plca.em import stationarity_residual

from _instances import joint_empirical, planted_model, random_empirical, random_model


def scalar_em_step(table, prior, mix, comp):
    """Posterior and both re-estimates by plain loops over lists."""
    m, n, k = len(comp), len(prior), len(mix)
    post = [[[0.0] * n for _ in range(m)] for _ in range(k)]
    for e in range(m):
        for g in range(n):
            nums = [comp[e][z] * mix[z][g] for z in range(k)]
            s = sum(nums)
            for z in range(k):
                post[z][e][g] = nums[z] / s
    new_comp = [[0.0] * k for _ in range(m)]
    for z in range(k):
        den = sum(table[e][g] * post[z][e][g] for e in range(m) for g in range(n))
        for e in range(m):
            new_comp[e][z] = sum(table[e][g] * post[z][e][g] for g in range(n)) / den
    new_mix = [[0.0] * n for _ in range(k)]
    for g in range(n):
        den = sum(table[e][g] * post[z][e][g] for z in range(k) for e in range(m))
        for z in range(k):
            new_mix[z][g] = sum(table[e][g] * post[z][e][g] for e in range(m)) / den
    return new_mix, new_comp


# -- config / init ------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(k=0), dict(k=2, max_iters=0), dict(k=2, rel_tol=0.0),
                                dict(k=2, seed=-1), dict(k=2, seed=2**64)])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        FitConfig(**kw)


def test_init_is_deterministic(rng):
    pi = random_empirical(rng, 6, 5)
    a, b = init_model(pi, FitConfig(k=3, seed=99)), init_model(pi, FitConfig(k=3, seed=99))
    np.testing.assert_array_equal(a.components, b.components)
    np.testing.assert_array_equal(a.mixture, b.mixture)
    c = init_model(pi, FitConfig(k=3, seed=100))
    assert not np.array_equal(a.components, c.components)


def test_init_group_prior_is_empirical_marginal(rng):
    pi = random_empirical(rng, 6, 5, 0.3)
    np.testing.assert_array_equal(init_model(pi, FitConfig(k=2)).group_prior, pi.group_marginal)


def test_init_single_class(rng):
    pi = random_empirical(rng, 6, 5)
    m = init_model(pi, FitConfig(k=1, seed=4))
    np.testing.assert_array_equal(m.mixture, np.ones((1, 5)))
    assert m.components.sum() == pytest.approx(1, abs=1e-12)
    assert np.all(m.components > 0)


# -- em_step ------------------------------------------------------------------

def test_em_step_single_class_fixed_point(rng):
    pi = random_empirical(rng, 5, 4)
    m = init_model(pi, FitConfig(k=1, seed=1))
    once = em_step(pi, m)
    np.testing.assert_allclose(once.components[:, 0], pi.event_marginal, atol=1e-15)
    np.testing.assert_array_equal(once.mixture, np.ones((1, 4)))
    twice = em_step(pi, once)
    np.testing.assert_allclose(twice.components, once.components, atol=1e-15)


def test_em_step_keeps_exact_fit(rng):
    m = random_model(rng, 4, 4, 2)
    pi = joint_empirical(m)
    m = m.with_group_prior(pi.group_marginal)
    nxt = em_step(pi, m)
    np.testing.assert_allclose(nxt.components, m.components, atol=1e-12)
    np.testing.assert_allclose(nxt.mixture, m.mixture, atol=1e-12)


def test_em_step_matches_scalar_evaluation():
    table = [[0.1, 0.2], [0.3, 0.4]]
    mix = [[0.3, 0.6], [0.7, 0.4]]
    comp = [[0.2, 0.9], [0.8, 0.1]]
    pi = build_empirical(table)
    new = em_step(pi, PlcaModel(pi.group_marginal, mix, comp))
    exp_mix, exp_comp = scalar_em_step(table, [0.4, 0.6], mix, comp)
    np.testing.assert_allclose(new.mixture, exp_mix, atol=1e-12)
    np.testing.assert_allclose(new.components, exp_comp, atol=1e-12)
    np.testing.assert_array_equal(new.group_prior, pi.group_marginal)


def test_em_step_shape_error():
    pi = build_empirical(np.ones((3, 2)))
    with pytest.raises(ShapeError):
        em_step(pi, PlcaModel([0.5, 0.5], [[1.0, 1.0]], [[0.5], [0.5]]))


def test_em_step_dead_class_reset_to_uniform():
    # class 1 puts all its mass on event 2, which is never observed
    pi = build_empirical([[1, 1], [1, 1], [0, 0]])
    m = PlcaModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.0], [0.5, 0.0], [0.0, 1.0]])
    new, trace = fit(pi, FitConfig(k=2, init="provided-model", max_iters=3), initial=m)
    np.testing.assert_allclose(new.components[:, 1], [1 / 3] * 3)
    np.testing.assert_array_equal(new.mixture[1], [0.0, 0.0])
    assert trace.dead_classes[0] == (1, [1])
    assert trace.termination is not Termination.DEGENERATE


def test_em_step_empty_group_column_kept(rng):
    pi = build_empirical([[1, 0, 2], [3, 0, 1]])
    m = init_model(pi, FitConfig(k=2, seed=5))
    np.testing.assert_array_equal(em_step(pi, m).mixture[:, 1], m.mixture[:, 1])


# -- fit ----------------------------------------------------------------------

def test_fit_single_class_closed_form(rng):
    pi = random_empirical(rng, 7, 6, 0.2)
    m, trace = fit(pi, FitConfig(k=1, seed=3))
    assert trace.n_iterations <= 2
    assert trace.termination is Termination.CONVERGED
    np.testing.assert_allclose(m.components[:, 0], pi.event_marginal, atol=1e-12)


def test_fit_recovers_planted_model():
    planted = planted_model()
    pi = joint_empirical(planted)
    # some starts cross a slow plateau (kld ~ 6.5e-5) where the relative-change stop fires
    divs = [kld(pi, fit(pi, FitConfig(k=2, seed=s, rel_tol=1e-12, max_iters=5000))[0]) for s in range(5)]
    assert min(divs) <= 1e-8


def test_fit_deterministic(rng):
    pi = random_empirical(rng, 8, 6)
    a, ta = fit(pi, FitConfig(k=3, seed=7))
    b, tb = fit(pi, FitConfig(k=3, seed=7))
    np.testing.assert_array_equal(a.components, b.components)
    np.testing.assert_array_equal(a.mixture, b.mixture)
    assert ta.fobj_values == tb.fobj_values


def test_fit_max_iters_termination(rng):
    pi = random_empirical(rng, 8, 6)
    _, trace = fit(pi, FitConfig(k=3, seed=1, max_iters=3))
    assert trace.termination is Termination.MAX_ITERS
    assert [r.iteration for r in trace.records] == [1, 2, 3]


def test_fit_without_trace_keeps_last_record(rng):
    pi = random_empirical(rng, 8, 6)
    full_model, full = fit(pi, FitConfig(k=3, seed=1))
    model, short = fit(pi, FitConfig(k=3, seed=1, record_trace=False))
    assert len(short) == 1
    assert short.records[0].fobj == full.records[-1].fobj
    assert short.records[0].kld == full.records[-1].kld


def test_fit_provided_model_requires_initial(rng):
    with pytest.raises(ValidationError):
        fit(random_empirical(rng, 3, 3), FitConfig(k=2, init="provided-model"))


def test_fit_provided_model_overrides_group_prior(rng):
    pi = random_empirical(rng, 4, 3)
    start = random_model(rng, 4, 3, 2)
    m, _ = fit(pi, FitConfig(k=2, init="provided-model", max_iters=1), initial=start)
    np.testing.assert_array_equal(m.group_prior, pi.group_marginal)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.integers(1, 5), st.integers(0, 2**63),
       st.sampled_from([0.0, 0.3]))
def test_monotone_and_stochastic(m, n, k, seed, sparsity):
    pi = random_empirical(np.random.default_rng(seed), m, n, sparsity)
    sums = []
    _, trace = fit(pi, FitConfig(k=k, seed=seed, max_iters=200),
                   callback=lambda it, mod: sums.append((mod.mixture.sum(axis=0), mod.components.sum(axis=0))))
    f = [trace.initial_fobj] + trace.fobj_values
    assert all(b <= a + 1e-10 for a, b in zip(f, f[1:]))
    for mix_s, comp_s in sums:
        np.testing.assert_allclose(mix_s, 1.0, atol=1e-12)
        np.testing.assert_allclose(comp_s, 1.0, atol=1e-12)


def test_permuting_initial_labels_permutes_fit(rng):
    pi = random_empirical(rng, 7, 6)
    start = random_model(rng, 7, 6, 3)
    perm = [2, 0, 1]
    cfg = FitConfig(k=3, init="provided-model", max_iters=300)
    a, ta = fit(pi, cfg, initial=start)
    b, tb = fit(pi, cfg, initial=start.relabel(perm))
    np.testing.assert_allclose(b.components, a.components[:, perm], atol=1e-10)
    np.testing.assert_allclose(b.mixture, a.mixture[perm], atol=1e-10)
    np.testing.assert_allclose(tb.fobj_values, ta.fobj_values[:len(tb.fobj_values)], atol=1e-10)
    assert len(ta) == len(tb)


def test_fixed_point_satisfies_stationarity(rng):
    pi = random_empirical(rng, 5, 6)
    m, _ = fit(pi, FitConfig(k=2, seed=2))
    for _ in range(20000):
        nxt = em_step(pi, m)
        if max(np.abs(nxt.components - m.components).max(), np.abs(nxt.mixture - m.mixture).max()) <= 1e-12:
            break
        m = nxt
    assert np.max(np.abs(nxt.components - m.components)) <= 1e-12
    assert np.max(np.abs(nxt.mixture - m.mixture)) <= 1e-12
    assert stationarity_residual(pi, m) <= 1e-9


def test_stationarity_residual_bounded_by_step_size(rng):
    pi = random_empirical(rng, 6, 6)
    m, _ = fit(pi, FitConfig(k=3, seed=2, max_iters=20))
    nxt = em_step(pi, m)
    delta = max(np.abs(nxt.components - m.components).max(), np.abs(nxt.mixture - m.mixture).max())
    assert stationarity_residual(pi, m) <= delta + 1e-15


def test_fit_infinite_start_recovers():
    pi = build_empirical([[1, 1], [1, 1]])
    # group 0 uses only class 0, which never emits event 1: the start is infinitely bad
    start = PlcaModel([0.5, 0.5], [[1.0, 0.5], [0.0, 0.5]], [[1.0, 0.5], [0.0, 0.5]])
    m, trace = fit(pi, FitConfig(k=2, init="provided-model"), initial=start)
    assert trace.initial_fobj == math.inf
    assert math.isfinite(trace.records[-1].fobj)
    assert fobj(pi, m) < 1.0
