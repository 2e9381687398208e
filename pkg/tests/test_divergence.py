"""Loss-level checks against direct-summation and brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import divuda.diffcore as dc
import divuda.divergence as dv
from divuda.errors import ParameterError
from divuda.model import ProbPair


def make_pair(p1, p2):
    return ProbPair(dc.constant(np.atleast_2d(p1)), dc.constant(np.atleast_2d(p2)))


def random_pair(rng, n, k):
    a = rng.dirichlet(np.ones(k), size=n)
    b = rng.dirichlet(np.ones(k), size=n)
    return make_pair(a, b)


def skld_direct(p, q):
    """Direct two-loop symmetric KL for a single distribution pair."""
    return sum(p[i] * math.log(p[i] / q[i]) + q[i] * math.log(q[i] / p[i])
               for i in range(len(p)))


# -- symmetric KL / crs / ent -------------------------------------------------

def test_skld_identical_is_zero():
    pair = make_pair([0.2, 0.3, 0.5], [0.2, 0.3, 0.5])
    assert abs(dv.per_sample_symmetric_kl(pair).value[0, 0]) < 1e-12


def test_skld_direct_oracle():
    p, q = [0.5, 0.5], [0.25, 0.75]
    got = dv.per_sample_symmetric_kl(make_pair(p, q)).value[0, 0]
    assert abs(got - skld_direct(p, q)) < 1e-12
    assert abs(got - 0.27465307216702745) < 1e-12  # 0.25 * ln 3


def test_skld_symmetry():
    rng = np.random.default_rng(0)
    a = rng.dirichlet(np.ones(5), size=20)
    b = rng.dirichlet(np.ones(5), size=20)
    fwd = dv.per_sample_symmetric_kl(make_pair(a, b)).value
    bwd = dv.per_sample_symmetric_kl(make_pair(b, a)).value
    assert np.allclose(fwd, bwd, atol=1e-12)


def test_uniform_pair_crs_ent():
    k = 7
    u = np.full(k, 1.0 / k)
    crs, ent = dv.per_sample_crs_ent(make_pair(u, u))
    assert abs(crs.value[0, 0] - 2 * math.log(k)) < 1e-12
    assert abs(ent.value[0, 0] - 2 * math.log(k)) < 1e-12


def test_divergence_identity_random():
    """skld == crs - ent and jd == crs + ent, elementwise."""
    rng = np.random.default_rng(1)
    for k in (2, 10, 31):
        pair = random_pair(rng, 200, k)
        skld = dv.per_sample_symmetric_kl(pair).value
        crs, ent = dv.per_sample_crs_ent(pair)
        jd = dv.per_sample_joint_divergence(pair).value
        assert np.max(np.abs(skld - (crs.value - ent.value))) < 1e-9
        assert np.max(np.abs(jd - (crs.value + ent.value))) < 1e-9


def test_entropy_bounds():
    rng = np.random.default_rng(2)
    for k in (2, 10, 31):
        pair = random_pair(rng, 500, k)
        crs, ent = dv.per_sample_crs_ent(pair)
        assert np.all(ent.value >= -1e-9)
        assert np.all(ent.value <= 2 * math.log(k) + 1e-9)
        assert np.all(crs.value >= ent.value - 1e-9)  # Gibbs' inequality, twice


# -- supervised / source loss ------------------------------------------------

def test_supervised_direct_oracle():
    p1 = np.array([[0.7, 0.2, 0.1]])
    p2 = np.array([[0.5, 0.25, 0.25]])
    y = np.array([[1.0, 0.0, 0.0]])
    got = dv.per_sample_supervised(make_pair(p1, p2), y).value[0, 0]
    assert abs(got - (-math.log(0.7) - math.log(0.5))) < 1e-12


def test_supervised_rejects_bad_labels():
    pair = make_pair([0.5, 0.5], [0.5, 0.5])
    with pytest.raises(ParameterError):
        dv.per_sample_supervised(pair, np.array([[0.5, 0.5]]))
    with pytest.raises(ParameterError):
        dv.per_sample_supervised(pair, np.array([[1.0, 1.0]]))


def test_source_loss_composition():
    rng = np.random.default_rng(3)
    pair = random_pair(rng, 10, 4)
    y = np.eye(4)[rng.integers(0, 4, 10)]
    sup = dv.per_sample_supervised(pair, y).value
    skld = dv.per_sample_symmetric_kl(pair).value
    lam = 0.7
    got = dv.per_sample_source_loss(pair, y, lam).value
    assert np.allclose(got, sup + lam * skld, atol=1e-12)
    # lam == 0 collapses to the supervised loss exactly
    assert np.array_equal(dv.per_sample_source_loss(pair, y, 0.0).value, sup)
    with pytest.raises(ParameterError):
        dv.per_sample_source_loss(pair, y, -0.1)


# -- small-loss selection ------------------------------------------------------

def brute_force_select(values, alpha):
    """Enumerate all keep-sized subsets; the winner holds the smallest kept
    values, with value ties broken toward the lower index."""
    n = len(values)
    keep = math.ceil((1 - alpha) * n)
    best = min(itertools.combinations(range(n), keep),
               key=lambda c: sorted((values[i], i) for i in c))
    return sorted(best)


@given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False),
                min_size=1, max_size=12),
       st.sampled_from([0.0, 0.25, 0.5]))
@settings(max_examples=200, deadline=None)
def test_selection_matches_brute_force(values, alpha):
    got = dv.small_loss_select(np.array(values), alpha).tolist()
    assert got == brute_force_select(values, alpha)


def test_selection_size_invariant():
    rng = np.random.default_rng(4)
    for n in (1, 7, 64, 100):
        for alpha in (0.0, 0.2, 0.5, 0.9):
            got = dv.small_loss_select(rng.uniform(size=n), alpha)
            assert len(got) == math.ceil((1 - alpha) * n)
            assert np.array_equal(got, np.sort(got))


def test_selection_ties_prefer_low_index():
    got = dv.small_loss_select(np.array([1.0, 1.0, 1.0, 1.0]), 0.5)
    assert got.tolist() == [0, 1]


def test_selection_empty_and_errors():
    assert dv.small_loss_select(np.empty(0), 0.2).tolist() == []
    with pytest.raises(ParameterError):
        dv.small_loss_select(np.ones(3), 1.0)
    with pytest.raises(ParameterError):
        dv.small_loss_select(np.ones(3), -0.1)


# -- separation hinge ----------------------------------------------------------

def test_margin_terms_values():
    delta, m = math.log(10), 1.0
    x = dc.constant([[4.0], [2.5], [0.5]])
    out = dv.margin_terms(x, delta, m).value.ravel()
    assert abs(out[0] - (delta - 4.0)) < 1e-12        # above band: -(x - delta)
    assert out[1] == 0.0                              # inside band
    assert abs(out[2] - (0.5 - delta)) < 1e-12        # below band: -(delta - x)


def test_margin_terms_errors():
    with pytest.raises(ParameterError):
        dv.margin_terms(dc.constant([[1.0]]), 0.0, 1.0)
    with pytest.raises(ParameterError):
        dv.margin_terms(dc.constant([[1.0]]), 1.0, -0.5)


def test_separation_loss_composition():
    rng = np.random.default_rng(5)
    pair = random_pair(rng, 30, 3)
    delta, m = math.log(3), 0.2
    crs, ent = dv.per_sample_crs_ent(pair)
    crs_h = dv.margin_terms(crs, delta, m).value.mean()
    ent_h = dv.margin_terms(ent, delta, m).value.mean()
    full = dv.separation_loss(pair, delta, m).value[0, 0]
    assert abs(full - (crs_h + ent_h)) < 1e-12
    kl = dv.separation_loss(pair, delta, m, kl_sign=True).value[0, 0]
    assert abs(kl - (crs_h - ent_h)) < 1e-12
    only_crs = dv.separation_loss(pair, delta, m, use_ent=False).value[0, 0]
    assert abs(only_crs - crs_h) < 1e-12
    assert dv.separation_loss(pair, delta, m, use_crs=False, use_ent=False) is None


def test_select_target_common():
    delta, m = math.log(3), 1.0
    crs = np.array([0.01, delta - m - 1e-9, delta - m, delta, 50.0])
    got = dv.select_target_common(crs, delta, m)
    assert got.tolist() == [0, 1]  # strict inequality at the boundary


# -- variants ------------------------------------------------------------------

def test_variant_modes_complete():
    for mode in dv.VARIANT_MODES:
        cfg = dv.variant_losses(mode)
        assert cfg.mode == mode
    with pytest.raises(ParameterError):
        dv.variant_losses("nope")


def test_variant_flags():
    full = dv.variant_losses("full")
    assert full.use_selection and full.use_separation and full.use_minimax
    so = dv.variant_losses("source_only")
    assert so.supervised_only and not so.use_minimax and not so.use_separation
    assert not dv.variant_losses("no_select").use_selection
    assert not dv.variant_losses("no_sep").use_separation
    assert dv.variant_losses("kl_sep").sep_kl_sign
    assert not dv.variant_losses("no_div").use_source_divergence
    assert not dv.variant_losses("no_crs").sep_use_crs
    assert not dv.variant_losses("no_ent").sep_use_ent
    assert not dv.variant_losses("no_minimax").use_minimax
