import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cm_duel.analysis import (
    BDEC,
    MAX_LOSS_DB,
    SDEC,
    AnalysisError,
    fading_distance,
    fading_loss_search,
    fading_pairwise_loss,
    loss_bound_search,
    loss_from,
    norm_distance,
    norm_distance_from_tables,
    norm_distance_sq_exact,
    pairwise_loss,
    pep_analytic,
    smd_params,
    weight_profile,
    zcmod_params,
)
from cm_duel.constellation import make_pam
from cm_duel.gauss import qfunc

SQUARES = ([0, 3, 2, 1], [3, 2, 1, 0])
CIRCLES = ([2, 2], [0, 0])
pairs_st = st.integers(1, 16).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n), st.lists(st.integers(0, 3), min_size=n, max_size=n))
)


def test_bound_constant():
    assert MAX_LOSS_DB == pytest.approx(10 * math.log10(4 / 3), abs=1e-12)


@pytest.mark.parametrize("i, j", [(i, j) for i in range(4) for j in range(4) if i != j])
def test_symbol_table_from_geometry(i, j):
    # (4d)^-1 Lambda^S has mean (s_i - s_j)^2 / 4d and variance (s_i - s_j)^2 sigma^2 / 4d^2.
    c = make_pam(2, "G1")
    k2 = (c.points[i] - c.points[j]) ** 2 / 4
    p = smd_params(SDEC, i, j)
    assert (p.mu, p.sigma2) == (k2, k2)


def test_table_entries_quoted_in_text():
    assert (smd_params(SDEC, 0, 3).mu, smd_params(SDEC, 0, 3).sigma2) == (9, 9)
    assert (smd_params(BDEC, 0, 3).mu, smd_params(BDEC, 0, 3).sigma2) == (3, 1)
    assert (smd_params(BDEC, 1, 2).mu, smd_params(BDEC, 1, 2).sigma2) == (1, 1)


def test_tables_differ_only_at_corners():
    for i in range(4):
        for j in range(4):
            if i != j and {i, j} != {0, 3}:
                assert smd_params(SDEC, i, j) == smd_params(BDEC, i, j)


@pytest.mark.parametrize("i, j", [(i, j) for i in range(4) for j in range(4) if i != j])
def test_zcmod_reconstructs_bit_table(gray, i, j):
    p = zcmod_params(gray, i, j)
    q = smd_params(BDEC, i, j)
    assert p.mu == pytest.approx(q.mu) and p.sigma2 == pytest.approx(q.sigma2)


def test_squares_pair_profile():
    p = weight_profile(make_pam(2, "G3"), *SQUARES)
    assert (p.w[(0, 1)], p.w[(1, 0)], p.w[(1, 1)], p.wc, p.beta) == (2, 2, 0, 1, 4)
    assert norm_distance(SDEC, p) == pytest.approx(math.sqrt(12))
    assert norm_distance(BDEC, p) == pytest.approx(3.0)
    assert pairwise_loss(p) == pytest.approx(MAX_LOSS_DB, abs=1e-12)


def test_circles_pair_profile():
    p = weight_profile(make_pam(2, "G3"), *CIRCLES)
    assert (p.w[(1, 1)], p.wc, p.beta) == (2, 0, 8)
    assert pairwise_loss(p) == 0.0


@given(pairs_st, st.sampled_from(["G1", "G2", "G3", "G4"]))
@settings(max_examples=200)
def test_profile_distances_match_table_sums(pair, name):
    x, xh = pair
    if x == xh:
        return
    c = make_pam(2, name)
    p = weight_profile(c, x, xh)
    for dec in (SDEC, BDEC):
        assert norm_distance(dec, p) == pytest.approx(norm_distance_from_tables(dec, x, xh))


@given(st.integers(1, 200), st.integers(0, 200))
def test_loss_bounded_and_nonnegative(b, wc):
    wc = min(wc, b)
    L = loss_from(b, wc)
    assert -1e-12 <= L <= MAX_LOSS_DB + 1e-12
    assert (abs(L - MAX_LOSS_DB) < 1e-9) == (b == 4 * wc)


@given(st.integers(1, 60), st.integers(0, 60))
def test_exact_squares_agree_with_floats(b, wc):
    wc = min(wc, b)
    ax2 = norm_distance_sq_exact(SDEC, b, wc)
    ab2 = norm_distance_sq_exact(BDEC, b, wc)
    assert isinstance(ab2, Fraction)
    assert float(ax2) == pytest.approx(norm_distance(SDEC, beta_value=b, wc=wc) ** 2)
    assert float(ab2) == pytest.approx(norm_distance(BDEC, beta_value=b, wc=wc) ** 2)
    assert ab2 <= ax2


def test_pep_analytic_is_q_of_scaled_distance():
    assert pep_analytic(3.0, 2.0) == pytest.approx(qfunc(6.0))
    np.testing.assert_allclose(pep_analytic([1.0, 2.0], 1.5), [qfunc(1.5), qfunc(3.0)])


def test_fading_reduces_to_awgn_with_unit_gains(gray):
    x, xh = SQUARES
    p = weight_profile(gray, x, xh)
    h = np.ones(4)
    assert fading_distance(SDEC, gray, h, x, xh) == pytest.approx(norm_distance(SDEC, p))
    assert fading_distance(BDEC, gray, h, x, xh) == pytest.approx(norm_distance(BDEC, p))
    assert fading_pairwise_loss(gray, h, x, xh) == pytest.approx(pairwise_loss(p))


@given(pairs_st, st.integers(0, 2**31 - 1))
@settings(max_examples=100)
def test_fading_loss_bounded(pair, seed):
    x, xh = pair
    if x == xh:
        return
    h = np.random.default_rng(seed).rayleigh(0.7, len(x)) + 1e-3
    assert fading_pairwise_loss(make_pam(2, "G1"), h, x, xh) <= MAX_LOSS_DB + 1e-9


def test_small_bound_searches():
    r = loss_bound_search(20_000, 5_000, seed=3)
    assert r.max_loss_db <= MAX_LOSS_DB + 1e-9 and r.beta == 4 * r.wc
    f = fading_loss_search(5_000, seed=3)
    assert 0 < f.max_loss_db <= MAX_LOSS_DB + 1e-9


@pytest.mark.parametrize(
    "call",
    [
        lambda: weight_profile(make_pam(2, "SP"), [0], [1]),
        lambda: weight_profile(make_pam(3, "BRGC"), [0], [1]),
        lambda: weight_profile(make_pam(2, "G1"), [0, 1], [1]),
        lambda: pairwise_loss(weight_profile(make_pam(2, "G1"), [1, 2], [1, 2])),
        lambda: smd_params(SDEC, 1, 1),
        lambda: smd_params("XDEC", 0, 1),
        lambda: norm_distance(SDEC, beta_value=2, wc=3),
        lambda: fading_distance(SDEC, make_pam(2, "G1"), [0.0], [0], [1]),
    ],
)
def test_analysis_errors(call):
    with pytest.raises(AnalysisError):
        call()
