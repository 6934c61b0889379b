import numpy as np
import pytest
from scipy import optimize, stats

from cm_duel.constellation import make_pam
from cm_duel.demapper import maxlog_llrs, smd_bdec
from cm_duel.exact_pep import ExactPepWarning, exact_pep_bdec, position_mixtures, pep_quad, pep_tilted, zcmod_ratio_curve


def _single_position_oracle(c, x, xh, sigma):
    """P(Lambda^B < 0) by locating the sign changes of the demapper output."""

    def smd(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return smd_bdec(c, np.full(y.size, x), np.full(y.size, xh), maxlog_llrs(c, y, sigma))

    def f(y):
        return smd(y).item()

    mu = c.points[x]
    grid = np.linspace(mu - 14 * sigma, mu + 14 * sigma, 20001)
    vals = smd(grid)
    edges = [grid[0] - 1e9]
    for k in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        if vals[k] == 0 or vals[k + 1] == 0:
            edges.append(grid[k] if vals[k] == 0 else grid[k + 1])
        else:
            edges.append(optimize.brentq(f, grid[k], grid[k + 1], xtol=1e-14))
    edges.append(grid[-1] + 1e9)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (max(lo, grid[0]) + min(hi, grid[-1]))
        if f(mid) < 0:
            total += stats.norm.cdf(hi, mu, sigma) - stats.norm.cdf(lo, mu, sigma)
    return total


@pytest.mark.parametrize("pair", [(0, 1), (1, 0), (0, 3), (3, 0), (1, 3), (2, 0)])
@pytest.mark.parametrize("dsz_db", [0.0, 6.0])
def test_single_position_against_sign_change_oracle(gray, pair, dsz_db):
    dsz = 10 ** (dsz_db / 20)
    got = exact_pep_bdec(gray, [pair[0]], [pair[1]], dsz)
    assert got == pytest.approx(_single_position_oracle(gray, *pair, 1 / dsz), rel=1e-6, abs=1e-15)


@pytest.mark.parametrize("x, xh", [([2, 2], [0, 0]), ([0, 3], [3, 2]), ([1, 2], [3, 0])])
def test_two_positions_against_sampling(x, xh):
    c = make_pam(2, "G3")
    sigma = 1.0
    rng = np.random.default_rng(11)
    y = c.points[x] + sigma * rng.standard_normal((2_000_000, 2))
    err = smd_bdec(c, x, xh, maxlog_llrs(c, y, sigma)).sum(axis=1) < 0
    p = err.mean()
    got = exact_pep_bdec(c, x, xh, 1 / sigma)
    assert got == pytest.approx(p, abs=5 * np.sqrt(p * (1 - p) / err.size))


def test_four_positions_against_sampling():
    c = make_pam(2, "G3")
    x, xh = [0, 3, 2, 1], [3, 2, 1, 0]
    sigma = 10 ** (-2 / 20)
    rng = np.random.default_rng(12)
    y = c.points[x] + sigma * rng.standard_normal((2_000_000, 4))
    p = np.mean(smd_bdec(c, x, xh, maxlog_llrs(c, y, sigma)).sum(axis=1) < 0)
    got = exact_pep_bdec(c, x, xh, 1 / sigma)
    assert got == pytest.approx(p, abs=5 * np.sqrt(p * (1 - p) / y.shape[0]))


@pytest.mark.parametrize("dsz_db", [3.0, 8.0, 12.0])
def test_quadrature_and_tilted_routes_agree(dsz_db):
    c = make_pam(2, "G1")
    mix = position_mixtures(c, [2, 2], [0, 0], 10 ** (-dsz_db / 20))
    assert pep_tilted(mix, atom_unit=4 * 10 ** (dsz_db / 10)) == pytest.approx(pep_quad(mix), rel=1e-6)


def test_pep_in_unit_half_interval(gray):
    for dsz_db in (-3.0, 0.0, 10.0):
        p = exact_pep_bdec(gray, [0, 1, 2], [3, 3, 3], 10 ** (dsz_db / 20))
        assert 0.0 <= p <= 0.5


def test_circles_ratio_falls_toward_one():
    rows = zcmod_ratio_curve(make_pam(2, "G3"), [2, 2], [0, 0], np.arange(5.0, 16.0, 2.0))
    ratios = [r["ratio"] for r in rows]
    assert ratios[0] > 1.2
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(1.0, abs=1e-3)
    assert all(r["pep_sdec_analytic"] == r["pep_bdec_zcmod"] for r in rows)


def test_long_pairs_fall_back_to_sampling():
    c = make_pam(2, "G1")
    with pytest.warns(ExactPepWarning):
        p = exact_pep_bdec(c, [0] * 9, [1] * 9, 0.5, mc_trials=20_000)
    assert 0 < p < 0.5


def test_identical_words_rejected():
    with pytest.raises(ValueError):
        exact_pep_bdec(make_pam(2, "G1"), [1, 2], [1, 2], 2.0)
