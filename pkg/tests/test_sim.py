import math

import numpy as np
import pytest
from scipy import stats

from cm_duel.analysis import BDEC, SDEC
from cm_duel.constellation import make_pam
from cm_duel.exact_pep import exact_pep_bdec
from cm_duel.gauss import qfunc
from cm_duel.sim import (
    SimConfig,
    SimError,
    SimPoint,
    SimResult,
    THREADS_ENV,
    ber_ratio,
    bdec_dominating_points,
    make_proposal,
    simulate_ber,
    simulate_pep,
    simulate_uncoded_ber,
    snr_at,
    uncoded_ber_theory,
    wilson_interval,
    worker_count,
)

G3 = make_pam(2, "G3")
SQUARES = ([0, 3, 2, 1], [3, 2, 1, 0])
CIRCLES = ([2, 2], [0, 0])


def _wilson_closed_form(k, n, z=stats.norm.ppf(0.975)):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@pytest.mark.parametrize("k, n", [(0, 100), (5, 100), (200, 10**6), (50, 50)])
def test_wilson_matches_closed_form(k, n):
    np.testing.assert_allclose(wilson_interval(k, n), _wilson_closed_form(k, n), atol=1e-12)


def test_worker_count_env_override(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert worker_count(None) == 1 and worker_count(3) == 3
    monkeypatch.setenv(THREADS_ENV, "5")
    assert worker_count(2) == 5
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(SimError):
        worker_count(1)


@pytest.mark.parametrize(
    "kw",
    [
        {"snr_db": ()},
        {"snr_db": (3.0, 2.0)},
        {"snr_db": (1.0,), "snr_convention": "snr"},
        {"snr_db": (1.0,), "channel": "rician"},
        {"snr_db": (1.0,), "min_errors": 0},
        {"snr_db": (1.0,), "method": "fast"},
        {"snr_db": (1.0,), "wave": 0},
    ],
)
def test_config_validation(kw):
    with pytest.raises(SimError):
        SimConfig(**kw)


def test_mc_symbol_pep_matches_q_function():
    cfg = SimConfig(snr_db=(-2.0, 0.0), min_errors=400, method="mc", seed=3)
    res = simulate_pep(G3, *SQUARES, cfg)
    for p in res[SDEC].points:
        truth = qfunc(math.sqrt(12) * 10 ** (p.snr_db / 20))
        assert p.ci_low <= truth <= p.ci_high
        assert p.errors >= 400 and not p.censored


def test_importance_sampling_agrees_with_exact_bit_pep():
    cfg = SimConfig(snr_db=(8.0, 12.0), min_errors=400, method="is", seed=2)
    res = simulate_pep(G3, *CIRCLES, cfg)
    for p in res[BDEC].points:
        exact = exact_pep_bdec(G3, *CIRCLES, 10 ** (p.snr_db / 20))
        half = (p.ci_high - p.ci_low) / 2
        assert abs(p.estimate - exact) <= 2 * half
        assert half / p.estimate < 0.05


def test_mc_and_is_agree_where_both_work():
    mc = simulate_pep(G3, *CIRCLES, SimConfig(snr_db=(2.0,), min_errors=2000, method="mc", seed=4))
    imp = simulate_pep(G3, *CIRCLES, SimConfig(snr_db=(2.0,), min_errors=2000, method="is", seed=4))
    for dec in (SDEC, BDEC):
        a, b = mc[dec].points[0], imp[dec].points[0]
        se = math.hypot((a.ci_high - a.ci_low) / 3.92, (b.ci_high - b.ci_low) / 3.92)
        assert abs(a.estimate - b.estimate) <= 4 * se


def test_dominating_points_of_circles_pair():
    pts = bdec_dominating_points(G3, *CIRCLES)
    np.testing.assert_allclose(pts[0], [-2.0, -2.0], atol=1e-6)
    norms = sorted(round(float(p @ p), 6) for p in pts[:3])
    assert norms == [8.0, 9.0, 9.0]


def test_proposal_is_a_defensive_mixture():
    prop = make_proposal(G3, *SQUARES, sigma=0.3)
    assert prop.weights.sum() == pytest.approx(1.0)
    assert np.any(np.all(prop.shifts == 0, axis=1))
    z, lr = prop.sample(np.random.default_rng(0), 10_000)
    assert np.all(lr > 0) and np.all(lr <= 1 / prop.weights[-1] + 1e-9)
    # E_q[LR] = 1 for any proposal.
    assert lr.mean() == pytest.approx(1.0, rel=0.05)


def test_pep_is_independent_of_worker_count():
    cfg = SimConfig(snr_db=(3.0, 7.0), min_errors=100, seed=9, chunk=4096, wave=4)
    a = simulate_pep(G3, *SQUARES, cfg, workers=1)
    b = simulate_pep(G3, *SQUARES, cfg, workers=3)
    for dec in (SDEC, BDEC):
        assert a[dec].points == b[dec].points


def test_ber_is_independent_of_worker_count(monkeypatch):
    cfg = SimConfig(snr_db=(3.0, 4.0), snr_convention="ebn0", min_errors=50, seed=1, frame_bits=200, chunk=16, wave=3)
    a = simulate_ber("cc:7,5", "g1", cfg, workers=1)
    monkeypatch.setenv(THREADS_ENV, "4")
    b = simulate_ber("cc:7,5", "g1", cfg, workers=1)
    for dec in (SDEC, BDEC):
        assert a[dec].points == b[dec].points
        assert [p.chunk_errors for p in a[dec].points] == [p.chunk_errors for p in b[dec].points]


def test_paired_noise_tightens_ratio_interval():
    base = dict(snr_db=(4.0,), snr_convention="ebn0", min_errors=1500, seed=0, frame_bits=500, chunk=32)
    paired = simulate_ber("cc:7,5", "g1", SimConfig(**base))
    unpaired = simulate_ber("cc:7,5", "g1", SimConfig(**base, paired=False))
    rp = ber_ratio(paired[BDEC], paired[SDEC])[0]
    ru = ber_ratio(unpaired[BDEC], unpaired[SDEC])[0]
    assert rp.ci_high - rp.ci_low < 0.7 * (ru.ci_high - ru.ci_low)
    assert rp.ratio > 1.0


def test_rayleigh_ber_runs_and_bit_decoder_is_not_better():
    cfg = SimConfig(snr_db=(8.0,), snr_convention="ebn0", channel="rayleigh", min_errors=500, seed=0, frame_bits=400)
    res = simulate_ber("cc:7,5", "g2", cfg)
    assert res[BDEC].points[0].errors >= res[SDEC].points[0].errors


@pytest.mark.parametrize("dsz_db", [0.0, 4.0, 7.0])
def test_uncoded_ber_sanity(dsz_db):
    errors, bits = simulate_uncoded_ber(make_pam(2, "G1"), dsz_db, 2_000_000, seed=1)
    lo, hi = wilson_interval(errors, bits, level=0.999)
    assert lo <= uncoded_ber_theory(10 ** (dsz_db / 20)) <= hi


def test_lemma1_symbol_smd_moments():
    rng = np.random.default_rng(8)
    d, sigma = 1.0, 0.5
    pts = G3.points
    for i in range(4):
        y = pts[i] + sigma * rng.standard_normal(200_000)
        for j in range(4):
            if i != j:
                v = (2 * (pts[i] - pts[j]) * y + pts[j] ** 2 - pts[i] ** 2) / (4 * d)
                k2 = (pts[i] - pts[j]) ** 2 / (4 * d * d)
                assert v.mean() == pytest.approx(k2 * d, rel=0.01)
                assert v.var() == pytest.approx(k2 * sigma**2, rel=0.02)


def test_snr_at_interpolates_in_log_domain():
    pts = tuple(SimPoint(s, 1, 1, v, v, v, False) for s, v in [(1.0, 1e-2), (2.0, 1e-4), (3.0, 1e-6)])
    res = SimResult("SDEC", "ber", pts)
    assert snr_at(res, 1e-3) == pytest.approx(1.5)
    assert snr_at(res, 1e-4) == pytest.approx(2.0)
    with pytest.raises(SimError):
        snr_at(res, 1e-8)


def test_ratio_needs_matching_grids():
    a = SimResult("BDEC", "ber", (SimPoint(1.0, 10, 1, 0.1, 0, 1, False),))
    b = SimResult("SDEC", "ber", (SimPoint(2.0, 10, 1, 0.1, 0, 1, False),))
    with pytest.raises(SimError):
        ber_ratio(a, b)


@pytest.mark.parametrize(
    "call",
    [
        lambda: simulate_ber("block:b1001", "g1", SimConfig(snr_db=(1.0,))),
        lambda: simulate_ber("cc:7,5", "brgc8", SimConfig(snr_db=(1.0,))),
        lambda: simulate_pep(G3, [0, 1], [0, 1], SimConfig(snr_db=(1.0,))),
        lambda: simulate_pep(G3, [0], [1], SimConfig(snr_db=(1.0,), channel="rayleigh", method="is")),
    ],
)
def test_simulation_errors(call):
    with pytest.raises(SimError):
        call()
