"""End-to-end acceptance criteria, one test (and one summary line) each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
finish; they are also repeated in the terminal summary.
"""
import math
import os
import time

import numpy as np
import pytest
from scipy import optimize

from conftest import record
from cm_duel import cli
from cm_duel.analysis import BDEC, MAX_LOSS_DB, SDEC, loss_bound_search, norm_distance_from_tables, pep_analytic, smd_params
from cm_duel.codebook import TABLE4, BlockCode, table4_code
from cm_duel.code_loss import _unterminated_stripes, code_loss, min_profiles_trellis, spectrum_prefix_check
from cm_duel.constellation import make_pam
from cm_duel.demapper import maxlog_llrs, smd_bdec
from cm_duel.exact_pep import exact_pep_bdec, zcmod_ratio_curve
from cm_duel.gauss import qfunc
from cm_duel.sim import SimConfig, ber_ratio, simulate_ber, simulate_pep, snr_at

pytestmark = pytest.mark.acceptance

G1 = make_pam(2, "G1")
G3 = make_pam(2, "G3")
SQUARES = ([0, 3, 2, 1], [3, 2, 1, 0])
CIRCLES = ([2, 2], [0, 0])
PAIRS = [(i, j) for i in range(4) for j in range(4) if i != j]


def test_criterion_1_pairwise_bound():
    t0 = time.perf_counter()
    r = loss_bound_search(10**6, 10**5, max_len=32, seed=0)
    dt = time.perf_counter() - t0
    ok = (
        r.max_loss_db <= MAX_LOSS_DB + 1e-9
        and abs(r.max_loss_db - 1.2494) <= 1e-4
        and r.beta == 4 * r.wc
        and dt < 60
    )
    record(
        "1",
        ok,
        f"max loss {r.max_loss_db:.13f} dB (bound {MAX_LOSS_DB:.13f}) at beta={r.beta:g}, wc={r.wc:g}; "
        f"{r.evaluated} profiles in {dt:.1f} s",
    )
    assert ok


def _dsz_at(a, target):
    return optimize.brentq(lambda g: float(pep_analytic(a, 10 ** (g / 20))) - target, -10, 40, xtol=1e-12)


def test_criterion_2_squares_pair():
    t0 = time.perf_counter()
    a_x = norm_distance_from_tables(SDEC, *SQUARES)
    a_b = norm_distance_from_tables(BDEC, *SQUARES)
    gap = _dsz_at(a_b, 1e-6) - _dsz_at(a_x, 1e-6)
    cfg = SimConfig(snr_db=tuple(np.arange(2.0, 8.5, 1.0)), min_errors=200, seed=0)
    res = simulate_pep(G3, *SQUARES, cfg)
    misses = []
    for p in res[SDEC].points:
        truth = float(qfunc(a_x * 10 ** (p.snr_db / 20)))
        if not (p.ci_low <= truth <= p.ci_high) or p.errors < 200:
            misses.append(f"{p.snr_db:g} dB: sim {p.estimate:.4g} [{p.ci_low:.4g}, {p.ci_high:.4g}] vs {truth:.4g} ({p.errors} hits)")
    dt = time.perf_counter() - t0
    ok = abs(gap - 1.25) <= 0.02 and not misses and dt < 600
    methods = ",".join(sorted({p.method for p in res[SDEC].points}))
    detail = f"analytic gap {gap:.4f} dB at PEP 1e-6; S-DEC sim ({methods}) inside 95% CI at {7 - len(misses)}/7 points; {dt:.0f} s"
    if misses:
        detail += "; misses: " + "; ".join(misses)
    record("2", ok, detail)
    assert ok


def test_criterion_3_circles_pair():
    t0 = time.perf_counter()
    grid = np.arange(5.0, 15.5, 1.0)
    rows = zcmod_ratio_curve(G3, *CIRCLES, grid)
    ratios = [r["ratio"] for r in rows]
    res = simulate_pep(G3, *CIRCLES, SimConfig(snr_db=tuple(grid), min_errors=200, seed=0))
    misses = [
        f"{p.snr_db:g} dB"
        for p, r in zip(res[BDEC].points, rows)
        if not p.ci_low <= r["pep_bdec_exact"] <= p.ci_high
    ]
    monotone = all(b < a + 1e-3 for a, b in zip(ratios, ratios[1:]))
    dt = time.perf_counter() - t0
    ok = not misses and ratios[0] > 1.2 and monotone and ratios[-1] >= 1 - 1e-3
    record(
        "3",
        ok,
        f"exact/ZcMod ratio {ratios[0]:.4f} at 5 dB -> {ratios[-1]:.7f} at 15 dB, monotone={monotone}; "
        f"B-DEC sim CI covers exact at {len(grid) - len(misses)}/{len(grid)} points"
        + (f" (misses: {', '.join(misses)})" if misses else "")
        + f"; {dt:.0f} s",
    )
    assert ok


def _random_block_codes(count, seed):
    rng = np.random.default_rng(seed)
    codes = []
    while len(codes) < count:
        K = int(rng.integers(1, 9))
        n = 2 * int(rng.integers(max(1, (K + 1) // 2), 9))
        try:
            codes.append(BlockCode(rng.integers(0, 2, (K, n))))
        except ValueError:
            continue
    return codes


def test_criterion_4_zero_loss_theorems():
    t0 = time.perf_counter()
    codes = _random_block_codes(200, seed=0)
    bad_a = [
        (code.describe(), name)
        for code in codes
        for name in ("G3", "G4")
        if not code_loss(code, make_pam(2, name)).zero_loss
    ]
    bad_b = []
    for nu in sorted(TABLE4):
        cc = table4_code(nu)
        _, rep = min_profiles_trellis(cc, G1, witnesses=nu < 8)
        stripes = _unterminated_stripes(cc)
        if not (rep.zero_loss and rep.loss_db == 0.0 and all(stripes)):
            bad_b.append(nu)
    adv = code_loss(BlockCode(np.array([[1, 0, 0, 1, 0, 1, 0, 1]])), G1).loss_db
    dt = time.perf_counter() - t0
    ok = not bad_a and not bad_b and abs(adv - 1.2494) <= 1e-4 and dt < 300
    record(
        "4",
        ok,
        f"(a) {400 - len(bad_a)}/400 code-labeling cases lossless; (b) nu=1..8 lossless with both stripes "
        f"except {bad_b or 'none'}; (c) adversarial code loss {adv:.6f} dB; {dt:.0f} s",
    )
    assert ok


def test_criterion_5a_symbol_smd_lemma():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    d, sigma = 1.0, 1.0
    pts = G3.points
    worst = 0.0
    for i, j in PAIRS:
        y = pts[i] + sigma * rng.standard_normal(10**6)
        v = (2 * (pts[i] - pts[j]) * y + pts[j] ** 2 - pts[i] ** 2) / (4 * d)
        p = smd_params(SDEC, i, j)
        worst = max(worst, abs(v.mean() / (p.mu * d) - 1), abs(v.var() / (p.sigma2 * sigma**2) - 1))
    dt = time.perf_counter() - t0
    ok = worst <= 0.01 and dt < 60
    record("5a", ok, f"largest relative deviation of mean/variance from the symbol table {worst:.2e} over 12 pairs; {dt:.1f} s")
    assert ok


def test_criterion_5b_bit_smd_lemma():
    # The bit SMD gets the same 1 / 4d scaling as the symbol SMD; without it every
    # entry is off by exactly 4 d.
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    d = 1.0
    sigma = d / 10.0
    worst, bad = 0.0, []
    for name in ("G1", "G2", "G3", "G4"):
        c = make_pam(2, name)
        for i, j in PAIRS:
            y = c.points[i] + sigma * rng.standard_normal(10**6)
            v = sigma**2 / (4 * d) * smd_bdec(c, np.full(y.size, i), np.full(y.size, j), maxlog_llrs(c, y, sigma))
            mu = smd_params(BDEC, i, j).mu * d
            dev = abs(v.mean() / mu - 1)
            worst = max(worst, dev)
            if dev > 0.02:
                bad.append(f"{name} (s{i + 1},s{j + 1}): {v.mean():.3f} vs {mu:g}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    record(
        "5b",
        ok,
        f"{48 - len(bad)}/48 labeling-pair cases within 2% at d/sigma_z = 20 dB; worst deviation {worst:.1%}"
        + (f"; off-table means: {'; '.join(bad[:6])}" if bad else "")
        + f"; {dt:.1f} s",
    )
    assert ok


def test_criterion_6_awgn_ber():
    t0 = time.perf_counter()
    cfg = SimConfig(
        snr_db=tuple(np.arange(4.0, 8.25, 0.5)),
        snr_convention="ebn0",
        min_errors=500,
        max_trials=2 * 10**8,
        seed=0,
    )
    res = simulate_ber("cc:7,5", "g1", cfg)
    gap = snr_at(res[BDEC], 1e-4) - snr_at(res[SDEC], 1e-4)
    ratios = [r.ratio for r in ber_ratio(res[BDEC], res[SDEC])]
    above = all(r >= 1 for r in ratios)
    tail = ratios[-3:]
    non_increasing = tail[1] <= tail[0] and tail[2] <= tail[1]
    dt = time.perf_counter() - t0
    ok = 0 < gap <= 0.35 and above and non_increasing and dt < 1800
    record(
        "6",
        ok,
        f"gap at BER 1e-4 {gap:.3f} dB; ratio >= 1 everywhere: {above}; last three ratios "
        f"{', '.join(f'{r:.3f}' for r in tail)} (non-increasing: {non_increasing}); "
        f"B-DEC errors at the last point {res[BDEC].points[-1].errors}; {dt:.0f} s",
    )
    assert ok


def test_criterion_7_rayleigh_ber():
    t0 = time.perf_counter()
    parts, ok = [], True
    for nu in (2, 4):
        g = TABLE4[nu]
        cfg = SimConfig(
            snr_db=tuple(np.arange(6.0, 14.5, 2.0)),
            snr_convention="ebn0",
            channel="rayleigh",
            min_errors=300,
            max_trials=5 * 10**7,
            seed=0,
        )
        res = simulate_ber(f"cc:{g[0]:o},{g[1]:o}", "g1", cfg)
        est_s, est_b = res[SDEC].estimates, res[BDEC].estimates
        this = bool(np.all(est_b >= est_s) and est_b[-1] > est_s[-1])
        ok &= this
        parts.append(f"nu={nu}: ratios " + ", ".join(f"{b / s:.3f}" for b, s in zip(est_b, est_s)))
    dt = time.perf_counter() - t0
    record("7", ok, "; ".join(parts) + f"; {dt:.0f} s")
    assert ok


def test_criterion_8_spectrum_prefix():
    t0 = time.perf_counter()
    checks = {spec: spectrum_prefix_check(table4_code(nu), G1, 8) for spec, nu in (("[7,5]", 2), ("[23,33]", 4))}
    dt = time.perf_counter() - t0
    ok = all(c.applicable and c.passed for c in checks.values()) and dt < 60
    record("8", ok, "; ".join(f"{k}: {c.detail}" for k, c in checks.items()) + f"; {dt:.1f} s")
    assert ok


SIM_RUNS = [
    ("pep-pair", ["--x", "s1,s4,s3,s2", "--xhat", "s4,s3,s2,s1", "--snr", "1,4,7", "--min-errors", "100"]),
    ("pep-pair", ["--x", "s3,s3", "--xhat", "s1,s1", "--snr", "2,9", "--min-errors", "100", "--unpaired", "--method", "mc",
                  "--max-trials", "2000000"]),
    ("ber", ["--code", "cc:7,5", "--snr", "3:1:5", "--min-errors", "100", "--frame-bits", "300", "--chunk", "16"]),
    ("ber", ["--code", "cc:23,33", "--channel", "rayleigh", "--snr", "6,10", "--min-errors", "100", "--frame-bits", "300",
             "--chunk", "16"]),
]


def test_criterion_9_manifest_replay(tmp_path):
    t0 = time.perf_counter()
    mismatches, files = [], 0
    for k, (sub, args) in enumerate(SIM_RUNS):
        base = tmp_path / f"run{k}"
        assert cli.main([sub, *args, "--out", str(base), "--prefix", "out"]) == cli.EXIT_OK
        names = sorted(os.listdir(base))
        for workers in (1, 4, 16):
            again = tmp_path / f"run{k}_w{workers}"
            assert cli.main(["replay", str(base / "out.json"), "--out", str(again), "--workers", str(workers)]) == cli.EXIT_OK
            for name in names:
                files += 1
                if (base / name).read_bytes() != (again / name).read_bytes():
                    mismatches.append(f"{sub}#{k} {name} workers={workers}")
    dt = time.perf_counter() - t0
    ok = not mismatches
    record("9", ok, f"{files - len(mismatches)}/{files} replayed files byte-identical across 1, 4, 16 workers; {dt:.0f} s"
           + (f"; differing: {', '.join(mismatches)}" if mismatches else ""))
    assert ok
