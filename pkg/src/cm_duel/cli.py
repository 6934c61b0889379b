"""Command-line front end: ``cm-duel <subcommand> ...``.

Every file-producing subcommand writes ``<prefix>.csv`` and a JSON manifest
``<prefix>.json`` into ``--out``. ``cm-duel replay <manifest>`` re-runs a
manifest and reproduces its outputs byte for byte. Exit codes: 0 success,
2 invalid input, 3 a verification check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import metadata

import numpy as np

from . import analysis, code_loss, sim
from .analysis import BDEC, SDEC
from .channel import SNR_CONVENTIONS, sigma_from_snr, snr_from_sigma
from .codebook import BlockCode, ConvCode, ExplicitCode, parse_code_spec, table4_code
from .constellation import GRAY_4PAM, LABELINGS, format_symbols, from_cli_name, make_pam, parse_symbols
from .exact_pep import EXACT_MAX_SYMBOLS, exact_pep_bdec

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 2, 3


class CliError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "0+unknown"


# -- parsing helpers ---------------------------------------------------------------


def parse_grid(text: str) -> list:
    """``"2:0.5:9"`` (start:step:stop, inclusive), ``"2,3,5"`` or ``"4"``."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, step, stop = parts
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(n)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"malformed SNR grid {text!r}; use start:step:stop or a comma list") from exc
    if not vals:
        raise CliError("empty SNR grid")
    return vals


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in header])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _emit(args, header, rows, plot=None) -> list:
    """Write the CSV (and optional PNG) plus the manifest; return written file names."""
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, args.prefix)
    files = [args.prefix + ".csv"]
    _write(stem + ".csv", csv_text(header, rows))
    if getattr(args, "plot", False) and plot is not None:
        plot(rows, stem + ".png")
        files.append(args.prefix + ".png")
    manifest = {
        "subcommand": args.command,
        "config": _resolved(args),
        "seed": getattr(args, "seed", None),
        "tool_version": tool_version(),
        "outputs": files + [args.prefix + ".json"],
    }
    _write(stem + ".json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files


_NOT_CONFIG = {"func", "out", "workers"}


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _labeling(name: str):
    return from_cli_name(name)


def _pair(args, c):
    x = parse_symbols(args.x)
    xh = parse_symbols(args.xhat)
    if len(x) != len(xh):
        raise CliError("--x and --xhat must have the same length")
    if not x:
        raise CliError("empty codeword")
    if max(x + xh) >= c.M:
        raise CliError(f"symbol index exceeds {c.M}-PAM")
    if x == xh:
        raise CliError("--x and --xhat are identical")
    return x, xh


def _dsz_grid(args, c, n_sym):
    if args.snr_convention == "dsz":
        return list(args.snr)
    return [float(snr_from_sigma(sigma_from_snr(s, args.snr_convention, c, n_sym), "dsz", c)) for s in args.snr]


# -- subcommands ------------------------------------------------------------------


def cmd_tables(args) -> int:
    out = sys.stdout
    out.write("Gray labelings of 4-PAM (labels of s1..s4, first bit left)\n")
    for name in GRAY_4PAM:
        q = LABELINGS[2][name]
        out.write(f"  {name}: " + "  ".join(format(v, "02b") for v in q) + "\n")
    for dec, title in ((SDEC, "S-DEC"), (BDEC, "B-DEC")):
        out.write(f"SMD parameters (mu, sigma^2), {title}\n")
        out.write("       " + "".join(f"{f's{j + 1}':>9s}" for j in range(4)) + "\n")
        for i in range(4):
            cells = []
            for j in range(4):
                if i == j:
                    cells.append(f"{'-':>9s}")
                else:
                    p = analysis.smd_params(dec, i, j)
                    cells.append(f"{f'({p.mu:g},{p.sigma2:g})':>9s}")
            out.write(f"  s{i + 1}   " + "".join(cells) + "\n")
    return EXIT_OK


def cmd_loss_pair(args) -> int:
    c = _labeling(args.labeling)
    x, xh = _pair(args, c)
    if args.h:
        h = [float(v) for v in args.h.split(",")]
        if len(h) != len(x):
            raise CliError("--h needs one gain per symbol")
        res = {
            "a_sdec": analysis.fading_distance(SDEC, c, h, x, xh),
            "a_bdec": analysis.fading_distance(BDEC, c, h, x, xh),
            "loss_db": analysis.fading_pairwise_loss(c, h, x, xh),
        }
    else:
        p = analysis.weight_profile(c, x, xh)
        res = {
            "w01": p.w[(0, 1)],
            "w10": p.w[(1, 0)],
            "w11": p.w[(1, 1)],
            "wc": p.wc,
            "beta": p.beta,
            "a_sdec": analysis.norm_distance(SDEC, p),
            "a_bdec": analysis.norm_distance(BDEC, p),
            "loss_db": analysis.pairwise_loss(p),
        }
    if args.json:
        sys.stdout.write(json.dumps(res, sort_keys=True) + "\n")
    else:
        for k, v in res.items():
            sys.stdout.write(f"{k}: {v:.6g}\n" if isinstance(v, float) else f"{k}: {v}\n")
    return EXIT_OK


PEP_HEADER = [
    "dsz_db",
    "pep_sdec_analytic",
    "pep_bdec_zcmod",
    "pep_bdec_exact",
    "pep_sdec_sim",
    "pep_bdec_sim",
    "ci_low",
    "ci_high",
    "sdec_ci_low",
    "sdec_ci_high",
    "sdec_trials",
    "sdec_errors",
    "bdec_trials",
    "bdec_errors",
    "sim_method",
    "censored",
]


def pep_rows(c, x, xh, dsz_db, sim_result=None, exact: bool = True) -> list:
    a_s = analysis.norm_distance_from_tables(SDEC, x, xh)
    a_b = analysis.norm_distance_from_tables(BDEC, x, xh)
    n_diff = sum(1 for p, q in zip(x, xh) if p != q)
    rows = []
    for i, g in enumerate(dsz_db):
        dsz = 10 ** (g / 20)
        r = {
            "dsz_db": g,
            "pep_sdec_analytic": float(analysis.pep_analytic(a_s, dsz)),
            "pep_bdec_zcmod": float(analysis.pep_analytic(a_b, dsz)),
            "pep_bdec_exact": exact_pep_bdec(c, x, xh, dsz) if exact and n_diff <= EXACT_MAX_SYMBOLS else None,
        }
        if sim_result is not None:
            ps, pb = sim_result[SDEC].points[i], sim_result[BDEC].points[i]
            r.update(
                pep_sdec_sim=ps.estimate,
                pep_bdec_sim=pb.estimate,
                ci_low=pb.ci_low,
                ci_high=pb.ci_high,
                sdec_ci_low=ps.ci_low,
                sdec_ci_high=ps.ci_high,
                sdec_trials=ps.trials,
                sdec_errors=ps.errors,
                bdec_trials=pb.trials,
                bdec_errors=pb.errors,
                sim_method=ps.method,
                censored=ps.censored or pb.censored,
            )
        rows.append(r)
    return rows


def _sim_config(args, convention) -> sim.SimConfig:
    return sim.SimConfig(
        snr_db=tuple(args.snr),
        snr_convention=convention,
        channel=getattr(args, "channel", "awgn"),
        min_errors=args.min_errors,
        max_trials=args.max_trials,
        seed=args.seed,
        frame_bits=getattr(args, "frame_bits", 1000),
        chunk=args.chunk,
        wave=args.wave,
        method=getattr(args, "method", "auto"),
        paired=not args.unpaired,
    )


def cmd_pep_pair(args) -> int:
    c = _labeling(args.labeling)
    x, xh = _pair(args, c)
    cfg = _sim_config(args, args.snr_convention)
    res = sim.simulate_pep(c, x, xh, cfg, workers=args.workers)
    rows = pep_rows(c, x, xh, _dsz_grid(args, c, len(x)), res, exact=not args.no_exact)
    for r, s in zip(rows, args.snr):
        r["snr_db"] = s
    from .plotting import plot_pep

    _emit(args, ["snr_db"] + PEP_HEADER, rows, plot_pep)
    sys.stderr.write(f"pep-pair: {len(rows)} points in {res[SDEC].runtime:.1f} s\n")
    return EXIT_OK


def cmd_exact_pep(args) -> int:
    c = _labeling(args.labeling)
    x, xh = _pair(args, c)
    dsz_db = _dsz_grid(args, c, len(x))
    rows = pep_rows(c, x, xh, dsz_db, exact=True)
    for r in rows:
        r["ratio"] = r["pep_bdec_exact"] / r["pep_bdec_zcmod"] if r["pep_bdec_exact"] is not None else None
    from .plotting import plot_ratio

    _emit(args, ["dsz_db", "pep_sdec_analytic", "pep_bdec_zcmod", "pep_bdec_exact", "ratio"], rows, plot_ratio)
    return EXIT_OK


def _load_code(spec: str):
    try:
        return parse_code_spec(spec)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def cmd_code_loss(args) -> int:
    c = _labeling(args.labeling)
    code = _load_code(args.code)
    if isinstance(code, ConvCode):
        _, rep = code_loss.min_profiles_trellis(
            code, c, info_stages=args.frames, wc_cap=args.wc_cap, terminated=not args.unterminated
        )
    else:
        rep = code_loss.code_loss_exhaustive(code, c)
    d = rep.as_dict()
    d.update(code=args.code, labeling=args.labeling)
    text = json.dumps(d, indent=2, sort_keys=True) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, args.prefix + ".json"), text)
    sys.stdout.write(text)
    sys.stdout.write(
        f"{args.code} {c.name}: min a_X^2 = {rep.min_ax2}, min a_B^2 = {rep.min_ab2}, "
        f"loss = {rep.loss_db:.6g} dB ({rep.method}; {rep.frame})\n"
    )
    return EXIT_OK


BER_HEADER = [
    "snr_db",
    "ber_sdec",
    "ber_bdec",
    "sdec_ci_low",
    "sdec_ci_high",
    "bdec_ci_low",
    "bdec_ci_high",
    "ratio",
    "ratio_ci_low",
    "ratio_ci_high",
    "bits",
    "sdec_errors",
    "bdec_errors",
    "sdec_censored",
    "bdec_censored",
]


def ber_rows(res) -> list:
    ratio = sim.ber_ratio(res[BDEC], res[SDEC])
    rows = []
    for ps, pb, rp in zip(res[SDEC].points, res[BDEC].points, ratio):
        rows.append(
            {
                "snr_db": ps.snr_db,
                "ber_sdec": ps.estimate,
                "ber_bdec": pb.estimate,
                "sdec_ci_low": ps.ci_low,
                "sdec_ci_high": ps.ci_high,
                "bdec_ci_low": pb.ci_low,
                "bdec_ci_high": pb.ci_high,
                "ratio": rp.ratio,
                "ratio_ci_low": rp.ci_low,
                "ratio_ci_high": rp.ci_high,
                "bits": ps.trials,
                "sdec_errors": ps.errors,
                "bdec_errors": pb.errors,
                "sdec_censored": ps.censored,
                "bdec_censored": pb.censored,
            }
        )
    return rows


def cmd_ber(args) -> int:
    code = _load_code(args.code)
    if not isinstance(code, ConvCode):
        raise CliError("ber needs a convolutional code (cc:...)")
    _labeling(args.labeling)
    cfg = _sim_config(args, args.snr_convention)
    try:
        res = sim.simulate_ber(args.code, args.labeling, cfg, workers=args.workers)
    except sim.SimError as exc:
        raise CliError(str(exc)) from exc
    from .plotting import plot_ber

    rows = ber_rows(res)
    _emit(args, BER_HEADER, rows, lambda r, p: plot_ber(r, p, xlabel=f"SNR ({args.snr_convention}) [dB]"))
    sys.stderr.write(f"ber: {len(rows)} points in {res[SDEC].runtime:.1f} s\n")
    return EXIT_OK


def _verify_codes(args):
    if args.code:
        return [(args.code, _load_code(args.code))]
    return [(f"cc:{format(g1, 'o')},{format(g2, 'o')}", table4_code(nu)) for nu, (g1, g2) in sorted(analysis_table4().items())]


def analysis_table4():
    from .codebook import TABLE4

    return TABLE4


def cmd_verify(args) -> int:
    """Run the selected checks, print one line each, exit 3 if any fails."""
    lines, ok = [], True
    which = args.theorem
    labs = [args.labeling] if args.labeling else [g.lower() for g in GRAY_4PAM]

    def add(passed, text):
        nonlocal ok
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {text}")

    if which in ("1", "all"):
        r = analysis.loss_bound_search(args.profiles, args.pairs, seed=args.seed)
        add(r.max_loss_db <= analysis.MAX_LOSS_DB + 1e-9,
            f"pairwise loss bound: max {r.max_loss_db:.9f} dB at beta={r.beta:g}, wc={r.wc:g} over {r.evaluated} profiles")
    if which in ("5", "all"):
        r = analysis.fading_loss_search(args.pairs, seed=args.seed)
        add(r.max_loss_db <= analysis.MAX_LOSS_DB + 1e-9,
            f"fading pairwise loss bound: max {r.max_loss_db:.9f} dB over {r.evaluated} draws")
    if which in ("2", "3", "4", "all"):
        for spec, code in _verify_codes(args):
            if which == "4" and not (isinstance(code, ConvCode) and code.k == 1 and code.n == 2):
                raise CliError(f"{spec} is not a rate-1/2 convolutional code")
            for lab in labs:
                c = _labeling(lab)
                kw = {"info_stages": args.frames} if isinstance(code, ConvCode) else {}
                for chk in code_loss.verify_theorems(code, c, **kw):
                    wanted = {
                        "2": "linear code, all-zero label inside",
                        "3": "all-ones stripe for the outer-zero labeling",
                        "4": "rate-1/2 convolutional code",
                    }.get(which)
                    if wanted is not None and chk.name != wanted:
                        continue
                    ok &= chk.passed
                    lines.append(f"{chk.line()} [{spec} {c.name}]")
    if which in ("spectrum", "all"):
        specs = [args.code] if args.code else ["cc:7,5", "cc:23,33"]
        for spec in specs:
            code = _load_code(spec)
            for lab in labs:
                chk = code_loss.spectrum_prefix_check(code, _labeling(lab), args.terms)
                ok &= chk.passed
                lines.append(f"{chk.line()} [{spec} {lab.upper()}]")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_replay(args) -> int:
    with open(args.manifest, encoding="utf-8") as f:
        man = json.load(f)
    cfg = dict(man["config"])
    sub = man["subcommand"]
    if sub != cfg.get("command"):
        raise CliError("manifest subcommand and config disagree")
    ns = argparse.Namespace(**cfg)
    ns.out = args.out or os.path.dirname(os.path.abspath(args.manifest))
    ns.workers = args.workers
    ns.func = COMMANDS[sub]
    return ns.func(ns)


COMMANDS = {
    "tables": cmd_tables,
    "pep-pair": cmd_pep_pair,
    "loss-pair": cmd_loss_pair,
    "code-loss": cmd_code_loss,
    "exact-pep": cmd_exact_pep,
    "ber": cmd_ber,
    "verify": cmd_verify,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cm-duel", description="Symbol-wise vs bit-wise decoding of Gray-labeled PAM.")
    sub = p.add_subparsers(dest="command", required=True)

    def pair_args(sp, default_snr):
        sp.add_argument("--x", required=True, help="transmitted symbols, e.g. s1,s4,s3,s2")
        sp.add_argument("--xhat", required=True, help="competing symbols")
        sp.add_argument("--labeling", default="g3", help="g1..g4, brgc, sp, brgc8, sp8")
        sp.add_argument("--snr", type=parse_grid, default=parse_grid(default_snr), help="start:step:stop or list, dB")
        sp.add_argument("--snr-convention", choices=SNR_CONVENTIONS, default="dsz")

    def out_args(sp, prefix):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--prefix", default=prefix, help="output file stem")
        sp.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")

    def sim_args(sp, min_errors=200, max_trials=10**8):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--min-errors", type=int, default=min_errors)
        sp.add_argument("--max-trials", type=int, default=max_trials)
        sp.add_argument("--chunk", type=int, default=0, help="trials or frames per work unit (0: automatic)")
        sp.add_argument("--wave", type=int, default=8, help="chunks between stopping checks")
        sp.add_argument("--unpaired", action="store_true", help="independent noise for the two decoders")
        sp.add_argument("--workers", type=int, default=None, help=f"worker processes (env {sim.THREADS_ENV} wins)")

    sp = sub.add_parser("tables", help="print the labelings and SMD parameter tables")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("loss-pair", help="weight profile, normalized distances and loss of one pair")
    sp.add_argument("--x", required=True)
    sp.add_argument("--xhat", required=True)
    sp.add_argument("--labeling", default="g3")
    sp.add_argument("--h", default="", help="comma-separated fading gains (optional)")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_loss_pair)

    sp = sub.add_parser("pep-pair", help="analytic, exact and simulated PEP of one pair")
    pair_args(sp, "2:1:8")
    sim_args(sp)
    sp.add_argument("--method", choices=sim.PEP_METHODS, default="auto", help="mc, importance sampling (is) or auto")
    sp.add_argument("--no-exact", action="store_true", help="skip the exact B-DEC PEP column")
    out_args(sp, "pep")
    sp.set_defaults(func=cmd_pep_pair)

    sp = sub.add_parser("exact-pep", help="exact B-DEC PEP and its ratio to the ZcMod prediction")
    pair_args(sp, "5:1:15")
    out_args(sp, "exact_pep")
    sp.set_defaults(func=cmd_exact_pep)

    sp = sub.add_parser("code-loss", help="asymptotic loss of a code")
    sp.add_argument("--code", required=True, help="cc:7,5 | cc:1,1,0;0,23,27 | block:b10010111")
    sp.add_argument("--labeling", default="g1")
    sp.add_argument("--frames", type=int, default=None, help="information stages of the search frame")
    sp.add_argument("--wc-cap", type=int, default=code_loss.DEFAULT_WC_CAP)
    sp.add_argument("--unterminated", action="store_true")
    sp.add_argument("--out", default="", help="also write <prefix>.json here")
    sp.add_argument("--prefix", default="code_loss")
    sp.set_defaults(func=cmd_code_loss)

    sp = sub.add_parser("ber", help="BER of both decoders for a convolutional code")
    sp.add_argument("--code", required=True)
    sp.add_argument("--labeling", default="g1")
    sp.add_argument("--channel", choices=sim.CHANNELS, default="awgn")
    sp.add_argument("--snr", type=parse_grid, required=True)
    sp.add_argument("--snr-convention", choices=SNR_CONVENTIONS, default="ebn0")
    sp.add_argument("--frame-bits", type=int, default=1000)
    sim_args(sp, max_trials=10**8)
    out_args(sp, "ber")
    sp.set_defaults(func=cmd_ber)

    sp = sub.add_parser("verify", help="check the loss bound and the zero-loss results")
    sp.add_argument(
        "--theorem",
        default="all",
        choices=["1", "2", "3", "4", "5", "spectrum", "all"],
        help="1: pairwise bound; 2: linear codes with an inner zero label; 3: all-ones stripes; "
        "4: rate-1/2 convolutional codes; 5: fading bound; spectrum: corner-free spectrum prefix",
    )
    sp.add_argument("--code", default="", help="code to check (default: the tabulated rate-1/2 codes)")
    sp.add_argument("--labeling", default="", help="one labeling (default: all four Gray labelings)")
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--terms", type=int, default=8)
    sp.add_argument("--profiles", type=int, default=10**6)
    sp.add_argument("--pairs", type=int, default=10**5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("replay", help="re-run a JSON manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default="")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError) as exc:
        sys.stderr.write(f"cm-duel {args.command}: error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
