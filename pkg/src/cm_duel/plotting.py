"""Optional figures rendered next to the CSV outputs (matplotlib, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_PNG_META = {"Software": None}


def _finish(fig, ax, path, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_pep(rows: list, path: str, title: str = "") -> str:
    """Analytic, exact and simulated PEP against ``d / sigma_z``."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = [r["dsz_db"] for r in rows]
    ax.semilogy(x, [r["pep_sdec_analytic"] for r in rows], "k-", label="S-DEC analytic")
    ax.semilogy(x, [r["pep_bdec_zcmod"] for r in rows], "k--", label="B-DEC ZcMod")
    exact = [r.get("pep_bdec_exact") for r in rows]
    if all(v not in (None, "") for v in exact):
        ax.semilogy(x, exact, "b:", label="B-DEC exact")
    for key, style, label in (("pep_sdec_sim", "ko", "S-DEC sim"), ("pep_bdec_sim", "bs", "B-DEC sim")):
        pts = [(a, r[key]) for a, r in zip(x, rows) if r.get(key) not in (None, "") and r[key] > 0]
        if pts:
            ax.semilogy(*zip(*pts), style, mfc="none", label=label)
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path, "d/sigma_z [dB]", "PEP")


def plot_ratio(rows: list, path: str, key: str = "ratio", xkey: str = "dsz_db", xlabel: str = "d/sigma_z [dB]") -> str:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot([r[xkey] for r in rows], [r[key] for r in rows], "o-", label=key)
    ax.axhline(1.0, color="grey", lw=0.8)
    return _finish(fig, ax, path, xlabel, "ratio")


def plot_ber(rows: list, path: str, xlabel: str = "SNR [dB]", title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = [r["snr_db"] for r in rows]
    for key, style, label in (("ber_sdec", "ko-", "S-DEC"), ("ber_bdec", "bs--", "B-DEC")):
        pts = [(a, r[key]) for a, r in zip(x, rows) if r[key] > 0]
        if pts:
            ax.semilogy(*zip(*pts), style, mfc="none", label=label)
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path, xlabel, "BER")
