"""AWGN and i.i.d. Rayleigh flat-fading channels, SNR conventions, per-trial RNG."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, average_symbol_energy

SNR_CONVENTIONS = ("dsz", "esn0", "ebn0")


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelRealization:
    y: np.ndarray
    h: np.ndarray
    sigma: float


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ChannelError(f"noise standard deviation must be positive, got {sigma}")


def awgn_transmit(x, sigma: float, rng: np.random.Generator) -> ChannelRealization:
    _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    y = x + sigma * rng.standard_normal(x.shape)
    return ChannelRealization(y, np.ones_like(x), sigma)


def rayleigh_gains(shape, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh amplitudes with ``E[H^2] = 1``."""
    return rng.rayleigh(scale=np.sqrt(0.5), size=shape)


def rayleigh_transmit(x, sigma: float, rng: np.random.Generator) -> ChannelRealization:
    _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    h = rayleigh_gains(x.shape, rng)
    y = h * x + sigma * rng.standard_normal(x.shape)
    return ChannelRealization(y, h, sigma)


def transmit(channel: str, x, sigma: float, rng: np.random.Generator) -> ChannelRealization:
    if channel == "awgn":
        return awgn_transmit(x, sigma, rng)
    if channel == "rayleigh":
        return rayleigh_transmit(x, sigma, rng)
    raise ChannelError(f"unknown channel {channel!r}")


def derive_trial_rng(master_seed: int, trial_index: int, *sub_index: int) -> np.random.Generator:
    """Independent Philox stream keyed by ``(master_seed, trial_index, *sub_index)``.

    The stream depends only on these integers, so work can be split across
    any number of workers without changing the draws of a given trial.
    """
    key = (int(trial_index),) + tuple(int(i) for i in sub_index)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


# SNR conventions. ``dsz`` is 20 log10(d / sigma_z); the others use N0 = 2 sigma_z^2.

def sigma_from_snr(snr_db: float, convention: str, c: Constellation, symbols_per_info_bit: float = 1.0) -> float:
    """Noise std for an SNR in dB.

    ``symbols_per_info_bit`` is ``N / K``; it only matters for ``ebn0`` where
    ``E_b = E_s N / K``.
    """
    if convention == "dsz":
        return c.d / 10 ** (snr_db / 20)
    es = average_symbol_energy(c)
    if convention == "esn0":
        esn0 = 10 ** (snr_db / 10)
    elif convention == "ebn0":
        esn0 = 10 ** (snr_db / 10) / symbols_per_info_bit
    else:
        raise ChannelError(f"unknown SNR convention {convention!r}; expected one of {SNR_CONVENTIONS}")
    n0 = es / esn0
    return float(np.sqrt(n0 / 2))


def snr_from_sigma(sigma: float, convention: str, c: Constellation, symbols_per_info_bit: float = 1.0) -> float:
    _check_sigma(sigma)
    if convention == "dsz":
        return 20 * np.log10(c.d / sigma)
    esn0 = average_symbol_energy(c) / (2 * sigma**2)
    if convention == "esn0":
        return 10 * np.log10(esn0)
    if convention == "ebn0":
        return 10 * np.log10(esn0 * symbols_per_info_bit)
    raise ChannelError(f"unknown SNR convention {convention!r}")


def dsz_to_esn0_db(dsz_db: float, c: Constellation) -> float:
    return snr_from_sigma(sigma_from_snr(dsz_db, "dsz", c), "esn0", c)


def esn0_to_dsz_db(esn0_db: float, c: Constellation) -> float:
    return snr_from_sigma(sigma_from_snr(esn0_db, "esn0", c), "dsz", c)
