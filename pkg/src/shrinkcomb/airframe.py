"""Constellations, pilots and synthesis of the received pilot/data blocks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .scenario import ChannelRealization, ScenarioConfig, stream_rng

__all__ = [
    "Constellation",
    "SignalBlock",
    "draw_data_symbols",
    "dump_block",
    "make_constellation",
    "make_pilots",
    "synthesize",
]


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy symbol alphabet with Gray labels."""

    order: int
    points: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.order


def _gray(n):
    return n ^ (n >> 1)


@lru_cache(maxsize=None)
def make_constellation(order: int = 4) -> Constellation:
    """Square QAM alphabet of the given order (4 gives QPSK).

    Points are scaled so that ``mean(|x|^2) == 1``.
    """
    order = int(order)
    side = int(round(np.sqrt(order)))
    if order < 4 or side * side != order or side & (side - 1):
        raise ValueError(f"constellation order must be a square power of 4, got {order}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    re, im = np.meshgrid(levels, levels[::-1], indexing="xy")
    pts = (re + 1j * im).ravel()
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    idx = np.arange(side)
    gi = _gray(idx)
    labels = (gi[None, :] | (gi[::-1][:, None] << int(np.log2(side)))).ravel()
    pts.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(order=order, points=pts, labels=labels)


def make_pilots(pilot_len: int, num_ues: int) -> np.ndarray:
    """Mutually orthogonal pilots: the first ``K`` columns of a ``tau x tau`` DFT matrix.

    Every column has squared norm ``tau`` and ``P^H P = tau I``.
    """
    if num_ues < 1 or pilot_len < num_ues:
        raise ValueError(f"need pilot_len >= num_ues >= 1, got {pilot_len} < {num_ues}")
    n = np.arange(pilot_len)[:, None]
    k = np.arange(num_ues)[None, :]
    return np.exp(-2j * np.pi * n * k / pilot_len)


@dataclass(frozen=True)
class SignalBlock:
    """A received ``(B*M, T)`` block and the ``(T, K)`` symbols that produced it."""

    Y: np.ndarray
    truth_symbols: np.ndarray
    phase: str

    @property
    def length(self) -> int:
        return self.Y.shape[1]


def _random_symbols(rng, shape, order):
    pts = make_constellation(order).points
    return pts[rng.integers(0, order, size=shape)]


def draw_data_symbols(cfg: ScenarioConfig, trial_seed: int) -> np.ndarray:
    """i.i.d. uniform constellation symbols, shape ``(tau_d, K)``."""
    rng = stream_rng(trial_seed, "data_symbols")
    return _random_symbols(rng, (cfg.data_len, cfg.num_ues), cfg.constellation_order)


def _interference_plus_noise(cfg, chan, length, trial_seed, phase):
    dim = cfg.dim
    rng = stream_rng(trial_seed, f"{phase}_noise")
    z = rng.standard_normal((dim, length, 2))
    Z = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(chan.noise_power / 2.0)
    n_int = chan.interferer_channels.shape[1]
    if n_int:
        irng = stream_rng(trial_seed, f"interferer_{phase}")
        if cfg.interferer_gaussian:
            x = irng.standard_normal((length, n_int, 2))
            s = (x[..., 0] + 1j * x[..., 1]) / np.sqrt(2.0)
        else:
            s = _random_symbols(irng, (length, n_int), cfg.constellation_order)
        G = chan.interferer_channels * np.sqrt(chan.interferer_powers)
        Z = Z + G @ s.conj().T
    return Z


def synthesize(
    phase: str,
    cfg: ScenarioConfig,
    chan: ChannelRealization,
    symbols: np.ndarray,
    trial_seed: int,
    noiseless: bool = False,
) -> SignalBlock:
    """Received block ``Y = sum_k sqrt(rho_k) h_k s_k^H + Z``.

    ``symbols`` is ``(T, K)``; for the pilot phase pass the pilot matrix.
    ``Z`` holds the interferers (random symbols in both phases) plus AWGN.
    With ``noiseless=True`` the impairment term is omitted.
    """
    if phase not in ("pilot", "data"):
        raise ValueError(f"phase must be 'pilot' or 'data', got {phase!r}")
    symbols = np.asarray(symbols)
    expected = cfg.pilot_len if phase == "pilot" else cfg.data_len
    if symbols.ndim != 2 or symbols.shape != (expected, chan.H.shape[1]):
        raise ValueError(
            f"{phase} symbols must have shape {(expected, chan.H.shape[1])}, got {symbols.shape}"
        )
    if chan.H.shape[0] != cfg.dim:
        raise ValueError("channel dimension does not match the configuration")
    Y = (chan.H * np.sqrt(chan.ue_powers)) @ symbols.conj().T
    if not noiseless:
        Y = Y + _interference_plus_noise(cfg, chan, expected, trial_seed, phase)
    return SignalBlock(Y=Y, truth_symbols=symbols, phase=phase)


def dump_block(block: SignalBlock, path: str | Path) -> None:
    """Write ``block.Y`` as little-endian interleaved re/im float64, row-major."""
    Y = np.ascontiguousarray(block.Y, dtype=np.complex128)
    Y.view(np.float64).astype("<f8").tofile(str(path))
