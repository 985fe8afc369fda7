"""Network geometry, unit conventions and random channel realizations.

Powers are handled in linear milliwatts internally; dB/dBm only appear at the
configuration boundary. All randomness is derived from ``(master_seed,
trial_index)`` through :class:`numpy.random.SeedSequence` spawn keys, so no
global RNG state is touched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "ChannelRealization",
    "ConfigError",
    "Interferer",
    "ScenarioConfig",
    "dbm_to_linear",
    "draw_channels",
    "load_config",
    "path_loss_db",
    "stream_rng",
    "trial_seed",
]

DEFAULT_REGION = (0.0, 100.0, -50.0, 50.0)
DEFAULT_MIN_DISTANCE_M = 10.0

# Fixed stream identifiers; changing them changes every simulated number.
_STREAMS = {
    "geometry": 0,
    "channels": 1,
    "pilot_noise": 2,
    "data_noise": 3,
    "data_symbols": 4,
    "interferer_pilot": 5,
    "interferer_data": 6,
    "fit_subset": 7,
}


class ConfigError(ValueError):
    """Raised when a scenario or run configuration is invalid."""


def dbm_to_linear(p: float) -> float:
    """Convert a power in dBm (or a gain in dB) to linear scale (mW)."""
    p = float(p)
    if not math.isfinite(p):
        raise ValueError(f"power must be finite, got {p!r}")
    return 10.0 ** (p / 10.0)


def path_loss_db(distance_m: float) -> float:
    """Large-scale gain ``-30.5 - 36.7 log10(r)`` in dB for a link of length ``r`` meters."""
    distance_m = float(distance_m)
    if not (distance_m > 0.0) or not math.isfinite(distance_m):
        raise ValueError(f"distance must be positive and finite, got {distance_m!r}")
    return -30.5 - 36.7 * math.log10(distance_m)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Derive the 64-bit seed of one Monte-Carlo trial."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream_rng(seed: int, stream: str, *extra: int) -> np.random.Generator:
    """Independent generator for one named random stream of a trial."""
    key = (_STREAMS[stream], *map(int, extra))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass(frozen=True)
class Interferer:
    """External interference source.

    ``position`` is a fixed ``(x, y)`` in meters, or ``None`` to sample it
    like a UE. ``power_offset_db`` is relative to the UE transmit power.
    """

    power_offset_db: float = -5.0
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    num_aps: int = 2
    antennas_per_ap: int = 4
    num_ues: int = 6
    ap_positions: tuple[tuple[float, float], ...] | None = None
    # Either an explicit list of (x, y) or a dict {"region": [...], "min_distance_m": ...}.
    ue_placement: Any = None
    ue_tx_power_dbm: float | tuple[float, ...] = 18.0
    noise_power_dbm: float = -95.0
    pilot_len: int = 8
    data_len: int = 1000
    interferers: tuple[Interferer, ...] = ()
    constellation_order: int = 4
    master_seed: int = 0
    interferer_gaussian: bool = False

    def __post_init__(self):
        for name in ("num_aps", "antennas_per_ap", "num_ues", "pilot_len", "data_len"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.pilot_len < self.num_ues:
            raise ConfigError(
                f"pilot_len ({self.pilot_len}) must be >= num_ues ({self.num_ues}) "
                "for orthogonal pilots"
            )
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        powers = self.ue_powers_dbm
        if len(powers) != self.num_ues:
            raise ConfigError("ue_tx_power_dbm must be a scalar or have one entry per UE")
        for p in (*powers, self.noise_power_dbm, *(i.power_offset_db for i in self.interferers)):
            if not math.isfinite(p):
                raise ConfigError(f"powers must be finite, got {p!r}")
        if self.ap_positions is not None and len(self.ap_positions) != self.num_aps:
            raise ConfigError("ap_positions must have one entry per AP")
        if isinstance(self.ue_placement, (list, tuple)) and len(self.ue_placement) != self.num_ues:
            raise ConfigError("explicit ue_placement must list one position per UE")
        from .airframe import make_constellation

        make_constellation(self.constellation_order)

    @property
    def dim(self) -> int:
        """Aggregated antenna count ``B*M``."""
        return self.num_aps * self.antennas_per_ap

    @property
    def ue_powers_dbm(self) -> tuple[float, ...]:
        p = self.ue_tx_power_dbm
        if isinstance(p, (list, tuple, np.ndarray)):
            return tuple(float(x) for x in p)
        return (float(p),) * self.num_ues

    @property
    def ue_powers(self) -> np.ndarray:
        return np.array([dbm_to_linear(p) for p in self.ue_powers_dbm])

    @property
    def noise_power(self) -> float:
        return dbm_to_linear(self.noise_power_dbm)

    @property
    def interferer_powers(self) -> np.ndarray:
        ref = max(self.ue_powers_dbm)
        return np.array([dbm_to_linear(ref + i.power_offset_db) for i in self.interferers])

    def ap_coordinates(self) -> np.ndarray:
        if self.ap_positions is not None:
            return np.asarray(self.ap_positions, dtype=float).reshape(self.num_aps, 2)
        # APs on a line, 100 m apart.
        return np.column_stack([100.0 * np.arange(self.num_aps), np.zeros(self.num_aps)])

    def replace(self, **changes) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "interferers":
                v = [{"power_offset_db": i.power_offset_db,
                      "position": None if i.position is None else list(i.position)}
                     for i in v]
            elif isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        kw = dict(d)
        if kw.get("ap_positions") is not None:
            kw["ap_positions"] = tuple(tuple(map(float, p)) for p in kw["ap_positions"])
        if isinstance(kw.get("ue_placement"), list):
            kw["ue_placement"] = tuple(tuple(map(float, p)) for p in kw["ue_placement"])
        if isinstance(kw.get("ue_tx_power_dbm"), list):
            kw["ue_tx_power_dbm"] = tuple(map(float, kw["ue_tx_power_dbm"]))
        if "interferers" in kw:
            items = []
            for spec in kw["interferers"]:
                pos = spec.get("position")
                items.append(Interferer(
                    power_offset_db=float(spec.get("power_offset_db", -5.0)),
                    position=None if pos is None else (float(pos[0]), float(pos[1])),
                ))
            kw["interferers"] = tuple(items)
        return cls(**kw)


def load_config(path: str | Path) -> dict:
    """Read a JSON run configuration from disk."""
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all channels plus the impairment covariance.

    ``H`` is ``(B*M, K)``, ``interferer_channels`` is ``(B*M, J)`` and
    ``psi`` the covariance of one column of the interference-plus-noise term.
    """

    H: np.ndarray
    interferer_channels: np.ndarray
    link_gains_db: np.ndarray
    psi: np.ndarray
    ue_powers: np.ndarray
    interferer_powers: np.ndarray
    noise_power: float
    ue_positions: np.ndarray = field(repr=False)
    interferer_positions: np.ndarray = field(repr=False)

    @property
    def omega(self) -> np.ndarray:
        """Diagonal matrix of UE transmit powers."""
        return np.diag(self.ue_powers)

    def true_covariance(self) -> np.ndarray:
        """``H diag(rho) H^H + Psi``."""
        H = self.H
        return (H * self.ue_powers) @ H.conj().T + self.psi


def _sample_positions(rng, n, aps, region, min_dist):
    xmin, xmax, ymin, ymax = region
    out = np.empty((n, 2))
    for i in range(n):
        for _ in range(10_000):
            p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
            if np.min(np.linalg.norm(aps - p, axis=1)) >= min_dist:
                out[i] = p
                break
        else:
            raise ConfigError("could not place a node at the required minimum distance")
    return out


def _ue_positions(cfg: ScenarioConfig, rng, aps):
    placement = cfg.ue_placement
    if isinstance(placement, (list, tuple)):
        return np.asarray(placement, dtype=float).reshape(cfg.num_ues, 2)
    placement = placement or {}
    region = tuple(placement.get("region", DEFAULT_REGION))
    min_dist = float(placement.get("min_distance_m", DEFAULT_MIN_DISTANCE_M))
    return _sample_positions(rng, cfg.num_ues, aps, region, min_dist)


def _rayleigh(rng, gains_db, m):
    """``m``-antenna CN(0, zeta I) blocks for a ``(B, n)`` array of gains in dB."""
    b, n = gains_db.shape
    std = np.sqrt(10.0 ** (gains_db / 10.0) / 2.0)
    z = rng.standard_normal((b, m, n, 2))
    g = (z[..., 0] + 1j * z[..., 1]) * std[:, None, :]
    return g.reshape(b * m, n)


def draw_channels(cfg: ScenarioConfig, trial_seed: int) -> ChannelRealization:
    """Draw UE/interferer positions and Rayleigh channels for one trial."""
    aps = cfg.ap_coordinates()
    geo = stream_rng(trial_seed, "geometry")
    ue_pos = _ue_positions(cfg, geo, aps)
    placement = cfg.ue_placement if isinstance(cfg.ue_placement, dict) else {}
    region = tuple(placement.get("region", DEFAULT_REGION))
    min_dist = float(placement.get("min_distance_m", DEFAULT_MIN_DISTANCE_M))
    intf_pos = np.empty((len(cfg.interferers), 2))
    for j, intf in enumerate(cfg.interferers):
        if intf.position is None:
            intf_pos[j] = _sample_positions(geo, 1, aps, region, min_dist)[0]
        else:
            intf_pos[j] = intf.position

    def gains(pos):
        d = np.linalg.norm(aps[:, None, :] - pos[None, :, :], axis=2)
        return -30.5 - 36.7 * np.log10(d)

    rng = stream_rng(trial_seed, "channels")
    ue_gains = gains(ue_pos)
    H = _rayleigh(rng, ue_gains, cfg.antennas_per_ap)
    G = _rayleigh(rng, gains(intf_pos), cfg.antennas_per_ap)

    sigma2 = cfg.noise_power
    rho_j = cfg.interferer_powers
    psi = sigma2 * np.eye(cfg.dim, dtype=complex) + (G * rho_j) @ G.conj().T
    psi = 0.5 * (psi + psi.conj().T)
    return ChannelRealization(
        H=H,
        interferer_channels=G,
        link_gains_db=ue_gains,
        psi=psi,
        ue_powers=cfg.ue_powers,
        interferer_powers=rho_j,
        noise_power=sigma2,
        ue_positions=ue_pos,
        interferer_positions=intf_pos,
    )

