"""Minimum-distance detection, symbol error counting and the sample-MSE objective."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .airframe import Constellation, SignalBlock
from .regcov import ShrinkagePrep, apply_r_inverse

__all__ = [
    "DetectionResult",
    "SerResult",
    "detect",
    "hard_decide",
    "hard_indices",
    "sample_mse",
    "sample_mse_expanded",
    "ser",
]


def hard_indices(soft: np.ndarray, c: Constellation) -> np.ndarray:
    """Index of the nearest constellation point for every entry of ``soft``.

    Square QAM decisions separate per axis, so each axis is sliced to its
    nearest level. Ties go to the lowest constellation index (smaller real
    part, larger imaginary part).
    """
    soft = np.asarray(soft)
    side = int(round(np.sqrt(c.order)))
    unit = c.points.real.max() / (side - 1)
    half = 0.5 * (side - 1)
    col = np.ceil(0.5 * soft.real / unit + half - 0.5)
    row = np.ceil(half - 0.5 * soft.imag / unit - 0.5)
    col = np.clip(col, 0, side - 1).astype(np.intp)
    row = np.clip(row, 0, side - 1).astype(np.intp)
    return row * side + col


def hard_decide(soft: np.ndarray, c: Constellation) -> np.ndarray:
    """Map each soft estimate to its nearest constellation point.

    The symbol set is a product set, so the joint sequence argmin separates
    into independent per-entry decisions.
    """
    return c.points[hard_indices(soft, c)]


def _mat(Y):
    return Y.Y if isinstance(Y, SignalBlock) else np.asarray(Y)


def sample_mse(Yd, W: np.ndarray, D_bar: np.ndarray) -> float:
    """Average squared residual ``||Yd^H W - D_bar||_F^2 / (K tau_d)``."""
    Y = _mat(Yd)
    R = Y.conj().T @ W - D_bar
    return float(np.sum(R.real ** 2 + R.imag ** 2)) / R.size


def sample_mse_expanded(
    prep: ShrinkagePrep, Yp, P: np.ndarray, Yd, D_bar: np.ndarray, alpha: float
) -> float:
    """Same objective as :func:`sample_mse`, evaluated in expanded trace form.

    Quadratic term, cross term and ``tr(D^H D)`` are formed separately
    from ``R(alpha)^{-1}``; used as an independent check of the residual path.
    """
    Yp, Yd = _mat(Yp), _mat(Yd)
    tau_p = Yp.shape[1]
    tau_d, K = D_bar.shape
    V = apply_r_inverse(prep, alpha, Yp @ P)  # R^{-1} Yp P
    F = V.conj().T @ Yd  # P^H Yp^H R^{-1} Yd, (K, tau_d)
    quad = np.trace(F @ F.conj().T).real / tau_p**2
    cross = 2.0 / tau_p * np.trace(F @ D_bar).real
    const = np.trace(D_bar.conj().T @ D_bar).real
    return float(quad - cross + const) / (K * tau_d)


@dataclass(frozen=True)
class SerResult:
    """Symbol error counts; ``pooled`` is the float view of ``errors / total``."""

    errors_per_ue: np.ndarray
    symbols_per_ue: int

    @property
    def errors(self) -> int:
        return int(self.errors_per_ue.sum())

    @property
    def total(self) -> int:
        return self.symbols_per_ue * len(self.errors_per_ue)

    @property
    def exact(self) -> Fraction:
        return Fraction(self.errors, self.total)

    @property
    def pooled(self) -> float:
        return self.errors / self.total

    @property
    def per_ue(self) -> np.ndarray:
        return self.errors_per_ue / self.symbols_per_ue


def ser(hard: np.ndarray, truth: np.ndarray) -> SerResult:
    """Count symbol errors between decisions and transmitted symbols, column = UE."""
    hard = np.asarray(hard)
    truth = np.asarray(truth)
    if hard.shape != truth.shape:
        raise ValueError(f"shape mismatch: {hard.shape} vs {truth.shape}")
    if hard.ndim == 1:
        hard, truth = hard[:, None], truth[:, None]
    # Decisions are exact constellation points, so compare with a tolerance
    # far below the minimum distance.
    wrong = np.abs(hard - truth) > 1e-9
    return SerResult(errors_per_ue=wrong.sum(axis=0).astype(np.int64), symbols_per_ue=hard.shape[0])


@dataclass(frozen=True)
class DetectionResult:
    soft: np.ndarray
    hard: np.ndarray
    errors_per_ue: np.ndarray | None
    sample_mse: float


def detect(Yd, W: np.ndarray, c: Constellation, truth: np.ndarray | None = None) -> DetectionResult:
    """Soft estimates, hard decisions, error counts (if ``truth`` given) and sample MSE."""
    Y = _mat(Yd)
    soft = Y.conj().T @ W
    hard = hard_decide(soft, c)
    r = soft - hard
    mse = float(np.sum(r.real**2 + r.imag**2)) / r.size
    errs = None if truth is None else ser(hard, truth).errors_per_ue
    return DetectionResult(soft=soft, hard=hard, errors_per_ue=errs, sample_mse=mse)
