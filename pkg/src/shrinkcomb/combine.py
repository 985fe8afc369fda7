"""Direct-estimate combiners (plain and shrinkage-regularized) and the perfect-CSI baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .airframe import SignalBlock
from .regcov import ShrinkagePrep, apply_r_inverse
from .scenario import ChannelRealization

__all__ = ["CombinerSet", "direct_estimate", "perfect_csi_combiner", "soft_estimate"]


@dataclass(frozen=True)
class CombinerSet:
    """``(B*M, K)`` combiner matrix; column ``k`` serves UE ``k``."""

    W: np.ndarray
    method: str
    alpha: float | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.W)):
            raise ValueError("combiner has non-finite entries")


def _mat(Y):
    return Y.Y if isinstance(Y, SignalBlock) else np.asarray(Y)


def direct_estimate(prep: ShrinkagePrep, Yp, P: np.ndarray, alpha: float = 0.0) -> CombinerSet:
    """``W = R(alpha)^{-1} Yp P / tau_p``.

    With ``alpha = 0`` this is the least-squares fit of ``W^H Yp`` to ``P^H``.
    Raises :class:`~shrinkcomb.regcov.SingularCovarianceError` if ``R(alpha)``
    cannot be inverted.
    """
    Y = _mat(Yp)
    if Y.shape[0] != prep.dim or Y.shape[1] != P.shape[0]:
        raise ValueError(f"pilot block {Y.shape} does not match pilots {P.shape}")
    tau = Y.shape[1]
    W = apply_r_inverse(prep, alpha, Y @ P) / tau
    method = "no_reg" if alpha == 0 else "shrinkage"
    return CombinerSet(W=W, method=method, alpha=float(alpha))


def perfect_csi_combiner(chan: ChannelRealization, omega=None, kind: str = "mmse") -> CombinerSet:
    """Combiner built from the true channel and impairment covariance.

    ``kind="mmse"`` gives ``w_k = sqrt(rho_k) (H Omega H^H + Psi)^{-1} h_k``;
    ``kind="rzf"`` gives regularized zero forcing with the noise power as loading.
    """
    if omega is None:
        rho = chan.ue_powers
    else:
        rho = np.diag(omega) if np.ndim(omega) == 2 else np.asarray(omega, dtype=float)
    H = chan.H
    Hs = H * np.sqrt(rho)
    if kind == "mmse":
        C = Hs @ Hs.conj().T + chan.psi
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("covariance is not positive definite") from exc
        W = np.linalg.solve(L.conj().T, np.linalg.solve(L, Hs))
    elif kind == "rzf":
        G = Hs.conj().T @ Hs + chan.noise_power * np.eye(H.shape[1])
        W = Hs @ np.linalg.inv(G)
    else:
        raise ValueError(f"unknown perfect-CSI combiner {kind!r}")
    return CombinerSet(W=W, method="perfect_csi")


def soft_estimate(Yd, w: np.ndarray) -> np.ndarray:
    """Soft symbols ``Yd^H w`` for one combiner column (or all columns of ``W``)."""
    Y = _mat(Yd)
    w = np.asarray(w)
    if w.shape[0] != Y.shape[0]:
        raise ValueError(f"combiner length {w.shape[0]} does not match {Y.shape[0]} antennas")
    return Y.conj().T @ w
