"""Sample covariance shrinkage towards a scaled identity.

``R(alpha) = (1 - alpha) Q + alpha tr(Q)/n I = Q + alpha S`` shares its
eigenvectors with ``Q``, so a single Hermitian eigendecomposition serves
every ``alpha``: only the eigenvalues ``(1 - alpha) lambda_i + alpha tr(Q)/n``
change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .airframe import SignalBlock
from .scenario import ChannelRealization

__all__ = [
    "AlphaEstimate",
    "ShrinkagePrep",
    "SingularCovarianceError",
    "alpha_from_data",
    "alpha_oracle",
    "apply_r_inverse",
    "build_prep",
    "r_of_alpha",
    "shrinkage_coefficient",
]

# R(alpha) is treated as singular when its smallest eigenvalue falls below
# this fraction of tr(Q)/n.
SINGULAR_RTOL = 1e-12
# Degenerate-direction threshold: tr(S S^H) <= DEGENERATE_RTOL * (tr(Q)/n)^2 * n.
DEGENERATE_RTOL = 1e-12


class SingularCovarianceError(np.linalg.LinAlgError):
    """``R(alpha)`` is not invertible (rank-deficient ``Q`` with ``alpha = 0``).

    Callers can catch this and retry with a floored ``alpha``.
    """


@dataclass(frozen=True)
class ShrinkagePrep:
    """Sample covariance of the pilot block with its cached eigendecomposition."""

    Q: np.ndarray
    S: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    trace_over_dim: float
    s_energy: float

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def degenerate(self) -> bool:
        """True when ``S`` is numerically zero (isotropic ``Q``)."""
        c = self.trace_over_dim
        return self.s_energy <= DEGENERATE_RTOL * c * c * self.dim

    def r_eigvals(self, alpha: float) -> np.ndarray:
        return (1.0 - alpha) * self.eigvals + alpha * self.trace_over_dim


def _hermitian(A):
    return 0.5 * (A + A.conj().T)


def build_prep(Yp: SignalBlock | np.ndarray) -> ShrinkagePrep:
    """Form ``Q = Yp Yp^H / tau_p``, the direction ``S`` and the eigendecomposition of ``Q``."""
    Y = Yp.Y if isinstance(Yp, SignalBlock) else np.asarray(Yp)
    if isinstance(Yp, SignalBlock) and Yp.phase != "pilot":
        raise ValueError("build_prep expects a pilot-phase block")
    if not np.all(np.isfinite(Y)):
        raise ValueError("pilot block contains non-finite entries")
    n, tau = Y.shape
    Q = _hermitian(Y @ Y.conj().T / tau)
    c = float(np.trace(Q).real) / n
    S = c * np.eye(n) - Q
    lam, U = np.linalg.eigh(Q)
    lam = np.clip(lam, 0.0, None)
    s_energy = float(np.sum(np.abs(S) ** 2))
    return ShrinkagePrep(Q=Q, S=S, eigvecs=U, eigvals=lam, trace_over_dim=c, s_energy=s_energy)


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def r_of_alpha(prep: ShrinkagePrep, alpha: float) -> np.ndarray:
    """Dense ``R(alpha) = Q + alpha S``."""
    alpha = _check_alpha(alpha)
    if alpha == 1.0:
        return prep.trace_over_dim * np.eye(prep.dim, dtype=prep.Q.dtype)
    return prep.Q + alpha * prep.S


def _inv_eigvals(prep, alpha):
    mu = prep.r_eigvals(alpha)
    if mu.min() <= SINGULAR_RTOL * prep.trace_over_dim:
        raise SingularCovarianceError(
            f"R({alpha}) is singular: smallest eigenvalue {mu.min():.3e}"
        )
    return 1.0 / mu


def apply_r_inverse(prep: ShrinkagePrep, alpha: float, X: np.ndarray) -> np.ndarray:
    """``R(alpha)^{-1} X`` through the cached eigenvectors of ``Q``."""
    alpha = _check_alpha(alpha)
    U = prep.eigvecs
    inv = _inv_eigvals(prep, alpha)
    X = np.asarray(X)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    out = U @ (inv[:, None] * (U.conj().T @ X))
    return out[:, 0] if vec else out


@dataclass(frozen=True)
class AlphaEstimate:
    """Closed-form shrinkage coefficient with diagnostics.

    ``raw`` is the unclamped minimizer (``nan`` when degenerate).
    """

    alpha: float
    raw: float
    clamped: bool
    degenerate: bool


def shrinkage_coefficient(prep: ShrinkagePrep, target: np.ndarray) -> AlphaEstimate:
    """Minimize ``||R(alpha) - target||_F^2`` over ``alpha`` and clamp to ``[0, 1]``.

    The objective is a parabola in ``alpha`` with vertex
    ``Re tr((target - Q) S) / tr(S S^H)``.
    """
    if prep.degenerate:
        return AlphaEstimate(alpha=0.0, raw=float("nan"), clamped=False, degenerate=True)
    # tr(A S) for Hermitian S is the elementwise sum of A * conj(S).
    num = float(np.sum((target - prep.Q) * prep.S.conj()).real)
    raw = num / prep.s_energy
    alpha = min(max(raw, 0.0), 1.0)
    return AlphaEstimate(alpha=alpha, raw=raw, clamped=alpha != raw, degenerate=False)


def alpha_oracle(prep: ShrinkagePrep, chan: ChannelRealization, omega=None) -> float:
    """Shrinkage coefficient matched to the true covariance ``H Omega H^H + Psi``.

    ``omega`` defaults to the UE powers stored on ``chan``; it may be given as a
    vector of powers or a diagonal matrix.
    """
    if omega is None:
        C = chan.true_covariance()
    else:
        rho = np.diag(omega) if np.ndim(omega) == 2 else np.asarray(omega)
        C = (chan.H * rho) @ chan.H.conj().T + chan.psi
    return shrinkage_coefficient(prep, C).alpha


def data_covariance(Yd: SignalBlock | np.ndarray) -> np.ndarray:
    Y = Yd.Y if isinstance(Yd, SignalBlock) else np.asarray(Yd)
    return _hermitian(Y @ Y.conj().T / Y.shape[1])


def alpha_from_data(prep: ShrinkagePrep, Yd: SignalBlock | np.ndarray) -> float:
    """Shrinkage coefficient matched to the sample covariance of the data block."""
    return shrinkage_coefficient(prep, data_covariance(Yd)).alpha
