"""Iterative shrinkage-coefficient tuning on the hard-decision sample MSE.

Each iteration rebuilds the combiner at the current ``alpha``, slices the soft
estimates to hard decisions, and takes a backtracking gradient step on
``eps(alpha)`` with the decisions held fixed. The genie baseline grid-searches
``alpha`` against the true transmitted symbols.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .airframe import Constellation, SignalBlock
from .detect import hard_decide
from .regcov import ShrinkagePrep, SingularCovarianceError, apply_r_inverse, r_of_alpha
from .scenario import stream_rng

__all__ = [
    "FitError",
    "FitOptions",
    "FitState",
    "fit_exhaustive_genie",
    "fit_iterative",
    "mse_gradient",
]


class FitError(RuntimeError):
    """The iteration produced a non-finite gradient; ``state`` holds the trajectory so far."""

    def __init__(self, msg, state):
        super().__init__(msg)
        self.state = state


def _mat(Y):
    return Y.Y if isinstance(Y, SignalBlock) else np.asarray(Y)


def _mse(soft, D):
    r = soft - D
    return float(np.sum(r.real**2 + r.imag**2)) / r.size


def mse_gradient(prep: ShrinkagePrep, Yp, P, Yd, D_bar, alpha: float) -> float:
    """Derivative of the sample MSE with respect to ``alpha`` at fixed decisions.

    ``-2/(K tau_d) Re tr(P^H Yp^H R^-1 S R^-1 Yd (Yd^H R^-1 Yp P / tau_p^2 - D_bar / tau_p))``
    with ``D_bar`` stored as ``(tau_d, K)``.
    """
    Yp, Yd = _mat(Yp), _mat(Yd)
    tau_p = Yp.shape[1]
    tau_d, K = D_bar.shape
    V = apply_r_inverse(prep, alpha, Yp @ P)  # R^-1 Yp P
    left = apply_r_inverse(prep, alpha, prep.S @ V).conj().T @ Yd  # P^H Yp^H R^-1 S R^-1 Yd
    right = (Yd.conj().T @ V) / tau_p**2 - D_bar / tau_p
    return float(-2.0 / (K * tau_d) * np.sum(left * right.T).real)


class _EigenWorkspace:
    """Soft estimates and the fixed-decision objective in the eigenbasis of ``Q``.

    ``soft(alpha) = B^H diag(v) A`` with ``A = U^H Yp P / tau_p``,
    ``B = U^H Yd`` and ``v = 1/mu``, ``mu = (1 - alpha) lambda + alpha tr(Q)/n``.
    For fixed decisions ``D`` the squared residual is the quadratic
    ``v^T M v - 2 v^T r + ||D||^2`` with ``M = Re(B B^H * conj(A A^H))`` and
    ``r = Re(sum_k conj(A) * (B D))``, so each extra ``alpha`` costs ``O(n^2)``.
    """

    def __init__(self, prep, Yp, P, Yd):
        U = prep.eigvecs
        self.prep = prep
        self.A = U.conj().T @ (Yp @ P) / Yp.shape[1]
        self.B = U.conj().T @ Yd
        self.dmu = prep.trace_over_dim - prep.eigvals
        self.M = (self.B @ self.B.conj().T * (self.A @ self.A.conj().T).conj()).real
        self.size = Yd.shape[1] * P.shape[1]

    def _inv(self, alpha):
        mu = self.prep.r_eigvals(alpha)
        if mu.min() <= 1e-12 * self.prep.trace_over_dim:
            raise SingularCovarianceError(f"R({alpha}) is singular")
        return 1.0 / mu

    def soft(self, alpha):
        return self.B.conj().T @ (self.A * self._inv(alpha)[:, None])

    def dsoft(self, alpha, rows=None):
        inv = self._inv(alpha)
        BH = self.B.conj().T if rows is None else self.B[:, rows].conj().T
        return -(BH @ (self.A * (self.dmu * inv * inv)[:, None]))

    def decision_stats(self, D):
        r = np.sum(self.A.conj() * (self.B @ D), axis=1).real
        dd = float(np.sum(D.real**2 + D.imag**2))
        return r, dd

    def mse(self, alpha, stats):
        r, dd = stats
        v = self._inv(alpha)
        return float(v @ self.M @ v - 2.0 * v @ r + dd) / self.size

    def grad(self, alpha, stats):
        r, _ = stats
        v = self._inv(alpha)
        dv = -self.dmu * v * v
        return float(2.0 * (v @ self.M @ dv) - 2.0 * dv @ r) / self.size

    def mse_grid(self, alphas, stats):
        """Objective for every entry of ``alphas``; ``inf`` where ``R(alpha)`` is singular."""
        r, dd = stats
        c = self.prep.trace_over_dim
        mu = (1.0 - alphas)[:, None] * self.prep.eigvals + alphas[:, None] * c
        ok = mu.min(axis=1) > 1e-12 * c
        V = 1.0 / np.where(ok[:, None], mu, 1.0)
        val = (np.einsum("gn,nm,gm->g", V, self.M, V) - 2.0 * V @ r + dd) / self.size
        return np.where(ok, val, np.inf)


class _DenseWorkspace:
    """Reference path: explicit dense inverse of ``R(alpha)`` and full residuals on every call."""

    def __init__(self, prep, Yp, P, Yd):
        self.prep = prep
        self.YpP = Yp @ P / Yp.shape[1]
        self.YdH = Yd.conj().T

    def _rinv(self, alpha):
        return np.linalg.inv(r_of_alpha(self.prep, alpha))

    def soft(self, alpha):
        return self.YdH @ (self._rinv(alpha) @ self.YpP)

    def dsoft(self, alpha, rows=None):
        Ri = self._rinv(alpha)
        YdH = self.YdH if rows is None else self.YdH[rows]
        return -(YdH @ (Ri @ self.prep.S @ Ri @ self.YpP))

    def decision_stats(self, D):
        return D

    def mse(self, alpha, D):
        return _mse(self.soft(alpha), D)

    def grad(self, alpha, D):
        r = self.soft(alpha) - D
        return 2.0 * float(np.sum(r.conj() * self.dsoft(alpha)).real) / r.size


@dataclass
class FitOptions:
    """Knobs of the iterative fit.

    ``step="backtracking"`` starts each line search at
    ``beta0_scale / (|grad| + 1e-12)`` and halves up to ``max_halvings`` times
    until the objective decreases. ``step="fixed"`` always uses ``beta``.
    ``alpha_floor`` is the starting point when ``R(0)`` is singular.
    ``gradient_subset`` evaluates the gradient on that many randomly chosen
    data columns, redrawn each iteration from ``seed``.
    """

    max_iters: int = 50
    tol_alpha: float = 1e-4
    step: str = "backtracking"
    beta0_scale: float = 0.1
    beta: float = 0.01
    max_halvings: int = 20
    gradient_subset: int | None = None
    seed: int = 0
    dense_reference: bool = False
    alpha_floor: float = 1e-3

    def __post_init__(self):
        if self.step not in ("backtracking", "fixed"):
            raise ValueError(f"unknown step policy {self.step!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class FitState:
    """Trajectory of one fit.

    Entry ``i`` of ``alphas`` is the coefficient after iteration ``i + 1``;
    ``eps`` is the objective at the start of that iteration (fresh decisions)
    and ``betas`` the accepted step size (0 when no step was taken).
    ``floored`` is set when ``R(0)`` was singular and the fit started from
    ``alpha_floor`` instead. ``line_search`` logs every ``(iteration, beta, alpha_candidate, eps)`` tried.
    """

    alphas: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    clamp_events: int = 0
    floored: bool = False
    line_search: list = field(default_factory=list)

    def trace_rows(self):
        """Rows ``(iteration, alpha, eps, beta_used)`` for a CSV dump."""
        return [(i + 1, a, e, b) for i, (a, e, b) in enumerate(zip(self.alphas, self.eps, self.betas))]


def fit_iterative(
    prep: ShrinkagePrep,
    Yp,
    P: np.ndarray,
    Yd,
    c: Constellation,
    opts: FitOptions | None = None,
) -> tuple[float, FitState]:
    """Tune ``alpha`` from ``alpha = 0`` by gradient steps on the decision-directed MSE.

    Returns the final coefficient and the full :class:`FitState`.
    """
    opts = opts or FitOptions()
    Yp, Yd = _mat(Yp), _mat(Yd)
    state = FitState()
    alpha = 0.0
    if not (np.isfinite(Yd).all() and np.isfinite(Yp).all()):
        raise FitError("non-finite received samples", state)
    if prep.degenerate:
        # R(alpha) does not depend on alpha.
        ws = _EigenWorkspace(prep, Yp, P, Yd)
        soft = ws.soft(alpha)
        state.alphas.append(alpha)
        state.eps.append(_mse(soft, hard_decide(soft, c)))
        state.betas.append(0.0)
        state.iterations = 1
        state.converged = True
        return alpha, state

    ws = (_DenseWorkspace if opts.dense_reference else _EigenWorkspace)(prep, Yp, P, Yd)
    tau_d = Yd.shape[1]
    try:
        ws.soft(alpha)
    except SingularCovarianceError:
        alpha = opts.alpha_floor
        state.floored = True
    for it in range(1, opts.max_iters + 1):
        soft = ws.soft(alpha)
        if not np.isfinite(soft).all():
            state.iterations = it - 1
            raise FitError(f"non-finite soft estimates at iteration {it}, alpha={alpha}", state)
        D = hard_decide(soft, c)
        stats = ws.decision_stats(D)
        eps0 = ws.mse(alpha, stats)
        if opts.gradient_subset and opts.gradient_subset < tau_d:
            rng = stream_rng(opts.seed, "fit_subset", it)
            rows = np.sort(rng.choice(tau_d, size=opts.gradient_subset, replace=False))
            r = soft[rows] - D[rows]
            g = 2.0 * float(np.sum(r.conj() * ws.dsoft(alpha, rows)).real) / r.size
        else:
            g = ws.grad(alpha, stats)
        if not np.isfinite(g):
            state.iterations = it - 1
            raise FitError(f"non-finite gradient at iteration {it}, alpha={alpha}", state)

        new, used, clamped = alpha, 0.0, False
        if g != 0.0:
            beta = opts.beta0_scale / (abs(g) + 1e-12) if opts.step == "backtracking" else opts.beta
            tries = opts.max_halvings + 1 if opts.step == "backtracking" else 1
            for _ in range(tries):
                raw = alpha - beta * g
                cand = min(max(raw, 0.0), 1.0)
                if cand == alpha:
                    break
                try:
                    eps_c = ws.mse(cand, stats)
                except SingularCovarianceError:
                    eps_c = np.inf
                state.line_search.append((it, beta, cand, eps_c))
                if opts.step == "fixed" or eps_c < eps0:
                    new, used, clamped = cand, beta, cand != raw
                    break
                beta *= 0.5
        state.clamp_events += int(clamped)
        state.alphas.append(new)
        state.eps.append(eps0)
        state.betas.append(used)
        state.iterations = it
        step = abs(new - alpha)
        alpha = new
        if step < opts.tol_alpha:
            state.converged = True
            break
    return alpha, state


def genie_objective(prep, Yp, P, Yd, D_true, alphas, criterion="mse", c=None):
    """Objective of each ``alpha`` in ``alphas`` against the true symbols.

    ``criterion="mse"`` gives the sample MSE; ``"ser"`` the symbol error count
    (requires ``c``). Singular points evaluate to ``inf``.
    """
    Yp, Yd = _mat(Yp), _mat(Yd)
    ws = _EigenWorkspace(prep, Yp, P, Yd)
    alphas = np.asarray(alphas, dtype=float)
    if criterion == "mse":
        return ws.mse_grid(alphas, ws.decision_stats(D_true))
    if criterion != "ser":
        raise ValueError(f"unknown criterion {criterion!r}")
    if c is None:
        raise ValueError("criterion='ser' needs a constellation")
    out = np.full(len(alphas), np.inf)
    for i, a in enumerate(alphas):
        try:
            hard = hard_decide(ws.soft(a), c)
        except SingularCovarianceError:
            continue
        out[i] = np.count_nonzero(np.abs(hard - D_true) > 1e-9)
    return out


def fit_exhaustive_genie(
    prep: ShrinkagePrep,
    Yp,
    P: np.ndarray,
    Yd,
    D_true: np.ndarray,
    step: float = 0.01,
    criterion: str = "mse",
    c: Constellation | None = None,
) -> float:
    """Grid search over ``{0, step, ..., 1}`` for the ``alpha`` with the lowest genie objective.

    Ties resolve to the smallest ``alpha``.
    """
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"step must divide 1 evenly, got {step}")
    grid = np.arange(n + 1) / n
    obj = genie_objective(prep, Yp, P, Yd, D_true, grid, criterion, c)
    if not np.isfinite(obj).any():
        raise SingularCovarianceError("no invertible grid point")
    return float(grid[int(np.argmin(obj))])
