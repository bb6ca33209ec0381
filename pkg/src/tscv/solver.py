"""Critical points of the discrete functional.

* :func:`solve_bvp` — damped Newton on the stacked Euler-Lagrange system with
  fixed end values, using a sparse block-tridiagonal analytic Jacobian;
* :func:`step_forward` / :func:`integrate` — the three-term recurrence used
  as a variational integrator.

Convergence is declared when every scalar residual satisfies ``|F_e| ≤ τ_e`` with

    τ_e = max(newton_tol, 4 ε Σ_j |J_ej|) · (1 + max |u|),

i.e. the user tolerance scaled by the trajectory magnitude, floored row by
row by the amount a one-ulp perturbation of ``u`` changes that residual (on
fine grids a residual cannot be resolved below ``ε |u| / (μ ν)``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lagrangians import Lagrangian
from .timescale import GridFunction, GridScale, TimeScaleError
from .variational import (
    ELResidualReport,
    residual_diff_delta_delta_shifted,
    residual_diff_delta_nabla,
    residual_diff_nabla_delta,
)

__all__ = [
    "Mode",
    "BVProblem",
    "SolverOptions",
    "SolveReport",
    "SolverError",
    "SingularJacobianError",
    "StepError",
    "solve_bvp",
    "residual_vector",
    "jacobian",
    "step_forward",
    "integrate",
    "discrete_energy",
]

EPS = np.finfo(float).eps
ARMIJO_C = 1e-4
MIN_STEP = 2.0**-20
SINGULAR_CONDITION = 1.0 / EPS


class Mode(Enum):
    NONSHIFTED_NABLA_DELTA = "nonshifted_nabla_delta"
    SHIFTED_DELTA_DELTA = "shifted_delta_delta"
    NONSHIFTED_DELTA_NABLA = "nonshifted_delta_nabla"

    @classmethod
    def parse(cls, name: "Mode | str") -> "Mode":
        """Accept enum values, member names or the short CLI flags."""
        if isinstance(name, Mode):
            return name
        short = {"nabla-delta": cls.NONSHIFTED_NABLA_DELTA,
                 "delta-delta": cls.SHIFTED_DELTA_DELTA,
                 "delta-nabla": cls.NONSHIFTED_DELTA_NABLA}
        if name in short:
            return short[name]
        try:
            return cls(name)
        except ValueError:
            raise ValueError(
                f"unknown mode {name!r}; expected one of {sorted(short)} or {[m.value for m in cls]}"
            ) from None

    @property
    def flag(self) -> str:
        return {Mode.NONSHIFTED_NABLA_DELTA: "nabla-delta",
                Mode.SHIFTED_DELTA_DELTA: "delta-delta",
                Mode.NONSHIFTED_DELTA_NABLA: "delta-nabla"}[self]


class SolverError(RuntimeError):
    """Base class for solver failures."""


class SingularJacobianError(SolverError):
    def __init__(self, message: str, condition_estimate: float):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3g})")
        self.condition_estimate = condition_estimate


class StepError(SolverError):
    """A forward step failed; ``last_iterate`` and ``partial`` carry the state reached."""

    def __init__(self, message: str, last_iterate: np.ndarray, partial: GridFunction | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.partial = partial


@dataclass(frozen=True, eq=False)
class BVProblem:
    """Fixed-end problem ``u(a) = ua``, ``u(b) = ub``."""

    L: Lagrangian
    scale: GridScale
    ua: np.ndarray
    ub: np.ndarray
    mode: Mode = Mode.NONSHIFTED_NABLA_DELTA

    def __post_init__(self) -> None:
        ua = np.atleast_1d(np.asarray(self.ua, dtype=float))
        ub = np.atleast_1d(np.asarray(self.ub, dtype=float))
        if ua.shape != (self.L.dim,) or ub.shape != (self.L.dim,):
            raise ValueError(
                f"boundary values must have length {self.L.dim}, got {ua.shape} and {ub.shape}"
            )
        object.__setattr__(self, "ua", ua)
        object.__setattr__(self, "ub", ub)
        object.__setattr__(self, "mode", Mode.parse(self.mode))

    @property
    def n(self) -> int:
        return self.L.dim

    def linear_guess(self) -> GridFunction:
        t = self.scale.points
        s = ((t - t[0]) / (t[-1] - t[0]))[:, None]
        return GridFunction(self.scale, (1 - s) * self.ua + s * self.ub)


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-12
    max_iters: int = 50
    initial_guess: GridFunction | None = None

    def __post_init__(self) -> None:
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class SolveReport:
    trajectory: GridFunction
    iterations: int
    final_residual_norm: float
    converged: bool
    jacobian_condition_estimate: float
    tolerance: float  # largest per-equation threshold τ_e
    mode: Mode = Mode.NONSHIFTED_NABLA_DELTA
    history: tuple[float, ...] = field(default=())

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "final_residual_norm": float(self.final_residual_norm),
            "tolerance": float(self.tolerance),
            "jacobian_condition_estimate": float(self.jacobian_condition_estimate),
            "mode": self.mode.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


_RESIDUALS = {
    Mode.NONSHIFTED_NABLA_DELTA: residual_diff_nabla_delta,
    Mode.SHIFTED_DELTA_DELTA: residual_diff_delta_delta_shifted,
    Mode.NONSHIFTED_DELTA_NABLA: residual_diff_delta_nabla,
}


def mode_residual(L: Lagrangian, u: GridFunction, mode: Mode) -> ELResidualReport:
    return _RESIDUALS[Mode.parse(mode)](L, u)


def residual_vector(L: Lagrangian, u: GridFunction, mode: Mode) -> np.ndarray:
    """Stacked residual, ``N − 2`` blocks of length ``n`` (one per interior unknown)."""
    return mode_residual(L, u, mode).residuals.ravel()


def _hessians(L, X, V, T):
    Lxx, Lxv, Lvv = L.hessian(X, V, T)
    return Lxx, Lxv, np.swapaxes(Lxv, 1, 2), Lvv


def jacobian_blocks(L: Lagrangian, u: GridFunction, mode: Mode):
    """``(lower, diag, upper)`` blocks of ``∂F_e/∂u_{e}``, ``∂F_e/∂u_{e+1}``, ``∂F_e/∂u_{e+2}``.

    Row ``e = 0..N−3`` is the equation attached to the interior unknown
    ``u_{e+1}``.  Blocks are ``(N−2, n, n)`` arrays.
    """
    mode = Mode.parse(mode)
    s = u.scale
    N = len(s)
    mu = s.mus
    nu = s.nus
    U = u.values
    pts = s.points
    if mode is Mode.NONSHIFTED_NABLA_DELTA:
        h = mu[:-1, None, None]
        W = np.diff(U, axis=0) / mu[:-1, None]
        Lxx, Lxv, Lvx, Lvv = _hessians(L, U[:-1], W, pts[:-1])
        A = Lvx - Lvv / h      # ∂P_k/∂u_k
        B = Lvv / h            # ∂P_k/∂u_{k+1}
        C = Lxx - Lxv / h      # ∂Q_k/∂u_k
        D = Lxv / h            # ∂Q_k/∂u_{k+1}
        k = slice(1, N - 1)
        m_ = mu[k, None, None]
        n_ = nu[k, None, None]
        upper = (B[1:] - m_ * D[1:]) / n_
        diag = (A[1:] - B[:-1] - m_ * C[1:]) / n_
        lower = -A[:-1] / n_
    elif mode is Mode.SHIFTED_DELTA_DELTA:
        h = mu[:-1, None, None]
        W = np.diff(U, axis=0) / mu[:-1, None]
        Lxx, Lxv, Lvx, Lvv = _hessians(L, U[1:], W, pts[:-1])
        A = Lvx + Lvv / h      # ∂P'_j/∂u_{j+1}
        B = -Lvv / h           # ∂P'_j/∂u_j
        C = Lxx + Lxv / h      # ∂Q'_j/∂u_{j+1}
        D = -Lxv / h           # ∂Q'_j/∂u_j
        m_ = mu[: N - 2, None, None]
        upper = A[1:] / m_
        diag = (B[1:] - A[:-1]) / m_ - C[:-1]
        lower = -B[:-1] / m_ - D[:-1]
    else:
        h = nu[1:, None, None]
        Y = np.diff(U, axis=0) / nu[1:, None]
        Lxx, Lxv, Lvx, Lvv = _hessians(L, U[1:], Y, pts[1:])
        A = Lvx + Lvv / h      # ∂R_k/∂u_k      (row i ↔ k = i + 1)
        B = -Lvv / h           # ∂R_k/∂u_{k−1}
        C = Lxx + Lxv / h      # ∂S_k/∂u_k
        D = -Lxv / h           # ∂S_k/∂u_{k−1}
        k = slice(1, N - 1)
        m_ = mu[k, None, None]
        r_ = (nu[k] / mu[k])[:, None, None]
        upper = A[1:] / m_
        diag = (B[1:] - A[:-1]) / m_ - r_ * C[:-1]
        lower = -B[:-1] / m_ - r_ * D[:-1]
    return lower, diag, upper


def jacobian(L: Lagrangian, u: GridFunction, mode: Mode) -> sp.csc_matrix:
    """Sparse Jacobian of :func:`residual_vector` with respect to the interior values."""
    lower, diag, upper = jacobian_blocks(L, u, mode)
    m, n, _ = diag.shape
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    for e in range(m):
        for blk, c in ((lower, e - 1), (diag, e), (upper, e + 1)):
            if 0 <= c < m:
                rows.append((e * n + ii).ravel())
                cols.append((c * n + jj).ravel())
                vals.append(blk[e].ravel())
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * n, m * n)
    )


def _row_sums(L, u, mode) -> np.ndarray:
    """``Σ_j |J_ej|`` per scalar equation, including the fixed end-value columns."""
    lower, diag, upper = jacobian_blocks(L, u, mode)
    rows = np.abs(lower).sum(axis=2) + np.abs(diag).sum(axis=2) + np.abs(upper).sum(axis=2)
    return rows.ravel()


#: Systems up to this size get an exact 1-norm of the inverse; larger ones an estimate.
EXACT_CONDITION_MAX = 1500


def _condition(J: sp.csc_matrix, lu) -> float:
    """1-norm condition number of ``J``, reproducible from run to run.

    ``‖J‖₁`` is exact.  ``‖J⁻¹‖₁`` is exact (columns solved from the LU
    factors) up to :data:`EXACT_CONDITION_MAX` unknowns; beyond that scipy's
    randomized estimator runs under a fixed seed, restoring the caller's
    global RNG state afterwards.
    """
    n = J.shape[0]
    norm = float(abs(J).sum(axis=0).max())
    if n <= EXACT_CONDITION_MAX:
        inv = lu.solve(np.eye(n))
        return norm * float(np.abs(inv).sum(axis=0).max())
    op = spla.LinearOperator(J.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"))
    state = np.random.get_state()
    try:
        np.random.seed(0)
        return norm * float(spla.onenormest(op))
    finally:
        np.random.set_state(state)


def _factor(J: sp.csc_matrix):
    """LU factors of the row-equilibrated Jacobian ``R J`` and the row scales ``R``.

    Equilibration leaves the Newton direction unchanged but removes the
    ``1/(μ ν)`` spread of the rows on strongly non-uniform grids; the
    condition estimate refers to ``R J``.
    """
    rowmax = np.asarray(abs(J).max(axis=1).todense()).ravel()
    if np.any(rowmax == 0) or not np.all(np.isfinite(rowmax)):
        raise SingularJacobianError("Jacobian has a zero or non-finite row", float("inf"))
    R = 1.0 / rowmax
    JR = sp.csc_matrix(sp.diags(R) @ J)
    try:
        lu = spla.splu(JR)
    except RuntimeError as exc:
        raise SingularJacobianError(f"singular Jacobian: {exc}", float("inf")) from None
    cond = _condition(JR, lu)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SingularJacobianError("numerically singular Jacobian", cond)
    return lu, cond, R


def _assemble(problem: BVProblem, interior: np.ndarray) -> GridFunction:
    n = problem.n
    vals = np.vstack([problem.ua, interior.reshape(-1, n), problem.ub])
    return GridFunction(problem.scale, vals)


def _tolerances(newton_tol: float, row_sums: np.ndarray, u: GridFunction) -> np.ndarray:
    return np.maximum(newton_tol, 4 * EPS * row_sums) * (1.0 + float(np.max(np.abs(u.values))))


def solve_bvp(problem: BVProblem, options: SolverOptions | None = None) -> SolveReport:
    """Damped Newton with Armijo backtracking for the selected Euler-Lagrange form."""
    options = options or SolverOptions()
    L, mode = problem.L, problem.mode
    guess = options.initial_guess or problem.linear_guess()
    if guess.scale != problem.scale or not guess.is_full or guess.dim != problem.n:
        raise ValueError("initial guess must be a full grid function on the problem's scale")
    x = guess.values[1:-1].ravel().copy()
    u = _assemble(problem, x)
    F = residual_vector(L, u, mode)
    history = [float(np.max(np.abs(F)))]
    cond = float("nan")
    iterations = 0
    converged = False
    tol = _tolerances(options.newton_tol, _row_sums(L, u, mode), u)
    while True:
        if np.all(np.abs(F) <= tol):
            converged = True
            break
        if iterations >= options.max_iters:
            break
        J = jacobian(L, u, mode)
        lu, cond, R = _factor(J)
        d = lu.solve(-R * F)
        lam = 1.0
        l2 = float(np.linalg.norm(F))
        while True:
            x_try = x + lam * d
            u_try = _assemble(problem, x_try)
            F_try = residual_vector(L, u_try, mode)
            if np.all(np.isfinite(F_try)) and np.linalg.norm(F_try) <= (1 - ARMIJO_C * lam) * l2:
                break
            lam *= 0.5
            if lam < MIN_STEP:
                break
        iterations += 1
        if lam < MIN_STEP:
            # line search failed; stop without claiming convergence
            break
        x, u, F = x_try, u_try, F_try
        history.append(float(np.max(np.abs(F))))
        tol = _tolerances(options.newton_tol, _row_sums(L, u, mode), u)
    if not np.isfinite(cond):
        # converged without a Newton step (exact guess); still report conditioning
        _, cond, _ = _factor(jacobian(L, u, mode))
    return SolveReport(
        trajectory=u,
        iterations=iterations,
        final_residual_norm=float(np.max(np.linalg.norm(F.reshape(-1, problem.n), axis=1))),
        converged=converged,
        jacobian_condition_estimate=cond,
        tolerance=float(tol.max()),
        mode=mode,
        history=tuple(history),
    )


def _step_residual(L, scale, u_prev, u_curr, u_next, k):
    mu, nu = scale.mu(k), scale.nu(k)
    tk, tp = scale.points[k], scale.points[k - 1]
    w = ((u_next - u_curr) / mu)[None]
    wp = ((u_curr - u_prev) / nu)[None]
    P = L.dLdv(u_curr[None], w, [tk])[0]
    Pp = L.dLdv(u_prev[None], wp, [tp])[0]
    Q = L.dLdx(u_curr[None], w, [tk])[0]
    return (P - Pp) / nu - (mu / nu) * Q


def step_forward(
    L: Lagrangian,
    scale: GridScale,
    u_prev,
    u_curr,
    k: int,
    options: SolverOptions | None = None,
) -> np.ndarray:
    """Solve the recurrence at ``t_k`` (``1 ≤ k ≤ N − 2``) for ``u(t_{k+1})``."""
    options = options or SolverOptions()
    N = len(scale)
    if not 1 <= k <= N - 2:
        raise TimeScaleError(f"step index {k} outside 1..{N - 2}")
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    u_curr = np.atleast_1d(np.asarray(u_curr, dtype=float))
    if u_prev.shape != (L.dim,) or u_curr.shape != (L.dim,):
        raise ValueError(f"states must have length {L.dim}")
    mu, nu = scale.mu(k), scale.nu(k)
    tk = scale.points[k]
    u_next = u_curr + (mu / nu) * (u_curr - u_prev)
    for _ in range(options.max_iters + 1):
        F = _step_residual(L, scale, u_prev, u_curr, u_next, k)
        w = ((u_next - u_curr) / mu)[None]
        _, Lxv, Lvv = L.hessian(u_curr[None], w, [tk])
        Jn = (Lvv[0] / mu - Lxv[0]) / nu
        row = (np.abs(Lvv[0]) * (2 / mu + 1 / nu) + np.abs(Lxv[0]) * (1 + mu / nu)).sum(axis=1) / nu
        scale_u = 1.0 + max(np.max(np.abs(u_next)), np.max(np.abs(u_curr)), np.max(np.abs(u_prev)))
        tol = max(options.newton_tol, 4 * EPS * float(row.max())) * scale_u
        if np.max(np.abs(F)) <= tol:
            return u_next
        try:
            d = np.linalg.solve(Jn, -F)
        except np.linalg.LinAlgError:
            raise StepError(f"singular step Jacobian at k={k}", u_next) from None
        if np.max(np.abs(d)) <= 4 * EPS * scale_u:
            return u_next + d
        u_next = u_next + d
    raise StepError(f"step at k={k} did not converge in {options.max_iters} iterations", u_next)


def integrate(
    L: Lagrangian,
    scale: GridScale,
    u0,
    u1,
    options: SolverOptions | None = None,
) -> SolveReport:
    """March the recurrence from ``u(t_0) = u0``, ``u(t_1) = u1`` across the scale."""
    options = options or SolverOptions()
    N = len(scale)
    vals = np.zeros((N, L.dim))
    vals[0] = np.atleast_1d(u0)
    vals[1] = np.atleast_1d(u1)
    for k in range(1, N - 1):
        try:
            vals[k + 1] = step_forward(L, scale, vals[k - 1], vals[k], k, options)
        except StepError as exc:
            partial = GridFunction(scale, vals[: k + 1])
            raise StepError(str(exc), exc.last_iterate, partial) from None
    u = GridFunction(scale, vals)
    rep = residual_diff_nabla_delta(L, u)
    tol = _tolerances(options.newton_tol, _row_sums(L, u, Mode.NONSHIFTED_NABLA_DELTA), u)
    F = rep.residuals.ravel()
    lower, diag, upper = jacobian_blocks(L, u, Mode.NONSHIFTED_NABLA_DELTA)
    cond = max(float(np.linalg.cond(upper[e], 1)) for e in range(upper.shape[0]))
    return SolveReport(
        trajectory=u,
        iterations=N - 2,
        final_residual_norm=rep.max_norm,
        converged=bool(np.all(np.abs(F) <= tol)),
        jacobian_condition_estimate=cond,
        tolerance=float(tol.max()),
        mode=Mode.NONSHIFTED_NABLA_DELTA,
    )


def discrete_energy(L: Lagrangian, u: GridFunction) -> GridFunction:
    """``E_k = v̄_k · ∂L/∂v(u_k, v̄_k, t_k) − L(u_k, v̄_k, t_k)`` on ``T^κ_κ``.

    ``v̄_k`` is the three-point central velocity
    ``(ν_k u^Δ_k + μ_k u^Δ_{k−1}) / (μ_k + ν_k)``, which is second-order
    accurate on non-uniform grids.
    """
    s = u.scale
    N = len(s)
    W = np.diff(u.values, axis=0) / s.mus[:-1, None]
    mu = s.mus[1 : N - 1, None]
    nu = s.nus[1 : N - 1, None]
    vbar = (nu * W[1:] + mu * W[:-1]) / (mu + nu)
    X = u.values[1 : N - 1]
    T = s.points[1 : N - 1]
    E = np.sum(vbar * L.dLdv(X, vbar, T), axis=1) - L.value(X, vbar, T)
    return GridFunction(s, E, 1)
