"""Dense convex QP solver for the MPC subproblem.

Minimizes u' H u + f' u subject to elementwise box bounds on u and
optional two-sided linear inequality rows. The algorithm is Hildreth
dual coordinate ascent with the closed-form unconstrained solution as a
fast path; once the duals stabilize, an active-set polish solves the
equality-constrained KKT system exactly so certified solutions carry
machine-precision residuals. Certificates are verifiable with
``check_kkt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 5000

# dual-norm bound beyond which the problem is declared infeasible
_INFEASIBLE_DUAL_NORM = 1e12


@dataclass(frozen=True)
class QpProblem:
    """min u'Hu + f'u  s.t.  lower <= u <= upper, row_lower <= rows @ u <= row_upper."""

    H: np.ndarray
    f: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: np.ndarray | None = None
    row_lower: np.ndarray | None = None
    row_upper: np.ndarray | None = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        f = np.asarray(self.f, dtype=float).ravel()
        n = f.size
        if H.shape != (n, n):
            raise InvalidParameterError(f"H must be {n}x{n}, got {H.shape}")
        scale = max(1.0, float(np.max(np.abs(H))))
        if np.max(np.abs(H - H.T)) > 1e-10 * scale:
            raise InvalidParameterError("H must be symmetric")
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise InvalidParameterError("H must be positive definite") from None
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != (n,) or upper.shape != (n,):
            raise InvalidParameterError("box bounds must match the size of f")
        if np.any(lower > upper):
            raise InvalidParameterError("box bounds must satisfy lower <= upper")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.rows is not None:
            rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
            rl = np.asarray(self.row_lower, dtype=float).ravel()
            ru = np.asarray(self.row_upper, dtype=float).ravel()
            if rows.shape[1] != n or rl.shape != (rows.shape[0],) or ru.shape != (rows.shape[0],):
                raise InvalidParameterError("row constraints have inconsistent shapes")
            if np.any(rl > ru):
                raise InvalidParameterError("row bounds must satisfy row_lower <= row_upper")
            object.__setattr__(self, "rows", rows)
            object.__setattr__(self, "row_lower", rl)
            object.__setattr__(self, "row_upper", ru)

    @property
    def n(self) -> int:
        return self.f.size


@dataclass
class QpSolution:
    """Solver output; ``status == "optimal"`` implies the KKT certificate holds.

    ``multipliers`` are the Lagrange multipliers of the stacked one-sided
    constraints (see ``constraint_stack``). ``dual_objective_history`` is
    recorded per sweep when requested and is non-decreasing for the dual
    ascent (equivalently, its negation is a non-increasing objective
    sequence).
    """

    u_star: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str  # optimal | infeasible | max_iters
    multipliers: np.ndarray
    dual_objective_history: list = field(default_factory=list)


def constraint_stack(p: QpProblem):
    """All constraints as one-sided rows M u <= gamma.

    Order: upper box, lower box (negated), then row upper / row lower if
    present. Rows with non-finite bounds are kept but masked out by an
    ``active-allowed`` flag so multiplier indices stay aligned.
    """
    n = p.n
    I = np.eye(n)
    blocks = [I, -I]
    bounds = [p.upper, -p.lower]
    if p.rows is not None:
        blocks.extend([p.rows, -p.rows])
        bounds.extend([p.row_upper, -p.row_lower])
    M = np.vstack(blocks)
    gamma = np.concatenate(bounds)
    usable = np.isfinite(gamma) & (np.abs(M).max(axis=1) > 0.0)
    return M, gamma, usable


def objective_value(p: QpProblem, u: np.ndarray) -> float:
    return float(u @ p.H @ u + p.f @ u)


def check_kkt(p: QpProblem, u: np.ndarray, multipliers: np.ndarray) -> float:
    """Max of scaled stationarity, primal, dual, complementarity violations.

    Stationarity is normalized by the gradient magnitude so the
    certificate is invariant to uniform scaling of (H, f); primal and
    complementarity terms are normalized per-row by max(1, |bound|).
    """
    u = np.asarray(u, dtype=float).ravel()
    lam = np.asarray(multipliers, dtype=float).ravel()
    M, gamma, usable = constraint_stack(p)
    if lam.shape != gamma.shape:
        raise InvalidParameterError(f"expected {gamma.size} multipliers, got {lam.size}")
    grad = 2.0 * p.H @ u + p.f
    stat_raw = grad + M.T @ lam
    stat_scale = max(1.0, np.max(np.abs(grad)), np.max(np.abs(M.T @ lam)))
    stationarity = np.max(np.abs(stat_raw)) / stat_scale
    slack = M @ u - gamma
    row_scale = np.maximum(1.0, np.abs(gamma))
    primal = max(0.0, np.max(np.where(usable, slack / row_scale, -np.inf)))
    dual = max(0.0, -np.min(lam)) if lam.size else 0.0
    comp_scale = np.maximum(row_scale, np.abs(lam))
    comp = np.max(np.where(usable, np.abs(lam * slack) / comp_scale, 0.0))
    return float(max(stationarity, primal, dual, comp))


def _polish(p: QpProblem, M, gamma, active_idx, tol):
    """Solve the equality-constrained KKT system on a guessed active set.

    Returns (u, lam_full) if the polished point is primal feasible with
    nonnegative multipliers, else None.
    """
    n = p.n
    a = len(active_idx)
    Ma = M[active_idx]
    KKT = np.zeros((n + a, n + a))
    KKT[:n, :n] = 2.0 * p.H
    KKT[:n, n:] = Ma.T
    KKT[n:, :n] = Ma
    rhs = np.concatenate([-p.f, gamma[active_idx]])
    sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
    u = sol[:n]
    mu = sol[n:]
    lam = np.zeros(gamma.size)
    lam[active_idx] = np.maximum(mu, 0.0)
    if np.any(mu < -tol * max(1.0, np.max(np.abs(mu), initial=0.0))):
        return None
    if check_kkt(p, u, lam) < tol:
        return u, lam
    return None


def solve_qp(p: QpProblem, tol: float = DEFAULT_TOL,
             max_iters: int = DEFAULT_MAX_ITERS,
             warm_multipliers: np.ndarray | None = None,
             track_objective: bool = False) -> QpSolution:
    """Solve the QP; see module docstring for the method.

    ``warm_multipliers`` seeds the dual iteration (e.g. with the
    multipliers of the previous receding-horizon step).
    """
    M, gamma, usable = constraint_stack(p)
    m = gamma.size
    E_inv = np.linalg.inv(2.0 * p.H)
    u_unc = -E_inv @ p.f

    history: list = []

    # infeasible-by-inspection: a degenerate row 0 <= gamma_i < 0
    zero_rows = np.abs(M).max(axis=1) == 0.0
    if np.any(zero_rows & np.isfinite(gamma) & (gamma < 0)):
        return QpSolution(u_star=u_unc, objective=objective_value(p, u_unc),
                          kkt_residual=np.inf, iterations=0, status="infeasible",
                          multipliers=np.zeros(m), dual_objective_history=history)

    # fast path: unconstrained optimum already feasible
    slack = M @ u_unc - gamma
    if not np.any(np.where(usable, slack, -np.inf) > tol * np.maximum(1.0, np.abs(gamma))):
        lam0 = np.zeros(m)
        return QpSolution(u_star=u_unc, objective=objective_value(p, u_unc),
                          kkt_residual=check_kkt(p, u_unc, lam0), iterations=0,
                          status="optimal", multipliers=lam0,
                          dual_objective_history=history)

    idx = np.flatnonzero(usable)
    Mu = M[idx]
    gu = gamma[idx]
    P = Mu @ E_inv @ Mu.T
    Kv = gu + Mu @ E_inv @ p.f
    diag = np.diag(P).copy()
    mu_ = np.zeros(idx.size)
    if warm_multipliers is not None:
        wm = np.asarray(warm_multipliers, dtype=float).ravel()
        if wm.shape == (m,):
            mu_ = np.maximum(wm[idx], 0.0)

    # weak-duality infeasibility certificate: over a bounded box the primal
    # objective cannot exceed this, so a larger dual value proves emptiness
    primal_cap = np.inf
    if np.all(np.isfinite(p.lower)) and np.all(np.isfinite(p.upper)):
        box = np.maximum(np.abs(p.lower), np.abs(p.upper))
        primal_cap = float(np.trace(p.H) * box @ box + np.abs(p.f) @ box)
    dual_const = -0.5 * float(p.f @ E_inv @ p.f)  # -(1/4) f' H^-1 f

    def dual_value(lam_vec):
        return float(-0.5 * lam_vec @ P @ lam_vec - Kv @ lam_vec) + dual_const

    status = "max_iters"
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        delta = 0.0
        for i in range(idx.size):
            if diag[i] <= 0.0:
                continue
            w = P[i] @ mu_ - diag[i] * mu_[i] + Kv[i]
            new = max(0.0, -w / diag[i])
            delta = max(delta, abs(new - mu_[i]))
            mu_[i] = new
        if track_objective:
            history.append(dual_value(mu_))
        lam_norm = np.max(mu_, initial=0.0)
        if lam_norm > _INFEASIBLE_DUAL_NORM:
            status = "infeasible"
            break
        if np.isfinite(primal_cap) and dual_value(mu_) > primal_cap + 1.0:
            status = "infeasible"
            break
        if delta <= 1e-14 * (1.0 + lam_norm):
            # duals fully stabilized without a certified polish; fall through
            break
        # polish attempt from the current active-set guess
        if delta <= 1e-4 * (1.0 + lam_norm) or sweeps % 10 == 0:
            active = idx[mu_ > 1e-10 * (1.0 + lam_norm)]
            if active.size:
                polished = _polish(p, M, gamma, active, tol)
                if polished is not None:
                    u, lam = polished
                    return QpSolution(u_star=u, objective=objective_value(p, u),
                                      kkt_residual=check_kkt(p, u, lam),
                                      iterations=sweeps, status="optimal",
                                      multipliers=lam, dual_objective_history=history)

    lam_full = np.zeros(m)
    lam_full[idx] = mu_
    u = -E_inv @ (p.f + M.T @ lam_full)
    residual = check_kkt(p, u, lam_full)
    if status != "infeasible" and residual < tol:
        status = "optimal"
    return QpSolution(u_star=u, objective=objective_value(p, u), kkt_residual=residual,
                      iterations=sweeps, status=status, multipliers=lam_full,
                      dual_objective_history=history)
