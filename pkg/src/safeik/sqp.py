"""Dense SQP minimizer in the SLSQP family.

minimize() iterates QP subproblems built from a damped-BFGS quadratic model
of the Lagrangian with linearized inequality constraints (convention
c(x) <= 0) and box bounds, globalized by an L1 merit function with Armijo
backtracking. solve_qp() is a Goldfarb–Idnani dual active-set solver for the
strictly convex subproblems; infeasible subproblems are retried with an
elastic slack variable so the outer loop degrades gracefully instead of
failing hard.

Everything is deterministic: no randomness, ties broken by first index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_TIME_BUDGET = "time_budget"
STATUS_INFEASIBLE_QP = "infeasible_qp"
STATUS_NONFINITE = "nonfinite"


@dataclass
class NlpProblem:
    """Inequality-constrained problem: min f(x) s.t. c_k(x) <= 0, l <= x <= u.

    objective and each inequality map x to (value, gradient) and must be
    deterministic for fixed x.
    """

    dim: int
    objective: object
    inequalities: list = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("problem dimension must be >= 1")
        if self.lower is None:
            self.lower = np.full(self.dim, -np.inf)
        if self.upper is None:
            self.upper = np.full(self.dim, np.inf)
        self.lower = np.asarray(self.lower, dtype=float).reshape(self.dim)
        self.upper = np.asarray(self.upper, dtype=float).reshape(self.dim)
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


@dataclass
class SolveOptions:
    max_iterations: int = 30
    constraint_tolerance: float = 1e-6
    objective_tolerance: float = 1e-8
    step_tolerance: float = 1e-12
    time_budget: float | None = None  # seconds
    check_hessian_pd: bool = False  # Cholesky-assert the BFGS matrix each update

    def __post_init__(self):
        for name in ("constraint_tolerance", "objective_tolerance", "step_tolerance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class SolveResult:
    x_star: np.ndarray
    f_star: float
    status: str
    kkt_residual: float
    max_constraint_violation: float  # recomputed at x_star, never trusted from the QP
    iterations: int
    diagnostic: str = ""


@dataclass
class QpDuals:
    inequalities: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def solve_qp(H, g, A=None, b=None, lower=None, upper=None, max_iter=None):
    """Strictly convex QP: min 1/2 d'Hd + g'd  s.t.  A d + b <= 0, lo<=d<=hi.

    H must be symmetric positive definite (callers regularize). Returns
    (d, QpDuals, status) with status "optimal" or "infeasible_qp". Solutions
    satisfy the KKT system to solver precision (direct factorizations).

    Dual active-set method of Goldfarb and Idnani; the working-set systems
    are re-solved densely each change, which is exact and plenty fast at the
    sizes used here (n <= ~10, a few dozen constraints).
    """
    g = np.asarray(g, dtype=float)
    n = g.size
    H = np.asarray(H, dtype=float)

    rows = []
    rhs = []
    kinds = []  # bookkeeping to scatter duals back
    scales = []  # row equilibration factors (duals are scaled back)
    if A is not None and len(A) > 0:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(A.shape[0])
        for i in range(A.shape[0]):
            nu = float(np.linalg.norm(A[i]))
            nu = nu if nu > 1e-300 else 1.0
            rows.append(-A[i] / nu)  # n'd >= rhs form
            rhs.append(b[i] / nu)
            kinds.append(("ineq", i))
            scales.append(nu)
    m_user = len(rows)
    if lower is not None:
        lower = np.asarray(lower, dtype=float).reshape(n)
        for i in range(n):
            if np.isfinite(lower[i]):
                e = np.zeros(n)
                e[i] = 1.0
                rows.append(e)
                rhs.append(lower[i])
                kinds.append(("lower", i))
    if upper is not None:
        upper = np.asarray(upper, dtype=float).reshape(n)
        for i in range(n):
            if np.isfinite(upper[i]):
                e = np.zeros(n)
                e[i] = -1.0
                rows.append(e)
                rhs.append(-upper[i])
                kinds.append(("upper", i))

    L = np.linalg.cholesky(H)

    def h_solve(v):
        y = np.linalg.solve(L, v)
        return np.linalg.solve(L.T, y)

    x = -h_solve(g)
    duals = QpDuals(np.zeros(m_user), np.zeros(n), np.zeros(n))
    m = len(rows)
    if m == 0:
        return x, duals, "optimal"

    normals = np.array(rows)
    rhs = np.array(rhs)
    active: list[int] = []
    u = []  # duals of active constraints, same order

    feas_tol = 1e-10 * max(1.0, float(np.max(np.abs(rhs))) if m else 1.0)
    max_iter = max_iter or 20 * (m + n + 1)

    def scatter_duals():
        out = QpDuals(np.zeros(m_user), np.zeros(n), np.zeros(n))
        for idx, j in enumerate(active):
            kind, i = kinds[j]
            if kind == "ineq":
                out.inequalities[i] = u[idx] / scales[i]
            elif kind == "lower":
                out.lower[i] = u[idx]
            else:
                out.upper[i] = u[idx]
        return out

    for _ in range(max_iter):
        s_all = normals @ x - rhs
        s_all[active] = 0.0
        p = int(np.argmin(s_all))
        if s_all[p] >= -feas_tol:
            return x, scatter_duals(), "optimal"
        n_p = normals[p]
        u_p = 0.0

        while True:
            if active:
                nact = normals[active].T  # n x k
                hinv_nact = h_solve(nact)
                big_m = nact.T @ hinv_nact
                hinv_np = h_solve(n_p)
                try:
                    r = np.linalg.solve(big_m, nact.T @ hinv_np)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(big_m, nact.T @ hinv_np, rcond=None)[0]
                z = hinv_np - hinv_nact @ r
            else:
                r = np.zeros(0)
                z = h_solve(n_p)

            ztnp = float(z @ n_p)
            t1 = np.inf
            blocking = -1
            for idx in range(len(active)):
                if r[idx] > 1e-12:
                    cand = u[idx] / r[idx]
                    if cand < t1:
                        t1 = cand
                        blocking = idx
            if ztnp > 1e-12:
                s_p = float(n_p @ x - rhs[p])
                t2 = -s_p / ztnp
            else:
                t2 = np.inf

            t = min(t1, t2)
            if not np.isfinite(t):
                return x, scatter_duals(), "infeasible_qp"

            if np.isfinite(t2):
                x = x + t * z
            for idx in range(len(active)):
                u[idx] -= t * r[idx]
            u_p += t

            if t == t2:
                active.append(p)
                u.append(u_p)
                break
            # dual step hit a blocking constraint: drop it and retry p
            del active[blocking]
            del u[blocking]

    return x, scatter_duals(), "max_iter"


def _eval_objective(problem, x):
    f, grad = problem.objective(x)
    return float(f), np.asarray(grad, dtype=float)


def _eval_constraints(problem, x, with_grad=True):
    vals = np.zeros(len(problem.inequalities))
    grads = np.zeros((len(problem.inequalities), problem.dim)) if with_grad else None
    for k, con in enumerate(problem.inequalities):
        c, gc = con(x)
        vals[k] = c
        if with_grad:
            grads[k] = np.asarray(gc, dtype=float)
    return vals, grads


def _merit(f, cons, mu):
    return f + mu * float(np.sum(np.maximum(cons, 0.0))) if cons.size else f


class SqpSolver:
    """One solver instance per problem stream; holds the mutable iteration
    state (BFGS matrix, duals) and must not be shared across threads."""

    def __init__(self, options: SolveOptions | None = None):
        self.options = options or SolveOptions()
        self.last_duals = None

    def minimize(self, problem: NlpProblem, x0, initial_hessian=None) -> SolveResult:
        """Run the SQP iteration from x0.

        initial_hessian seeds the quasi-Newton model (e.g. a Gauss-Newton
        matrix of the dominant objective terms); it must be symmetric
        positive definite. Defaults to the identity.
        """
        opts = self.options
        n = problem.dim
        lo, hi = problem.lower, problem.upper

        x = np.clip(np.asarray(x0, dtype=float).reshape(n), lo, hi)
        clamped = bool(np.any(x != np.asarray(x0, dtype=float).reshape(n)))

        t_start = time.perf_counter()
        f, g = _eval_objective(problem, x)
        cons, A = _eval_constraints(problem, x)
        if not (np.isfinite(f) and np.all(np.isfinite(g)) and np.all(np.isfinite(cons))):
            return SolveResult(
                x, f, STATUS_NONFINITE, np.inf, np.inf, 0, "non-finite at start point"
            )

        B = np.eye(n) if initial_hessian is None else np.asarray(initial_hessian, dtype=float)
        mu = 10.0
        status = STATUS_MAX_ITER
        diagnostic = "clamped start into bounds" if clamped else ""
        kkt = np.inf
        iterations = 0

        def violation(c):
            return float(np.max(np.maximum(c, 0.0))) if c.size else 0.0

        def iterate_key(c_viol, f_val):
            # feasible iterates ranked by objective, infeasible by violation
            if c_viol <= opts.constraint_tolerance:
                return (0, f_val)
            return (1, c_viol)

        best = (iterate_key(violation(cons), f), x.copy())

        for _ in range(opts.max_iterations):
            if opts.time_budget is not None and time.perf_counter() - t_start > opts.time_budget:
                status = STATUS_TIME_BUDGET
                break
            iterations += 1

            d, duals, qstat = solve_qp(B, g, A, cons, lo - x, hi - x)
            lam = duals.inequalities if duals is not None else np.zeros(len(cons))
            if qstat != "optimal":
                d, lam, qstat = self._elastic_qp(B, g, A, cons, lo - x, hi - x, mu)
                if qstat != "optimal":
                    status = STATUS_INFEASIBLE_QP
                    diagnostic = "relaxed QP subproblem unsolvable"
                    break
            self.last_duals = lam

            kkt = float(np.max(np.abs(B @ d))) if n else 0.0
            viol = violation(cons)
            if (kkt < opts.objective_tolerance or float(np.max(np.abs(d))) < opts.step_tolerance) \
                    and viol <= opts.constraint_tolerance:
                status = STATUS_CONVERGED
                break

            # L1 penalty large enough to make d a descent direction
            if lam.size:
                mu = max(mu, 2.0 * float(np.max(np.abs(lam))))

            merit0 = _merit(f, cons, mu)
            # directional derivative bound of the L1 merit along d
            ddir = float(g @ d) - mu * float(np.sum(np.maximum(cons, 0.0)))
            step = 1.0
            accepted = False
            f_new = f
            cons_new = cons
            for _ls in range(30):
                x_new = x + step * d
                f_new, g_new = _eval_objective(problem, x_new)
                cons_new, A_new = _eval_constraints(problem, x_new)
                finite = np.isfinite(f_new) and np.all(np.isfinite(g_new)) and np.all(
                    np.isfinite(cons_new)
                )
                if finite and _merit(f_new, cons_new, mu) <= merit0 + 1e-4 * step * ddir:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                diagnostic = "line search stalled"
                status = STATUS_MAX_ITER
                break

            # damped BFGS on the Lagrangian gradient difference
            grad_l_old = g + (A.T @ lam if lam.size else 0.0)
            grad_l_new = g_new + (A_new.T @ lam if lam.size else 0.0)
            s = x_new - x
            y = grad_l_new - grad_l_old
            bs = B @ s
            sbs = float(s @ bs)
            sy = float(s @ y)
            if sbs > 1e-16:
                if sy < 0.2 * sbs:
                    theta = 0.8 * sbs / (sbs - sy)
                    y = theta * y + (1.0 - theta) * bs
                    sy = float(s @ y)
                if sy > 1e-16:
                    B_new = B - np.outer(bs, bs) / sbs + np.outer(y, y) / sy
                    B_new = 0.5 * (B_new + B_new.T)
                    try:
                        np.linalg.cholesky(B_new)
                        B = B_new
                    except np.linalg.LinAlgError:
                        # damping keeps PD in exact arithmetic; on numerical
                        # breakdown keep the previous (PD) model
                        if self.options.check_hessian_pd:
                            raise
                        diagnostic = "skipped indefinite BFGS update"

            x, f, g, cons, A = x_new, f_new, g_new, cons_new, A_new
            key = iterate_key(violation(cons), f)
            if key < best[0]:
                best = (key, x.copy())

        if status != STATUS_CONVERGED:
            if iterate_key(violation(cons), f) > best[0]:
                x = best[1]
                f, g = _eval_objective(problem, x)
                cons, _ = _eval_constraints(problem, x, with_grad=False)

        return SolveResult(
            x_star=x,
            f_star=f,
            status=status,
            kkt_residual=kkt,
            max_constraint_violation=violation(cons),
            iterations=iterations,
            diagnostic=diagnostic,
        )

    @staticmethod
    def _elastic_qp(B, g, A, cons, d_lo, d_hi, mu):
        """Relax c + A d <= 0 to c + A d <= slack, slack >= 0, penalizing the
        slack linearly; always feasible, so the outer loop can keep moving
        and report the violation honestly."""
        n = g.size
        m = len(cons) if cons is not None else 0
        H2 = np.zeros((n + 1, n + 1))
        H2[:n, :n] = B
        H2[n, n] = 1e-6
        g2 = np.concatenate([g, [100.0 * mu]])
        if m:
            A2 = np.hstack([A, -np.ones((m, 1))])
        else:
            A2 = None
        lo2 = np.concatenate([d_lo, [0.0]])
        hi2 = np.concatenate([d_hi, [np.inf]])
        sol, duals, status = solve_qp(H2, g2, A2, cons if m else None, lo2, hi2)
        lam = duals.inequalities if duals is not None else np.zeros(m)
        return sol[:n], lam, status


def minimize(problem: NlpProblem, x0, options: SolveOptions | None = None) -> SolveResult:
    """Convenience wrapper: fresh solver instance per call."""
    return SqpSolver(options).minimize(problem, x0)
