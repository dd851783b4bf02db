"""The constrained SQP minimizer on three classic problems.

The same solver drives every IK tick; here it runs standalone on an
unconstrained quadratic, the Rosenbrock valley, and a linear objective
restricted to the unit disk.
"""

import numpy as np

from safeik import NlpProblem, SolveOptions, minimize, solve_qp

# -- a single QP subproblem -----------------------------------------------------
d, duals, status = solve_qp(
    np.array([[1.0]]), np.array([-1.0]), A=np.array([[1.0]]), b=np.array([-0.5])
)
print("QP: min 1/2 d^2 - d  s.t. d <= 0.5")
print(f"  d* = {d[0]:.6f}, dual = {duals.inequalities[0]:.6f} ({status})")

# -- unconstrained quadratic ------------------------------------------------------
center = np.array([0.3, -0.7, 1.1])


def quadratic(x):
    e = x - center
    return float(e @ e), 2.0 * e


res = minimize(NlpProblem(3, quadratic), np.array([2.0, 2.0, -2.0]))
print(f"\nquadratic bowl: x* = {np.round(res.x_star, 8)} in {res.iterations} iterations")

# -- Rosenbrock -------------------------------------------------------------------


def rosenbrock(x):
    f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    g = np.array(
        [-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)]
    )
    return float(f), g


res = minimize(
    NlpProblem(2, rosenbrock, lower=np.full(2, -2.0), upper=np.full(2, 2.0)),
    np.array([-1.2, 1.0]),
    SolveOptions(max_iterations=200),
)
print(f"Rosenbrock from (-1.2, 1): x* = {np.round(res.x_star, 6)}, "
      f"f* = {res.f_star:.2e}, {res.iterations} iterations, status {res.status}")

# -- linear objective on the unit disk ----------------------------------------------


def linear(x):
    return float(x[0] + x[1]), np.array([1.0, 1.0])


def disk(x):
    return float(x @ x - 1.0), 2.0 * x


res = minimize(
    NlpProblem(2, linear, [disk], np.full(2, -2.0), np.full(2, 2.0)),
    np.array([0.5, 0.5]),
    SolveOptions(max_iterations=100),
)
print(f"min x+y on the unit disk: x* = {np.round(res.x_star, 6)} "
      f"(analytic -sqrt(2)/2 = {-np.sqrt(2)/2:.6f})")
print(f"  constraint value at x*: {disk(res.x_star)[0]:+.2e} (feasible within 1e-6)")
