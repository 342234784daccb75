"""Anatomy of one implicit step on a mesh small enough to inspect.

One time step is a strictly convex minimization: the residual is the
gradient of the step energy, the damped Newton solver finds its unique
minimizer, and a deliberately crude brute-force minimizer (gradient
descent plus coordinatewise bisection, no Newton, no Krylov) lands on the
same state.  The penalty term only wakes up where the state dips below
the obstacle.
"""

import numpy as np

import shallowice as si
from shallowice.verification import brute_force_step_oracle

mesh = si.build_mesh(5, 5, 1.0, 1.0)
rng = np.random.default_rng(0)

# ice on the left half, bare ground on the right, melting everywhere:
# the bare nodes get pushed below the obstacle and the penalty catches them
u_prev = rng.uniform(0.5, 1.5, mesh.n_nodes)
u_prev[mesh.nodes[:, 0] > 0.6] = 0.0
u_prev[mesh.boundary_mask] = 0.0
a_bar = np.full(mesh.n_nodes, -2.0)

params = si.make_params(mesh, p=3.0, forcing=si.ConstantForcing(0.0),
                        u0=u_prev, mu=1.0)
problem = si.StepProblem(mesh=mesh, params=params, u_prev=u_prev, a_bar=a_bar,
                         ell=0.25, kappa=1e-3)

energy_before = si.step_energy(problem, u_prev)
result = si.solve_step(problem)
print(f"Newton: {result.iterations} iterations, "
      f"residual {result.final_residual:.2e}, "
      f"energy {energy_before:.6f} -> {result.final_energy:.6f}")

oracle = brute_force_step_oracle(problem)
gap = float(np.max(np.abs(oracle - result.u_next)))
print(f"brute-force oracle distance: {gap:.2e}")

# residual is the energy gradient: a directional finite difference agrees
w = rng.standard_normal(mesh.n_nodes)
w[mesh.boundary_mask] = 0.0
h = 1e-7
fd = (si.step_energy(problem, result.u_next + h * w)
      - si.step_energy(problem, result.u_next - h * w)) / (2 * h)
dot = float(si.step_residual(problem, result.u_next) @ w)
print(f"gradient check at the solution: F.w = {dot:+.3e}, "
      f"finite difference = {fd:+.3e}")

# where the melt pushed the state under the obstacle it sits a penalty
# depth below zero, nowhere deeper
u = result.u_next
print(f"most negative nodal value: {u.min():.3e} "
      f"(penalty depth scale: kappa = {problem.kappa:g})")

# the diagnostic volume flux points from thick to thin ice
Q = si.diagnostic_flux(mesh, np.maximum(u, 0.0), params)
print(f"max |Q| over triangles: {np.max(np.linalg.norm(Q, axis=1)):.3f}")
