"""Residual, energy, and Jacobian action of one implicit time step.

One step of the scheme solves, for the new field u with zero boundary values,

    (m_i/ell) (phi_eps(u_i) - phi(uprev_i)) + S_i(u)
        + (m_i/kappa) min(u_i, 0) - m_i abar_i = 0     at interior nodes,

where phi_eps(u) = (u^2 + eps^2)^((alpha-2)/2) u, S is the weighted
p-Laplacian stiffness action with gradient regularization delta, and the
min(u, 0)/kappa term is the negative-part penalty that drives u upward
wherever it dips below the obstacle.  The residual is exactly the gradient
of the strictly convex step energy, so the step solution is its unique
minimizer.  Time, penalty, and forcing terms use the lumped nodal masses
m_i, which keeps the pointwise nonlinearities decoupled across nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    StructuredMesh,
    require_constrained,
    require_nodal,
    scatter_vertex_sums,
    triangle_gradients,
)
from .physics import PhysicalParams, dphi_power_reg, phi_power_reg, signed_power

__all__ = [
    "SingularEvaluation",
    "StepProblem",
    "p_laplacian_residual",
    "step_energy",
    "step_residual",
    "step_jacobian_action",
    "jacobian_diagonal",
    "scaled_residual_norm",
]

# below this magnitude the eps = 0 power slope (alpha-1)|u|^(alpha-2) is
# treated as numerically singular
SINGULAR_STATE = 1e-14


class SingularEvaluation(RuntimeError):
    """Jacobian requested where the unregularized power slope blows up."""


@dataclass
class StepProblem:
    """Data of one implicit step: previous state, averaged forcing, knobs.

    ell is the time step, kappa the penalty parameter; delta >= 0 smooths
    the degenerate p-Laplacian (|grad u|^2 -> |grad u|^2 + delta^2) and
    eps >= 0 smooths the singular power slope at u = 0.  Both enter the
    residual and energy consistently, so gradient relations hold for every
    configured value.
    """

    mesh: StructuredMesh
    params: PhysicalParams
    u_prev: np.ndarray
    a_bar: np.ndarray
    ell: float
    kappa: float
    delta: float = 1e-8
    eps: float = 1e-10

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError(f"time step ell must be positive, got {self.ell}")
        if not self.kappa > 0:
            raise ValueError(f"penalty kappa must be positive, got {self.kappa}")
        if self.delta < 0 or self.eps < 0:
            raise ValueError("regularizations delta, eps must be nonnegative")
        if self.params.mu.shape != (self.mesh.n_triangles,):
            raise ValueError("params.mu does not match the mesh triangle count")
        self.u_prev = require_constrained(self.mesh, self.u_prev, "u_prev")
        self.a_bar = require_nodal(self.mesh, self.a_bar, "a_bar")


def _grad_weight(problem: StepProblem, q: np.ndarray) -> np.ndarray:
    """Per-triangle weight area * mu * q^((p-2)/2) with q = |grad u|^2 + delta^2."""
    p = problem.params.p
    return problem.mesh.areas * problem.params.mu * q ** (0.5 * (p - 2.0))


def p_laplacian_residual(problem: StepProblem, u: np.ndarray) -> np.ndarray:
    """Stiffness action S_i(u) = sum_T |T| mu_T q^((p-2)/2) grad u . grad hat_i.

    Boundary rows are identity-constrained and reported as zero.
    """
    mesh = problem.mesh
    u = require_constrained(mesh, u, "u")
    g = triangle_gradients(mesh, u)
    q = np.einsum("td,td->t", g, g) + problem.delta**2
    flux = _grad_weight(problem, q)[:, None] * g
    S = scatter_vertex_sums(mesh, np.einsum("td,tld->tl", flux, mesh.grad_basis))
    S[mesh.boundary_mask] = 0.0
    return S


def step_energy(problem: StepProblem, u: np.ndarray) -> float:
    """Convex objective whose gradient is step_residual.

    J(u) = sum_i m_i [ pw(u_i)/ell - phi(uprev_i) u_i / ell
                       + min(u_i,0)^2/(2 kappa) - abar_i u_i ]
         + sum_T (|T| mu_T / p) (|grad u_T|^2 + delta^2)^(p/2),

    with pw(u) = ((u^2 + eps^2)^(alpha/2) - eps^alpha)/alpha, which reduces
    to |u|^alpha/alpha at eps = 0 and keeps J(0) = 0 exactly.
    """
    mesh = problem.mesh
    params = problem.params
    u = require_constrained(mesh, u, "u")
    alpha, eps = params.alpha, problem.eps

    if eps == 0.0:
        pw = np.abs(u) ** alpha / alpha
    else:
        pw = ((u * u + eps * eps) ** (0.5 * alpha) - eps**alpha) / alpha
    phi_prev = signed_power(problem.u_prev, alpha - 1.0)
    nodal = (
        pw / problem.ell
        - phi_prev * u / problem.ell
        + np.minimum(u, 0.0) ** 2 / (2.0 * problem.kappa)
        - problem.a_bar * u
    )
    g = triangle_gradients(mesh, u)
    q = np.einsum("td,td->t", g, g) + problem.delta**2
    grad_term = (mesh.areas * params.mu / params.p) * q ** (0.5 * params.p)
    return float(mesh.lumped_mass @ nodal + grad_term.sum())


def step_residual(problem: StepProblem, u: np.ndarray) -> np.ndarray:
    """Nodal residual of the implicit step; zero rows on the boundary."""
    mesh = problem.mesh
    params = problem.params
    u = require_constrained(mesh, u, "u")
    m = mesh.lumped_mass
    phi_new = phi_power_reg(u, params.alpha, problem.eps)
    phi_prev = signed_power(problem.u_prev, params.alpha - 1.0)
    F = (
        m * (phi_new - phi_prev) / problem.ell
        + p_laplacian_residual(problem, u)
        + (m / problem.kappa) * np.minimum(u, 0.0)
        - m * problem.a_bar
    )
    F[mesh.boundary_mask] = 0.0
    return F


def _check_jacobian_state(problem: StepProblem, u: np.ndarray) -> None:
    if problem.eps == 0.0:
        small = np.abs(u[problem.mesh.interior_mask]) < SINGULAR_STATE
        if np.any(small):
            idx = np.flatnonzero(problem.mesh.interior_mask)[np.argmax(small)]
            raise SingularEvaluation(
                f"eps = 0 and |u| < {SINGULAR_STATE} at node {idx}; "
                "the power slope is unbounded there"
            )


def step_jacobian_action(problem: StepProblem, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Directional derivative of step_residual at u applied to w.

    Symmetric positive semidefinite as a bilinear form (definite for
    eps > 0).  The generalized slope of min(u, 0) is 1/kappa where u < 0
    and 0 at u = 0 (active-set convention).  Boundary rows of the result
    are zero and boundary entries of w are ignored.
    """
    mesh = problem.mesh
    params = problem.params
    u = require_constrained(mesh, u, "u")
    w = require_nodal(mesh, w, "w")
    _check_jacobian_state(problem, u)
    if np.any(w[mesh.boundary_mask] != 0.0):
        w = w.copy()
        w[mesh.boundary_mask] = 0.0

    m = mesh.lumped_mass
    out = m * dphi_power_reg(u, params.alpha, problem.eps) * w / problem.ell
    out += (m / problem.kappa) * (u < 0.0) * w

    g = triangle_gradients(mesh, u)
    h = triangle_gradients(mesh, w)
    q = np.einsum("td,td->t", g, g) + problem.delta**2
    flux = _grad_weight(problem, q)[:, None] * h
    p = params.p
    if p != 2.0:
        gh = np.einsum("td,td->t", g, h)
        coef = np.zeros(mesh.n_triangles)
        pos = q > 0.0
        coef[pos] = (
            mesh.areas[pos] * params.mu[pos] * (p - 2.0)
            * q[pos] ** (0.5 * (p - 4.0)) * gh[pos]
        )
        flux = flux + coef[:, None] * g
    out += scatter_vertex_sums(mesh, np.einsum("td,tld->tl", flux, mesh.grad_basis))
    out[mesh.boundary_mask] = 0.0
    return out


def jacobian_diagonal(problem: StepProblem, u: np.ndarray) -> np.ndarray:
    """Diagonal of the step Jacobian; boundary entries are set to 1."""
    mesh = problem.mesh
    params = problem.params
    u = require_constrained(mesh, u, "u")
    _check_jacobian_state(problem, u)

    m = mesh.lumped_mass
    d = m * dphi_power_reg(u, params.alpha, problem.eps) / problem.ell
    d = d + (m / problem.kappa) * (u < 0.0)

    g = triangle_gradients(mesh, u)
    q = np.einsum("td,td->t", g, g) + problem.delta**2
    base = _grad_weight(problem, q)
    gb = np.einsum("td,tld->tl", g, mesh.grad_basis)
    per_vertex = base[:, None] * np.einsum("tld,tld->tl", mesh.grad_basis, mesh.grad_basis)
    p = params.p
    if p != 2.0:
        coef = np.zeros(mesh.n_triangles)
        pos = q > 0.0
        coef[pos] = (
            mesh.areas[pos] * params.mu[pos] * (p - 2.0) * q[pos] ** (0.5 * (p - 4.0))
        )
        per_vertex = per_vertex + coef[:, None] * gb**2
    d += scatter_vertex_sums(mesh, per_vertex)
    d[mesh.boundary_mask] = 1.0
    return d


def scaled_residual_norm(problem: StepProblem, F: np.ndarray) -> float:
    """Max over interior nodes of |F_i| / m_i; comparable across refinements."""
    free = problem.mesh.interior_mask
    if not np.any(free):
        return 0.0
    return float(np.max(np.abs(F[free]) / problem.mesh.lumped_mass[free]))
