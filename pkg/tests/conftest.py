import numpy as np
import pytest

from shallowice import (
    ConstantForcing,
    StepProblem,
    build_mesh,
    make_params,
)


@pytest.fixture
def mesh3():
    return build_mesh(3, 3, 1.0, 1.0)


@pytest.fixture
def mesh5():
    return build_mesh(5, 5, 1.0, 1.0)


@pytest.fixture
def mesh9():
    return build_mesh(9, 9, 1.0, 1.0)


def zero_boundary(mesh, values):
    out = np.asarray(values, dtype=float).copy()
    out[mesh.boundary_mask] = 0.0
    return out


def random_state(mesh, rng, lo=0.1, hi=2.0, signed=True):
    """Random zero-boundary field bounded away from 0 on the interior."""
    mag = rng.uniform(lo, hi, mesh.n_nodes)
    if signed:
        mag *= rng.choice([-1.0, 1.0], mesh.n_nodes)
    return zero_boundary(mesh, mag)


def make_problem(mesh, p=3.0, mu=1.0, ell=0.5, kappa=1e-2, delta=1e-8,
                 eps=1e-10, u_prev=None, a_bar=None, seed=None):
    rng = np.random.default_rng(0 if seed is None else seed)
    if u_prev is None:
        u_prev = zero_boundary(mesh, rng.uniform(0.0, 2.0, mesh.n_nodes))
    if a_bar is None:
        a_bar = rng.uniform(-2.0, 2.0, mesh.n_nodes)
    params = make_params(mesh, p, ConstantForcing(0.0), u0=u_prev, mu=mu)
    return StepProblem(mesh=mesh, params=params, u_prev=u_prev, a_bar=a_bar,
                       ell=ell, kappa=kappa, delta=delta, eps=eps)
