"""Implicit time march and the piecewise-constant trajectory interpolant."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .mesh import StructuredMesh
from .operators import StepProblem
from .physics import PhysicalParams
from .solver import SolverConfig, SolverError, StepResult, solve_step

__all__ = [
    "TimeGrid",
    "Trajectory",
    "MarchError",
    "average_forcing",
    "run",
    "interpolant_value",
    "difference_quotient",
]

VERSION = "0.1.0"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into N implicit steps; ell is derived."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"step count N must be an integer >= 1, got {self.N}")

    @property
    def ell(self) -> float:
        return self.T / self.N

    def slab(self, n: int) -> tuple[float, float]:
        """Endpoints (n ell, (n+1) ell) of slab n."""
        if not 0 <= n < self.N:
            raise IndexError(f"slab index {n} out of range [0, {self.N})")
        return n * self.ell, (n + 1) * self.ell


@dataclass
class Trajectory:
    """States u^0..u^N of one run plus everything needed to re-derive them.

    states[0] is the initial field; every state vanishes on the boundary.
    run_metadata is a plain serializable dict with the resolved settings.
    """

    states: list
    step_diagnostics: list
    time_grid: TimeGrid
    mesh: StructuredMesh
    params: PhysicalParams
    kappa: float
    delta: float
    eps: float
    solver_config: SolverConfig
    run_metadata: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.states) - 1


class MarchError(RuntimeError):
    """A step solve failed; carries the step index and the partial trajectory."""

    def __init__(self, step_index: int, partial: Trajectory, cause: Exception):
        super().__init__(f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.partial = partial
        self.cause = cause


def average_forcing(forcing, n: int, time_grid: TimeGrid, mesh: StructuredMesh) -> np.ndarray:
    """Nodal values of the forcing averaged over time slab n."""
    t0, t1 = time_grid.slab(n)
    return np.asarray(forcing.slab_average(mesh, t0, t1), dtype=float)


def _metadata(mesh, params, time_grid, kappa, delta, eps, cfg) -> dict:
    return {
        "version": VERSION,
        "domain": {"nx": mesh.nx, "ny": mesh.ny, "Lx": mesh.Lx, "Ly": mesh.Ly},
        "time": {"T": time_grid.T, "N": time_grid.N, "ell": time_grid.ell},
        "physics": {
            "p": params.p,
            "alpha": params.alpha,
            "rho_g": params.rho_g,
            "A_const": params.A_const,
            "mu1": params.mu1,
            "mu2": params.mu2,
            "mu_constant": bool(params.mu1 == params.mu2),
        },
        "penalty": {"kappa": kappa, "delta": delta, "eps": eps},
        "solver": asdict(cfg),
        "forcing": params.forcing.describe(),
        "forcing_quadrature": params.forcing.quadrature,
    }


def run(
    mesh: StructuredMesh,
    params: PhysicalParams,
    time_grid: TimeGrid,
    kappa: float,
    solver_config: SolverConfig | None = None,
    *,
    delta: float = 1e-8,
    eps: float = 1e-10,
    start_index: int = 0,
    start_state: np.ndarray | None = None,
    stop_index: int | None = None,
) -> Trajectory:
    """March the implicit scheme from u^start to u^stop.

    Defaults integrate the whole horizon from params.u0.  Each step is
    warm-started from the previous state; on a step failure a MarchError
    carrying the partial trajectory is raised.  start_index/start_state and
    stop_index exist for restart workflows and leave the slab clock on the
    global grid.
    """
    cfg = solver_config or SolverConfig()
    stop = time_grid.N if stop_index is None else int(stop_index)
    if not 0 <= start_index < stop <= time_grid.N:
        raise ValueError(f"bad step range [{start_index}, {stop}]")
    u0 = params.u0 if start_state is None else np.asarray(start_state, dtype=float)

    states = [u0.copy()]
    diags: list[StepResult] = []
    meta = _metadata(mesh, params, time_grid, kappa, delta, eps, cfg)
    meta["start_index"] = start_index
    meta["stop_index"] = stop

    for n in range(start_index, stop):
        a_bar = average_forcing(params.forcing, n, time_grid, mesh)
        problem = StepProblem(
            mesh=mesh, params=params, u_prev=states[-1], a_bar=a_bar,
            ell=time_grid.ell, kappa=kappa, delta=delta, eps=eps,
        )
        try:
            result = solve_step(problem, cfg, initial_guess=states[-1])
        except SolverError as err:
            partial = Trajectory(
                states=states, step_diagnostics=diags, time_grid=time_grid,
                mesh=mesh, params=params, kappa=kappa, delta=delta, eps=eps,
                solver_config=cfg, run_metadata=meta,
            )
            raise MarchError(n, partial, err) from err
        states.append(result.u_next)
        diags.append(result)

    return Trajectory(
        states=states, step_diagnostics=diags, time_grid=time_grid,
        mesh=mesh, params=params, kappa=kappa, delta=delta, eps=eps,
        solver_config=cfg, run_metadata=meta,
    )


def interpolant_value(traj: Trajectory, t: float) -> np.ndarray:
    """State of the piecewise-constant interpolant at time t.

    Slabs are half-open on the left: the value on (n ell, (n+1) ell] is
    u^(n+1), so t = ell returns u^1 and any t just above ell returns u^2.
    """
    grid = traj.time_grid
    if not 0.0 < t <= grid.T:
        raise ValueError(f"t must lie in (0, {grid.T}], got {t}")
    idx = max(1, math.ceil(t / grid.ell))
    idx = min(idx, traj.N)
    return traj.states[idx]


def difference_quotient(traj: Trajectory, transform, n: int) -> np.ndarray:
    """Nodal (transform(u^(n+1)) - transform(u^n)) / ell; transform None = identity."""
    if not 0 <= n <= traj.N - 1:
        raise IndexError(f"step index {n} out of range [0, {traj.N - 1}]")
    a, b = traj.states[n], traj.states[n + 1]
    if transform is not None:
        a, b = transform(a), transform(b)
    return (b - a) / traj.time_grid.ell
