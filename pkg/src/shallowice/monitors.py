"""Runtime monitors: discrete a priori bounds, stability checks, penalty limit.

Discrete norms used throughout:

    ||v||_Lq^q   = sum_i m_i |v_i|^q            (lumped nodal quadrature)
    ||v||_W1p^p  = sum_T |T| |grad v_T|^p       (gradient seminorm; a norm on
                                                 zero-boundary fields)

The monitored quantities are uniformly bounded in the step count and the
penalty parameter for a stable run, so refining the march or shrinking the
penalty should leave them nearly unchanged; the kappa sweep tracks the
vanishing of the negative part as the penalty tightens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import StructuredMesh, triangle_gradients
from .physics import neg_part, signed_power
from .timestep import MarchError, SolverConfig, TimeGrid, Trajectory, average_forcing, run

__all__ = [
    "MonitorRecord",
    "lq_norm",
    "w1p_seminorm_pow",
    "compute_monitors",
    "check_sc1",
    "check_sc1_prime",
    "vi_residual",
    "SweepRow",
    "SweepResult",
    "kappa_sweep",
]

SC1_PRIME_TOL = 1e-12


def lq_norm(mesh: StructuredMesh, v: np.ndarray, q: float) -> float:
    """Lumped Lq norm (sum_i m_i |v_i|^q)^(1/q)."""
    return float((mesh.lumped_mass @ np.abs(v) ** q) ** (1.0 / q))


def w1p_seminorm_pow(mesh: StructuredMesh, v: np.ndarray, p: float) -> float:
    """p-th power of the gradient seminorm, sum_T |T| |grad v_T|^p."""
    g = triangle_gradients(mesh, v)
    mag = np.sqrt(np.einsum("td,td->t", g, g))
    return float(mesh.areas @ mag**p)


@dataclass
class MonitorRecord:
    """Discrete analogs of the a priori bounds plus stability-check values.

    est1    max_n ||u^n||_La
    est2    ell * sum_n ||u^n||_W1p^p
    est3    ell * sum_n ||(w^(n+1) - w^n)/ell||_L2^2,  w = |u|^((a-2)/2) u
    est3_1  max_n ||w^n||_L2
    est4    max_n ||u^n||_W1p
    est5_1  max_n || |u^n|^(a-2) u^n ||_La'
    pen_sum (ell/kappa) * sum_{n>=1} ||{u^n}^-||_L2^2
    sc1_value        (1/kappa) sum_n sum_i m_i {u^(n+1)_i}^- (u^(n+1)_i - u^n_i)
    sc1_prime_ok     nodewise monotone growth of the negative part
    sc2_prime_value  max_n ||{u^n}^-||_L2 / kappa
    neg_norm         ||{u}^-||_{L2(0,T;L2)} of the piecewise-constant interpolant
    """

    est1: float
    est2: float
    est3: float
    est3_1: float
    est4: float
    est5_1: float
    pen_sum: float
    sc1_value: float
    sc1_prime_ok: bool
    sc2_prime_value: float
    neg_norm: float

    FIELDS = (
        "est1", "est2", "est3", "est3_1", "est4", "est5_1",
        "pen_sum", "sc1_value", "sc1_prime_ok", "sc2_prime_value", "neg_norm",
    )

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def check_sc1(traj: Trajectory, kappa: float) -> float:
    """Stability sum (1/kappa) sum_n sum_i m_i {u^(n+1)_i}^- (u^(n+1)_i - u^n_i)."""
    m = traj.mesh.lumped_mass
    total = 0.0
    for n in range(traj.N):
        un, un1 = traj.states[n], traj.states[n + 1]
        total += float(m @ (neg_part(un1) * (un1 - un)))
    return total / kappa


def check_sc1_prime(traj: Trajectory, tol: float = SC1_PRIME_TOL):
    """Nodewise check that the negative part never shrinks between steps.

    A true flag is the computable signature of a monotonically deepening
    constraint violation (nothing that has gone below the obstacle comes
    back up).  Returns (flag, first violating step index or None).
    """
    prev = neg_part(traj.states[0])
    for n in range(traj.N):
        cur = neg_part(traj.states[n + 1])
        if np.any(cur < prev - tol):
            return False, n
        prev = cur
    return True, None


def compute_monitors(traj: Trajectory, kappa: float) -> MonitorRecord:
    """Evaluate every monitored quantity on a finished trajectory."""
    mesh = traj.mesh
    alpha = traj.params.alpha
    p = traj.params.p
    ell = traj.time_grid.ell
    m = mesh.lumped_mass
    alpha_conj = alpha / (alpha - 1.0)

    la_pows = np.array([float(m @ np.abs(u) ** alpha) for u in traj.states])
    w1p_pows = np.array([w1p_seminorm_pow(mesh, u, p) for u in traj.states])
    half_pow = [signed_power(u, 0.5 * alpha) for u in traj.states]

    est1 = float(np.max(la_pows) ** (1.0 / alpha))
    est2 = float(ell * np.sum(w1p_pows))
    est3 = float(
        ell * sum(
            float(m @ ((half_pow[n + 1] - half_pow[n]) / ell) ** 2)
            for n in range(traj.N)
        )
    )
    est3_1 = float(np.sqrt(max(float(m @ w**2) for w in half_pow)))
    est4 = float(np.max(w1p_pows) ** (1.0 / p))
    est5_1 = max(
        lq_norm(mesh, signed_power(u, alpha - 1.0), alpha_conj) for u in traj.states
    )

    neg_sq = np.array([float(m @ neg_part(u) ** 2) for u in traj.states])
    pen_sum = float(ell / kappa * np.sum(neg_sq[1:]))
    neg_norm = float(np.sqrt(ell * np.sum(neg_sq[1:])))
    sc2_prime_value = float(np.sqrt(np.max(neg_sq)) / kappa)
    sc1_value = check_sc1(traj, kappa)
    sc1_prime_ok, _ = check_sc1_prime(traj)

    return MonitorRecord(
        est1=est1, est2=est2, est3=est3, est3_1=est3_1, est4=est4,
        est5_1=est5_1, pen_sum=pen_sum, sc1_value=sc1_value,
        sc1_prime_ok=bool(sc1_prime_ok), sc2_prime_value=sc2_prime_value,
        neg_norm=neg_norm,
    )


def _as_time_samples(traj: Trajectory, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n_nodes = traj.mesh.n_nodes
    if v.ndim == 1:
        if v.shape != (n_nodes,):
            raise ValueError(f"test field must have {n_nodes} nodal values")
        return np.broadcast_to(v, (traj.N, n_nodes))
    if v.shape != (traj.N, n_nodes):
        raise ValueError(
            f"time-sampled test field must have shape ({traj.N}, {n_nodes})"
        )
    return v


def vi_residual(traj: Trajectory, test_family) -> float:
    """Residual of the limiting variational inequality over a test family.

    For each admissible test field v (nonnegative, zero boundary, sampled
    once per slab) the evaluation is LHS - RHS of

        sum_n sum_i m_i (phi(u^(n+1)_i) - phi(u^n_i)) v^n_i
          + ell sum_n int mu |grad u^(n+1)|^(p-2) grad u^(n+1) . grad(v^n - u^(n+1))
        >=  ell sum_n sum_i m_i abar^n_i (v^n_i - u^(n+1)_i)
          + (||u^N||_La^a - ||u^0||_La^a) / a',

    with the time pairing realized as the telescoping sum of step increments
    of the power transform.  The gradient factor keeps the same delta
    regularization the trajectory was computed with.  Returns the minimum
    over the family; a value above -tol certifies the discrete inequality.
    """
    mesh = traj.mesh
    params = traj.params
    alpha = params.alpha
    p = params.p
    ell = traj.time_grid.ell
    m = mesh.lumped_mass
    alpha_conj = alpha / (alpha - 1.0)

    samples = []
    for v in test_family:
        vv = _as_time_samples(traj, v)
        if np.min(vv) < 0.0:
            raise ValueError("test fields must be nonnegative")
        if np.any(vv[:, mesh.boundary_mask] != 0.0):
            raise ValueError("test fields must vanish on the boundary")
        samples.append(vv)

    phi_states = [signed_power(u, alpha - 1.0) for u in traj.states]
    grads = [triangle_gradients(mesh, u) for u in traj.states]
    fluxes = []
    for g in grads[1:]:
        q = np.einsum("td,td->t", g, g) + traj.delta**2
        fluxes.append((mesh.areas * params.mu * q ** (0.5 * (p - 2.0)))[:, None] * g)
    a_bars = [
        average_forcing(params.forcing, n, traj.time_grid, mesh) for n in range(traj.N)
    ]
    la0 = float(m @ np.abs(traj.states[0]) ** alpha)
    laN = float(m @ np.abs(traj.states[-1]) ** alpha)
    terminal = (laN - la0) / alpha_conj

    best = np.inf
    for vv in samples:
        total = -terminal
        for n in range(traj.N):
            u_next = traj.states[n + 1]
            diff = vv[n] - u_next
            total += float(m @ ((phi_states[n + 1] - phi_states[n]) * vv[n]))
            gdiff = triangle_gradients(mesh, diff)
            total += ell * float(np.einsum("td,td->", fluxes[n], gdiff))
            total -= ell * float(m @ (a_bars[n] * diff))
        best = min(best, total)
    return float(best)


@dataclass
class SweepRow:
    """One penalty value of a sweep; error is set when the run failed."""

    kappa: float
    record: MonitorRecord | None
    neg_norm: float
    sc2_proxy: float
    dist_final: float | None
    trajectory: Trajectory | None
    error: str | None = None


@dataclass
class SweepResult:
    rows: list
    monotone_ok: bool

    def table(self) -> list[dict]:
        out = []
        for row in self.rows:
            entry = {
                "kappa": row.kappa,
                "neg_norm": row.neg_norm,
                "neg_norm_over_kappa": row.sc2_proxy,
                "dist_final": row.dist_final,
                "error": row.error,
            }
            if row.record is not None:
                entry.update(row.record.as_dict())
            out.append(entry)
        return out


def kappa_sweep(
    mesh: StructuredMesh,
    params,
    time_grid: TimeGrid,
    solver_config: SolverConfig | None,
    kappa_list,
    *,
    delta: float = 1e-8,
    eps: float = 1e-10,
    keep_trajectories: bool = True,
    monotone_slack: float = 0.05,
) -> SweepResult:
    """Integrate the same configuration for a decreasing list of penalties.

    Each row reports the negative-part norm, its ratio to kappa (the
    computable proxy for the penalty-scaled dual bound), the full monitor
    record, and the max-norm distance between final states of consecutive
    rows.  Run failures are recorded per row and the sweep continues.
    monotone_ok states whether neg_norm was nonincreasing within the slack.
    """
    kappas = [float(k) for k in kappa_list]
    if any(k <= 0 for k in kappas):
        raise ValueError("penalty values must be positive")
    if any(b >= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("penalty values must be strictly decreasing")

    rows: list[SweepRow] = []
    prev_final = None
    for kappa in kappas:
        try:
            traj = run(
                mesh, params, time_grid, kappa, solver_config,
                delta=delta, eps=eps,
            )
        except MarchError as err:
            rows.append(SweepRow(
                kappa=kappa, record=None, neg_norm=np.nan, sc2_proxy=np.nan,
                dist_final=None, trajectory=None, error=str(err),
            ))
            continue
        record = compute_monitors(traj, kappa)
        final = traj.states[-1]
        dist = None if prev_final is None else float(np.max(np.abs(final - prev_final)))
        prev_final = final
        rows.append(SweepRow(
            kappa=kappa,
            record=record,
            neg_norm=record.neg_norm,
            sc2_proxy=record.neg_norm / kappa,
            dist_final=dist,
            trajectory=traj if keep_trajectories else None,
        ))

    ok = True
    norms = [r.neg_norm for r in rows if r.error is None]
    for a, b in zip(norms, norms[1:]):
        if b > a * (1.0 + monotone_slack):
            ok = False
    return SweepResult(rows=rows, monotone_ok=ok)
