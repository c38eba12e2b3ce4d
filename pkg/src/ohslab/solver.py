"""Finite-volume time integrator with exact discrete mass bookkeeping.

The model advects particles up the size axis with the nonlocal drift

    v(mu) = integral_0^mu  nu * Lambda(mu, nu) * xi(nu) d(nu)

while larger particles absorb them at rate

    L(mu) = integral_mu^R  Lambda(mu, nu) * xi(nu) d(nu).

On a grid with midpoints xbar_i and widths dx_i the semi-discrete form is

    v_{i+1/2} = sum_{j <= i} xbar_j * Lambda(xbar_i, xbar_j) * xi_j * dx_j
    L_j       = sum_{j <= i <= N-2} (xbar_{i+1} - xbar_i) * Lambda(xbar_i, xbar_j) * xi_i
    F_{i+1/2} = v_{i+1/2} * xi_i                      (upwind, v >= 0)
    dxi_i/dt  = -(F_{i+1/2} - F_{i-1/2}) / dx_i - xi_i * L_i

with no inflow through the left boundary at size zero.  The loss weights
(xbar_{i+1} - xbar_i) are not the cell widths: they are chosen so that the
advective mass gain cancels the loss-term mass exactly under summation by
parts.  The only mass sink is then the boundary flux, accumulated as

    gel_rate = xbar_{N-1} * F_{N-1/2, right}

so domain mass plus gel mass is constant to roundoff for any explicit
Runge-Kutta combination of these right-hand sides.  Velocity and loss share
the kernel values at midpoint pairs (including the self pair j = i in the
drift and i = j in the loss), which is exactly the pairing that closes the
identity; the consistency error of either quadrature is first order.

Explicit Euler under dt <= cfl / max_i(v_{i+1/2}/dx_i + L_i) with cfl <= 1
keeps every cell nonnegative (the update is a convex combination of
nonnegative terms).  Negative cells from roundoff are clamped to zero with
the created mass logged; a run fails once the cumulative clamped mass
exceeds CLAMP_BUDGET times the initial mass, which separates roundoff from
genuine instability.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .grid import State, project_initial
from .moments import MomentSeries

logger = logging.getLogger(__name__)

#: Relative clamped-mass budget before a run is declared unstable.
CLAMP_BUDGET = 1e-8


@dataclass(eq=False)
class RhsParts:
    """Pieces of one right-hand-side evaluation (per right edge / per cell)."""

    velocity: np.ndarray
    loss: np.ndarray
    flux: np.ndarray
    boundary_outflow_rate: float


class KernelTables:
    """Quadrature matrices for one (grid, kernel) pair, built once per run.

    The kernel is evaluated only at midpoint pairs, so the matrices are
    state-independent and both rates become matrix-vector products.
    """

    def __init__(self, grid, kernel):
        mid, dx = grid.midpoints, grid.widths
        K = np.asarray(kernel.eval(mid[:, None], mid[None, :]), dtype=float)
        if not np.all(np.isfinite(K)):
            raise NumericalFailureError("kernel table is not finite on this grid")
        self.grid = grid
        self._drift = np.tril(K) * (mid * dx)[None, :]
        gaps = np.zeros_like(mid)
        gaps[:-1] = mid[1:] - mid[:-1]
        self._loss = np.triu(K * gaps[None, :])

    def velocity(self, xi):
        return self._drift @ xi

    def loss(self, xi):
        return self._loss @ xi


def _rhs(tables, xi):
    grid = tables.grid
    v = tables.velocity(xi)
    L = tables.loss(xi)
    F = v * xi
    dxi = np.empty_like(xi)
    dxi[0] = -F[0] / grid.widths[0] - xi[0] * L[0]
    dxi[1:] = -(F[1:] - F[:-1]) / grid.widths[1:] - xi[1:] * L[1:]
    if not (np.all(np.isfinite(dxi)) and np.isfinite(F[-1])):
        raise NumericalFailureError("non-finite right-hand side")
    out = float(grid.midpoints[-1] * F[-1])
    return RhsParts(velocity=v, loss=L, flux=F, boundary_outflow_rate=out), dxi


def drift_velocity(state, kernel):
    """Per-edge drift v_{i+1/2}; the left boundary carries no inflow."""
    return KernelTables(state.grid, kernel).velocity(state.xi)


def loss_rate(state, kernel):
    """Per-cell absorption rate L_j by larger particles inside the domain."""
    return KernelTables(state.grid, kernel).loss(state.xi)


def rhs(state, kernel):
    """Full right-hand side: (RhsParts, dxi/dt).

    Satisfies sum_i xbar_i * dxi_i * dx_i + boundary_outflow_rate = 0 to
    roundoff on every admissible state (summation-by-parts identity).
    """
    return _rhs(KernelTables(state.grid, kernel), state.xi)


def stable_dt(state, parts, cfl, dt_max=math.inf):
    """Positivity-preserving step bound cfl / max_i(v_{i+1/2}/dx_i + L_i).

    An empty state has no rate; the configured dt_max is returned instead.
    """
    if not (0 < cfl <= 1):
        raise InvalidInputError("cfl must lie in (0, 1]")
    rate = parts.velocity / state.grid.widths + parts.loss
    peak = float(rate.max()) if rate.size else 0.0
    if peak <= 0.0:
        return dt_max
    return min(cfl / peak, dt_max)


def _clamp(state, xi):
    grid = state.grid
    neg = xi < 0
    if not neg.any():
        return xi, 0.0
    created = -float(np.sum(grid.midpoints[neg] * xi[neg] * grid.widths[neg]))
    logger.debug("clamped %d negative cells (mass %.3e)", int(neg.sum()), created)
    return np.where(neg, 0.0, xi), created


def step(state, kernel, dt, scheme="euler", tables=None, first_stage=None):
    """Advance one explicit step; gel mass grows by the stage-combined outflow.

    ``first_stage`` may pass a precomputed (RhsParts, dxi) for the current
    state so callers that already evaluated the right-hand side (e.g. for the
    step-size bound) do not evaluate it twice.
    """
    if dt < 0 or not np.isfinite(dt):
        raise InvalidInputError("step size must be finite and >= 0")
    if tables is None:
        tables = KernelTables(state.grid, kernel)
    parts1, k1 = first_stage if first_stage is not None else _rhs(tables, state.xi)
    if scheme == "euler":
        xi_new = state.xi + dt * k1
        gel_inc = dt * parts1.boundary_outflow_rate
    elif scheme == "heun":
        predictor, _ = _clamp(state, state.xi + dt * k1)
        parts2, k2 = _rhs(tables, predictor)
        xi_new = state.xi + 0.5 * dt * (k1 + k2)
        gel_inc = 0.5 * dt * (parts1.boundary_outflow_rate + parts2.boundary_outflow_rate)
    else:
        raise InvalidInputError("unknown scheme %r" % (scheme,))
    if not np.all(np.isfinite(xi_new)):
        raise NumericalFailureError("non-finite density after step")
    xi_new, created = _clamp(state, xi_new)
    return replace(
        state,
        t=state.t + dt,
        xi=xi_new,
        gel_mass=state.gel_mass + gel_inc,
        clamped_mass=state.clamped_mass + created,
    )


@dataclass(eq=False)
class RunResult:
    """A completed (or partially completed) run and its replay data.

    ``states`` holds per-record snapshots when the run was asked to capture
    them; the diagnostics that replay the weak form and moment evolution
    consume this handle.
    """

    config: object
    series: MomentSeries
    final_state: State
    states: list = None
    failed: bool = False
    error: str = None


def _record_times(t_end, cadence):
    if t_end <= 0:
        return []
    count = int(math.floor(t_end / cadence + 1e-9))
    times = [k * cadence for k in range(1, count + 1)]
    if not times or t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(t_end)
    else:
        times[-1] = t_end
    return times


def run(config, capture_states=False):
    """Integrate a config from t = 0 to t_end with adaptive stable steps.

    Records the moment series at the configured cadence (always including
    t = 0 and t_end) and is deterministic given the config.  On numerical
    failure the partial series is returned with the failure marker set.
    """
    cfg = config.resolved()
    grid = cfg.grid.build()
    state = project_initial(grid, cfg.initial).validate()
    rho0 = state.domain_mass()
    budget = CLAMP_BUDGET * rho0
    series = MomentSeries(orders=cfg.moment_orders, thresholds=cfg.truncation_thresholds)
    states = [] if capture_states else None

    def record(st):
        series.append_state(st)
        if states is not None:
            states.append(st.copy())

    record(state)
    time_eps = 1e-12 * max(1.0, cfg.t_end)
    failed, error = False, None
    try:
        tables = KernelTables(grid, cfg.kernel)
        for t_next in _record_times(cfg.t_end, cfg.record_cadence):
            while t_next - state.t > time_eps:
                parts, k1 = _rhs(tables, state.xi)
                dt = stable_dt(state, parts, cfg.cfl, cfg.dt_max)
                dt = min(dt, t_next - state.t)
                state = step(
                    state, cfg.kernel, dt, scheme=cfg.scheme,
                    tables=tables, first_stage=(parts, k1),
                )
                if state.clamped_mass > budget:
                    raise NumericalFailureError(
                        "clamped mass %.3e exceeds budget %.3e (unstable run)"
                        % (state.clamped_mass, budget)
                    )
            state = replace(state, t=t_next)
            record(state)
    except NumericalFailureError as exc:
        logger.warning("run failed at t=%.6g: %s", state.t, exc)
        failed, error = True, str(exc)
    return RunResult(
        config=cfg, series=series, final_state=state,
        states=states, failed=failed, error=error,
    )
