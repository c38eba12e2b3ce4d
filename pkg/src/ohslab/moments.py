"""Moments of the size distribution and the inequality/identity diagnostics.

The r-th moment of a state is the midpoint quadrature

    M^r = sum_i xbar_i**r * xi_i * dx_i,

and the truncated moment M_m^r restricts the sum to cells with xbar_i >= m.
On top of these the module checks, against simulated states:

* the Hoelder interpolation bound (M^r)^(sigma+1) * (M^1)^(-sigma) <= M^(r+beta-1)
  with sigma = (beta - 1)/(r - 1), which holds for every nonnegative density;
* the moment evolution identity dM^r/dt = sum of (r*nu*mu^(r-1) - nu^r) * Lambda
  over ordered pairs nu < mu, whose integrand is nonnegative for r >= 2;
* the weak-form identity with Lipschitz capped test functions, using
  varpi1(mu, nu) = nu * varpi'(mu) - varpi(nu).

Relative residuals divide by max(|lhs|, |rhs|) floored at ``EPS_FLOOR``; the
weak-form residual additionally floors the denominator at a small fraction of
the gross (unsigned) quadrature mass so that roundoff-level cancellations of
two near-zero sides do not read as order-one residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateStateError,
    InsufficientRecordsError,
    InvalidInputError,
)

#: Absolute floor in relative residuals (avoids 0/0 on empty states).
EPS_FLOOR = 1e-30

#: Fraction of the gross quadrature magnitude used as a roundoff guard in the
#: weak-form residual denominator.
GROSS_GUARD = 1e-6

HOLDER_TOL = 1e-12


def moment(state, r):
    """r-th moment of the state; for r = 1 identical to the bookkept mass."""
    if r == 1:
        return state.domain_mass()
    g = state.grid
    return float(np.sum(g.midpoints**r * state.xi * g.widths))


def truncated_moment(state, r, m):
    """Moment restricted to cells with midpoint >= m."""
    g = state.grid
    keep = g.midpoints >= m
    if not keep.any():
        return 0.0
    return float(np.sum(g.midpoints[keep] ** r * state.xi[keep] * g.widths[keep]))


@dataclass
class MomentRecord:
    t: float
    moments: dict
    tails: dict
    gel_mass: float
    clamped_mass: float


@dataclass
class MomentSeries:
    """Time-indexed moment records of one run.

    ``tails`` holds the first-moment tail M_m^1 for each configured
    threshold m (the quantity the tail diagnostics consume).
    """

    orders: tuple
    thresholds: tuple
    records: list = field(default_factory=list)

    def append_state(self, state):
        self.records.append(
            MomentRecord(
                t=state.t,
                moments={r: moment(state, r) for r in self.orders},
                tails={m: truncated_moment(state, 1, m) for m in self.thresholds},
                gel_mass=state.gel_mass,
                clamped_mass=state.clamped_mass,
            )
        )

    def times(self):
        return np.array([rec.t for rec in self.records])

    def values(self, r):
        return np.array([rec.moments[r] for rec in self.records])

    def tail(self, m):
        return np.array([rec.tails[m] for rec in self.records])

    def gel(self):
        return np.array([rec.gel_mass for rec in self.records])

    def clamped(self):
        return np.array([rec.clamped_mass for rec in self.records])

    def rho0(self):
        """Initial total mass (domain plus gel at the first record)."""
        first = self.records[0]
        return first.moments[1.0] + first.gel_mass

    def validate(self):
        t = self.times()
        if t.size and not np.all(np.diff(t) > 0):
            raise InvalidInputError("record times must be strictly increasing")
        for rec in self.records:
            vals = list(rec.moments.values()) + list(rec.tails.values())
            arr = np.asarray(vals + [rec.gel_mass, rec.clamped_mass])
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InvalidInputError("moment records must be finite and >= 0")
        return self


class HolderResult(NamedTuple):
    lhs: float
    rhs: float
    satisfied: bool


def holder_check(state, r, beta):
    """Evaluate the interpolation inequality between M^1, M^r and M^(r+beta-1).

    With sigma = (beta-1)/(r-1) the bound reads
    (M^r)^(sigma+1) * (M^1)^(-sigma) <= M^(r+beta-1); equality holds exactly
    for a monodisperse (single occupied cell) state.
    """
    if r < 2:
        raise InvalidInputError("holder check needs r >= 2")
    if beta <= 1:
        raise InvalidInputError("holder check needs beta > 1")
    m1 = moment(state, 1)
    if m1 <= 0:
        raise DegenerateStateError("holder check needs positive mass")
    sigma = (beta - 1.0) / (r - 1.0)
    lhs = moment(state, r) ** (sigma + 1.0) * m1 ** (-sigma)
    rhs = moment(state, r + beta - 1.0)
    return HolderResult(lhs=lhs, rhs=rhs, satisfied=lhs <= rhs * (1.0 + HOLDER_TOL))


def kernel_matrix(grid, kernel):
    """Kernel values at all midpoint pairs (shared by the pair quadratures)."""
    mid = grid.midpoints
    return np.asarray(kernel.eval(mid[:, None], mid[None, :]), dtype=float)


def _omega_matrix(grid, K, r):
    mid = grid.midpoints
    omega = r * mid[:, None] ** (r - 1.0) * mid[None, :] - mid[None, :] ** r
    return np.tril(omega * K, k=-1)


def moment_rhs(state, kernel, r):
    """Quadrature of the moment-evolution integrand over ordered pairs nu < mu.

    Every term (r*nu*mu^(r-1) - nu^r) with nu < mu and r >= 2 is nonnegative,
    so the result is nonnegative by construction (diagonal pairs are excluded
    to match the open inner integration range).
    """
    if r < 2:
        raise InvalidInputError("moment evolution quadrature needs r >= 2")
    g = state.grid
    terms = _omega_matrix(g, kernel_matrix(g, kernel), r)
    w = state.xi * g.widths
    return float(w @ (terms @ w))


class CappedIdentity:
    """Lipschitz test function min(mu, lam); derivative 1 below the cap."""

    def __init__(self, lam):
        if not (np.isfinite(lam) and lam > 0):
            raise InvalidInputError("cap must be positive")
        self.lam = float(lam)

    def value(self, mu):
        return np.minimum(np.asarray(mu, dtype=float), self.lam)

    def deriv(self, mu):
        return np.where(np.asarray(mu, dtype=float) < self.lam, 1.0, 0.0)

    def varpi1(self, mu, nu):
        return np.asarray(nu, dtype=float) * self.deriv(mu) - self.value(nu)


class CappedPower:
    """C^1 capped power: mu**r below lam - w, cubic blend to a constant on
    [lam - w, lam], constant beyond.

    The blend keeps value and slope continuous at lam - w and brings the slope
    to zero at lam, so varpi' is compactly supported on [0, lam].
    """

    def __init__(self, r, lam, blend_width=None):
        if not (np.isfinite(lam) and lam > 0):
            raise InvalidInputError("cap must be positive")
        if r < 1:
            raise InvalidInputError("capped power needs r >= 1")
        self.r = float(r)
        self.lam = float(lam)
        self.w = float(blend_width) if blend_width is not None else self.lam / 10.0
        if not 0 < self.w <= self.lam:
            raise InvalidInputError("blend width must lie in (0, lam]")
        x0 = self.lam - self.w
        self._x0 = x0
        self._f0 = x0**self.r
        self._f1 = self.r * x0 ** (self.r - 1.0)
        # cubic f0 + b*(s - s^2 + s^3/3), b = w*f1: slope f1*(1-s)^2, plateau f0 + b/3
        self._b = self.w * self._f1
        self._plateau = self._f0 + self._b / 3.0

    def value(self, mu):
        mu = np.asarray(mu, dtype=float)
        s = np.clip((mu - self._x0) / self.w, 0.0, 1.0)
        blend = self._f0 + self._b * (s - s**2 + s**3 / 3.0)
        return np.where(mu <= self._x0, mu**self.r, np.where(mu >= self.lam, self._plateau, blend))

    def deriv(self, mu):
        mu = np.asarray(mu, dtype=float)
        s = np.clip((mu - self._x0) / self.w, 0.0, 1.0)
        blend = self._f1 * (1.0 - s) ** 2
        return np.where(
            mu <= self._x0, self.r * mu ** (self.r - 1.0),
            np.where(mu >= self.lam, 0.0, blend),
        )

    def varpi1(self, mu, nu):
        return np.asarray(nu, dtype=float) * self.deriv(mu) - self.value(nu)


def _record_index(run, t):
    times = run.series.times()
    if times.size == 0:
        raise InsufficientRecordsError("run has no records")
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise InvalidInputError("time %g does not match any record time" % t)
    return idx


def _weak_matrix(grid, K, test):
    mid = grid.midpoints
    return np.tril(test.varpi1(mid[:, None], mid[None, :]) * K, k=-1)


def weak_rhs_quadrature(run, test, t):
    """Time-integrated pair quadrature of the weak form up to the record at t.

    Per record the sum of varpi1 * Lambda * xi * xi * dx * dx over pairs
    nu < mu, integrated in time with the trapezoid rule over the recorded
    cadence.  Returns (value, gross) where gross is the corresponding
    integral of unsigned terms, used to scale roundoff guards.
    """
    if run.states is None:
        raise InvalidInputError("run was recorded without state snapshots")
    idx = _record_index(run, t)
    times = run.series.times()[: idx + 1]
    if idx == 0:
        return 0.0, 0.0
    grid = run.states[0].grid
    terms = _weak_matrix(grid, kernel_matrix(grid, run.config.kernel), test)
    terms_abs = np.abs(terms)
    sums = np.empty(idx + 1)
    gross = np.empty(idx + 1)
    for k in range(idx + 1):
        w = run.states[k].xi * grid.widths
        sums[k] = w @ (terms @ w)
        gross[k] = w @ (terms_abs @ w)
    return float(np.trapezoid(sums, times)), float(np.trapezoid(gross, times))


def weak_form_residual(run, test, t):
    """Relative mismatch of the two sides of the weak identity at a record time.

    Left side: integral of varpi against xi(t) - xi(0).  Right side: the
    time-integrated pair quadrature.  The denominator is the larger side,
    floored at ``GROSS_GUARD`` times the gross quadrature magnitude and at
    ``EPS_FLOOR`` absolutely.  As with the moment residual, mass leaving
    through the cutoff adds a boundary term the quadrature does not carry, so
    interpret the residual on runs with small gel fractions.
    """
    if run.states is None:
        raise InvalidInputError("run was recorded without state snapshots")
    idx = _record_index(run, t)
    first, at_t = run.states[0], run.states[idx]
    g = first.grid
    phi = test.value(g.midpoints)
    lhs = float(np.sum(phi * (at_t.xi - first.xi) * g.widths))
    gross_lhs = float(np.sum(np.abs(phi) * (np.abs(at_t.xi) + np.abs(first.xi)) * g.widths))
    rhs, gross_rhs = weak_rhs_quadrature(run, test, t)
    denom = max(abs(lhs), abs(rhs), GROSS_GUARD * max(gross_lhs, gross_rhs), EPS_FLOOR)
    return abs(lhs - rhs) / denom


def moment_residual(run, r):
    """Max relative defect of the recorded M^r evolution against its quadrature.

    Uses a centered difference of M^r over uniformly spaced records and the
    pair quadrature at each interior record; requires at least 3 records.
    Once mass crosses the cutoff the identity acquires a boundary-flux term
    that the pair quadrature does not carry, so the residual is a
    discretization diagnostic only while the gel fraction stays small.
    """
    if run.states is None:
        raise InvalidInputError("run was recorded without state snapshots")
    times = run.series.times()
    if times.size < 3:
        raise InsufficientRecordsError("moment residual needs at least 3 records")
    steps = np.diff(times)
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * steps.mean():
        raise InvalidInputError("moment residual needs records at uniform cadence")
    if r < 2:
        raise InvalidInputError("moment evolution quadrature needs r >= 2")
    grid = run.states[0].grid
    terms = _omega_matrix(grid, kernel_matrix(grid, run.config.kernel), r)
    mr = np.array([moment(s, r) for s in run.states])
    worst = 0.0
    for k in range(1, times.size - 1):
        rate = (mr[k + 1] - mr[k - 1]) / (times[k + 1] - times[k - 1])
        w = run.states[k].xi * grid.widths
        rhs = float(w @ (terms @ w))
        worst = max(worst, abs(rate - rhs) / max(abs(rhs), EPS_FLOOR))
    return worst


def pth_root_diagnostic(state, orders):
    """The sequence (p, (M^p)^(1/p)) for the given orders (all >= 1).

    On a truncated domain each entry is bounded by R * (M^0)^(1/p), so the
    sequence is trapped below the cutoff as p grows; unbounded growth is only
    attainable in the R -> infinity limit, which the cutoff sweep documents.
    """
    out = []
    for p in orders:
        if p < 1:
            raise InvalidInputError("pth-root diagnostic needs orders >= 1")
        out.append((p, moment(state, p) ** (1.0 / p)))
    return out
