"""Verification suite run by the ``check`` command against a completed run.

Each check reports pass/fail/skip with details; the command exits nonzero if
any check fails.  The suite covers the discrete mass bookkeeping (also on the
stored CSV, which catches tampering), kernel certification, the Hoelder
inequality on every recorded state, the sign and evolution residual of the
higher moments, the weak-form residual with its independent brute-force
cross-check, and the blow-up bound table.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gelation, kernels, moments, oracle
from .errors import InvalidInputError

BOOKKEEPING_RTOL = 1e-10
HOLDER_PAIRS = ((2, 1.5), (2, 2.0), (3, 1.5), (3, 2.0), (5, 1.5), (5, 2.0))
SIGN_ORDERS = (2, 3, 5)
SIGN_SLACK = 1e-14
BLOWUP_ORDERS = (2, 3, 5)
BLOWUP_CONSISTENCY_RTOL = 1e-12
WEAK_AGREEMENT_RTOL = 1e-10
DEFAULT_RESIDUAL_TOL = 0.05


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skip"
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "status": self.status, "details": self.details}


@dataclass
class CheckReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.status != "fail" for c in self.checks)

    def add(self, name, ok, details=None, skip=False):
        status = "skip" if skip else ("pass" if ok else "fail")
        self.checks.append(CheckResult(name=name, status=status, details=details or {}))

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _check_bookkeeping(report, name, m1, gel):
    rho0 = m1[0] + gel[0]
    drift = np.abs(m1 + gel - rho0) / rho0
    monotone = bool(np.all(np.diff(gel) >= 0)) if gel.size > 1 else True
    ok = bool(np.max(drift) <= BOOKKEEPING_RTOL) and monotone
    report.add(name, ok, {
        "max_rel_drift": float(np.max(drift)),
        "gel_nondecreasing": monotone,
        "tolerance": BOOKKEEPING_RTOL,
    })


def _auto_certification(kernel):
    params = kernels.growth_params(kernel)
    if params is None:
        return None
    theta1, beta = params
    if beta <= 1:
        return None
    extra = getattr(kernel, "K", 0.0)
    return kernels.CertificationParams(
        theta1=theta1, theta2=2.0 * (theta1 + extra), beta=beta, gamma=beta
    )


def _check_certification(report, kernel, settings):
    cert_cfg = settings.get("certification")
    if cert_cfg:
        try:
            params = kernels.CertificationParams(
                theta1=float(cert_cfg["theta1"]),
                theta2=float(cert_cfg.get("theta2", 1.0)),
                beta=float(cert_cfg["beta"]),
                gamma=float(cert_cfg.get("gamma", cert_cfg["beta"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(
                "bad certification section %r: %s" % (cert_cfg, exc)
            ) from exc
    else:
        params = _auto_certification(kernel)
        if params is None:
            report.add("certification", True, {
                "reason": "kernel carries no growth parameters and none were configured",
            }, skip=True)
            return
    cert = kernels.certify_hypothesis_A(kernel, params)
    report.add("certification", cert.passed, cert.to_dict())


def _check_holder(report, states):
    worst = {"ratio": 0.0}
    ok = True
    for state in states:
        for r, beta in HOLDER_PAIRS:
            res = moments.holder_check(state, r, beta)
            ok = ok and res.satisfied
            ratio = res.lhs / res.rhs if res.rhs > 0 else np.inf
            if ratio > worst["ratio"]:
                worst = {"ratio": float(ratio), "t": state.t, "r": r, "beta": beta}
    report.add("holder_inequality", ok, {"pairs": list(HOLDER_PAIRS), "worst": worst})


def _check_moment_rhs_sign(report, states, kernel):
    grid = states[0].grid
    K = moments.kernel_matrix(grid, kernel)
    least = 0.0
    ok = True
    for r in SIGN_ORDERS:
        terms = moments._omega_matrix(grid, K, r)
        for state in states:
            w = state.xi * grid.widths
            value = float(w @ (terms @ w))
            scale = max(1.0, abs(value))
            ok = ok and value >= -SIGN_SLACK * scale
            least = min(least, value)
    report.add("moment_rhs_sign", ok, {"orders": list(SIGN_ORDERS), "min_value": least})


def _check_moment_residual(report, result, tol):
    try:
        residual = moments.moment_residual(result, 2)
    except InvalidInputError as exc:  # too few records, non-uniform cadence
        report.add("moment_residual", True, {"reason": str(exc)}, skip=True)
        return
    report.add("moment_residual", residual <= tol, {
        "r": 2, "residual": residual, "tolerance": tol,
    })


def _check_weak_form(report, result, tol):
    grid_R = result.config.grid.R
    test = moments.CappedIdentity(grid_R / 2.0)
    t_last = result.series.times()[-1]
    residual = moments.weak_form_residual(result, test, t_last)
    internal, gross = moments.weak_rhs_quadrature(result, test, t_last)
    brute = oracle.brute_force_weak_rhs(result.states, result.config.kernel, test)
    agree = abs(internal - brute) / max(
        abs(internal), abs(brute), moments.GROSS_GUARD * gross, moments.EPS_FLOOR
    )
    ok = residual <= tol and agree <= WEAK_AGREEMENT_RTOL
    report.add("weak_form_residual", ok, {
        "cap": grid_R / 2.0, "t": float(t_last), "residual": residual,
        "tolerance": tol, "oracle_agreement": agree,
        "agreement_tolerance": WEAK_AGREEMENT_RTOL,
    })


def _check_blowup_bounds(report, result):
    params = kernels.growth_params(result.config.kernel)
    if params is None or params[1] <= 1:
        report.add("blowup_bounds", True, {
            "reason": "kernel carries no growth parameters with beta > 1",
        }, skip=True)
        return
    theta1, beta = params
    first = result.states[0]
    rho0 = result.series.rho0()
    table = []
    ok = True
    for r in BLOWUP_ORDERS:
        value = moments.moment(first, r)
        if value <= 0:
            continue
        bound = gelation.blowup_bound(r, first.t, value, theta1, beta, rho0)
        sigma = (beta - 1.0) / (r - 1.0)
        tstar = gelation.comparison_ode_blowup(
            value, theta1 * rho0 ** (1.0 - sigma) * (r - 1.0), sigma
        )
        mismatch = abs((bound - first.t) - tstar) / tstar
        ok = ok and mismatch <= BLOWUP_CONSISTENCY_RTOL
        table.append(gelation.BoundEvaluation(
            r=float(r), delta=first.t, moment_value=value, bound=bound
        ))
    report.add("blowup_bounds", ok, {
        "table": [b.to_dict() for b in table],
        "consistency_tolerance": BLOWUP_CONSISTENCY_RTOL,
    })


def run_checks(result, stored=None, settings=None):
    """Run the full verification suite against a replayed run.

    Parameters
    ----------
    result : solver.RunResult
        Replay with captured states.
    stored : dict, optional
        Columns of a stored moments.csv; when given, bookkeeping is also
        verified against the stored numbers (detects edited artifacts).
    settings : dict, optional
        The config's "check" section: optional "certification" parameters and
        residual tolerances ("moment_residual_tol", "weak_residual_tol").
    """
    settings = settings or {}
    report = CheckReport()
    series = result.series
    _check_bookkeeping(report, "bookkeeping", series.values(1.0), series.gel())
    if stored is not None:
        if "M1" not in stored or "gel_mass" not in stored:
            raise InvalidInputError("stored moments.csv lacks the M1/gel_mass columns")
        _check_bookkeeping(report, "bookkeeping_stored_csv", stored["M1"], stored["gel_mass"])
    _check_certification(report, result.config.kernel, settings)
    _check_holder(report, result.states)
    _check_moment_rhs_sign(report, result.states, result.config.kernel)
    _check_moment_residual(report, result, float(settings.get("moment_residual_tol", DEFAULT_RESIDUAL_TOL)))
    _check_weak_form(report, result, float(settings.get("weak_residual_tol", DEFAULT_RESIDUAL_TOL)))
    _check_blowup_bounds(report, result)
    return report
