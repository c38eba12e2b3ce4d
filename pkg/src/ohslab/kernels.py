"""Coagulation rate kernels and their certification against growth bounds.

A kernel Lambda(mu, nu) is the symmetric, nonnegative rate at which particles
of sizes mu and nu merge.  Four families are provided:

``ConstantKernel``
    Lambda = value.  The classical case with a known explicit solution
    (Bagland 2005), used as the accuracy oracle.
``PowerSumKernel``
    Lambda = theta1 * (mu**beta + nu**beta).
``MassConservingKernel``
    Lambda = theta1 * (mu**beta + nu**beta) + Psi(mu, nu) with a symmetric
    perturbation 0 <= Psi <= K * (mu + nu).  Psi is restricted to named
    built-ins so the bound stays checkable.
``ProductKernel``
    Lambda = (mu * nu)**exponent.  Included for comparison experiments only;
    it lies outside the mass-conserving family above.

``certify_hypothesis_A`` samples the sandwich

    theta1 * (mu**beta + nu**beta) <= Lambda(mu, nu)
                                   <= theta2 * (1 + mu)**gamma * (1 + nu)**gamma

on a lattice of positive size pairs and reports every violation.  The bound
is a for-all statement; sampling on a configurable log-spaced lattice is the
uniform machinery used here (closed-form verification would be
kernel-specific).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationOverflowError, InvalidInputError

#: Default certification lattice: 64 x 64 log-spaced points per axis.
DEFAULT_LATTICE_BOUNDS = (1e-3, 1e3)
DEFAULT_LATTICE_SIZE = 64

#: Relative tolerance used when comparing sampled bounds (covers roundoff in
#: algebraically equal expressions, e.g. the power-sum lower-bound equality).
CERTIFY_RTOL = 1e-12


def _finalize(mu, nu, raw):
    """Broadcast, check finiteness, and unwrap 0-d results to float."""
    out = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationOverflowError(
            "kernel evaluation overflowed (max inputs mu=%s nu=%s)"
            % (np.max(mu), np.max(nu))
        )
    if out.ndim == 0:
        return float(out)
    return out


class Kernel:
    """Base class for coagulation rates; subclasses define the formula.

    Instances are immutable after construction and evaluation is pure, so a
    kernel can be shared freely between concurrent workers.
    """

    kind = "abstract"

    def eval(self, mu, nu):
        """Return Lambda(mu, nu); symmetric in its arguments.

        ``mu`` and ``nu`` are positive sizes (scalars or broadcastable
        arrays).  Raises ``EvaluationOverflowError`` on non-finite results.
        """
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    value: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0):
            raise InvalidInputError("constant kernel value must be finite and >= 0")

    def eval(self, mu, nu):
        raw = np.broadcast_to(
            self.value, np.broadcast_shapes(np.shape(mu), np.shape(nu))
        ).copy()
        return _finalize(mu, nu, raw)

    def to_config(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class PowerSumKernel(Kernel):
    theta1: float = 1.0
    beta: float = 1.5
    kind = "power_sum"

    def __post_init__(self):
        if not (np.isfinite(self.theta1) and self.theta1 > 0):
            raise InvalidInputError("power-sum kernel needs theta1 > 0")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise InvalidInputError("power-sum kernel needs beta > 0")

    def eval(self, mu, nu):
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        with np.errstate(over="ignore"):
            raw = self.theta1 * (mu**self.beta + nu**self.beta)
        return _finalize(mu, nu, raw)

    def to_config(self):
        return {"kind": "power_sum", "theta1": self.theta1, "beta": self.beta}


def _psi_zero(mu, nu, K):
    return np.zeros(np.broadcast_shapes(np.shape(mu), np.shape(nu)))


def _psi_half_sum(mu, nu, K):
    return 0.5 * K * (mu + nu)


def _psi_min(mu, nu, K):
    return K * np.minimum(mu, nu)


#: Named symmetric perturbations, each satisfying 0 <= Psi <= K*(mu + nu).
PSI_BUILTINS = {"zero": _psi_zero, "half_sum": _psi_half_sum, "min": _psi_min}


@dataclass(frozen=True)
class MassConservingKernel(Kernel):
    """Member of the family phi(mu) + phi(nu) + Psi with phi(mu) = theta1*mu**beta.

    This is the unbounded-kernel class for which the continuous model formally
    conserves mass, making it the natural stress case for the discrete
    bookkeeping identity.
    """

    theta1: float = 1.0
    beta: float = 2.0
    psi: str = "zero"
    K: float = 1.0
    kind = "mass_conserving"

    def __post_init__(self):
        if not (np.isfinite(self.theta1) and self.theta1 > 0):
            raise InvalidInputError("mass-conserving kernel needs theta1 > 0")
        if not (np.isfinite(self.beta) and self.beta > 1):
            raise InvalidInputError("mass-conserving kernel needs beta > 1")
        if self.psi not in PSI_BUILTINS:
            raise InvalidInputError(
                "unknown psi %r (choose from %s)" % (self.psi, sorted(PSI_BUILTINS))
            )
        if not (np.isfinite(self.K) and self.K > 0):
            raise InvalidInputError("mass-conserving kernel needs K > 0")

    def eval(self, mu, nu):
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        with np.errstate(over="ignore"):
            raw = self.theta1 * (mu**self.beta + nu**self.beta)
            raw = raw + PSI_BUILTINS[self.psi](mu, nu, self.K)
        return _finalize(mu, nu, raw)

    def to_config(self):
        return {
            "kind": "mass_conserving",
            "theta1": self.theta1,
            "beta": self.beta,
            "psi": self.psi,
            "K": self.K,
        }


@dataclass(frozen=True)
class ProductKernel(Kernel):
    exponent: float = 1.0
    kind = "product"

    def __post_init__(self):
        if not np.isfinite(self.exponent):
            raise InvalidInputError("product kernel exponent must be finite")

    def eval(self, mu, nu):
        mu = np.asarray(mu, dtype=float)
        nu = np.asarray(nu, dtype=float)
        with np.errstate(over="ignore"):
            raw = (mu * nu) ** self.exponent
        return _finalize(mu, nu, raw)

    def to_config(self):
        return {"kind": "product", "exponent": self.exponent}


def is_mass_conserving_family(kernel):
    """True iff the kernel belongs to the mass-conserving family.

    A power-sum kernel satisfies the same growth sandwich but is tagged
    separately; the family membership is a structural property, not a bound.
    """
    return isinstance(kernel, MassConservingKernel)


def growth_params(kernel):
    """Return (theta1, beta) for kernels with an explicit power lower bound.

    Returns None for kernels (constant, product) that do not carry the
    parameters; diagnostics needing theta1/beta are skipped for those.
    """
    if isinstance(kernel, (PowerSumKernel, MassConservingKernel)):
        return kernel.theta1, kernel.beta
    return None


@dataclass(frozen=True)
class CertificationParams:
    """Constants of the growth sandwich: theta1, theta2 > 0 and 1 < beta <= gamma."""

    theta1: float
    theta2: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.theta1) and self.theta1 > 0):
            raise InvalidInputError("certification needs theta1 > 0")
        if not (np.isfinite(self.theta2) and self.theta2 > 0):
            raise InvalidInputError("certification needs theta2 > 0")
        if not (np.isfinite(self.beta) and self.beta > 1):
            raise InvalidInputError("certification needs beta > 1")
        if not (np.isfinite(self.gamma) and self.gamma >= self.beta):
            raise InvalidInputError("certification needs gamma >= beta")

    def to_dict(self):
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "beta": self.beta,
            "gamma": self.gamma,
        }


@dataclass(frozen=True)
class CertViolation:
    mu: float
    nu: float
    value: float
    lower: float
    upper: float


@dataclass
class CertificationReport:
    params: CertificationParams
    n_samples: int
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "n_samples": self.n_samples,
            "passed": self.passed,
            "n_violations": len(self.violations),
            "violations": [
                {"mu": v.mu, "nu": v.nu, "value": v.value, "lower": v.lower, "upper": v.upper}
                for v in self.violations[:32]
            ],
        }


def sample_lattice(lo=DEFAULT_LATTICE_BOUNDS[0], hi=DEFAULT_LATTICE_BOUNDS[1],
                   n=DEFAULT_LATTICE_SIZE):
    """Log-spaced n x n lattice of (mu, nu) pairs over [lo, hi]^2."""
    if not (0 < lo < hi and n >= 1):
        raise InvalidInputError("lattice needs 0 < lo < hi and n >= 1")
    g = np.geomspace(lo, hi, n)
    mu, nu = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([mu.ravel(), nu.ravel()])


def certify_hypothesis_A(kernel, params, samples=None):
    """Check the growth sandwich on a lattice of positive size pairs.

    Parameters
    ----------
    kernel : Kernel
        Rate to certify.
    params : CertificationParams
        Sandwich constants (theta1, theta2, beta, gamma).
    samples : array_like of shape (m, 2), optional
        Strictly positive (mu, nu) pairs.  Defaults to the 64x64 log-spaced
        lattice over [1e-3, 1e3]^2.

    Returns
    -------
    CertificationReport
        ``report.passed`` is True iff no sampled point violates either bound
        (within ``CERTIFY_RTOL`` relative slack).
    """
    if samples is None:
        samples = sample_lattice()
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise InvalidInputError("certification sample lattice is empty")
    samples = samples.reshape(-1, 2)
    if not np.all(samples > 0):
        raise InvalidInputError("certification samples must be strictly positive")
    mu, nu = samples[:, 0], samples[:, 1]
    value = np.asarray(kernel.eval(mu, nu), dtype=float)
    lower = params.theta1 * (mu**params.beta + nu**params.beta)
    upper = params.theta2 * (1.0 + mu) ** params.gamma * (1.0 + nu) ** params.gamma
    bad = (lower > value * (1.0 + CERTIFY_RTOL)) | (value > upper * (1.0 + CERTIFY_RTOL))
    report = CertificationReport(params=params, n_samples=len(samples))
    for k in np.flatnonzero(bad):
        report.violations.append(
            CertViolation(
                mu=float(mu[k]), nu=float(nu[k]), value=float(value[k]),
                lower=float(lower[k]), upper=float(upper[k]),
            )
        )
    return report


_KERNEL_KINDS = {
    "constant": ConstantKernel,
    "power_sum": PowerSumKernel,
    "mass_conserving": MassConservingKernel,
    "product": ProductKernel,
}


def kernel_from_config(cfg):
    """Build a kernel from its config mapping, e.g. {"kind": "power_sum", ...}."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise InvalidInputError("kernel config must be a mapping with a 'kind' key")
    kind = cfg["kind"]
    if kind not in _KERNEL_KINDS:
        raise InvalidInputError(
            "unknown kernel kind %r (choose from %s)" % (kind, sorted(_KERNEL_KINDS))
        )
    kwargs = {k: v for k, v in cfg.items() if k != "kind"}
    try:
        return _KERNEL_KINDS[kind](**kwargs)
    except TypeError as exc:
        raise InvalidInputError("bad kernel config %r: %s" % (cfg, exc)) from exc
