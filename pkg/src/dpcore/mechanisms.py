"""Base randomized computations of the privacy layer.

Every mechanism here is the only path from an exact StatVector to anything
user-visible, and every invocation is mediated by the accountant: the charge
is granted (and written to the ledger) before any randomness is consumed, so
a denied request spends nothing, samples nothing, and fails with the uniform
budget message.

Mechanisms never see raw tables: they accept StatVectors and metadata only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accounting import PURE_EPS, ZCDP_RHO, PrivacyCharge, ScopeHandle
from .errors import ContractViolation, ParameterError, ScopeMismatchError
from .randomness import RandomSource, log_add, sample_exponential, sample_gaussian, sample_laplace
from .relational import StatVector

#: Lower limit on eps/sensitivity.  Tiny budgets mean enormous noise scales,
#: which is where floating-point "holes" appear; requests below the floor are
#: parameter errors, not silent degradations.
EPSILON_SENSITIVITY_FLOOR = 1e-3


@dataclass(frozen=True)
class MechanismResult:
    """Released values plus the ledger receipt that paid for them."""

    values: np.ndarray
    charge: PrivacyCharge
    labels: tuple[str, ...] = ()


def _check_floor(eps: float, sensitivity: float) -> None:
    if sensitivity > 0 and eps / sensitivity < EPSILON_SENSITIVITY_FLOOR:
        raise ParameterError(
            "eps/sensitivity below the 1e-3 floor; refusing to sample at this "
            "noise scale"
        )


def laplace_mechanism(
    v: StatVector,
    eps: float,
    accountant: ScopeHandle,
    rng: RandomSource,
    discretize: bool = False,
) -> MechanismResult:
    """Add Laplace(sensitivity/eps) noise per coordinate.

    Outputs are released as-is: no truncation, no clamping; negative counts
    are the postprocessing layer's business.  `discretize` optionally rounds
    the release to integers.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    _check_floor(eps, v.l1_sensitivity)
    charge = accountant.charge(eps, "laplace")
    scale = v.l1_sensitivity / eps if v.l1_sensitivity > 0 else None
    values = v.values.copy()
    if scale is not None:
        values = values + sample_laplace(rng, scale, size=len(v))
    if discretize:
        values = np.rint(values)
    return MechanismResult(values, charge, v.dimension_labels)


def gaussian_mechanism(
    v: StatVector, rho: float, accountant: ScopeHandle, rng: RandomSource
) -> MechanismResult:
    """Add N(0, sigma^2) noise per coordinate under rho-zCDP accounting.

    sigma^2 = sensitivity^2 / (2 rho); the charge is rho on a zCDP scope.
    """
    if rho <= 0:
        raise ParameterError("rho must be positive")
    if accountant.kind != ZCDP_RHO:
        raise ScopeMismatchError("gaussian_mechanism requires a zCDP scope")
    charge = accountant.charge(rho, "gaussian")
    values = v.values.copy()
    if v.l1_sensitivity > 0:
        sigma = v.l1_sensitivity / math.sqrt(2.0 * rho)
        values = values + sample_gaussian(rng, sigma, size=len(v))
    return MechanismResult(values, charge, v.dimension_labels)


def report_noisy_max(
    answers: StatVector, eps: float, accountant: ScopeHandle, rng: RandomSource
) -> int:
    """Index of the largest exponentially-noised answer; the index is all
    that is released.

    Each entry gets independent Exp(2/eps) noise (per-entry sensitivity 1);
    ties break toward the smallest index.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if len(answers) == 0:
        raise ContractViolation("report_noisy_max requires a nonempty vector")
    _check_floor(eps, 1.0)
    accountant.charge(eps, "report_noisy_max")
    noisy = answers.values + sample_exponential(rng, 2.0 / eps, size=len(answers))
    return int(np.argmax(noisy))  # argmax takes the first of equal maxima


def exponential_mechanism_log_probabilities(
    quality: np.ndarray, delta_q: float, eps: float
) -> np.ndarray:
    """Log selection probabilities eps*q_i/(2 delta_q) - log Z, via log_add.

    Exposed so audits can check the privacy ratio constraints directly on
    the weights the sampler actually uses.  Never leaves log scale.
    """
    b = eps * np.asarray(quality, dtype=np.float64) / (2.0 * delta_q)
    log_z = -math.inf
    for bi in b:
        log_z = log_add(log_z, float(bi))
    return b - log_z


def exponential_mechanism(
    candidates,
    quality,
    delta_q: float,
    eps: float,
    accountant: ScopeHandle,
    rng: RandomSource,
):
    """Sample candidate i with probability proportional to exp(eps*q_i/(2 delta_q)).

    The cumulative comparison happens entirely in log domain: normalized
    probabilities are never materialized in linear scale, so no candidate's
    weight can underflow to an exact zero.  Prefer report_noisy_max where an
    argmax release suffices; this mechanism is kept for arbitrary candidate
    sets, hardened as above.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if delta_q <= 0:
        raise ParameterError("delta_q must be positive")
    candidates = list(candidates)
    quality = np.asarray(quality, dtype=np.float64)
    if not candidates:
        raise ContractViolation("exponential_mechanism requires candidates")
    if len(candidates) != quality.shape[0]:
        raise ContractViolation("one quality score per candidate required")
    accountant.charge(eps, "exponential_mechanism")
    b = eps * quality / (2.0 * delta_q)
    log_z = -math.inf
    for bi in b:
        log_z = log_add(log_z, float(bi))
    # Inverse-CDF in log domain: find the first index whose cumulative log
    # weight reaches log(u) + log Z.
    target = math.log(rng.uniform_full()) + log_z
    cum = -math.inf
    for i, bi in enumerate(b):
        cum = log_add(cum, float(bi))
        if cum >= target:
            return candidates[i]
    return candidates[-1]


def noisy_histogram(
    grouped_counts: StatVector, eps: float, accountant: ScopeHandle, rng: RandomSource
) -> MechanismResult:
    """Laplace(sensitivity/eps) noise on every cell of the declared domain.

    The cell set comes from metadata, so it is identical across runs and
    across neighboring inputs; empty groups are released as pure noise.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    _check_floor(eps, grouped_counts.l1_sensitivity)
    charge = accountant.charge(eps, "noisy_histogram")
    scale = grouped_counts.l1_sensitivity / eps if grouped_counts.l1_sensitivity > 0 else None
    values = grouped_counts.values.copy()
    if scale is not None:
        values = values + sample_laplace(rng, scale, size=len(grouped_counts))
    return MechanismResult(values, charge, grouped_counts.dimension_labels)


def soft_threshold_filter(
    counts: StatVector,
    threshold: float,
    lap_scale: float,
    accountant: ScopeHandle,
    rng: RandomSource,
) -> MechanismResult:
    """Release the group keys whose count beats threshold + fresh Laplace noise.

    Defaults elsewhere in the stack mirror the threshold-100 / scale-5
    release this construction comes from.  The charge is conservative:
    sensitivity / lap_scale, i.e. the epsilon of the equivalent per-key
    Laplace release.
    """
    if lap_scale <= 0:
        raise ParameterError("lap_scale must be positive")
    eps_equiv = counts.l1_sensitivity / lap_scale
    _check_floor(eps_equiv, counts.l1_sensitivity)
    charge = accountant.charge(eps_equiv, "soft_threshold_filter")
    noise = sample_laplace(rng, lap_scale, size=len(counts))
    included = tuple(
        label
        for label, value, z in zip(counts.dimension_labels, counts.values, noise)
        if value > threshold + z
    )
    return MechanismResult(np.array([float(len(included))]), charge, included)
