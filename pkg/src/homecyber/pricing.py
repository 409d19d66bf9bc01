"""Retention transform, the four premium principles, and calibration.

Premiums are sample functionals: expectation loading, standard-deviation
loading, Gini-mean-difference loading, and the conditional tail expectation
above the empirical value-at-risk.  Calibration inverts each principle so a
chosen baseline premium pins the loading parameter.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class CalibrationError(ValueError):
    """Base class for calibration failures."""


class NotCalibratableError(CalibrationError):
    """The family's scale statistic is zero, so no parameter can move the premium."""


class TargetNotAchievableError(CalibrationError):
    """The target premium lies outside the attainable range for the family."""


class CteNotIdentifiableError(CalibrationError):
    """The empirical CTE is flat around the target and never attains it."""


@dataclass(frozen=True)
class Policy:
    """Per-policy deductible and coverage limit, in dollars per year."""

    deductible: float
    coverage: float

    def __post_init__(self):
        if self.deductible < 0.0:
            raise ValueError(f"deductible must be >= 0, got {self.deductible}")
        if self.coverage <= 0.0:
            raise ValueError(f"coverage must be > 0, got {self.coverage}")


@dataclass(frozen=True)
class Expectation:
    theta: float


@dataclass(frozen=True)
class StdDev:
    theta: float


@dataclass(frozen=True)
class GMD:
    theta: float


@dataclass(frozen=True)
class CTE:
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")


PrincipleParam = Expectation | StdDev | GMD | CTE

FAMILIES = ("expectation", "stddev", "gmd", "cte")


def apply_retention(loss, policy: Policy):
    """min((loss - d)_+, C); accepts scalars or arrays."""
    retained = np.minimum(np.maximum(np.asarray(loss, dtype=float) - policy.deductible, 0.0),
                          policy.coverage)
    return float(retained) if np.isscalar(loss) or np.ndim(loss) == 0 else retained


def gmd(samples: Sequence[float] | np.ndarray) -> float:
    """Mean absolute difference over unordered pairs, via the sorted identity.

    Equals (2 / (n (n-1))) * sum_{i<j} |x_i - x_j| exactly; the sorted form
    sum_k (2k - n - 1) x_(k) avoids the O(n^2) pair loop.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError(f"GMD needs at least 2 samples, got {n}")
    k = np.arange(1, n + 1, dtype=float)
    return float((2.0 * k - n - 1.0) @ x) * 2.0 / (n * (n - 1))


def var_beta(samples: Sequence[float] | np.ndarray, beta: float) -> float:
    """Smallest order statistic x_(k) with k/n >= beta (no interpolation)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("value-at-risk of an empty sample")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    k = max(1, math.ceil(x.size * beta))
    return float(np.sort(x)[k - 1])


def cte(samples: Sequence[float] | np.ndarray, beta: float) -> float:
    """Mean of the samples at or above the empirical value-at-risk."""
    x = np.asarray(samples, dtype=float)
    threshold = var_beta(x, beta)
    return float(x[x >= threshold].mean())


def premium(samples: Sequence[float] | np.ndarray, param: PrincipleParam) -> float:
    """Premium of a retained-loss sample under one principle."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("premium of an empty sample")
    if isinstance(param, Expectation):
        return (1.0 + param.theta) * float(x.mean())
    if isinstance(param, StdDev):
        if x.size < 2:
            raise ValueError("standard-deviation principle needs at least 2 samples")
        return float(x.mean()) + param.theta * float(np.std(x, ddof=1))
    if isinstance(param, GMD):
        return float(x.mean()) + param.theta * gmd(x)
    if isinstance(param, CTE):
        return cte(x, param.beta)
    raise TypeError(f"unknown principle parameter {param!r}")


def calibrate(
    family: str,
    samples: Sequence[float] | np.ndarray,
    target_premium: float,
    rel_tol: float = 1e-6,
) -> PrincipleParam:
    """Solve for the parameter that makes ``premium(samples, param) == target``.

    Expectation / stddev / gmd solve in closed form:
    theta = (target - mean) / scale with scale = mean, SD, GMD.  The CTE
    family searches the finitely many attainable tail expectations (the exact
    limit of a monotone bisection over beta, bracketed in (1/n, 1 - 1/n)).

    Raises:
        NotCalibratableError: the scale statistic is zero.
        TargetNotAchievableError: CTE target below the sample mean or above
            the sample maximum.
        CteNotIdentifiableError: the empirical CTE is flat below the target
            and jumps past it, so no beta reproduces the target.
    """
    if target_premium < 0.0:
        raise ValueError(f"target premium must be >= 0, got {target_premium}")
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("calibration needs at least 2 samples")
    tol = rel_tol * max(1.0, target_premium)
    mean = float(x.mean())

    if family == "expectation":
        if mean == 0.0:
            raise NotCalibratableError("sample mean is 0; expectation loading has no effect")
        return Expectation((target_premium - mean) / mean)
    if family == "stddev":
        sd = float(np.std(x, ddof=1))
        if sd == 0.0:
            raise NotCalibratableError("sample SD is 0; stddev loading has no effect")
        return StdDev((target_premium - mean) / sd)
    if family == "gmd":
        scale = gmd(x)
        if scale == 0.0:
            raise NotCalibratableError("sample GMD is 0; GMD loading has no effect")
        return GMD((target_premium - mean) / scale)
    if family == "cte":
        return _calibrate_cte(x, target_premium, tol)
    raise ValueError(f"unknown principle family {family!r}; expected one of {FAMILIES}")


def _calibrate_cte(x: np.ndarray, target: float, tol: float) -> CTE:
    n = x.size
    ordered = np.sort(x)
    # suffix means: tail_mean[k] = mean(ordered[k:]); CTE at threshold x_(k+1)
    suffix = np.cumsum(ordered[::-1])[::-1]
    counts = np.arange(n, 0, -1, dtype=float)
    tail_means = suffix / counts

    if target < tail_means[0] - tol:
        raise TargetNotAchievableError(
            f"target {target} is below the sample mean {tail_means[0]:.6g}"
        )
    if target > ordered[-1] + tol:
        raise TargetNotAchievableError(
            f"target {target} is above the sample maximum {ordered[-1]:.6g}"
        )

    # candidate thresholds k = 1..n-1 (beta bracketed inside (1/n, 1 - 1/n));
    # with ties, CTE depends on the threshold value only, via its first index
    best_k = None
    below = tail_means[0]
    above = None
    for k in range(1, n):  # 1-indexed order statistic
        if k > 1 and ordered[k - 1] == ordered[k - 2]:
            continue
        value = float(tail_means[k - 1])
        if abs(value - target) <= tol:
            best_k = k
            break
        if value < target:
            below = value
        elif above is None:
            above = value
            break
    if best_k is None:
        jump = "the sample maximum" if above is None else f"{above:.6g}"
        raise CteNotIdentifiableError(
            f"empirical CTE is flat at {below:.6g} below the target {target} "
            f"and jumps to {jump}; no beta attains the target"
        )
    return CTE(best_k / n)
