"""One-sided Wald tests and resampling variance.

The normal CDF and quantile are implemented locally (complementary error
function for the CDF; a rational approximation polished with one Halley step
for the quantile) so that test output is bit-stable across platforms and
needs no lookup tables.  Absolute CDF error is far below the 1e-7 contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spatial_ab.rng import derive_seed

_BOOTSTRAP_SALT = 0xB007


class DegenerateVarianceError(ValueError):
    """Nonpositive variance estimate; the Wald statistic is undefined."""


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))


_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must lie in (0, 1), got {p}")
    # rational approximation in three regimes
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4])
              * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - 0.02425:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4])
              * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4])
                * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4])
               * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley step against the exact CDF
    err = normal_cdf(x) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


@dataclass(frozen=True)
class WaldTest:
    stat: float
    delta: float
    c_delta: float
    p_value: float
    reject: bool


def wald(est, delta: float = 0.05) -> WaldTest:
    """One-sided test of 'no positive total effect' at level delta."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")
    if est.var_hat <= 0.0:
        raise DegenerateVarianceError(
            f"var_hat={est.var_hat} admits no Wald statistic"
        )
    stat = est.tau_hat / math.sqrt(est.var_hat)
    c = normal_quantile(1.0 - delta)
    return WaldTest(
        stat=stat,
        delta=delta,
        c_delta=c,
        p_value=1.0 - normal_cdf(stat),
        reject=bool(stat >= c),
    )


def day_bootstrap_var(panel, estimator, B: int = 200, seed: int = 0) -> float:
    """Variance of `estimator` over B with-replacement day resamples.

    A resample on which the estimator fails is replaced by a fresh one; the
    total attempt budget is 3B.
    """
    if B < 100:
        raise ValueError(f"need at least 100 resamples, got {B}")
    N = panel.n_days
    rng = np.random.default_rng(derive_seed(seed, _BOOTSTRAP_SALT))
    values = []
    attempts = 0
    while len(values) < B:
        if attempts >= 3 * B:
            raise RuntimeError(
                f"bootstrap exhausted {attempts} attempts for {B} resamples"
            )
        attempts += 1
        idx = rng.integers(0, N, size=N)
        try:
            values.append(float(estimator(panel.take_days(idx))))
        except (ValueError, np.linalg.LinAlgError):
            continue
    return float(np.var(values, ddof=1))
