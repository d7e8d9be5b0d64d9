"""Doubly robust estimation of the total treatment effect (one interval).

The estimating function combines an inverse-propensity term with an outcome
regression: nu(a) = I{A=a, Abar=a}/pi(a) * (Y - h(a,a,O,Obar)) + h(a,a,O,Obar).
Averaging nu(1) - nu(0) over days and summing over units is consistent when
either nuisance is correct.

Propensities are known in closed form because assignment is by design:

* global     - one coin:                    pi(1) = p, pi(0) = 1 - p
* individual - a unit and its n neighbors:  pi(a) = p_a^(n+1)
* cluster    - every cluster touching the closed neighborhood must agree,
               so pi(a) = p_a^(r_c) with r_c the touched-cluster count.

The outcome regression h is cross-fit: days are split into K folds and each
fold is predicted by a kernel regression trained on its complement, so no
day's outcome enters its own nuisance fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from spatial_ab.kernel import DEFAULT_CONFIG, KernelConfig, KernelRegressor
from spatial_ab.ols import (
    AteEstimate,
    DesignMismatchError,
    InsufficientDataError,
    _spatial_kind,
    _verify_structure,
)
from spatial_ab.rng import derive_seed

_ABAR_TOL = 1e-12
_FOLD_SALT = 0x0F01D5
WEIGHT_CAP = 1e4


@dataclass(frozen=True)
class PropensityModel:
    """Per-unit probability of the joint event {A = a, Abar = a}."""

    design: str
    pi1: np.ndarray
    pi0: np.ndarray

    def __post_init__(self):
        for arr in (self.pi1, self.pi0):
            if np.any(arr <= 0.0) or np.any(arr > 1.0):
                raise ValueError("propensities must lie in (0, 1]")
        if np.any(self.pi1 + self.pi0 > 1.0 + 1e-12):
            raise ValueError("joint propensities of disjoint events exceed 1")
        self.pi1.setflags(write=False)
        self.pi0.setflags(write=False)

    def pi(self, a: int) -> np.ndarray:
        return self.pi1 if a == 1 else self.pi0


@dataclass(frozen=True)
class DrDiagnostics:
    """Small-sample health of the inverse-propensity terms."""

    arm_counts: np.ndarray  # (R, 2): days with the joint event, per arm
    max_weight: float  # largest realized inverse-propensity weight
    n_extrapolated: int  # out-of-hull kernel evaluations

    @property
    def min_arm_count(self) -> int:
        return int(self.arm_counts.min())


def propensity(design, layout, diagnostics=None, p: float = 0.5
               ) -> PropensityModel:
    """Closed-form joint propensities for the given design."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    kind = _spatial_kind(design)
    R = layout.R
    if kind == "global":
        pi1 = np.full(R, p)
        pi0 = np.full(R, 1.0 - p)
    elif kind == "individual":
        # the closed neighborhood must agree: n_neighbors + 1 own coins
        exponent = layout.n_neighbors + 1
        pi1 = p ** exponent
        pi0 = (1.0 - p) ** exponent
    else:
        if diagnostics is None:
            raise DesignMismatchError(
                "cluster propensities need layout diagnostics"
            )
        exponent = diagnostics.r_c_per_unit
        pi1 = p ** exponent
        pi0 = (1.0 - p) ** exponent
    return PropensityModel(design=kind, pi1=pi1, pi0=pi0)


def _unit_features(panel, unit: int, days) -> np.ndarray:
    """Learner inputs (A, Abar, O..., Obar...) for one unit, (len(days), 2+2d)."""
    cols = [panel.A[days, unit, 0], panel.Abar[days, unit, 0]]
    cols.extend(panel.O[days, unit, 0, j] for j in range(panel.d))
    cols.extend(panel.Obar[days, unit, 0, j] for j in range(panel.d))
    return np.stack(cols, axis=1)


def _arm_features(panel, unit: int, days, a: float) -> np.ndarray:
    X = _unit_features(panel, unit, days)
    X[:, 0] = a
    X[:, 1] = a
    return X


def fit_h(panel, unit: int, days=None,
          config: KernelConfig = DEFAULT_CONFIG) -> KernelRegressor:
    """Kernel regression of one unit's outcomes on (A, Abar, O, Obar)."""
    days = np.arange(panel.n_days) if days is None else np.asarray(days)
    if len(days) < 5:
        raise InsufficientDataError(
            f"outcome regression needs at least 5 days, got {len(days)}"
        )
    X = _unit_features(panel, unit, days)
    return KernelRegressor(config).fit(X, panel.Y[days, unit, 0])


def _indicator(panel, a: float) -> np.ndarray:
    """(N, R) joint event I{A = a, Abar = a} with exact-equality tolerance."""
    A, Abar = panel.A[:, :, 0], panel.Abar[:, :, 0]
    return (A == a) & (np.abs(Abar - a) <= _ABAR_TOL)


def nu_dr(a: int, unit: int, day: int, h_hat, pi_a: float, panel) -> float:
    """The estimating function for one (arm, unit, day) triple."""
    if pi_a <= 0.0:
        raise ValueError("propensity must be positive")
    x = _arm_features(panel, unit, np.array([day]), float(a))
    pred = h_hat.predict(x) if hasattr(h_hat, "predict") else h_hat(x)
    pred = float(np.asarray(pred).reshape(-1)[0])
    ind = float(_indicator(panel, float(a))[day, unit])
    return ind / pi_a * (float(panel.Y[day, unit, 0]) - pred) + pred


def make_folds(n_days: int, K: int, seed: int):
    """Split day indices into K near-equal folds, deterministically."""
    if K < 2:
        raise ValueError(f"need at least 2 folds, got {K}")
    if n_days < 2 * K:
        raise InsufficientDataError(
            f"{n_days} days cannot form {K} folds of at least 2 days"
        )
    rng = np.random.default_rng(derive_seed(seed, _FOLD_SALT))
    return np.array_split(rng.permutation(n_days), K)


def dr_crossfit(
    panel,
    design,
    layout=None,
    diagnostics=None,
    K: int = 2,
    seed: int = 0,
    clip_weights: bool = False,
    h_override: Optional[Callable] = None,
    p: Optional[float] = None,
    folds=None,
) -> AteEstimate:
    """Cross-fitted doubly robust estimator for single-interval panels.

    h_override, when given, replaces the fitted outcome regression: a
    callable (unit, X) -> predictions over rows of (A, Abar, O..., Obar...).
    folds, when given, is an explicit day partition overriding the seeded
    split; it must cover every day exactly once.
    """
    if panel.M != 1:
        raise DesignMismatchError(
            "dr_crossfit handles single-interval panels; use drl_estimate"
        )
    kind = _spatial_kind(design)
    _verify_structure(panel, kind, diagnostics)
    layout = layout if layout is not None else panel.layout
    if p is None:
        p = float(getattr(design, "p", 0.5))
    pm = propensity(kind, layout, diagnostics, p)

    N, R = panel.n_days, panel.R
    if folds is None:
        folds = make_folds(N, K, seed)
    else:
        folds = [np.asarray(f, dtype=np.int64) for f in folds]
        if sorted(np.concatenate(folds).tolist()) != list(range(N)):
            raise ValueError("explicit folds must partition the days")
    h1 = np.empty((N, R))
    h0 = np.empty((N, R))
    n_extrapolated = 0
    if h_override is not None:
        all_days = np.arange(N)
        for u in range(R):
            h1[:, u] = h_override(u, _arm_features(panel, u, all_days, 1.0))
            h0[:, u] = h_override(u, _arm_features(panel, u, all_days, 0.0))
    else:
        for fold in folds:
            train = np.setdiff1d(np.arange(N), fold)
            for u in range(R):
                fit = fit_h(panel, u, train)
                for a, out in ((1.0, h1), (0.0, h0)):
                    pred, flag = fit.predict_flagged(
                        _arm_features(panel, u, fold, a)
                    )
                    out[fold, u] = pred
                    n_extrapolated += int(flag.sum())

    I1 = _indicator(panel, 1.0)
    I0 = _indicator(panel, 0.0)
    w1 = 1.0 / pm.pi1
    w0 = 1.0 / pm.pi0
    if clip_weights:
        w1 = np.minimum(w1, WEIGHT_CAP)
        w0 = np.minimum(w0, WEIGHT_CAP)
    Y = panel.Y[:, :, 0]
    nu1 = I1 * w1[None, :] * (Y - h1) + h1
    nu0 = I0 * w0[None, :] * (Y - h0) + h0

    psi = (nu1 - nu0).sum(axis=1)
    tau = float(psi.mean())
    var = float(psi.var(ddof=1) / N)

    delta = (h1 - h0).sum(axis=1)
    sigma_O2 = float(np.mean((delta - delta.mean()) ** 2))

    used = np.where(I1, w1[None, :], 0.0)
    used = np.maximum(used, np.where(I0, w0[None, :], 0.0))
    diag = DrDiagnostics(
        arm_counts=np.stack([I0.sum(axis=0), I1.sum(axis=0)], axis=1),
        max_weight=float(used.max()),
        n_extrapolated=n_extrapolated,
    )
    return AteEstimate(
        tau_hat=tau, var_hat=var, design=kind, method="DR", n_days=N,
        extras={
            "sigma_O2_hat": sigma_O2,
            "min_arm_count": diag.min_arm_count,
            "max_weight": diag.max_weight,
            "n_extrapolated": diag.n_extrapolated,
            "folds": int(K),
        },
    )
