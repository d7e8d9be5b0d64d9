"""Value-function + importance-weight estimation for multi-interval panels.

A unit's interval-t state is X = (O, A, Obar, Abar): own covariates and
action plus their neighborhood averages.  Under the mean-field interference
model this screens off the rest of the region, so per-unit value functions
Q_t^a(X) (expected remaining outcome under the constant-a policy) obey a
backward recursion

    Q_M^a : regress Y_M on X_M
    Q_t^a : regress Y_t + Q_{t+1}^a(X_{t+1}^a) on X_t,

where X_{t+1}^a substitutes the target action a for A and Abar.  The
estimator corrects each fitted value with sequential importance weights
mu_t = prod_{k<=t} I{A_k = a, Abar_k = a} / pi(a), known exactly from the
design.  Cross-fitting holds out whole days (trajectories).

Temporal policies change the weights' granularity: independent assignment
draws one coin per interval (one propensity factor each), constant draws a
single coin (one factor total).  A switchback design never keeps one arm for
two intervals, so the constant-arm target policy is unreachable and the
estimator refuses it rather than returning an all-zero-weight answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from spatial_ab.dr import PropensityModel, _ABAR_TOL, make_folds, propensity
from spatial_ab.kernel import DEFAULT_CONFIG, KernelConfig, KernelRegressor
from spatial_ab.ols import (
    AteEstimate,
    DesignMismatchError,
    InsufficientDataError,
    _spatial_kind,
    _verify_structure,
)


class TemporalCompatibilityError(ValueError):
    """The design's temporal policy cannot realize the target policy."""


@dataclass(frozen=True)
class MeanFieldState:
    """One unit-interval state: own fields plus the neighborhood summary."""

    o: np.ndarray
    a: float
    m: np.ndarray  # (neighbor-mean covariates, neighbor-mean action)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.o, [self.a], self.m])


def mean_field_state(panel, day: int, unit: int, t: int) -> MeanFieldState:
    return MeanFieldState(
        o=panel.O[day, unit, t].copy(),
        a=float(panel.A[day, unit, t]),
        m=np.concatenate(
            [panel.Obar[day, unit, t], [panel.Abar[day, unit, t]]]
        ),
    )


def _state_features(panel, unit: int, t: int, days) -> np.ndarray:
    """(len(days), 2d+2) stacked state vectors (O, A, Obar, Abar)."""
    cols = [panel.O[days, unit, t, j] for j in range(panel.d)]
    cols.append(panel.A[days, unit, t])
    cols.extend(panel.Obar[days, unit, t, j] for j in range(panel.d))
    cols.append(panel.Abar[days, unit, t])
    return np.stack(cols, axis=1)


def _arm_state_features(panel, unit: int, t: int, days, a: float) -> np.ndarray:
    X = _state_features(panel, unit, t, days)
    X[:, panel.d] = a
    X[:, -1] = a
    return X


class QFunctionSet:
    """Fitted per-(unit, interval) value regressions for one arm and fold."""

    def __init__(self, a: float, fits):
        self.a = a
        self._fits = fits  # [t][unit] -> KernelRegressor

    def predict(self, t: int, unit: int, X: np.ndarray) -> np.ndarray:
        return self._fits[t][unit].predict(X)


def q_backward(panel, train_days, a: float, config: KernelConfig = DEFAULT_CONFIG
               ) -> QFunctionSet:
    """Backward-induction value fits on the given training days."""
    train_days = np.asarray(train_days)
    if len(train_days) == 0:
        raise InsufficientDataError("empty training set for value regression")
    R, M = panel.R, panel.M
    fits = [[None] * R for _ in range(M)]
    for u in range(R):
        target = panel.Y[train_days, u, M - 1]
        for t in range(M - 1, -1, -1):
            X = _state_features(panel, u, t, train_days)
            fits[t][u] = KernelRegressor(config).fit(X, target)
            if t > 0:
                carried = fits[t][u].predict(
                    _arm_state_features(panel, u, t, train_days, a)
                )
                target = panel.Y[train_days, u, t - 1] + carried
    return QFunctionSet(a=a, fits=fits)


def ratio_weights(
    panel,
    a: float,
    design,
    pm: PropensityModel,
    temporal: Optional[str] = None,
) -> np.ndarray:
    """Sequential importance weights, (N, R, M).

    Weight at interval t is the running indicator that every action and
    mean field up to t equals a, divided by the propensity of that history.
    """
    temporal = temporal if temporal is not None else getattr(design, "temporal", None)
    if temporal is None:
        raise ValueError("ratio_weights needs the design's temporal policy")
    N, R, M = panel.A.shape
    if temporal == "switchback" and M >= 2:
        raise TemporalCompatibilityError(
            "switchback assignment never holds one arm across intervals, so "
            "constant-arm importance weights are identically zero"
        )
    ind = (panel.A == a) & (np.abs(panel.Abar - a) <= _ABAR_TOL)
    running = np.cumprod(ind.astype(np.float64), axis=2)
    pi = pm.pi(int(a))[None, :, None]
    if temporal == "independent":
        # one behavior coin per interval: t+1 propensity factors at index t
        powers = pi ** np.arange(1, M + 1, dtype=np.float64)[None, None, :]
        return running / powers
    # one coin for the whole day
    return running / pi


def drl_estimate(
    panel,
    design,
    layout=None,
    diagnostics=None,
    K: int = 2,
    seed: int = 0,
    q_override: Optional[Callable] = None,
    p: Optional[float] = None,
    folds=None,
) -> AteEstimate:
    """Cross-fitted value-plus-weights estimator of the total effect.

    q_override, when given, replaces the fitted value functions: a callable
    (a, t, unit, X) -> predictions over rows of (O..., A, Obar..., Abar).
    folds, when given, overrides the seeded day partition.
    """
    kind = _spatial_kind(design)
    _verify_structure(panel, kind, diagnostics)
    layout = layout if layout is not None else panel.layout
    if p is None:
        p = float(getattr(design, "p", 0.5))
    pm = propensity(kind, layout, diagnostics, p)

    N, R, M = panel.A.shape
    if folds is None:
        folds = make_folds(N, K, seed)
    else:
        folds = [np.asarray(f, dtype=np.int64) for f in folds]
        if sorted(np.concatenate(folds).tolist()) != list(range(N)):
            raise ValueError("explicit folds must partition the days")
    mu = {a: ratio_weights(panel, a, design, pm) for a in (1.0, 0.0)}

    terms = {a: np.zeros((N, R)) for a in (1.0, 0.0)}
    for fold in folds:
        train = np.setdiff1d(np.arange(N), fold)
        if q_override is None and len(train) < 5:
            raise InsufficientDataError(
                f"value regression needs at least 5 training days, got "
                f"{len(train)}"
            )
        for a in (1.0, 0.0):
            if q_override is None:
                qset = q_backward(panel, train, a)
                q_eval = qset.predict
            else:
                q_eval = lambda t, u, X, _a=a: q_override(_a, t, u, X)
            for u in range(R):
                base = q_eval(0, u, _arm_state_features(panel, u, 0, fold, a))
                corr = np.zeros(len(fold))
                for t in range(M):
                    w = mu[a][fold, u, t]
                    nz = np.flatnonzero(w)
                    if len(nz) == 0:
                        continue
                    rows = fold[nz]
                    q_next = (
                        q_eval(t + 1, u,
                               _arm_state_features(panel, u, t + 1, rows, a))
                        if t + 1 < M
                        else 0.0
                    )
                    q_obs = q_eval(t, u, _state_features(panel, u, t, rows))
                    corr[nz] = corr[nz] + w[nz] * (
                        panel.Y[rows, u, t] + q_next - q_obs
                    )
                terms[a][fold, u] = base + corr

    psi = (terms[1.0] - terms[0.0]).sum(axis=1)
    tau = float(psi.mean())
    var = float(psi.var(ddof=1) / N)
    both = np.stack([mu[1.0], mu[0.0]])
    return AteEstimate(
        tau_hat=tau, var_hat=var, design=kind, method="DRL", n_days=N,
        extras={
            "weight_mean": [float(both[:, :, :, t].mean()) for t in range(M)],
            "weight_max": [float(both[:, :, :, t].max()) for t in range(M)],
            "folds": int(K),
        },
    )
