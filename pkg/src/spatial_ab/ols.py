"""Least-squares plug-in estimators of the total treatment effect.

Per-unit regressions are chosen by the design that generated the panel:

* global: one arm for the whole region, so a unit's regression can only
  identify the merged effect (own + spillover); regressors (1, O, A).
* individual: own and neighborhood arms vary separately; regressors
  (1, O, A, Abar) and the effect is the sum of the last two coefficients.
* cluster: boundary units see foreign arms through Abar and use the split
  form; interior units never do (their Abar equals their own arm exactly),
  so they fall back to the merged form.

The dynamic variant adds a per-(unit, interval) transition regression of the
next covariate on the same regressors and folds the fitted carryover chain
into the effect total.

Variance for the static estimator is the day-level influence form: days are
the independent replicates, so the sample variance of per-day influence
contributions consistently absorbs arbitrary cross-unit residual
correlation.  The dynamic estimator's variance comes from a day bootstrap.

This module never imports the data generators; panels are consumed
structurally (O, A, Abar, Y, layout attributes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from spatial_ab.inference import day_bootstrap_var

COND_LIMIT = 1e10


class RankDeficiencyError(ValueError):
    """Gram matrix singular or nearly so; names the collinear columns."""


class DesignMismatchError(ValueError):
    """Panel's assignment structure contradicts the declared design."""


class InsufficientDataError(ValueError):
    """Too few days for the requested regression structure."""


@dataclass(frozen=True)
class UnitRegression:
    """One unit's least-squares fit with the pieces variance algebra needs."""

    coef: np.ndarray
    gram_inv: np.ndarray
    residuals: np.ndarray
    selector: Optional[np.ndarray] = None


@dataclass(frozen=True)
class AteEstimate:
    tau_hat: float
    var_hat: float
    design: str
    method: str
    n_days: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.var_hat < 0:
            raise ValueError("var_hat must be nonnegative")


def _name_collinear(gram: np.ndarray, names) -> str:
    w, Q = np.linalg.eigh(gram)
    v = np.abs(Q[:, 0])
    guilty = [names[j] for j in np.flatnonzero(v > 0.5 * v.max())]
    return ", ".join(guilty)


def _check_conditioning(gram: np.ndarray, names, label: str):
    """gram: (..., q, q) stack; raises naming the first offender."""
    w = np.linalg.eigvalsh(gram)
    bad = (w[..., 0] <= 0) | (w[..., -1] > COND_LIMIT * np.maximum(w[..., 0], 0))
    if bad.any():
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        g = gram[idx]
        raise RankDeficiencyError(
            f"{label} {idx}: regressors [{_name_collinear(g, names)}] are "
            f"collinear or nearly so"
        )


def ols_fit(Z: np.ndarray, Y: np.ndarray, names=None) -> UnitRegression:
    """Plain least squares with an explicit conditioning gate."""
    Z = np.asarray(Z, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, q = Z.shape
    if n < q:
        raise InsufficientDataError(f"{n} rows cannot identify {q} coefficients")
    if names is None:
        names = [f"col{j}" for j in range(q)]
    gram = Z.T @ Z
    _check_conditioning(gram[None], names, "fit")
    coef = np.linalg.solve(gram, Z.T @ Y)
    return UnitRegression(
        coef=coef,
        gram_inv=np.linalg.inv(gram),
        residuals=Y - Z @ coef,
    )


def carryover(betas: np.ndarray, Bs: np.ndarray) -> np.ndarray:
    """Accumulated downstream effect of a covariate shift at each interval.

    c at the final interval is zero; earlier intervals satisfy
    c_t = beta_{t+1} + B_{t+1}^T c_{t+1}.  Scalar covariates pass (R, M)
    arrays; vector covariates pass betas (R, M, d) and Bs (R, M, d, d).
    """
    betas = np.asarray(betas, dtype=np.float64)
    Bs = np.asarray(Bs, dtype=np.float64)
    if betas.ndim == 2:
        R, M = betas.shape
        c = np.zeros((R, M))
        for t in range(M - 2, -1, -1):
            c[:, t] = betas[:, t + 1] + Bs[:, t + 1] * c[:, t + 1]
        return c
    if betas.ndim == 3:
        R, M, d = betas.shape
        if Bs.shape != (R, M, d, d):
            raise ValueError(f"Bs shape {Bs.shape} does not match betas")
        c = np.zeros((R, M, d))
        for t in range(M - 2, -1, -1):
            c[:, t] = betas[:, t + 1] + np.einsum(
                "rji,rj->ri", Bs[:, t + 1], c[:, t + 1]
            )
        return c
    raise ValueError("betas must be (R, M) or (R, M, d)")


# ---------------------------------------------------------------------------
# static estimator


def _spatial_kind(design) -> str:
    kind = getattr(design, "spatial", design)
    if kind not in ("global", "individual", "cluster"):
        raise DesignMismatchError(f"unknown design kind {kind!r}")
    return kind


def _verify_structure(panel, kind: str, diagnostics):
    A = panel.A
    if kind == "global":
        if not np.all(A == A[:, :1, :]):
            raise DesignMismatchError(
                "global design declared but units disagree within a day"
            )
    elif kind == "cluster":
        if diagnostics is None:
            raise DesignMismatchError("cluster estimation needs diagnostics")
        part = diagnostics.partition
        if part.layout.R != panel.R:
            raise DesignMismatchError("diagnostics built for a different layout")
        for members in part.members:
            if not np.all(A[:, members, :] == A[:, members[:1], :]):
                raise DesignMismatchError(
                    "cluster design declared but a cluster's units disagree"
                )


def _col_names(d: int, with_abar: bool):
    names = ["intercept"] + [f"O{j + 1}" for j in range(d)] + ["A"]
    return names + ["Abar"] if with_abar else names


def _stack_design(panel, units, t: int, with_abar: bool) -> np.ndarray:
    """Regressor stack (len(units), N, q) for interval t."""
    N, d = panel.n_days, panel.d
    cols = [np.ones((len(units), N))]
    for j in range(d):
        cols.append(panel.O[:, units, t, j].T)
    cols.append(panel.A[:, units, t].T)
    if with_abar:
        cols.append(panel.Abar[:, units, t].T)
    return np.stack(cols, axis=2)


def _batched_ls(Z: np.ndarray, Y: np.ndarray, names, label: str):
    """Solve the per-unit normal equations for a (G, N, q) stack."""
    G, N, q = Z.shape
    if N < q:
        raise InsufficientDataError(
            f"{N} days cannot identify {q} coefficients per unit"
        )
    gram = np.einsum("gnq,gnp->gqp", Z, Z)
    _check_conditioning(gram, names, label)
    rhs = np.einsum("gnq,gn->gq", Z, Y)
    coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
    return gram, coef


def _influence_pieces(Z, Y, gram, coef, u_idx):
    """Per-day selected-coefficient influence, (G, N)."""
    resid = Y - np.einsum("gnq,gq->gn", Z, coef)
    ginv = np.linalg.inv(gram)
    u = np.zeros((Z.shape[0], Z.shape[2]))
    for j in u_idx:
        u[:, j] = 1.0
    w = np.einsum("gqp,gp->gq", ginv, u)
    return np.einsum("gq,gnq->gn", w, Z) * resid


def tau_ols(panel, design, layout=None, diagnostics=None) -> AteEstimate:
    """Static plug-in estimator; panel must have a single interval."""
    if panel.M != 1:
        raise DesignMismatchError(
            "tau_ols handles single-interval panels; use tau_ols_dynamic"
        )
    kind = _spatial_kind(design)
    _verify_structure(panel, kind, diagnostics)
    N, d = panel.n_days, panel.d
    all_units = np.arange(panel.R)

    if kind == "global":
        groups = [(all_units, False, (-1,))]
    elif kind == "individual":
        groups = [(all_units, True, (-2, -1))]
    else:
        interior = np.flatnonzero(diagnostics.interior_mask)
        boundary = np.flatnonzero(~diagnostics.interior_mask)
        groups = [(interior, False, (-1,)), (boundary, True, (-2, -1))]

    tau = 0.0
    psi = np.zeros(N)
    for units, with_abar, u_idx in groups:
        if len(units) == 0:
            continue
        Z = _stack_design(panel, units, 0, with_abar)
        Y = panel.Y[:, units, 0].T
        names = _col_names(d, with_abar)
        gram, coef = _batched_ls(Z, Y, names, "unit")
        u_cols = [len(names) + j for j in u_idx]
        tau += float(sum(coef[:, j].sum() for j in u_cols))
        psi += _influence_pieces(Z, Y, gram, coef, u_cols).sum(axis=0)
    psi *= N
    var_hat = float(np.var(psi, ddof=1) / N)
    return AteEstimate(
        tau_hat=tau, var_hat=var_hat, design=kind, method="OLS", n_days=N
    )


# ---------------------------------------------------------------------------
# dynamic estimator


def _dynamic_point(panel, kind: str, diagnostics) -> float:
    """Carryover-aware effect total from per-(unit, interval) regressions."""
    N, R, M, d = panel.n_days, panel.R, panel.M, panel.d
    if d != 1:
        raise DesignMismatchError(
            "dynamic estimation is implemented for scalar covariates"
        )

    if kind == "global":
        merged = np.ones(R, dtype=bool)
    elif kind == "individual":
        merged = np.zeros(R, dtype=bool)
    else:
        merged = diagnostics.interior_mask.copy()

    direct = np.zeros((R, M))  # gamma (+theta where identified)
    beta_hat = np.zeros((R, M))
    B_hat = np.zeros((R, M))
    carry_gain = np.zeros((R, M))  # Gamma (+Theta), t <= M-1

    for is_merged in (True, False):
        units = np.flatnonzero(merged == is_merged)
        if len(units) == 0:
            continue
        with_abar = not is_merged
        names = _col_names(d, with_abar)
        a_cols = [len(names) - 1] if is_merged else [len(names) - 2, len(names) - 1]
        o_col = 1
        for t in range(M):
            Z = _stack_design(panel, units, t, with_abar)
            _, coef = _batched_ls(Z, panel.Y[:, units, t].T, names, "unit/interval")
            beta_hat[units, t] = coef[:, o_col]
            direct[units, t] = sum(coef[:, j] for j in a_cols)
            if t < M - 1:
                O_next = panel.O[:, units, t + 1, 0].T
                _, tcoef = _batched_ls(Z, O_next, names, "transition unit/interval")
                B_hat[units, t] = tcoef[:, o_col]
                carry_gain[units, t] = sum(tcoef[:, j] for j in a_cols)

    c = carryover(beta_hat, B_hat)
    return float(np.sum(direct) + np.sum(c[:, : M - 1] * carry_gain[:, : M - 1]))


def tau_ols_dynamic(
    panel,
    design,
    layout=None,
    diagnostics=None,
    bootstrap_B: int = 200,
    seed: int = 0,
) -> AteEstimate:
    """Dynamic plug-in estimator with day-bootstrap variance."""
    kind = _spatial_kind(design)
    if panel.M == 1:
        return tau_ols(panel, design, layout, diagnostics)
    _verify_structure(panel, kind, diagnostics)
    q = panel.d + (2 if kind == "global" else 3)
    if panel.M * q > panel.n_days:
        raise InsufficientDataError(
            f"M={panel.M} intervals with {q} regressors need more than "
            f"{panel.n_days} days"
        )
    tau = _dynamic_point(panel, kind, diagnostics)
    var = day_bootstrap_var(
        panel, lambda p: _dynamic_point(p, kind, diagnostics),
        B=bootstrap_B, seed=seed,
    )
    return AteEstimate(
        tau_hat=tau, var_hat=var, design=kind, method="OLS",
        n_days=panel.n_days,
    )
