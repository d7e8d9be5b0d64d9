"""Synthetic outcome models over spatial layouts.

Four generators share one panel format (day x unit x interval):

* ``ParamStatic``: linear outcome Y = alpha + O'beta + gamma*A + theta*Abar
  + e with one interval per day.
* ``SemiparamStatic``: nonlinear outcome driven by a sinusoid in location
  and treatment, truncated-normal covariates.
* ``ParamDynamic``: linear outcome plus a first-order autoregressive
  covariate transition carrying treatment effects forward in time.
* ``NonparamDynamic``: nonlinear outcome whose covariate mean shifts with
  the current treatment, low-rank cross-unit covariate correlation.

Coefficient fields are built from Fourier series of the unit coordinates
(and of normalized time t/M for the dynamic kinds) with U(0,1) coefficients,
so a generator is fully determined by (layout, signal s, M, rng seed).

Noise is spatially correlated across units and independent across days and
intervals.  ``simulate`` draws covariates, then outcome noise, then
transition noise, all before touching the assignment tensor: two designs
simulated with the same seed therefore share every covariate and noise draw
and differ only through treatments.

Every spec stores ``true_tau``, the exact expected total-outcome difference
between the all-treated and all-control policies.  ``true_ate_mc`` provides
the Monte Carlo rollout counterpart with a standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from spatial_ab.design import AssignmentTensor, mean_field
from spatial_ab.lattice import SpatialLayout
from spatial_ab.rng import derive_seed

_COVARIATE_SALT = 0x0C0FFEE


class DgpError(ValueError):
    """Inconsistent generator specification or simulation input."""


@dataclass(frozen=True)
class FourierSeries:
    """a0 + sum_k (a_k cos(k pi x) + b_k sin(k pi x)), vectorized in x."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, K: int = 3) -> "FourierSeries":
        return cls(
            a0=float(rng.uniform()), a=rng.uniform(size=K), b=rng.uniform(size=K)
        )

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        k = np.arange(1, len(self.a) + 1, dtype=np.float64)
        ang = math.pi * np.multiply.outer(x, k)
        return self.a0 + np.cos(ang) @ self.a + np.sin(ang) @ self.b


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Cross-unit covariance V with a cached root, factor @ factor.T = V."""

    kind: str
    rho: float
    V: np.ndarray
    factor: np.ndarray

    def __post_init__(self):
        self.V.setflags(write=False)
        self.factor.setflags(write=False)

    def draw(self, rng: np.random.Generator, n_days: int, n_intervals: int
             ) -> np.ndarray:
        """Correlated draws, (n_days, R, n_intervals); iid over days and t."""
        R = self.V.shape[0]
        z = rng.standard_normal((n_days, n_intervals, R))
        return np.swapaxes(z @ self.factor.T, 1, 2)


def _psd_root(V: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        w, Q = np.linalg.eigh(V)
        w = np.clip(w, 0.0, None)
        root = Q * np.sqrt(w)
        if not np.all(np.isfinite(root)):
            raise DgpError("noise covariance cannot be factorized")
        return root


def make_noise(
    kind: str,
    rho: float,
    layout: SpatialLayout,
    rng: Optional[np.random.Generator] = None,
) -> NoiseModel:
    """Build a noise model: 'exponential', 'lowrank', or 'zero'."""
    R = layout.R
    if kind == "zero":
        Z = np.zeros((R, R))
        return NoiseModel(kind=kind, rho=0.0, V=Z, factor=Z.copy())
    if not 0.0 <= rho < 1.0:
        raise DgpError(f"rho must lie in [0, 1), got {rho}")
    if kind == "exponential":
        V = rho ** layout.pairwise_distance if rho > 0 else np.eye(R)
    elif kind == "lowrank":
        if rng is None:
            raise DgpError("lowrank noise needs an rng for the loading draw")
        v = np.zeros(R)
        size = math.ceil(rho * R)
        if size:
            idx = rng.choice(R, size=size, replace=False)
            v[idx] = rng.uniform(0.75, 1.0, size=size)
        V = np.outer(v, v)
        np.fill_diagonal(V, 1.0)
    else:
        raise DgpError(f"unknown noise kind {kind!r}")
    return NoiseModel(kind=kind, rho=float(rho), V=V, factor=_psd_root(V))


# ---------------------------------------------------------------------------
# panel container


@dataclass(frozen=True)
class PanelData:
    """Observed panel: covariates, treatments, mean fields, outcomes."""

    layout: SpatialLayout
    O: np.ndarray  # (N, R, M, d)
    A: np.ndarray  # (N, R, M)
    Abar: np.ndarray  # (N, R, M)
    Y: np.ndarray  # (N, R, M)

    def __post_init__(self):
        n, r, m = self.Y.shape
        if self.O.shape[:3] != (n, r, m) or self.A.shape != (n, r, m):
            raise DgpError(
                f"inconsistent panel shapes O={self.O.shape} A={self.A.shape} "
                f"Y={self.Y.shape}"
            )
        if r != self.layout.R:
            raise DgpError("panel does not match layout size")
        if not (np.isfinite(self.O).all() and np.isfinite(self.Y).all()):
            raise DgpError("panel contains non-finite entries")
        for arr in (self.O, self.A, self.Abar, self.Y):
            arr.setflags(write=False)

    @property
    def n_days(self) -> int:
        return self.Y.shape[0]

    @property
    def R(self) -> int:
        return self.Y.shape[1]

    @property
    def M(self) -> int:
        return self.Y.shape[2]

    @property
    def d(self) -> int:
        return self.O.shape[3]

    @cached_property
    def Obar(self) -> np.ndarray:
        """Neighbor-average covariates, (N, R, M, d)."""
        # mean_field averages over axis -2; put units there per covariate dim
        moved = np.moveaxis(self.O, 3, 1)  # (N, d, R, M)
        out = mean_field(self.layout, moved)
        out = np.moveaxis(out, 1, 3)
        out.setflags(write=False)
        return out

    def take_days(self, idx) -> "PanelData":
        idx = np.asarray(idx, dtype=np.int64)
        return PanelData(
            layout=self.layout,
            O=self.O[idx].copy(),
            A=self.A[idx].copy(),
            Abar=self.Abar[idx].copy(),
            Y=self.Y[idx].copy(),
        )


# ---------------------------------------------------------------------------
# generator specs


@dataclass(frozen=True)
class ParamStatic:
    """Linear static outcome model; coefficient fields over units."""

    layout: SpatialLayout
    s: float
    alpha: np.ndarray  # (R,)
    beta: np.ndarray  # (R, d)
    gamma: np.ndarray  # (R,)
    theta: np.ndarray  # (R,)
    s_y: float
    true_tau: float

    M = 1
    kind = "param_static"


@dataclass(frozen=True)
class SemiparamStatic:
    """Sinusoidal static outcome; h is fixed, only the signal s varies."""

    layout: SpatialLayout
    s: float
    true_tau: float

    M = 1
    kind = "semiparam_static"


@dataclass(frozen=True)
class ParamDynamic:
    """Linear outcome plus AR(1) covariate transition, M intervals per day.

    Arrays are indexed [unit, interval] with d=1 covariates; `carryover`
    accepts the general matrix form, but the simulation suite is scalar.
    """

    layout: SpatialLayout
    s: float
    M: int
    alpha: np.ndarray  # (R, M)
    beta: np.ndarray  # (R, M)
    gamma: np.ndarray  # (R, M)
    theta: np.ndarray  # (R, M)
    Lam: np.ndarray  # (R, M)
    B: np.ndarray  # (R, M), values in [0.3, 0.8]
    Gam: np.ndarray  # (R, M)
    Theta: np.ndarray  # (R, M)
    s_x: float
    s_y: float
    true_tau: float
    E_scale: float = 0.1

    kind = "param_dynamic"


@dataclass(frozen=True)
class NonparamDynamic:
    """Sinusoidal dynamic outcome; covariate mean tracks the current arm."""

    layout: SpatialLayout
    s: float
    M: int
    v: np.ndarray  # (R,) low-rank loading, 0 outside the drawn subset
    cov: np.ndarray  # (R, R) covariate covariance
    cov_factor: np.ndarray
    true_tau: float

    kind = "nonparam_dynamic"


def _uniform_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def make_param_static_spec(layout: SpatialLayout, s: float, rng) -> ParamStatic:
    """Draw the static linear model at signal strength s (percent)."""
    if s < 0:
        raise DgpError("signal s must be nonnegative")
    rng = _uniform_rng(rng)
    f1, g1, f2, g2 = (FourierSeries.draw(rng) for _ in range(4))
    x, y = layout.coords[:, 0], layout.coords[:, 1]
    alpha = 8.0 + 2.0 * (f1(x) + g1(y))
    beta = (f2(x) + g2(y))[:, None]  # d = 1
    # s% of the expected control-arm total outcome, E[O] = 4
    control_total = float(np.sum(alpha) + 4.0 * np.sum(beta))
    s_y = (s / 100.0) * control_total
    gamma = s_y * alpha / alpha.sum()
    theta = 0.6 * s_y * beta[:, 0] / beta[:, 0].sum()
    tau = float(np.sum(gamma + theta))
    if not np.isfinite(tau):
        raise DgpError("non-finite coefficients in static spec")
    return ParamStatic(
        layout=layout, s=float(s), alpha=alpha, beta=beta, gamma=gamma,
        theta=theta, s_y=s_y, true_tau=tau,
    )


def _semiparam_tau(layout: SpatialLayout, s: float) -> float:
    # exact: outcomes are linear in O + Obar whose expectation is 8
    phi = (math.pi / 8.0) * (layout.coords[:, 0] + layout.coords[:, 1])
    return float(np.sum(24.0 * (np.sin(phi + 1.5 * s) - np.sin(phi))))


def make_semiparam_static_spec(layout: SpatialLayout, s: float) -> SemiparamStatic:
    if s < 0:
        raise DgpError("signal s must be nonnegative")
    return SemiparamStatic(
        layout=layout, s=float(s), true_tau=_semiparam_tau(layout, s)
    )


def make_param_dynamic_spec(
    layout: SpatialLayout, s: float, M: int, rng
) -> ParamDynamic:
    """Draw the dynamic linear model: M intervals, scalar covariate."""
    if s < 0:
        raise DgpError("signal s must be nonnegative")
    if M < 1:
        raise DgpError("M must be at least 1")
    rng = _uniform_rng(rng)
    f1, g1, f2, g2, f3, g3, f4, g4 = (FourierSeries.draw(rng) for _ in range(8))
    h1, h2, h3, h4 = (FourierSeries.draw(rng) for _ in range(4))
    x, y = layout.coords[:, 0], layout.coords[:, 1]
    t = np.arange(1, M + 1, dtype=np.float64) / M  # normalized time
    alpha = np.outer(8.0 + 2.0 * (f1(x) + g1(y)), h1(t))
    beta = np.outer(f2(x) + g2(y), h2(t))
    Lam = np.outer(f3(x) + g3(y), h3(t))
    B0 = np.outer(f4(x) + g4(y), h4(t))
    span = B0.max() - B0.min()
    if span > 0:
        B = 0.3 + 0.5 * (B0 - B0.min()) / span
    else:  # constant draw (measure zero): midpoint of the target range
        B = np.full_like(B0, 0.55)

    # control-arm means: E O_1 = 4, then the homogeneous recursion
    EO = np.empty((layout.R, M))
    EO[:, 0] = 4.0
    for k in range(M - 1):
        EO[:, k + 1] = Lam[:, k] + B[:, k] * EO[:, k]
    EY = alpha + beta * EO
    s_x = (s / 100.0) * float(EO.sum())
    s_y = (s / 100.0) * float(EY.sum())

    gamma = s_y * alpha / alpha.sum()
    theta = 0.6 * s_y * beta / beta.sum()
    Gam = s_x * Lam / Lam.sum()
    Theta = 0.6 * s_x * B / B.sum()

    from spatial_ab.ols import carryover  # deferred: ols never imports dgp

    c = carryover(beta, B)
    tau = float(np.sum(gamma + theta + c * (Gam + Theta)))
    if not np.isfinite(tau):
        raise DgpError("non-finite coefficients in dynamic spec")
    return ParamDynamic(
        layout=layout, s=float(s), M=int(M), alpha=alpha, beta=beta,
        gamma=gamma, theta=theta, Lam=Lam, B=B, Gam=Gam, Theta=Theta,
        s_x=s_x, s_y=s_y, true_tau=tau,
    )


def _nonparam_tau(layout: SpatialLayout, s: float, M: int) -> float:
    x, y = layout.coords[:, 0], layout.coords[:, 1]
    t = np.arange(1, M + 1, dtype=np.float64) / M
    psi = (math.pi / 8.0) * (x[:, None] + y[:, None] + t[None, :])
    return float(np.sum(6.0 * np.sin(psi + 2.0 * s) - 4.0 * np.sin(psi)))


def make_nonparam_dynamic_spec(
    layout: SpatialLayout, s: float, M: int, rho: float, rng
) -> NonparamDynamic:
    if s < 0:
        raise DgpError("signal s must be nonnegative")
    if M < 1:
        raise DgpError("M must be at least 1")
    if not 0.0 <= rho < 1.0:
        raise DgpError(f"rho must lie in [0, 1), got {rho}")
    rng = _uniform_rng(rng)
    R = layout.R
    v = np.zeros(R)
    size = math.ceil(rho * R)
    if size:
        idx = rng.choice(R, size=size, replace=False)
        v[idx] = rng.uniform(0.75, 1.0, size=size)
    cov = np.outer(v, v)
    np.fill_diagonal(cov, 1.0)
    return NonparamDynamic(
        layout=layout, s=float(s), M=int(M), v=v, cov=cov,
        cov_factor=_psd_root(cov), true_tau=_nonparam_tau(layout, s, M),
    )


# ---------------------------------------------------------------------------
# simulation


def _check_shapes(spec, assignments: AssignmentTensor, n_days: int):
    N, R, M = assignments.A.shape
    if N != n_days:
        raise DgpError(f"assignment tensor has {N} days, expected {n_days}")
    if R != spec.layout.R:
        raise DgpError("assignment tensor does not match the spec's layout")
    if M != spec.M:
        raise DgpError(f"spec expects M={spec.M} intervals, assignments have {M}")


def _truncated_normal(rng, shape, lo=3.0, hi=5.0):
    # rejection against N(4,1); acceptance ~0.68 per draw
    out = rng.normal(4.0, 1.0, size=shape)
    bad = (out <= lo) | (out >= hi)
    while bad.any():
        out[bad] = rng.normal(4.0, 1.0, size=int(bad.sum()))
        bad = (out <= lo) | (out >= hi)
    return out


def simulate(
    spec,
    assignments: AssignmentTensor,
    noise: NoiseModel,
    n_days: int,
    seed: int,
    freeze_covariates: bool = False,
) -> PanelData:
    """Generate a panel.  Draw order is covariates, then outcome noise, then
    transition noise, all keyed by seed alone, so panels simulated under
    different designs with one seed share every stochastic input except A.

    freeze_covariates pins covariates at their mean path (kinds whose
    estimators do not regress on covariate variation), for exactness checks.
    """
    _check_shapes(spec, assignments, n_days)
    layout = spec.layout
    N, R, M = assignments.A.shape
    A, Abar = assignments.A, assignments.Abar
    rng = np.random.default_rng(derive_seed(seed, _COVARIATE_SALT))

    if spec.kind == "param_static":
        O = rng.normal(4.0, 1.0, size=(N, R, 1, 1))
        e = noise.draw(rng, N, 1)
        Y = (
            spec.alpha[None, :, None]
            + np.einsum("nrmj,rj->nrm", O, spec.beta)
            + spec.gamma[None, :, None] * A
            + spec.theta[None, :, None] * Abar
            + e
        )
        return PanelData(layout=layout, O=O, A=A, Abar=Abar, Y=Y)

    if spec.kind == "semiparam_static":
        if freeze_covariates:
            rng.normal(4.0, 1.0, size=(N, R))  # keep the draw order stable
            O = np.full((N, R, 1, 1), 4.0)
        else:
            O = _truncated_normal(rng, (N, R))[:, :, None, None]
        e = noise.draw(rng, N, 1)
        Obar = mean_field(layout, O[:, :, :, 0])
        phi = (math.pi / 8.0) * (layout.coords[:, 0] + layout.coords[:, 1])
        Y = (
            5.0
            + 3.0
            * (O[:, :, :, 0] + Obar)
            * np.sin(phi[None, :, None] + spec.s * A + 0.5 * spec.s * Abar)
            + 0.5 * e
        )
        return PanelData(layout=layout, O=O, A=A, Abar=Abar, Y=Y)

    if spec.kind == "param_dynamic":
        O1 = rng.normal(4.0, 1.0, size=(N, R))
        e = noise.draw(rng, N, M)
        E = spec.E_scale * noise.draw(rng, N, M - 1) if M > 1 else None
        O = np.empty((N, R, M, 1))
        O[:, :, 0, 0] = O1
        for k in range(M - 1):
            O[:, :, k + 1, 0] = (
                spec.Lam[None, :, k]
                + spec.B[None, :, k] * O[:, :, k, 0]
                + spec.Gam[None, :, k] * A[:, :, k]
                + spec.Theta[None, :, k] * Abar[:, :, k]
                + E[:, :, k]
            )
        Y = (
            spec.alpha[None, :, :]
            + spec.beta[None, :, :] * O[:, :, :, 0]
            + spec.gamma[None, :, :] * A
            + spec.theta[None, :, :] * Abar
            + e
        )
        return PanelData(layout=layout, O=O, A=A, Abar=Abar, Y=Y)

    if spec.kind == "nonparam_dynamic":
        z = rng.standard_normal((N, M, R)) @ spec.cov_factor.T
        if freeze_covariates:
            z = np.zeros_like(z)
        e = noise.draw(rng, N, M)
        O = (2.0 + A + np.swapaxes(z, 1, 2))[:, :, :, None]
        x, y = layout.coords[:, 0], layout.coords[:, 1]
        t = np.arange(1, M + 1, dtype=np.float64) / M
        psi = (math.pi / 8.0) * (x[:, None] + y[:, None] + t[None, :])
        Y = (
            5.0
            + 2.0 * O[:, :, :, 0] * np.sin(psi[None] + spec.s * (A + Abar))
            + 0.5 * e
        )
        return PanelData(layout=layout, O=O, A=A, Abar=Abar, Y=Y)

    raise DgpError(f"unknown spec kind {getattr(spec, 'kind', None)!r}")


# ---------------------------------------------------------------------------
# true effects


def true_ate(spec) -> float:
    """Exact expected all-treated minus all-control total outcome."""
    return float(spec.true_tau)


def _forced_assignments(layout, arm: float, N: int, M: int) -> AssignmentTensor:
    from spatial_ab.design import DesignSpec

    shape = (N, layout.R, M)
    design = DesignSpec(spatial="global", temporal="constant", p=0.5)
    return AssignmentTensor(
        A=np.full(shape, float(arm)), Abar=np.full(shape, float(arm)),
        design=design, seed=-1,
    )


def true_ate_mc(spec, noise: NoiseModel, mc_samples: int = 10_000, seed: int = 0):
    """Rollout estimate of the ATE: paired all-1 vs all-0 policies.

    Returns (estimate, standard error).  Both arms reuse the same seed, so
    covariate and noise draws cancel exactly where the DGP allows.
    """
    if mc_samples < 10_000:
        raise DgpError("mc_samples must be at least 1e4")
    layout, M = spec.layout, spec.M
    panels = [
        simulate(spec, _forced_assignments(layout, a, mc_samples, M),
                 noise, mc_samples, seed)
        for a in (1.0, 0.0)
    ]
    delta = panels[0].Y.sum(axis=(1, 2)) - panels[1].Y.sum(axis=(1, 2))
    return float(delta.mean()), float(delta.std(ddof=1) / math.sqrt(mc_samples))
