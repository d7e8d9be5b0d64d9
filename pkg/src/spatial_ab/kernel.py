"""Product-Gaussian local-constant regression.

One learner serves every nuisance regression in the package: outcomes on
(treatment, mean field, covariates) and value functions on state vectors.
Local-constant (Nadaraya-Watson) smoothing keeps the learner assumption-free
and strictly data-driven; with a Gaussian kernel the prediction is finite at
any query point, so importance-weighted estimators never see NaN.

Dimensions are standardized by their sample deviation before a shared
bandwidth of max(n^(-1/5), 0.05) applies.  Dimensions with (numerically)
zero variance carry no contrast and drop out of the kernel product; queries
that disagree with such a dimension's constant are answered by the training
mean and flagged as extrapolation, as are queries far from every training
point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelConfig:
    bandwidth_floor: float = 0.05
    degenerate_tol: float = 1e-12
    # max log kernel weight below this marks the query as out-of-hull
    extrapolation_cut: float = -8.0
    query_block: int = 512


DEFAULT_CONFIG = KernelConfig()


class KernelRegressor:
    """Nadaraya-Watson estimate of E[Y | X] with a product Gaussian kernel."""

    def __init__(self, config: KernelConfig = DEFAULT_CONFIG):
        self.config = config

    def fit(self, X: np.ndarray, Y: np.ndarray) -> "KernelRegressor":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.asarray(Y, dtype=np.float64)
        n, D = X.shape
        if n != len(Y):
            raise ValueError(f"{n} rows of X against {len(Y)} responses")
        if n < 1:
            raise ValueError("cannot fit on an empty sample")
        sigma = X.std(axis=0, ddof=1) if n > 1 else np.zeros(D)
        self._active = sigma > self.config.degenerate_tol
        self._sigma = sigma[self._active]
        self._const = X[0, ~self._active]  # inert dims hold these values
        self._h = max(n ** -0.2, self.config.bandwidth_floor)
        self._Z = X[:, self._active] / self._sigma
        self._sqnorm = (self._Z * self._Z).sum(axis=1)
        self._Y = Y
        self._mean = float(Y.mean())
        return self

    def _log_weights(self, Zq: np.ndarray) -> np.ndarray:
        # (m, n) log kernel weights, additive constants dropped; the squared
        # distance expands to a single matrix product, cancellation clipped
        sq = (
            (Zq * Zq).sum(axis=1)[:, None]
            + self._sqnorm[None, :]
            - 2.0 * (Zq @ self._Z.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return -0.5 * sq / (self._h * self._h)

    def predict_flagged(self, Xq: np.ndarray):
        """Predictions plus a per-query out-of-hull indicator."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        m = Xq.shape[0]
        off_const = (
            np.abs(Xq[:, ~self._active] - self._const).max(axis=1) > 1e-6
            if (~self._active).any()
            else np.zeros(m, dtype=bool)
        )
        if not self._active.any():
            return np.full(m, self._mean), off_const
        out = np.empty(m)
        far = np.empty(m, dtype=bool)
        Zq = Xq[:, self._active] / self._sigma
        block = self.config.query_block
        for lo in range(0, m, block):
            lw = self._log_weights(Zq[lo:lo + block])
            top = lw.max(axis=1)
            w = np.exp(lw - top[:, None])
            out[lo:lo + block] = (w @ self._Y) / w.sum(axis=1)
            far[lo:lo + block] = top < self.config.extrapolation_cut
        return out, far | off_const

    def predict(self, Xq: np.ndarray) -> np.ndarray:
        return self.predict_flagged(Xq)[0]
