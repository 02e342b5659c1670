"""Instantaneous model analytics: FX variances/covariances, the stochastic
skew correlation, and short-rate/FX and short-rate/variance correlations.

All covariations are computed from the generic identity

    d< Tr[U sqrt(Sigma) dZ], Tr[V sqrt(Sigma) dZ] > = Tr[U Sigma V'] dt

and its dW analogues (the factor noise contributes twice, the rate noise is
2 Tr[Q H sqrt(Sigma) dW]), rather than from pasted closed forms; constant
factors then cancel inside the correlation ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError, NumericError
from .linalg import PsdMat
from .params import FxPairSpec, WishartParams

__all__ = [
    "InstantCorrReport",
    "fx_instant_var",
    "fx_instant_cov",
    "skew_corr",
    "rate_fx_corr",
    "rate_var_corr",
    "instant_report",
]

_VAR_FLOOR = 1e-14


@dataclass(frozen=True)
class InstantCorrReport:
    """A correlation between two instantaneous noises, with both variance legs.

    For the rate/variance report, ``var_fx`` holds the first leg's variance
    (the quadratic variation rate of the FX variance process).
    """

    var_fx: float
    var_rate: float
    covar: float
    corr: float

    def __post_init__(self):
        if self.var_fx < -_VAR_FLOOR or self.var_rate < -_VAR_FLOOR:
            raise NumericError("negative variance leg in correlation report")
        if abs(self.corr) > 1.0 + 1e-12:
            raise NumericError(f"correlation {self.corr} outside [-1, 1]")


def _corr(covar: float, var_a: float, var_b: float) -> float:
    c = covar / np.sqrt(var_a * var_b)
    if abs(c) > 1.0 + 1e-12:
        raise NumericError(f"correlation {c} outside [-1, 1]")
    return float(np.clip(c, -1.0, 1.0))


def _as_state(sigma, dim: int) -> np.ndarray:
    s = np.asarray(sigma, dtype=float)
    if s.shape != (dim, dim):
        raise DataError(f"sigma must have shape ({dim}, {dim}), got {s.shape}")
    return s


def fx_instant_var(pair: FxPairSpec, sigma: PsdMat | np.ndarray) -> float:
    """Instantaneous variance of the pair's log rate: Tr[(A_i-A_j) Sigma (A_i-A_j)].

    Nonnegative by self-duality of the PSD cone.
    """
    s = _as_state(sigma, pair.dim)
    delta = pair.vol_proj_diff
    v = float(np.trace(delta @ s @ delta))
    return max(v, 0.0) if v > -_VAR_FLOOR else v


def fx_instant_cov(
    pair_ij: FxPairSpec, pair_il: FxPairSpec, sigma: PsdMat | np.ndarray
) -> float:
    """Instantaneous covariance of two log rates sharing the domestic leg."""
    if pair_ij.dom.label != pair_il.dom.label:
        raise DataError("covariance requires a common domestic currency")
    s = _as_state(sigma, pair_ij.dim)
    return float(np.trace(pair_ij.vol_proj_diff @ s @ pair_il.vol_proj_diff))


def skew_corr(pair: FxPairSpec, p: WishartParams, sigma: PsdMat | np.ndarray) -> float:
    """Correlation between the log-FX noise and its variance-process noise.

    This is the quantity steering the (stochastic) skew of the pair's smile.
    """
    s = _as_state(sigma, pair.dim)
    delta = pair.vol_proj_diff
    q, r = p.vol_of_vol, p.corr
    var_fx = fx_instant_var(pair, s)
    d2 = delta @ delta
    var_var = float(np.trace(d2 @ s @ d2 @ q.T @ q))
    if var_fx <= _VAR_FLOOR or var_var <= _VAR_FLOOR:
        raise DegenerateInputError("zero instantaneous variance leg in skew correlation")
    covar = float(np.trace(delta @ s @ d2 @ q.T @ r))
    return _corr(covar, var_fx, var_var)


def rate_fx_corr(
    pair: FxPairSpec, p: WishartParams, sigma: PsdMat | np.ndarray
) -> InstantCorrReport:
    """Correlation between the domestic short rate and the pair's log rate."""
    s = _as_state(sigma, pair.dim)
    delta = pair.vol_proj_diff
    q, r = p.vol_of_vol, p.corr
    h_mat = pair.dom.rate_loading.full
    var_fx = fx_instant_var(pair, s)
    var_rate = 4.0 * float(np.trace(q @ h_mat @ s @ h_mat @ q.T))
    if var_fx <= _VAR_FLOOR or var_rate <= _VAR_FLOOR:
        raise DegenerateInputError("degenerate variance leg in rate/FX correlation")
    covar = 2.0 * float(np.trace(delta @ s @ h_mat @ q.T @ r))
    return InstantCorrReport(
        var_fx=var_fx,
        var_rate=var_rate,
        covar=covar,
        corr=_corr(covar, var_fx, var_rate),
    )


def rate_var_corr(
    pair: FxPairSpec, p: WishartParams, sigma: PsdMat | np.ndarray
) -> InstantCorrReport:
    """Correlation between the domestic short rate and the FX variance process."""
    s = _as_state(sigma, pair.dim)
    delta = pair.vol_proj_diff
    q = p.vol_of_vol
    h_mat = pair.dom.rate_loading.full
    d2 = delta @ delta
    var_var = 4.0 * float(np.trace(d2 @ s @ d2 @ q.T @ q))
    var_rate = 4.0 * float(np.trace(q @ h_mat @ s @ h_mat @ q.T))
    if var_var <= _VAR_FLOOR or var_rate <= _VAR_FLOOR:
        raise DegenerateInputError("degenerate variance leg in rate/variance correlation")
    covar = 4.0 * float(np.trace(d2 @ s @ h_mat @ q.T @ q))
    return InstantCorrReport(
        var_fx=var_var,
        var_rate=var_rate,
        covar=covar,
        corr=_corr(covar, var_var, var_rate),
    )


def instant_report(
    pair: FxPairSpec, p: WishartParams, sigma: PsdMat | np.ndarray
) -> dict:
    """All instantaneous analytics for one pair, JSON-serializable."""
    s = _as_state(sigma, pair.dim)
    out: dict = {
        "pair": f"{pair.dom.label}/{pair.for_.label}",
        "fx_instant_var": fx_instant_var(pair, s),
        "fx_instant_vol": float(np.sqrt(max(fx_instant_var(pair, s), 0.0))),
        "short_rate_dom": pair.dom.short_rate(s),
        "short_rate_for": pair.for_.short_rate(s),
    }
    try:
        out["skew_corr"] = skew_corr(pair, p, s)
    except DegenerateInputError:
        out["skew_corr"] = None
    for name, fn in (("rate_fx", rate_fx_corr), ("rate_var", rate_var_corr)):
        try:
            rep = fn(pair, p, s)
            out[f"{name}_corr"] = rep.corr
            out[f"{name}_covar"] = rep.covar
        except DegenerateInputError:
            out[f"{name}_corr"] = None
            out[f"{name}_covar"] = None
    return out
