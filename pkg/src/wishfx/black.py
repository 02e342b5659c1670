"""Black-Scholes utilities on the (log-spot, total-variance) coordinates.

Prices are written as C = df * (F N(d+) - K N(d-)) with d± = m/sqrt(v) ± sqrt(v)/2,
m = log(F/K), v = sigma^2 * tau.  The partial derivatives with respect to
x = log(spot) and v are the building blocks of the vol-of-vol price expansion;
they are expressed as ratios against dC/dv, which is the only place the
Gaussian density enters.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DataError, NumericError

__all__ = [
    "bs_call",
    "bs_vega_total_var",
    "bs_partials",
    "implied_vol",
    "norm_cdf",
    "norm_ppf",
]

norm_cdf = ndtr
norm_ppf = ndtri

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _norm_pdf(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def bs_call(forward: float, strike: float, total_var: float, discount: float = 1.0) -> float:
    """Undamped Black call on a forward with total variance v = sigma^2 tau."""
    if strike <= 0 or forward <= 0:
        raise DataError("forward and strike must be positive")
    if total_var < 0:
        raise DataError("total variance must be >= 0")
    if total_var == 0.0:
        return discount * max(forward - strike, 0.0)
    sq = math.sqrt(total_var)
    m = math.log(forward / strike)
    d_plus = m / sq + 0.5 * sq
    d_minus = d_plus - sq
    return discount * (forward * float(ndtr(d_plus)) - strike * float(ndtr(d_minus)))


def bs_vega_total_var(forward: float, strike: float, total_var: float, discount: float = 1.0) -> float:
    """dC/dv at constant log-spot; v is the total variance."""
    sq = math.sqrt(total_var)
    d_plus = math.log(forward / strike) / sq + 0.5 * sq
    return discount * forward * float(_norm_pdf(d_plus)) / (2.0 * sq)


def bs_partials(forward: float, strike: float, total_var: float, discount: float = 1.0) -> dict:
    """BS partials in (x, v): dv, dxdv, dvdv, dxxdv, dxxdvdv.

    Everything is proportional to dC/dv; the ratios are rational in
    m = log(F/K) and v, so higher partials cost nothing extra.
    """
    v = total_var
    m = math.log(forward / strike)
    dv = bs_vega_total_var(forward, strike, v, discount)
    r_xv = 0.5 - m / v
    r_vv = m * m / (2.0 * v * v) - 1.0 / (2.0 * v) - 0.125
    r_xxv = r_xv * r_xv - 1.0 / v
    dr_xxv_dv = 2.0 * r_xv * (m / (v * v)) + 1.0 / (v * v)
    r_xxvv = r_vv * r_xxv + dr_xxv_dv
    return {
        "dv": dv,
        "dxdv": dv * r_xv,
        "dvdv": dv * r_vv,
        "dxxdv": dv * r_xxv,
        "dxxdvdv": dv * r_xxvv,
    }


def implied_vol(
    price: float,
    forward: float,
    strike: float,
    tau: float,
    discount: float = 1.0,
) -> float:
    """Black implied volatility via safeguarded Newton (bisection fallback).

    The price must sit inside the no-arbitrage band
    [max(df*(F-K), 0), df*F]; the result reprices to |error| < 1e-10.
    """
    if tau <= 0:
        raise DataError("tau must be > 0")
    lower = max(discount * (forward - strike), 0.0)
    upper = discount * forward
    if price < lower - 1e-12 or price > upper + 1e-12:
        raise DataError(
            f"price {price} outside no-arbitrage bounds [{lower}, {upper}]"
        )
    if price <= lower + 1e-300:
        return 0.0

    lo, hi = 1e-9, 5.0
    # expand the ceiling if needed (deep wings at extreme vols)
    while bs_call(forward, strike, hi * hi * tau, discount) < price and hi < 50.0:
        hi *= 2.0
    sigma = 0.2 if lo < 0.2 < hi else 0.5 * (lo + hi)
    for _ in range(100):
        v = sigma * sigma * tau
        val = bs_call(forward, strike, v, discount)
        diff = val - price
        if abs(diff) < 1e-10:
            return sigma
        if diff > 0:
            hi = min(hi, sigma)
        else:
            lo = max(lo, sigma)
        vega = bs_vega_total_var(forward, strike, v, discount) * 2.0 * sigma * tau
        if vega > 1e-14:
            step = sigma - diff / vega
        else:
            step = 0.5 * (lo + hi)
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
    raise NumericError("implied volatility iteration failed to converge")
