"""Zero-coupon bonds, yield curves, and cap/floor pricing.

Single-curve framework: one short rate per currency, discounting and Libor
projection off the same curve.  A caplet is priced as a put on a zero-coupon
bond through the damped Fourier inversion

    Put(k) = exp(alpha k) / pi * int_0^inf Re[ exp(-i v k) psi(v) ] dv,

where psi(v) is the discounted MGF of the log bond price at the reset date
evaluated at omega = 1 - alpha + i v, divided by
(alpha^2 - alpha - v^2 + i(-2 alpha + 1) v).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DampingError, DataError, NumericError, TransformExplosionError
from .fxpricer import FourierConfig, _damped_integral
from .params import CurrencySpec, WishartParams, to_measure
from .transform import _affine_core, zcb_transform

__all__ = [
    "YieldCurve",
    "CapSpec",
    "zcb_price",
    "yield_curve",
    "caplet_price",
    "cap_price",
]


@dataclass(frozen=True)
class YieldCurve:
    """Continuously compounded zero yields on strictly increasing tenors."""

    tenors: tuple[float, ...]
    yields: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.tenors, dtype=float)
        y = np.asarray(self.yields, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size == 0:
            raise DataError("tenors and yields must be equal-length 1-d sequences")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise DataError("tenors must be positive and strictly increasing")
        object.__setattr__(self, "tenors", tuple(float(v) for v in t))
        object.__setattr__(self, "yields", tuple(float(v) for v in y))

    def rate(self, tau: float) -> float:
        """Linear interpolation in yield, flat extrapolation."""
        return float(np.interp(tau, self.tenors, self.yields))

    def discount(self, tau: float) -> float:
        return float(np.exp(-self.rate(tau) * tau))


@dataclass(frozen=True)
class CapSpec:
    """A strip of caplets: reset dates paired with payment dates."""

    reset_dates: tuple[float, ...]
    pay_dates: tuple[float, ...]
    notional: float
    strike_rate: float
    tau_accrual: float

    def __post_init__(self):
        r = np.asarray(self.reset_dates, dtype=float)
        q = np.asarray(self.pay_dates, dtype=float)
        if r.shape != q.shape or r.ndim != 1:
            raise DataError("reset and pay date lists must have equal length")
        if r.size and (np.any(np.diff(r) <= 0) or np.any(np.diff(q) <= 0)):
            raise DataError("dates must be strictly increasing")
        if np.any(q <= r):
            raise DataError("each pay date must follow its reset date")
        if r.size > 1 and np.abs(q[:-1] - r[1:]).max() > 1e-12:
            raise DataError("pay date k must equal reset date k+1")
        if self.notional <= 0:
            raise DataError("notional must be positive")
        if self.tau_accrual <= 0:
            raise DataError("accrual period must be positive")
        object.__setattr__(self, "reset_dates", tuple(float(v) for v in r))
        object.__setattr__(self, "pay_dates", tuple(float(v) for v in q))


def zcb_price(cur: CurrencySpec, p: WishartParams, sigma, tau: float) -> float:
    """Zero-coupon bond price under the currency's own risk-neutral measure."""
    sol = zcb_transform(cur, p, tau)
    price = float(np.real(sol.value(sigma)))
    if price <= 0:
        raise NumericError(f"non-positive bond price at tau={tau}")
    return price


def yield_curve(cur: CurrencySpec, p: WishartParams, sigma, tenors) -> YieldCurve:
    """Y(tau) = -log P(tau) / tau pointwise over the requested tenors."""
    tenors = np.asarray(tenors, dtype=float)
    if np.any(tenors <= 0):
        raise DataError("tenors must be positive")
    s = np.asarray(sigma, dtype=float)
    ys = []
    for tau in tenors:
        sol = zcb_transform(cur, p, float(tau))
        expo = np.real(sol.a + np.trace(sol.b @ s))
        ys.append(-expo / tau)
    return YieldCurve(tenors=tuple(tenors), yields=tuple(ys))


def _logbond_grid(cur, p, omegas, t_reset, t_pay, sigma, n_nodes=64):
    """Discounted MGF of log P(t_reset, t_pay) on a batch of omegas."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=complex))
    inner = zcb_transform(cur, p, t_pay - t_reset, n_nodes=n_nodes)
    m_eff = to_measure(p, cur).m_eff
    nb = omegas.size
    xb = np.broadcast_to(m_eff.astype(complex), (nb, p.dim, p.dim))
    yb = np.broadcast_to(-cur.rate_loading.full.astype(complex), (nb, p.dim, p.dim))
    b0 = omegas[:, None, None] * inner.b[None]
    logdet, b, _, _ = _affine_core(xb, yb, p.qtq, t_reset, b0, n_nodes)
    a_outer = (
        -0.5 * p.beta * (logdet + t_reset * np.trace(m_eff))
        - cur.rate_shift * t_reset
    )
    s = np.asarray(sigma, dtype=float)
    tr_bs = np.einsum("bij,ji->b", b, s)
    out = np.exp(omegas * inner.a + a_outer + tr_bs)
    if not np.all(np.isfinite(out)):
        raise TransformExplosionError(
            f"log-bond transform overflow at t_reset={t_reset}", tau_star=t_reset
        )
    return out


def caplet_price(
    cur: CurrencySpec,
    p: WishartParams,
    sigma,
    t_reset: float,
    t_pay: float,
    strike_rate: float,
    notional: float,
    cfg: FourierConfig | None = None,
) -> float:
    """One caplet as N (1 + tau K) puts on the bond P(t_reset, t_pay).

    The bond strike is 1 / (1 + tau K); alpha > 0 damps the put transform and
    is probed for admissibility before quadrature (tolerance 1e-9).
    """
    cfg = cfg or FourierConfig(lambda_max=2000.0, quad_tol=1e-9)
    if not (0.0 <= t_reset < t_pay):
        raise DataError("need 0 <= t_reset < t_pay")
    tau_acc = t_pay - t_reset
    bond_strike = 1.0 / (1.0 + tau_acc * strike_rate)
    if bond_strike <= 0:
        raise DataError("1 + tau*K must be positive")

    if np.abs(cur.rate_loading.full).max() == 0.0:
        # deterministic rates: the bond at reset is a point mass, where the
        # Fourier tail decays too slowly; the price is available exactly
        h = cur.rate_shift
        payoff = max(bond_strike - np.exp(-h * tau_acc), 0.0)
        return notional * (1.0 + tau_acc * strike_rate) * np.exp(-h * t_reset) * payoff

    k = np.log(bond_strike)
    alpha = cfg.alpha

    # admissibility probe at the real damping point omega = 1 - alpha
    try:
        probe = _logbond_grid(cur, p, np.array([1.0 - alpha]), t_reset, t_pay, sigma)
    except TransformExplosionError as exc:
        raise DampingError(
            f"log-bond MGF explodes at omega = 1-alpha = {1 - alpha}; "
            "use a smaller alpha"
        ) from exc
    if not np.isfinite(probe[0]):
        raise DampingError("log-bond MGF not finite at the damping point")

    def psi_on(v):
        num = _logbond_grid(cur, p, 1.0 - alpha + 1j * v, t_reset, t_pay, sigma)
        den = alpha * alpha - alpha - v * v + 1j * (1.0 - 2.0 * alpha) * v
        return num / den

    integral = _damped_integral(psi_on, np.array([k]), cfg.lambda_max, cfg.quad_tol * np.pi)
    put = float(np.exp(alpha * k) / np.pi * integral[0])
    if put < -1e-8:
        raise NumericError(f"negative bond put value {put:.3e}")
    return notional * (1.0 + tau_acc * strike_rate) * max(put, 0.0)


def cap_price(
    spec: CapSpec,
    cur: CurrencySpec,
    p: WishartParams,
    sigma,
    cfg: FourierConfig | None = None,
) -> float:
    """Sum of the strip's caplets."""
    total = 0.0
    for t_reset, t_pay in zip(spec.reset_dates, spec.pay_dates):
        total += caplet_price(
            cur, p, sigma, t_reset, t_pay, spec.strike_rate, spec.notional, cfg
        )
    return total
