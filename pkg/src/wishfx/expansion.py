"""Asymptotic approximations in the vol-of-vol scale.

Scaling the factor's diffusion matrix Q by alpha (holding the risk-neutral
drift matrix and the constant drift term beta Q'Q fixed) expands the log-FX
transform exponent in powers of alpha.  The expansion coefficients are
iterated Lyapunov-type integrals

    B0(tau) = int_0^tau e^{s M'} D^2 e^{s M} ds,          D = A_dom - A_for,
    B1(tau) = int_0^tau e^{(tau-u) M'} (B0(u) Q'R D + D R'Q B0(u)) e^{(tau-u) M} du,
    B20, B21 analogous with 2 B0 Q'Q B0 and the B1 kernel,

plus scalar companions Ak = beta Tr[Q'Q int_0^tau Bk(u) du].  Two consumers:

  * ``price_expansion``  - call price as Black-Scholes plus alpha/alpha^2
    corrections through BS partials in (log-spot, integrated variance);
  * ``shortmat_impvar``  - short-maturity implied-variance expansion in
    log-moneyness, closed form in the instantaneous trace statistics.

Both assume constant short rates (zero rate loadings); that hypothesis is
enforced, not approximated away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .black import bs_call, bs_partials
from .errors import DataError, DegenerateInputError, UnsupportedRegimeError
from .linalg import PsdMat
from .params import CurrencySpec, FxPairSpec, WishartParams, to_measure

__all__ = [
    "ExpansionCoeffs",
    "expansion_coeffs",
    "price_expansion",
    "shortmat_impvar",
    "scaled_vol_of_vol_model",
]


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Matrix and scalar expansion coefficients at one maturity."""

    b0: np.ndarray
    b1: np.ndarray
    b20: np.ndarray
    b21: np.ndarray
    a0: float
    a1: float
    a20: float
    a21: float
    tau: float


def _van_loan_integral(m_tilde: np.ndarray, c: np.ndarray, tau: float) -> np.ndarray:
    """int_0^tau e^{s M'} C e^{s M} ds via one stacked block exponential."""
    d = m_tilde.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = -m_tilde.T
    block[:d, d:] = c
    block[d:, d:] = m_tilde
    e = scipy.linalg.expm(tau * block)
    return scipy.linalg.expm(tau * m_tilde.T) @ e[:d, d:]


def _gl_nodes(n: int, a: float, b: float):
    from scipy.special import roots_legendre

    x, w = roots_legendre(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


class _CoeffEngine:
    """Evaluates the iterated integrals for one (pair, measure) context."""

    def __init__(self, pair: FxPairSpec, p: WishartParams):
        self.m_tilde = to_measure(p, pair.dom).m_eff
        self.delta = pair.vol_proj_diff
        self.d2 = self.delta @ self.delta
        q, r = p.vol_of_vol, p.corr
        self.qtrd = q.T @ r @ self.delta  # Q'R D
        self.qtq = p.qtq
        self.beta = p.beta
        self._flows: dict[float, np.ndarray] = {}

    def flow(self, s: float) -> np.ndarray:
        got = self._flows.get(s)
        if got is None:
            got = scipy.linalg.expm(s * self.m_tilde)
            self._flows[s] = got
        return got

    def b0(self, u: float) -> np.ndarray:
        return _van_loan_integral(self.m_tilde, self.d2, u)

    def _propagated_quadrature(self, kernel, tau: float, n: int) -> np.ndarray:
        """int_0^tau e^{(tau-u) M'} kernel(u) e^{(tau-u) M} du by Gauss-Legendre."""
        us, ws = _gl_nodes(n, 0.0, tau)
        acc = np.zeros_like(self.m_tilde)
        for u, w in zip(us, ws):
            e = self.flow(tau - u)
            acc = acc + w * (e.T @ kernel(u) @ e)
        return acc

    def b1(self, tau: float, n: int) -> np.ndarray:
        def kernel(u):
            b0u = self.b0(u)
            return b0u @ self.qtrd + self.qtrd.T @ b0u

        return self._propagated_quadrature(kernel, tau, n)

    def b20(self, tau: float, n: int) -> np.ndarray:
        def kernel(u):
            b0u = self.b0(u)
            return 2.0 * b0u @ self.qtq @ b0u

        return self._propagated_quadrature(kernel, tau, n)

    def b21(self, tau: float, n: int) -> np.ndarray:
        def kernel(u):
            b1u = self.b1(u, n)
            return b1u @ self.qtrd + self.qtrd.T @ b1u

        return self._propagated_quadrature(kernel, tau, n)

    def a_of(self, b_fn, tau: float, n: int) -> float:
        us, ws = _gl_nodes(n, 0.0, tau)
        acc = 0.0
        for u, w in zip(us, ws):
            acc += w * float(np.trace(self.qtq @ b_fn(u)))
        return self.beta * acc


def expansion_coeffs(
    pair: FxPairSpec, p: WishartParams, tau: float, n_nodes: int = 64, tol: float = 1e-10
) -> ExpansionCoeffs:
    """All matrix/scalar coefficients at maturity tau.

    The u-dependent kernels integrate by Gauss-Legendre with the node count
    doubled until the results move less than ``tol``.
    """
    if tau < 0:
        raise DataError("tau must be >= 0")
    d = pair.dim
    if tau == 0.0:
        z = np.zeros((d, d))
        return ExpansionCoeffs(z, z, z, z, 0.0, 0.0, 0.0, 0.0, 0.0)

    eng = _CoeffEngine(pair, p)
    b0 = eng.b0(tau)

    def all_at(n):
        b1 = eng.b1(tau, n)
        b20 = eng.b20(tau, n)
        b21 = eng.b21(tau, n)
        a0 = eng.a_of(lambda u: eng.b0(u), tau, n)
        a1 = eng.a_of(lambda u: eng.b1(u, n), tau, n)
        a20 = eng.a_of(lambda u: eng.b20(u, n), tau, n)
        a21 = eng.a_of(lambda u: eng.b21(u, n), tau, n)
        return b1, b20, b21, a0, a1, a20, a21

    n = n_nodes
    prev = all_at(n)
    while n <= 512:
        n *= 2
        cur = all_at(n)
        gap = max(
            max(np.abs(np.asarray(a) - np.asarray(b)).max() for a, b in zip(cur[:3], prev[:3])),
            max(abs(a - b) for a, b in zip(cur[3:], prev[3:])),
        )
        if gap < tol:
            prev = cur
            break
        prev = cur
    b1, b20, b21, a0, a1, a20, a21 = prev

    sym = lambda m: 0.5 * (m + m.T)
    return ExpansionCoeffs(
        b0=sym(b0), b1=sym(b1), b20=sym(b20), b21=sym(b21),
        a0=a0, a1=a1, a20=a20, a21=a21, tau=tau,
    )


def _require_constant_rates(pair: FxPairSpec):
    if (
        np.abs(pair.dom.rate_loading.full).max() > 0
        or np.abs(pair.for_.rate_loading.full).max() > 0
    ):
        raise UnsupportedRegimeError(
            "the expansion assumes constant short rates (zero rate loadings)"
        )


def price_expansion(
    pair: FxPairSpec,
    p: WishartParams,
    sigma,
    strike: float,
    tau: float,
    alpha_scale: float,
    coeffs: ExpansionCoeffs | None = None,
) -> float:
    """Call price approximation in the vol-of-vol scale, O(alpha^3) accurate.

    Black-Scholes at integrated variance a0 + Tr[B0 Sigma] plus the alpha and
    alpha^2 corrections through analytic BS partials.
    """
    _require_constant_rates(pair)
    if tau <= 0 or strike <= 0:
        raise DataError("positive tau and strike required")
    s = np.asarray(sigma, dtype=float)
    c = coeffs if coeffs is not None and coeffs.tau == tau else expansion_coeffs(pair, p, tau)
    h_i, h_j = pair.dom.rate_shift, pair.for_.rate_shift
    forward = pair.spot * np.exp((h_i - h_j) * tau)
    df = np.exp(-h_i * tau)
    v = c.a0 + float(np.trace(c.b0 @ s))
    if v <= 0:
        raise DegenerateInputError("non-positive integrated variance")
    w1 = c.a1 + float(np.trace(c.b1 @ s))
    w20 = c.a20 + float(np.trace(c.b20 @ s))
    w21 = c.a21 + float(np.trace(c.b21 @ s))
    base = bs_call(forward, strike, v, df)
    parts = bs_partials(forward, strike, v, df)
    al = alpha_scale
    return (
        base
        + al * w1 * parts["dxdv"]
        + al * al * w20 * parts["dvdv"]
        + al * al * w21 * parts["dxxdv"]
        + 0.5 * al * al * w1 * w1 * parts["dxxdvdv"]
    )


def shortmat_impvar(
    pair: FxPairSpec,
    p: WishartParams,
    sigma,
    moneyness_mf: float,
    tau: float,
    alpha_scale: float,
) -> float:
    """Short-maturity implied variance in log-moneyness m_f = log(F/K).

    Three terms: the instantaneous variance, an alpha skew term linear in m_f,
    and an alpha^2 curvature term in m_f^2.  Validity degrades beyond roughly
    tau ~ 0.5.  Constant rates required.
    """
    _require_constant_rates(pair)
    if tau <= 0:
        raise DataError("tau must be positive")
    s = np.asarray(sigma, dtype=float)
    delta = pair.vol_proj_diff
    d2 = delta @ delta
    q, r = p.vol_of_vol, p.corr
    a = float(np.trace(delta @ s @ delta))
    if a <= 1e-14:
        raise DegenerateInputError("zero instantaneous variance")
    w1 = float(np.trace(d2 @ q.T @ r @ delta @ s))
    skew = -alpha_scale * w1 * moneyness_mf / a
    qq_term = float(np.trace(d2 @ p.qtq @ d2 @ s)) / 3.0
    mixed = d2 @ q.T @ r @ delta + delta @ r.T @ q @ d2
    cross_term = float(np.trace(mixed @ q.T @ r @ delta @ s)) / 3.0
    curv = (
        alpha_scale**2
        * (moneyness_mf**2 / a**2)
        * (qq_term + cross_term - 1.25 * w1 * w1 / a)
    )
    return a + skew + curv


def scaled_vol_of_vol_model(
    p: WishartParams, dom: CurrencySpec, alpha_scale: float
) -> WishartParams:
    """The alpha-family the expansions approximate: diffusion alpha*Q with the
    domestic-measure drift matrix and the constant drift beta Q'Q held fixed.

    Gindikin's bound tightens as beta / alpha^2, so any alpha in (0, 1] keeps
    the scaled model admissible when the base model is.
    """
    if not (0 < alpha_scale <= 1.0):
        raise DataError("alpha_scale must be in (0, 1]")
    m_tilde = to_measure(p, dom).m_eff
    q_scaled = alpha_scale * p.vol_of_vol
    m_scaled = m_tilde + q_scaled.T @ p.corr @ dom.vol_proj.full
    return WishartParams(
        dim=p.dim,
        beta=p.beta / alpha_scale**2,
        mean_rev=m_scaled,
        vol_of_vol=q_scaled,
        corr=p.corr,
        sigma0=p.sigma0,
    )
