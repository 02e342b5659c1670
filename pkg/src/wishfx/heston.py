"""Diagonal specialization: when every model matrix is diagonal the factor
decouples into independent scalar square-root processes,

    d Sigma_pp = (beta Q_pp^2 + 2 M_pp Sigma_pp) dt + 2 Q_pp sqrt(Sigma_pp) dW_p,

and the log FX rate becomes a multi-factor Heston model with per-factor
spot/vol correlation R_pp.  The scalar transform product built here is an
independent oracle for the matrix engine: it never touches the block
exponential machinery, only closed-form scalar Riccati solutions in the
branch-stable (decaying exponential) formulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .params import FxPairSpec, WishartParams

__all__ = ["DiagonalNest", "nest_from_diagonal", "heston_mgf_oracle"]

_DIAG_TOL = 1e-14


def _diag_of(mat: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(mat, dtype=float)
    off = m - np.diag(np.diag(m))
    if np.abs(off).max() > _DIAG_TOL:
        raise DataError(f"{name} is not diagonal (max off-diagonal {np.abs(off).max():.2e})")
    return np.diag(m).copy()


@dataclass(frozen=True)
class DiagonalNest:
    """Per-factor scalar parameters of the diagonal model."""

    v0: np.ndarray  # Sigma_pp(0)
    m_diag: np.ndarray  # M_pp
    q_diag: np.ndarray  # Q_pp
    r_diag: np.ndarray  # R_pp, per-factor spot/vol correlation
    a_dom: np.ndarray
    a_for: np.ndarray
    big_h_dom: np.ndarray
    big_h_for: np.ndarray
    h_dom: float
    h_for: float
    beta: float

    @property
    def n_factors(self) -> int:
        return self.v0.size

    @property
    def kappa(self) -> np.ndarray:
        """CIR mean-reversion speed: -2 M_pp."""
        return -2.0 * self.m_diag

    @property
    def vol_of_vol(self) -> np.ndarray:
        """CIR volatility: 2 Q_pp."""
        return 2.0 * self.q_diag

    @property
    def long_run_level(self) -> np.ndarray:
        """CIR level theta with kappa * theta = beta * Q_pp^2."""
        return self.beta * self.q_diag**2 / self.kappa


def nest_from_diagonal(p: WishartParams, pair: FxPairSpec) -> DiagonalNest:
    """Extract per-factor scalar parameters; rejects any non-diagonal input."""
    v0 = _diag_of(p.sigma0.full, "sigma0")
    m_diag = _diag_of(p.mean_rev, "M")
    q_diag = _diag_of(p.vol_of_vol, "Q")
    r_diag = _diag_of(p.corr, "R")
    a_dom = _diag_of(pair.dom.vol_proj.full, "A (domestic)")
    a_for = _diag_of(pair.for_.vol_proj.full, "A (foreign)")
    hh_dom = _diag_of(pair.dom.rate_loading.full, "H (domestic)")
    hh_for = _diag_of(pair.for_.rate_loading.full, "H (foreign)")
    if np.any(q_diag == 0.0):
        raise DataError("diagonal nesting needs nonzero vol-of-vol on every factor")
    return DiagonalNest(
        v0=v0,
        m_diag=m_diag,
        q_diag=q_diag,
        r_diag=r_diag,
        a_dom=a_dom,
        a_for=a_for,
        big_h_dom=hh_dom,
        big_h_for=hh_for,
        h_dom=pair.dom.rate_shift,
        h_for=pair.for_.rate_shift,
        beta=p.beta,
    )


def _scalar_affine(u_coef, gamma_lin, p_const, tau):
    """Closed-form solution of b' = u b^2 + gamma b + p, b(0) = 0.

    Returns (b(tau), int_0^tau b).  Branch-stable formulation with decaying
    exponentials (Re D >= 0 from the principal square root).
    """
    if p_const == 0:
        return 0.0 + 0.0j, 0.0 + 0.0j
    disc = np.sqrt(gamma_lin * gamma_lin - 4.0 * u_coef * p_const)
    if abs(disc) < 1e-13 * max(1.0, abs(gamma_lin)):
        raise NumericError("degenerate scalar Riccati discriminant")
    root_minus = (-gamma_lin - disc) / (2.0 * u_coef)
    g = (gamma_lin + disc) / (gamma_lin - disc)
    e = np.exp(-disc * tau)
    denom = 1.0 - g * e
    if denom == 0:
        raise NumericError("scalar transform pole reached")
    b = root_minus * (1.0 - e) / denom
    integral = root_minus * tau - np.log(denom / (1.0 - g)) / u_coef
    return b, integral


def heston_mgf_oracle(
    nest: DiagonalNest, omega: complex, tau: float, x: float
) -> complex:
    """Discounted MGF of the log FX rate in the nested multi-factor model.

    Product of independent scalar transforms; rates enter through the
    diagonal loadings.  Matches the matrix engine on diagonal inputs.
    """
    om = complex(omega)
    gamma = 0.5 * (om * om - om)
    total = om * (nest.h_dom - nest.h_for) * tau - nest.h_dom * tau
    for p_ix in range(nest.n_factors):
        q = nest.q_diag[p_ix]
        r = nest.r_diag[p_ix]
        delta = nest.a_dom[p_ix] - nest.a_for[p_ix]
        m_tilde = nest.m_diag[p_ix] - q * r * nest.a_dom[p_ix]
        u_coef = 2.0 * q * q
        gamma_lin = 2.0 * (m_tilde + om * q * r * delta)
        p_const = (
            gamma * delta * delta
            + (om - 1.0) * nest.big_h_dom[p_ix]
            - om * nest.big_h_for[p_ix]
        )
        b, integral = _scalar_affine(u_coef, gamma_lin, p_const, tau)
        total += nest.beta * q * q * integral + b * nest.v0[p_ix]
    return complex(np.exp(om * x + total))
