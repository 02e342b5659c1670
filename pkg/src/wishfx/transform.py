"""Affine transform engine.

Every conditional (discounted) moment generating function in the model has the
exponential-affine form

    exp( omega * x + a(tau) + Tr[ b(tau) * Sigma ] )

where b solves a matrix Riccati ODE

    b' = b X + X' b + 2 b Q'Q b + Y,      b(0) = b0,

and a integrates a trace of b.  The Riccati flow linearizes into one block
matrix exponential of

    L = [[ X, -2 Q'Q ],
         [ Y,   -X'  ]]

with solution b(tau) = F(tau)^{-1} G(tau), F = b0 B12 + B22, G = b0 B11 + B21
(Bij are the d x d blocks of exp(tau L)).  The scalar part needs the
branch-continuous log-determinant of F along [0, tau]; the principal branch is
wrong for large |omega| tau, so the argument of det F is unwound over a
subdivision (64 nodes by default, doubled adaptively).

Three instances are exposed:
  * ``fx_mgf``       - discounted MGF of the log FX rate (Laplace argument omega),
  * ``zcb_transform``- zero-coupon bond exponent under a currency's measure,
  * ``logbond_mgf``  - discounted MGF of a future log bond price (two-stage solve).

``riccati_rk4`` integrates the same ODE system directly and serves as the
independent oracle for all closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError, TransformExplosionError
from .linalg import PsdMat
from .params import CurrencySpec, FxPairSpec, WishartParams, to_measure

__all__ = [
    "AffineSolution",
    "fx_affine_solution",
    "fx_mgf",
    "fx_mgf_grid",
    "zcb_transform",
    "logbond_mgf",
    "riccati_rk4",
]

_ARG_JUMP_LIMIT = 0.9 * np.pi
_MAX_NODES = 16384
_COND_WARN = 1e12


@dataclass
class AffineSolution:
    """Solved affine exponent: scalar part ``a`` and symmetric matrix part ``b``."""

    a: complex
    b: np.ndarray
    tau: float
    diagnostics: dict = field(default_factory=dict)

    def value(self, sigma: PsdMat | np.ndarray, omega_x: complex = 0.0) -> complex:
        """exp(omega*x + a + Tr[b Sigma]) for a given state."""
        s = np.asarray(sigma, dtype=float)
        return complex(np.exp(omega_x + self.a + np.trace(self.b @ s)))


# ---------------------------------------------------------------------------
# Core batched solver
# ---------------------------------------------------------------------------


def _batch_blocks(E_parts, d):
    """Split (..., 2d, 2d) matrices into the four d x d blocks."""
    return (
        E_parts[..., :d, :d],
        E_parts[..., :d, d:],
        E_parts[..., d:, :d],
        E_parts[..., d:, d:],
    )


# Sub-step size cap: exp(dt * L) entries stay O(e^theta), keeping the per-step
# determinants far from the cancellation floor of double precision.
_STEP_NORM_CAP = 5.0


def _step_exponentials(L: np.ndarray, dt: float) -> np.ndarray:
    """exp(dt * L) for a batch, eigendecomposition with scipy fallback."""
    nbatch = L.shape[0]
    try:
        w, v = np.linalg.eig(L)
        vinv = np.linalg.inv(v)
        out = np.einsum("bij,bj,bjk->bik", v, np.exp(dt * w), vinv)
        recon = np.einsum("bij,bj,bjk->bik", v, w, vinv)
        scale = np.maximum(np.abs(L).max(axis=(1, 2)), 1.0)
        ok = np.abs(recon - L).max(axis=(1, 2)) / scale < 1e-10
    except np.linalg.LinAlgError:
        out = np.empty_like(L)
        ok = np.zeros(nbatch, dtype=bool)
    for i in np.flatnonzero(~ok):
        out[i] = scipy.linalg.expm(dt * L[i])
    return out


def _affine_core(x_blocks, y_blocks, qtq, tau, b0, n_nodes, want_diag=False):
    """Solve the linearized Riccati flow for a batch of coefficient blocks.

    The interval subdivides into n steps and the flow's cocycle property
    F(t + dt) = F(t) (b(t) B12 + B22) is used multiplicatively: the running
    Riccati solution b advances through the Moebius composition with the
    one-step blocks, while log det F accumulates as the sum of the per-step
    factor log-determinants.  Each factor is well-scaled (no phantom
    exponential modes), so this stays accurate where a direct evaluation of
    det F suffers catastrophic cancellation, and the per-step determinant
    argument provides branch tracking for free.

    Returns (logdet_F, b, steps_used, diag) with shapes (N,), (N,d,d).
    """
    x_blocks = np.asarray(x_blocks, dtype=complex)
    y_blocks = np.asarray(y_blocks, dtype=complex)
    nbatch, d, _ = x_blocks.shape
    if b0 is None:
        b0 = np.zeros((nbatch, d, d), dtype=complex)
    else:
        b0 = np.broadcast_to(np.asarray(b0, dtype=complex), (nbatch, d, d)).copy()

    diag: dict = {}
    if tau == 0.0:
        return np.zeros(nbatch, dtype=complex), b0.copy(), 0, diag

    L = np.zeros((nbatch, 2 * d, 2 * d), dtype=complex)
    L[:, :d, :d] = x_blocks
    L[:, :d, d:] = -2.0 * qtq
    L[:, d:, :d] = y_blocks
    L[:, d:, d:] = -np.swapaxes(x_blocks, 1, 2)
    real_path = bool(
        (np.abs(L.imag).max() == 0.0) and (np.abs(np.asarray(b0).imag).max() == 0.0)
    )

    # step count: branch-tracking resolution plus a norm cap on dt * ||L||
    norm_bound = float(np.abs(L).sum(axis=2).max())
    n = max(n_nodes, int(np.ceil(tau * norm_bound / _STEP_NORM_CAP)))

    while True:
        dt = tau / n
        e_step = _step_exponentials(L, dt)
        b11 = e_step[:, :d, :d]
        b12 = e_step[:, :d, d:]
        b21 = e_step[:, d:, :d]
        b22 = e_step[:, d:, d:]

        b = b0.copy()
        log_abs = np.zeros(nbatch)
        arg_sum = np.zeros(nbatch)
        max_jump = 0.0
        failed = False
        cond_max = 1.0
        jump_flags: list[int] = []
        prev_norm = np.abs(b).max(axis=(1, 2))
        for k in range(n):
            f_fac = b @ b12 + b22
            dets = np.linalg.det(f_fac)
            if real_path:
                neg = dets.real <= 0.0
                if neg.any():
                    raise TransformExplosionError(
                        "moment explosion: linearization block singular "
                        f"by tau={(k + 1) * dt:.6g}",
                        tau_star=(k + 1) * dt,
                    )
            if (~np.isfinite(dets)).any() or (np.abs(dets) < 1e-280).any():
                raise TransformExplosionError(
                    f"linearization block became singular at tau={(k + 1) * dt:.6g}",
                    tau_star=(k + 1) * dt,
                )
            args = np.angle(dets)
            step_jump = float(np.abs(args).max())
            if step_jump >= _ARG_JUMP_LIMIT:
                failed = True
                break
            max_jump = max(max_jump, step_jump)
            log_abs += np.log(np.abs(dets))
            arg_sum += args
            g_fac = b @ b11 + b21
            try:
                b = np.linalg.solve(f_fac, g_fac)
            except np.linalg.LinAlgError as exc:
                raise TransformExplosionError(
                    f"linearization block singular at tau={(k + 1) * dt:.6g}",
                    tau_star=(k + 1) * dt,
                ) from exc
            if want_diag:
                cond_max = max(cond_max, float(np.linalg.cond(f_fac).max()))
                cur_norm = np.abs(b).max(axis=(1, 2))
                if (cur_norm > 10.0 * np.maximum(prev_norm, 1e-8)).any():
                    jump_flags.append(k + 1)
                prev_norm = cur_norm
        if not failed:
            break
        if 2 * n > _MAX_NODES:
            raise TransformExplosionError(
                "branch tracking failed to converge (argument jump too large)"
            )
        n *= 2

    b = 0.5 * (b + np.swapaxes(b, 1, 2))
    if not np.all(np.isfinite(b)):
        raise TransformExplosionError(
            f"non-finite Riccati solution at tau={tau}", tau_star=tau
        )
    if want_diag:
        diag["cond_B22"] = cond_max
        if jump_flags:
            diag["b_norm_jumps"] = jump_flags
    return log_abs + 1j * arg_sum, b, n, diag


def _fx_blocks(pair: FxPairSpec, p: WishartParams, omegas: np.ndarray):
    """Coefficient blocks of the log-FX transform under the domestic measure."""
    m_eff = to_measure(p, pair.dom).m_eff
    delta = pair.vol_proj_diff
    q, r = p.vol_of_vol, p.corr
    qtrd = q.T @ r @ delta
    h_i = pair.dom.rate_loading.full
    h_j = pair.for_.rate_loading.full
    om = omegas[:, None, None]
    gamma = 0.5 * (om * om - om)
    x_blocks = m_eff[None] + om * qtrd[None]
    y_blocks = gamma * (delta @ delta)[None] + (om - 1.0) * h_i[None] - om * h_j[None]
    return x_blocks, y_blocks


def _rate_term_fx(pair: FxPairSpec, omegas: np.ndarray) -> np.ndarray:
    return omegas * (pair.dom.rate_shift - pair.for_.rate_shift) - pair.dom.rate_shift


def fx_affine_grid(
    pair: FxPairSpec,
    p: WishartParams,
    omegas: np.ndarray,
    tau: float,
    n_nodes: int = 64,
    chunk: int = 1024,
):
    """Affine exponents (a, b) of the discounted log-FX MGF for many omegas.

    Returns ``(a, b)`` with shapes (N,) and (N, d, d).  Vectorized over the
    Laplace argument; the workhorse behind Fourier pricing grids.
    """
    if tau < 0:
        raise DataError("tau must be >= 0")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=complex))
    if not np.all(np.isfinite(omegas)):
        raise DataError("omega must be finite")
    qtq = p.qtq
    a_out = np.empty(omegas.shape, dtype=complex)
    b_out = np.empty(omegas.shape + (p.dim, p.dim), dtype=complex)
    for lo in range(0, omegas.size, chunk):
        om = omegas[lo : lo + chunk]
        xb, yb = _fx_blocks(pair, p, om)
        logdet, b, _, _ = _affine_core(xb, yb, qtq, tau, None, n_nodes)
        tr_x = np.einsum("bii->b", xb)
        a_out[lo : lo + chunk] = _rate_term_fx(pair, om) * tau - 0.5 * p.beta * (
            logdet + tau * tr_x
        )
        b_out[lo : lo + chunk] = b
    return a_out, b_out


def fx_affine_solution(
    pair: FxPairSpec,
    p: WishartParams,
    omega: complex,
    tau: float,
    n_nodes: int = 64,
) -> AffineSolution:
    """Affine solution of the discounted log-FX transform at a single omega."""
    if tau < 0:
        raise DataError("tau must be >= 0")
    om = np.asarray([omega], dtype=complex)
    xb, yb = _fx_blocks(pair, p, om)
    logdet, b, steps, core_diag = _affine_core(
        xb, yb, p.qtq, tau, None, n_nodes, want_diag=True
    )
    a = _rate_term_fx(pair, om)[0] * tau - 0.5 * p.beta * (
        logdet[0] + tau * np.trace(xb[0])
    )
    diag = {"steps_used": steps, "cond_B22": core_diag.get("cond_B22", 1.0)}
    if "b_norm_jumps" in core_diag:
        diag["b_norm_jumps"] = core_diag["b_norm_jumps"]
    if diag["cond_B22"] > _COND_WARN:
        diag["ill_conditioned"] = True
    return AffineSolution(a=complex(a), b=b[0], tau=tau, diagnostics=diag)


def fx_mgf(
    pair: FxPairSpec,
    p: WishartParams,
    omega: complex,
    tau: float,
    x: float,
    sigma: PsdMat | np.ndarray,
    n_nodes: int = 64,
) -> complex:
    """Discounted moment generating function of the log FX rate.

    E[ exp(-int r_dom) * exp(omega * x(T)) | x(t)=x, Sigma(t)=sigma ] under the
    domestic currency's risk-neutral measure.  The characteristic function is
    the same object at omega = i*lambda.
    """
    sol = fx_affine_solution(pair, p, omega, tau, n_nodes=n_nodes)
    return sol.value(sigma, omega_x=omega * x)


def fx_mgf_grid(
    pair: FxPairSpec,
    p: WishartParams,
    omegas: np.ndarray,
    tau: float,
    x: float,
    sigma: PsdMat | np.ndarray,
    n_nodes: int = 64,
) -> np.ndarray:
    """Vectorized ``fx_mgf`` over an array of Laplace arguments."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=complex))
    a, b = fx_affine_grid(pair, p, omegas, tau, n_nodes=n_nodes)
    s = np.asarray(sigma, dtype=float)
    tr_bs = np.einsum("bij,ji->b", b, s)
    out = np.exp(omegas * x + a + tr_bs)
    if not np.all(np.isfinite(out)):
        raise TransformExplosionError(f"transform overflow at tau={tau}", tau_star=tau)
    return out


def zcb_transform(
    cur: CurrencySpec,
    p: WishartParams,
    tau: float,
    n_nodes: int = 64,
) -> AffineSolution:
    """Zero-coupon bond exponent under the risk-neutral measure of ``cur``.

    The bond price is exp(a + Tr[b Sigma]).
    """
    if tau < 0:
        raise DataError("tau must be >= 0")
    m_eff = to_measure(p, cur).m_eff
    xb = m_eff[None].astype(complex)
    yb = -cur.rate_loading.full[None].astype(complex)
    logdet, b, steps, core_diag = _affine_core(
        xb, yb, p.qtq, tau, None, n_nodes, want_diag=True
    )
    a = -0.5 * p.beta * (logdet[0] + tau * np.trace(m_eff)) - cur.rate_shift * tau
    # The flow is real for real coefficient blocks; drop the vanishing
    # imaginary roundoff so bond prices come out exactly real.
    b_real = b[0].real if np.abs(b[0].imag).max() < 1e-12 else b[0]
    diag = {"steps_used": steps, "cond_B22": core_diag.get("cond_B22", 1.0)}
    if diag["cond_B22"] > _COND_WARN:
        diag["ill_conditioned"] = True
    return AffineSolution(a=complex(a).real, b=b_real, tau=tau, diagnostics=diag)


def logbond_mgf(
    cur: CurrencySpec,
    p: WishartParams,
    omega: complex,
    t_reset: float,
    t_pay: float,
    sigma: PsdMat | np.ndarray,
    n_nodes: int = 64,
) -> complex:
    """Discounted MGF of the log bond price observed at the reset date.

    E[ exp(-int_0^{t_reset} r) * exp(omega * log P(t_reset, t_pay)) | Sigma(0) ]
    under the currency's own measure.  Two-stage solve: the inner bond exponent
    over (t_pay - t_reset) becomes the terminal condition (scaled by omega) of
    an outer flow over t_reset.
    """
    if not (0.0 <= t_reset <= t_pay):
        raise DataError("need 0 <= t_reset <= t_pay")
    inner = zcb_transform(cur, p, t_pay - t_reset, n_nodes=n_nodes)
    b0 = np.asarray(omega * inner.b, dtype=complex)[None]
    m_eff = to_measure(p, cur).m_eff
    xb = m_eff[None].astype(complex)
    yb = -cur.rate_loading.full[None].astype(complex)
    logdet, b, _, _ = _affine_core(xb, yb, p.qtq, t_reset, b0, n_nodes)
    a_outer = (
        -0.5 * p.beta * (logdet[0] + t_reset * np.trace(m_eff))
        - cur.rate_shift * t_reset
    )
    a_total = omega * inner.a + a_outer
    s = np.asarray(sigma, dtype=float)
    val = np.exp(a_total + np.trace(b[0] @ s))
    if not np.isfinite(val):
        raise TransformExplosionError(
            f"log-bond transform overflow at t_reset={t_reset}", tau_star=t_reset
        )
    return complex(val)


# ---------------------------------------------------------------------------
# Runge-Kutta oracle
# ---------------------------------------------------------------------------


def riccati_rk4(
    x_block: np.ndarray,
    y_block: np.ndarray,
    qtq: np.ndarray,
    beta: float,
    rate_term: complex,
    b0: np.ndarray | None,
    tau: float,
    n_steps: int,
) -> AffineSolution:
    """Classical RK4 on the matrix Riccati system; oracle for the closed forms.

    Integrates b' = b X + X' b + 2 b Q'Q b + Y from b(0)=b0 together with
    a' = rate_term + beta * Tr[Q'Q b].
    """
    if n_steps < 1:
        raise DataError("n_steps must be >= 1")
    if tau < 0:
        raise DataError("tau must be >= 0")
    x = np.asarray(x_block, dtype=complex)
    y = np.asarray(y_block, dtype=complex)
    qtq = np.asarray(qtq, dtype=float)
    d = x.shape[0]
    b = np.zeros((d, d), dtype=complex) if b0 is None else np.asarray(b0, dtype=complex).copy()
    a = 0.0 + 0.0j
    if tau == 0.0:
        return AffineSolution(a=a, b=b, tau=0.0, diagnostics={"steps_used": 0})

    h = tau / n_steps
    xt = x.T

    def db(bm):
        return bm @ x + xt @ bm + 2.0 * (bm @ qtq @ bm) + y

    def da(bm):
        return rate_term + beta * np.trace(qtq @ bm)

    for k in range(n_steps):
        k1b, k1a = db(b), da(b)
        b2 = b + 0.5 * h * k1b
        k2b, k2a = db(b2), da(b2)
        b3 = b + 0.5 * h * k2b
        k3b, k3a = db(b3), da(b3)
        b4 = b + h * k3b
        k4b, k4a = db(b4), da(b4)
        b = b + (h / 6.0) * (k1b + 2 * k2b + 2 * k3b + k4b)
        a = a + (h / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
        if not (np.all(np.isfinite(b)) and np.isfinite(a)) or np.abs(b).max() > 1e150:
            raise TransformExplosionError(
                f"Riccati overflow at tau={(k + 1) * h:.6g}", tau_star=(k + 1) * h
            )
    b = 0.5 * (b + b.T)
    return AffineSolution(a=complex(a), b=b, tau=tau, diagnostics={"steps_used": n_steps})


def fx_riccati_rk4(
    pair: FxPairSpec,
    p: WishartParams,
    omega: complex,
    tau: float,
    n_steps: int = 400,
) -> AffineSolution:
    """RK4 oracle with the log-FX transform's coefficient blocks filled in."""
    om = np.asarray([omega], dtype=complex)
    xb, yb = _fx_blocks(pair, p, om)
    rate = complex(_rate_term_fx(pair, om)[0])
    return riccati_rk4(xb[0], yb[0], p.qtq, p.beta, rate, None, tau, n_steps)


def zcb_riccati_rk4(
    cur: CurrencySpec,
    p: WishartParams,
    tau: float,
    n_steps: int = 400,
) -> AffineSolution:
    """RK4 oracle for the bond exponent."""
    m_eff = to_measure(p, cur).m_eff
    return riccati_rk4(
        m_eff,
        -cur.rate_loading.full,
        p.qtq,
        p.beta,
        -cur.rate_shift,
        None,
        tau,
        n_steps,
    )
