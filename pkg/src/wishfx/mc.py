"""Monte Carlo oracle: joint simulation of the matrix factor, log FX rates,
and short-rate integrals under a chosen pricing measure.

Scheme: Euler-Maruyama on the factor with a post-step symmetric projection
onto the PSD cone (eigenvalue clamping at zero, events counted), exact
matrix-Gaussian increments for the two driving noises, log FX stepped with its
exact drift-variance Euler form, and trapezoid accumulation of integrated
short rates.  Paths partition across workers; each worker owns a counter-based
RNG stream keyed by (seed, worker), so the merge is order-independent and the
result is bit-reproducible for a given (seed, n_workers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError
from .linalg import clamp_psd_batch, sqrtm_psd, sym_sqrt_batch
from .params import CurrencySpec, FxPairSpec, MeasureContext, WishartParams

__all__ = [
    "SimConfig",
    "PathBundle",
    "simulate",
    "mc_price_call",
    "mc_discount_factor",
    "wishart_mean_ode",
    "pair_key",
]


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    n_steps_per_year: int = 1008  # 4 per trading day
    seed: int = 0
    scheme: str = "euler_projected"
    antithetic: bool = True
    n_workers: int = 1
    keep_terminal_sigma: bool = False

    def __post_init__(self):
        if self.scheme != "euler_projected":
            raise DataError(f"unknown scheme {self.scheme!r}")
        if self.n_paths < (2 if self.antithetic else 1):
            raise DataError("n_paths too small")
        if self.antithetic and self.n_paths % 2:
            raise DataError("antithetic sampling needs an even path count")
        if self.n_steps_per_year < 1 or self.n_workers < 1:
            raise DataError("positive step and worker counts required")


def pair_key(pair: FxPairSpec) -> str:
    return f"{pair.dom.label}/{pair.for_.label}"


@dataclass
class PathBundle:
    """Per-path terminal quantities from one simulation run."""

    log_fx: dict[str, np.ndarray]
    int_rates: dict[str, np.ndarray]
    sigma_terminal: np.ndarray | None
    horizon: float
    measure_label: str | None
    antithetic: bool
    clamp_events: int
    n_steps: int
    spots: dict[str, float] = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return next(iter(self.int_rates.values())).shape[0]


def _worker_chunks(n_paths: int, n_workers: int, antithetic: bool) -> list[int]:
    unit = 2 if antithetic else 1
    blocks = n_paths // unit
    base = blocks // n_workers
    rem = blocks % n_workers
    sizes = [(base + (1 if w < rem else 0)) * unit for w in range(n_workers)]
    return [s for s in sizes if s > 0]


def _simulate_chunk(
    rng: np.random.Generator,
    n_chunk: int,
    p: WishartParams,
    m_eff: np.ndarray,
    currencies: list[CurrencySpec],
    pairs: list[FxPairSpec],
    a_measure: np.ndarray,
    horizon: float,
    n_steps: int,
    antithetic: bool,
    keep_sigma: bool,
):
    d = p.dim
    dt = horizon / n_steps
    sqdt = np.sqrt(dt)
    q = p.vol_of_vol
    r_corr = p.corr
    drift_const = p.beta * p.qtq
    orth = sqrtm_psd(np.eye(d) - r_corr @ r_corr.T).full

    deltas = [pair.vol_proj_diff for pair in pairs]
    quanto_mats = [pair.dom.vol_proj.full - a_measure for pair in pairs]
    h_shifts = np.array([c.rate_shift for c in currencies])
    h_loads = np.stack([c.rate_loading.full for c in currencies]) if currencies else None
    cur_row = {c.label: k for k, c in enumerate(currencies)}
    pair_rows = [(cur_row[pair.dom.label], cur_row[pair.for_.label]) for pair in pairs]

    sig = np.broadcast_to(p.sigma0.full, (n_chunk, d, d)).copy()
    x = np.zeros((len(pairs), n_chunk))
    intr = np.zeros((len(currencies), n_chunk))
    clamp_events = 0

    def rates(s):
        # h_c + Tr[H_c Sigma] for every currency, vectorized over paths
        return h_shifts[:, None] + np.einsum("cij,nij->cn", h_loads, s)

    r_now = rates(sig) if currencies else None
    nd = n_chunk // 2 if antithetic else n_chunk

    for step in range(n_steps):
        gz = rng.standard_normal((nd, d, d))
        gb = rng.standard_normal((nd, d, d))
        if antithetic:
            gz = np.concatenate([gz, -gz])
            gb = np.concatenate([gb, -gb])
        z_inc = gz * sqdt
        w_inc = z_inc @ r_corr.T + (gb * sqdt) @ orth

        root = sym_sqrt_batch(sig)
        noise = root @ w_inc @ q
        ms = m_eff @ sig
        sig_next = sig + (drift_const + ms + np.swapaxes(ms, 1, 2)) * dt
        sig_next += noise + np.swapaxes(noise, 1, 2)
        sig_next = 0.5 * (sig_next + np.swapaxes(sig_next, 1, 2))
        sig_next, n_cl = clamp_psd_batch(sig_next)
        clamp_events += n_cl

        for k, (row_a, row_b) in enumerate(pair_rows):
            dk = deltas[k]
            u = np.einsum("ij,njk,ki->n", dk, sig, dk)
            quanto = np.einsum("ij,njk,ki->n", dk, sig, quanto_mats[k])
            xdrift = (r_now[row_a] - r_now[row_b] + quanto - 0.5 * u) * dt
            xnoise = np.einsum("nij,nji->n", dk @ root, z_inc)
            x[k] += xdrift + xnoise

        if currencies:
            r_next = rates(sig_next)
            intr += 0.5 * (r_now + r_next) * dt
            r_now = r_next
        sig = sig_next
        if not np.isfinite(sig.sum()):
            bad = np.flatnonzero(~np.isfinite(sig.reshape(n_chunk, -1).sum(axis=1)))
            raise NumericError(
                f"non-finite factor path at step {step + 1} (path {bad[0]})"
            )

    return sig if keep_sigma else None, x, intr, clamp_events


def simulate(
    p: WishartParams,
    currencies: list[CurrencySpec],
    pairs: list[FxPairSpec],
    measure: MeasureContext,
    horizon: float,
    cfg: SimConfig,
) -> PathBundle:
    """Joint paths of the factor, requested log FX rates, and rate integrals.

    ``measure`` fixes both the factor drift (its transported matrix) and the
    quanto drifts of the requested pairs; a measure label of None means the
    universal numeraire.  Requested pairs may be crosses - the appropriate
    quanto correction is applied, and pairs sharing legs stay consistent
    pathwise because they are driven by the same noise.
    """
    if horizon <= 0:
        raise DataError("horizon must be positive")
    labels = {c.label for c in currencies}
    if len(labels) != len(currencies):
        raise DataError("duplicate currency labels")
    for pair in pairs:
        for leg in (pair.dom, pair.for_):
            if leg.label not in labels:
                raise DataError(f"pair leg {leg.label!r} missing from currencies")
    if measure.measure_label is None:
        a_measure = np.zeros((p.dim, p.dim))
    else:
        match = [c for c in currencies if c.label == measure.measure_label]
        if not match:
            raise DataError(
                f"measure currency {measure.measure_label!r} missing from currencies"
            )
        a_measure = match[0].vol_proj.full

    n_steps = max(1, int(np.ceil(horizon * cfg.n_steps_per_year)))
    chunks = _worker_chunks(cfg.n_paths, cfg.n_workers, cfg.antithetic)

    sig_parts, x_parts, intr_parts = [], [], []
    clamp_total = 0
    for worker_id, n_chunk in enumerate(chunks):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([cfg.seed, worker_id], dtype=np.uint64))
        )
        sig_t, x, intr, n_cl = _simulate_chunk(
            rng,
            n_chunk,
            p,
            measure.m_eff,
            currencies,
            pairs,
            a_measure,
            horizon,
            n_steps,
            cfg.antithetic,
            cfg.keep_terminal_sigma,
        )
        clamp_total += n_cl
        x_parts.append(x)
        intr_parts.append(intr)
        if sig_t is not None:
            sig_parts.append(sig_t)

    def reorder(arr: np.ndarray) -> np.ndarray:
        # within each chunk the layout is [primaries..., mirrors...]; interleave
        # so antithetic partners are adjacent globally.
        if not cfg.antithetic:
            return arr
        nd = arr.shape[0] // 2
        out = np.empty_like(arr)
        out[0::2] = arr[:nd]
        out[1::2] = arr[nd:]
        return out

    x_all = np.concatenate(x_parts, axis=1)
    intr_all = np.concatenate(intr_parts, axis=1)
    log_fx = {}
    spots = {}
    for k, pair in enumerate(pairs):
        key = pair_key(pair)
        log_fx[key] = reorder(np.log(pair.spot) + x_all[k])
        spots[key] = pair.spot
    int_rates = {
        c.label: reorder(intr_all[k]) for k, c in enumerate(currencies)
    }
    sigma_terminal = None
    if cfg.keep_terminal_sigma and sig_parts:
        sigma_terminal = reorder(np.concatenate(sig_parts, axis=0))
    return PathBundle(
        log_fx=log_fx,
        int_rates=int_rates,
        sigma_terminal=sigma_terminal,
        horizon=horizon,
        measure_label=measure.measure_label,
        antithetic=cfg.antithetic,
        clamp_events=clamp_total,
        n_steps=n_steps,
    )


def mc_mean(samples: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Mean and standard error; antithetic partners are folded first."""
    if samples.size == 0:
        raise DataError("empty sample set")
    if antithetic:
        samples = 0.5 * (samples[0::2] + samples[1::2])
    n = samples.shape[0]
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    return mean, se


def mc_price_call(
    bundle: PathBundle,
    strike: float,
    discount_label: str,
    key: str | None = None,
) -> tuple[float, float]:
    """Discounted call payoff mean with its standard error."""
    if not bundle.log_fx:
        raise DataError("bundle carries no FX paths")
    if key is None:
        if len(bundle.log_fx) != 1:
            raise DataError("several pairs in bundle; specify which one")
        key = next(iter(bundle.log_fx))
    if discount_label not in bundle.int_rates:
        raise DataError(f"no rate integral for {discount_label!r}")
    s_t = np.exp(bundle.log_fx[key])
    df = np.exp(-bundle.int_rates[discount_label])
    payoff = df * np.clip(s_t - strike, 0.0, None)
    return mc_mean(payoff, bundle.antithetic)


def mc_discount_factor(bundle: PathBundle, label: str) -> tuple[float, float]:
    """Monte Carlo zero-coupon bond: mean of exp(-int r) with standard error."""
    if label not in bundle.int_rates:
        raise DataError(f"no rate integral for {label!r}")
    return mc_mean(np.exp(-bundle.int_rates[label]), bundle.antithetic)


def wishart_mean_ode(
    m_eff: np.ndarray,
    qtq: np.ndarray,
    beta: float,
    sigma0: np.ndarray,
    t: float,
    n_steps: int = 400,
) -> np.ndarray:
    """First moment of the factor: RK4 on dE = beta Q'Q + M_eff E + E M_eff'."""
    e = np.asarray(sigma0, dtype=float).copy()
    h = t / n_steps
    const = beta * np.asarray(qtq, dtype=float)

    def rhs(mat):
        return const + m_eff @ mat + mat @ m_eff.T

    for _ in range(n_steps):
        k1 = rhs(e)
        k2 = rhs(e + 0.5 * h * k1)
        k3 = rhs(e + 0.5 * h * k2)
        k4 = rhs(e + h * k3)
        e = e + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return e
