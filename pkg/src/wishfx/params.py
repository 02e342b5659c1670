"""Model parameter space, validation of standing assumptions, and measure
transport between the currency-specific risk-neutral measures.

The state is a d x d matrix factor following a Wishart diffusion

    dSigma = (beta Q'Q + M Sigma + Sigma M') dt + sqrt(Sigma) dW Q + Q' dW' sqrt(Sigma)

with spot/vol correlation matrix R.  Each currency carries a symmetric
volatility projection A and a short rate h + Tr[H Sigma].  Only the drift
matrix M changes under a change of pricing measure; Q and R are invariant:

    M -> M - Q' R A_target.

All types are immutable values; operations are pure and thread-safe.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidParamsError
from .linalg import PsdMat, SymMat

__all__ = [
    "AssumptionWarning",
    "WishartParams",
    "CurrencySpec",
    "MeasureContext",
    "FxPairSpec",
    "ModelDocument",
    "to_measure",
    "retarget",
    "quanto_drift",
    "load_document",
    "dump_document",
]


class AssumptionWarning(UserWarning):
    """A soft modelling assumption is violated (allowed, but worth noticing)."""


def _locked(a, dim: int, name: str) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    if out.shape != (dim, dim):
        raise DataError(f"{name} must have shape ({dim}, {dim}), got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise DataError(f"{name} has non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class WishartParams:
    """State-space parameters of the common matrix factor.

    ``beta`` is the Gindikin drift constant (the constant drift term is
    beta * Q'Q); ``beta >= d + 1`` is required for a well-defined interior
    solution and is enforced unless ``unchecked=True``.
    """

    dim: int
    beta: float
    mean_rev: np.ndarray  # M, d x d
    vol_of_vol: np.ndarray  # Q, d x d
    corr: np.ndarray  # R, d x d; I - RR' must stay PSD
    sigma0: PsdMat
    unchecked: bool = field(default=False, repr=False)

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise DataError("dim must be >= 1")
        object.__setattr__(self, "mean_rev", _locked(self.mean_rev, d, "M"))
        object.__setattr__(self, "vol_of_vol", _locked(self.vol_of_vol, d, "Q"))
        object.__setattr__(self, "corr", _locked(self.corr, d, "R"))
        if self.sigma0.dim != d:
            raise DataError("sigma0 dimension mismatch")
        if not self.unchecked:
            self._validate()

    def _validate(self):
        d = self.dim
        if self.beta < d + 1 - 1e-12:
            raise InvalidParamsError(
                f"beta={self.beta} violates the Gindikin bound beta >= d+1 = {d + 1}"
            )
        gram = np.eye(d) - self.corr @ self.corr.T
        try:
            PsdMat.from_full(0.5 * (gram + gram.T))
        except DataError as exc:
            raise InvalidParamsError(f"I - RR' is not PSD: {exc}") from exc
        if np.linalg.eigvals(self.mean_rev).real.max() > 1e-8:
            warnings.warn(
                "mean-reversion matrix M has an eigenvalue with positive real part",
                AssumptionWarning,
                stacklevel=3,
            )

    @property
    def qtq(self) -> np.ndarray:
        """Q'Q; the constant diffusion Gram matrix (drift term is beta * Q'Q)."""
        return self.vol_of_vol.T @ self.vol_of_vol


@dataclass(frozen=True, eq=False)
class CurrencySpec:
    """Per-currency volatility projection and short-rate loading."""

    label: str
    vol_proj: SymMat  # A, symmetric
    rate_shift: float  # h; negative values allowed (warned)
    rate_loading: PsdMat  # H, PSD

    def __post_init__(self):
        if not self.label:
            raise DataError("currency label must be non-empty")
        if self.vol_proj.dim != self.rate_loading.dim:
            raise DataError("A and H dimension mismatch")
        if self.rate_shift <= 0:
            warnings.warn(
                f"short-rate constant h for {self.label!r} is not positive "
                f"({self.rate_shift}); the short rate may go negative",
                AssumptionWarning,
                stacklevel=3,
            )

    @property
    def dim(self) -> int:
        return self.vol_proj.dim

    def short_rate(self, sigma: np.ndarray) -> float:
        """h + Tr[H Sigma] for a given state."""
        return self.rate_shift + float(np.trace(self.rate_loading.full @ np.asarray(sigma)))


@dataclass(frozen=True, eq=False)
class MeasureContext:
    """Identifies the pricing measure and carries the transported drift matrix.

    ``measure_label`` is a currency label, or None for the universal numeraire
    (representable, but pricing entry points require a concrete currency).
    """

    measure_label: str | None
    m_eff: np.ndarray

    def __post_init__(self):
        m = np.array(self.m_eff, dtype=float, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "m_eff", m)


@dataclass(frozen=True, eq=False)
class FxPairSpec:
    """An FX pair: one unit of the foreign currency quoted in domestic units."""

    dom: CurrencySpec
    for_: CurrencySpec
    spot: float

    def __post_init__(self):
        if self.dom.dim != self.for_.dim:
            raise DataError("currency dimension mismatch")
        if not (self.spot > 0):
            raise DataError(f"spot must be positive, got {self.spot}")

    @property
    def dim(self) -> int:
        return self.dom.dim

    @property
    def vol_proj_diff(self) -> np.ndarray:
        """A_dom - A_for; the pair's effective volatility projection."""
        return self.dom.vol_proj.full - self.for_.vol_proj.full


def to_measure(p: WishartParams, target: CurrencySpec) -> MeasureContext:
    """Drift matrix under the risk-neutral measure of ``target``: M - Q'R A."""
    if target.dim != p.dim:
        raise DataError("currency dimension does not match the factor dimension")
    m_eff = p.mean_rev - p.vol_of_vol.T @ p.corr @ target.vol_proj.full
    return MeasureContext(measure_label=target.label, m_eff=m_eff)


def retarget(
    ctx: MeasureContext,
    from_cur: CurrencySpec,
    to_cur: CurrencySpec,
    p: WishartParams,
) -> MeasureContext:
    """Move an existing measure context from one currency's measure to another's.

    Subtracts Q'R (A_to - A_from); composing retargets over any route between
    the same endpoints is path-independent.
    """
    if ctx.measure_label != from_cur.label:
        raise DataError(
            f"context is for measure {ctx.measure_label!r}, not {from_cur.label!r}"
        )
    if from_cur.dim != to_cur.dim or to_cur.dim != p.dim:
        raise DataError("currency dimension mismatch")
    m_eff = ctx.m_eff - p.vol_of_vol.T @ p.corr @ (
        to_cur.vol_proj.full - from_cur.vol_proj.full
    )
    return MeasureContext(measure_label=to_cur.label, m_eff=m_eff)


def quanto_drift(pair: FxPairSpec, sigma: PsdMat | np.ndarray) -> float:
    """Drift correction Tr[(A_i - A_j) Sigma A_i] of the pair under measure Q^0."""
    s = np.asarray(sigma, dtype=float)
    if s.shape != (pair.dim, pair.dim):
        raise DataError(f"sigma must have shape ({pair.dim}, {pair.dim})")
    return float(np.trace(pair.vol_proj_diff @ s @ pair.dom.vol_proj.full))


# ---------------------------------------------------------------------------
# JSON parameter document
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelDocument:
    """A full model description: factor parameters plus the currency universe."""

    params: WishartParams
    currencies: dict[str, CurrencySpec]

    def currency(self, label: str) -> CurrencySpec:
        try:
            return self.currencies[label]
        except KeyError:
            raise DataError(f"unknown currency {label!r}") from None

    def pair(self, dom: str, for_: str, spot: float) -> FxPairSpec:
        return FxPairSpec(dom=self.currency(dom), for_=self.currency(for_), spot=spot)


def _doc_to_dict(doc: ModelDocument) -> dict:
    p = doc.params
    return {
        "d": p.dim,
        "beta": p.beta,
        "M": p.mean_rev.tolist(),
        "Q": p.vol_of_vol.tolist(),
        "R": p.corr.tolist(),
        "sigma0": p.sigma0.full.tolist(),
        "currencies": [
            {
                "label": c.label,
                "A": c.vol_proj.full.tolist(),
                "h": c.rate_shift,
                "H": c.rate_loading.full.tolist(),
            }
            for c in doc.currencies.values()
        ],
    }


def _doc_from_dict(raw: dict, unchecked: bool = False) -> ModelDocument:
    try:
        d = int(raw["d"])
        params = WishartParams(
            dim=d,
            beta=float(raw["beta"]),
            mean_rev=raw["M"],
            vol_of_vol=raw["Q"],
            corr=raw["R"],
            sigma0=PsdMat.from_full(np.asarray(raw["sigma0"], dtype=float)),
            unchecked=unchecked,
        )
        currencies = {}
        for c in raw["currencies"]:
            spec = CurrencySpec(
                label=str(c["label"]),
                vol_proj=SymMat(np.asarray(c["A"], dtype=float)),
                rate_shift=float(c["h"]),
                rate_loading=PsdMat.from_full(np.asarray(c["H"], dtype=float)),
            )
            if spec.dim != d:
                raise DataError(f"currency {spec.label!r} dimension mismatch")
            if spec.label in currencies:
                raise DataError(f"duplicate currency label {spec.label!r}")
            currencies[spec.label] = spec
    except KeyError as exc:
        raise DataError(f"parameter document missing field {exc}") from exc
    return ModelDocument(params=params, currencies=currencies)


def load_document(path: str | Path, unchecked: bool = False) -> ModelDocument:
    """Read a JSON parameter document (row-major full matrices)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"parameter file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    return _doc_from_dict(raw, unchecked=unchecked)


def dump_document(doc: ModelDocument, path: str | Path | None = None) -> str:
    """Serialize to JSON.  Float repr round-trips bit-exactly."""
    text = json.dumps(_doc_to_dict(doc), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
