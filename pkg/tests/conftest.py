"""Shared fixtures: the canonical calibrated parameter set (d=2, USD/EUR)."""

import warnings

import numpy as np
import pytest

from wishfx.linalg import PsdMat, SymMat
from wishfx.params import (
    AssumptionWarning,
    CurrencySpec,
    FxPairSpec,
    ModelDocument,
    WishartParams,
)

SPOT_USD_EUR = 1.3080  # fixture choice


def build_table1_document() -> ModelDocument:
    """Calibrated USD/EUR hybrid parameter set used as the canonical fixture."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        params = WishartParams(
            dim=2,
            beta=3.1442,
            mean_rev=[[-0.5213, -0.3382], [-0.4940, -0.4389]],
            vol_of_vol=[[0.2184, 0.0957], [0.2483, 0.3681]],
            corr=[[-0.5417, 0.1899], [-0.1170, -0.4834]],
            sigma0=PsdMat.from_full([[0.1688, 0.1708], [0.1708, 0.3169]]),
        )
        usd = CurrencySpec(
            label="USD",
            vol_proj=SymMat([[0.7764, 0.4837], [0.4837, 0.9639]]),
            rate_shift=-0.2218,
            rate_loading=PsdMat.from_full([[0.2725, 0.0804], [0.0804, 0.4726]]),
        )
        eur = CurrencySpec(
            label="EUR",
            vol_proj=SymMat([[0.6679, 0.6277], [0.6277, 0.8520]]),
            rate_shift=-0.1862,
            rate_loading=PsdMat.from_full([[0.1841, 0.0155], [0.0155, 0.4761]]),
        )
    return ModelDocument(params=params, currencies={"USD": usd, "EUR": eur})


@pytest.fixture(scope="session")
def table1() -> ModelDocument:
    return build_table1_document()


@pytest.fixture(scope="session")
def usd_eur(table1) -> FxPairSpec:
    """USD-domestic quote of one EUR."""
    return table1.pair("USD", "EUR", SPOT_USD_EUR)


@pytest.fixture(scope="session")
def sigma0(table1) -> np.ndarray:
    return table1.params.sigma0.full


def make_currency(label, a, h, big_h):
    """CurrencySpec without assumption-warning noise in test output."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        return CurrencySpec(
            label=label,
            vol_proj=SymMat(np.asarray(a, dtype=float)),
            rate_shift=float(h),
            rate_loading=PsdMat.from_full(np.asarray(big_h, dtype=float)),
        )
