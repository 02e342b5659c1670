import numpy as np
import pytest

from wishfx.errors import DataError
from wishfx.linalg import PsdMat
from wishfx.mc import (
    SimConfig,
    mc_discount_factor,
    mc_mean,
    mc_price_call,
    pair_key,
    simulate,
    wishart_mean_ode,
)
from wishfx.params import FxPairSpec, MeasureContext, WishartParams, to_measure
from wishfx.transform import zcb_transform
from .conftest import make_currency

ZERO2 = np.zeros((2, 2))


def small_cfg(**kw):
    base = dict(n_paths=20_000, n_steps_per_year=252, seed=42, antithetic=True)
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    def test_antithetic_needs_even(self):
        with pytest.raises(DataError):
            SimConfig(n_paths=3, antithetic=True)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(DataError):
            SimConfig(scheme="milstein")


class TestDeterminism:
    def test_same_seed_bit_identical(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        cfg = small_cfg(n_paths=2000)
        b1 = simulate(p, curs, [usd_eur], measure, 0.5, cfg)
        b2 = simulate(p, curs, [usd_eur], measure, 0.5, cfg)
        key = pair_key(usd_eur)
        assert np.array_equal(b1.log_fx[key], b2.log_fx[key])
        assert np.array_equal(b1.int_rates["USD"], b2.int_rates["USD"])

    def test_different_seed_differs(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        b1 = simulate(p, curs, [usd_eur], measure, 0.5, small_cfg(n_paths=2000, seed=1))
        b2 = simulate(p, curs, [usd_eur], measure, 0.5, small_cfg(n_paths=2000, seed=2))
        assert not np.array_equal(b1.log_fx[pair_key(usd_eur)], b2.log_fx[pair_key(usd_eur)])

    def test_worker_partition_changes_stream_but_not_stats(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        key = pair_key(usd_eur)
        b1 = simulate(p, curs, [usd_eur], measure, 0.25, small_cfg(n_paths=20_000, n_workers=1))
        b4 = simulate(p, curs, [usd_eur], measure, 0.25, small_cfg(n_paths=20_000, n_workers=4))
        m1, s1 = mc_mean(b1.log_fx[key], True)
        m4, s4 = mc_mean(b4.log_fx[key], True)
        assert abs(m1 - m4) < 3.0 * np.hypot(s1, s4)


class TestFrozenFactorLimit:
    def test_terminal_variance_matches_initial_quadratic_form(self, table1):
        # tiny vol-of-vol, zero drift: the factor barely moves, so terminal
        # log-FX variance is the frozen-state quadratic form times the horizon
        d = 2
        sig0 = table1.params.sigma0
        p = WishartParams(
            dim=d,
            beta=d + 1.0,
            mean_rev=np.zeros((d, d)),
            vol_of_vol=1e-5 * np.eye(d),
            corr=np.zeros((d, d)),
            sigma0=sig0,
        )
        dom = make_currency("D", [[0.8, 0.3], [0.3, 0.9]], 0.0, ZERO2)
        for_ = make_currency("F", [[0.5, 0.1], [0.1, 0.6]], 0.0, ZERO2)
        pair = FxPairSpec(dom, for_, 1.0)
        curs = [dom, for_]
        measure = to_measure(p, dom)
        horizon = 1.0
        bundle = simulate(p, curs, [pair], measure, horizon, small_cfg(antithetic=False))
        x = bundle.log_fx[pair_key(pair)]
        delta = pair.vol_proj_diff
        want = float(np.trace(delta @ sig0.full @ delta)) * horizon
        got = x.var(ddof=1)
        se = got * np.sqrt(2.0 / (x.size - 1))  # SE of a variance estimate
        assert abs(got - want) < 3.0 * se


class TestMartingaleAndTriangle:
    def test_discounted_spot_is_martingale(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        horizon = 1.0
        bundle = simulate(p, curs, [usd_eur], measure, horizon, small_cfg())
        key = pair_key(usd_eur)
        val = np.exp(-bundle.int_rates["USD"]) * np.exp(bundle.log_fx[key])
        mean, se = mc_mean(val, bundle.antithetic)
        bond_for = zcb_transform(table1.currency("EUR"), p, horizon).value(
            p.sigma0.full
        ).real
        want = usd_eur.spot * bond_for
        assert abs(mean - want) < 3.0 * se

    def test_pathwise_triangle_identity(self, table1):
        # three currencies sharing one driver: crosses must multiply exactly
        p = table1.params
        usd, eur = table1.currency("USD"), table1.currency("EUR")
        jpy = make_currency("JPY", [[0.55, 0.15], [0.15, 0.65]], 0.01, 0.1 * np.eye(2))
        curs = [usd, eur, jpy]
        p_ue = FxPairSpec(usd, eur, 1.3)
        p_uj = FxPairSpec(usd, jpy, 0.011)
        p_je = FxPairSpec(jpy, eur, 1.3 / 0.011)
        measure = to_measure(p, usd)
        bundle = simulate(
            p, curs, [p_ue, p_uj, p_je], measure, 0.5, small_cfg(n_paths=4000)
        )
        lhs = bundle.log_fx["USD/EUR"]
        rhs = bundle.log_fx["USD/JPY"] + bundle.log_fx["JPY/EUR"]
        assert np.abs(lhs - rhs).max() < 1e-12


class TestPricingHelpers:
    def test_zero_strike_gives_discounted_forward(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        bundle = simulate(p, curs, [usd_eur], measure, 1.0, small_cfg())
        price, se = mc_price_call(bundle, 0.0, "USD")
        bond_for = zcb_transform(table1.currency("EUR"), p, 1.0).value(p.sigma0.full).real
        assert abs(price - usd_eur.spot * bond_for) < 3.0 * se

    def test_far_strike_worthless(self, table1, usd_eur):
        p = table1.params
        measure = to_measure(p, usd_eur.dom)
        curs = [table1.currency("USD"), table1.currency("EUR")]
        bundle = simulate(p, curs, [usd_eur], measure, 0.5, small_cfg(n_paths=2000))
        price, _ = mc_price_call(bundle, 100.0, "USD")
        assert price == 0.0

    def test_discount_factor_matches_bond(self, table1):
        p = table1.params
        usd = table1.currency("USD")
        measure = to_measure(p, usd)
        bundle = simulate(p, [usd], [], measure, 1.0, small_cfg())
        mean, se = mc_discount_factor(bundle, "USD")
        bond = zcb_transform(usd, p, 1.0).value(p.sigma0.full).real
        assert abs(mean - bond) < 3.0 * se


class TestFactorMoments:
    def test_mean_matches_linear_ode(self, table1):
        p = table1.params
        usd = table1.currency("USD")
        measure = to_measure(p, usd)
        cfg = small_cfg(keep_terminal_sigma=True)
        bundle = simulate(p, [usd], [], measure, 1.0, cfg)
        sim_mean = bundle.sigma_terminal.mean(axis=0)
        want = wishart_mean_ode(measure.m_eff, p.qtq, p.beta, p.sigma0.full, 1.0)
        folded = (
            0.5 * (bundle.sigma_terminal[0::2] + bundle.sigma_terminal[1::2])
            if bundle.antithetic
            else bundle.sigma_terminal
        )
        se = folded.std(axis=0, ddof=1) / np.sqrt(folded.shape[0])
        assert np.all(np.abs(sim_mean - want) < 3.0 * se + 1e-12)

    def test_clamping_counted_not_fatal(self, table1):
        # boundary-hugging parameters force occasional projections
        d = 2
        p = WishartParams(
            dim=d,
            beta=d + 1.0,
            mean_rev=-2.0 * np.eye(d),
            vol_of_vol=0.8 * np.eye(d),
            corr=np.zeros((d, d)),
            sigma0=PsdMat.from_full(1e-4 * np.eye(d)),
            unchecked=True,
        )
        usd = make_currency("USD", np.eye(2), 0.01, ZERO2)
        measure = MeasureContext(measure_label="USD", m_eff=p.mean_rev)
        bundle = simulate(p, [usd], [], measure, 0.1, small_cfg(n_paths=2000))
        assert bundle.clamp_events >= 0  # counted; run completed
