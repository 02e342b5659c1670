import numpy as np
import pytest

from wishfx.black import bs_call, bs_partials, bs_vega_total_var, implied_vol
from wishfx.errors import DataError
from wishfx.fxpricer import (
    FourierConfig,
    OptionQuote,
    model_forward,
    prdc_coupon_price,
    price_call_fourier,
    price_calls_quadrature,
    price_grid_fft,
    put_from_parity,
)
from wishfx.params import FxPairSpec
from wishfx.ratespricer import zcb_price
from .conftest import make_currency

ZERO2 = np.zeros((2, 2))


class TestBlack:
    def test_implied_vol_round_trip(self):
        price = bs_call(1.0, 1.0, 0.2**2 * 1.0, 1.0)
        assert implied_vol(price, 1.0, 1.0, 1.0, 1.0) == pytest.approx(0.2, abs=1e-10)

    def test_lower_bound_gives_zero(self):
        assert implied_vol(0.0, 1.0, 1.2, 0.5, 1.0) == 0.0
        assert implied_vol(0.99 * (1.1 - 1.0), 1.1, 1.0, 0.5, 0.99) == 0.0

    def test_out_of_bounds_rejected(self):
        with pytest.raises(DataError):
            implied_vol(1.01, 1.0, 0.5, 1.0, 1.0)  # above df*F
        with pytest.raises(DataError):
            implied_vol(0.05, 1.0, 0.9, 1.0, 1.0)  # below intrinsic

    def test_general_round_trip(self):
        # price -> vol -> price closes to 1e-10
        vol = implied_vol(0.05, 1.0, 1.1, 0.5, 0.99)
        assert bs_call(1.0, 1.1, vol * vol * 0.5, 0.99) == pytest.approx(0.05, abs=1e-10)

    @pytest.mark.parametrize(
        "f,k,v,df",
        [(1.05, 0.98, 0.06, 0.97), (1.3, 1.45, 0.02, 1.0), (0.9, 0.9, 0.15, 0.92)],
    )
    def test_partials_match_finite_differences(self, f, k, v, df):
        # independent oracle: arbitrary-precision finite differences
        import mpmath as mp

        mp.mp.dps = 30

        def price(x, vv):
            fwd = mp.mpf(f) * mp.e**x
            sq = mp.sqrt(vv)
            m = mp.log(fwd / mp.mpf(k))
            dp = m / sq + sq / 2
            cdf = lambda t: (1 + mp.erf(t / mp.sqrt(2))) / 2
            return mp.mpf(df) * (fwd * cdf(dp) - mp.mpf(k) * cdf(dp - sq))

        at = (mp.mpf(0), mp.mpf(v))
        parts = bs_partials(f, k, v, df)
        for key, orders in [
            ("dv", (0, 1)),
            ("dxdv", (1, 1)),
            ("dvdv", (0, 2)),
            ("dxxdv", (2, 1)),
            ("dxxdvdv", (2, 2)),
        ]:
            oracle = float(mp.diff(price, at, orders))
            assert parts[key] == pytest.approx(oracle, rel=1e-7), key

    def test_vega_positive(self):
        assert bs_vega_total_var(1.0, 1.0, 0.04) > 0


class TestQuoteAndConfig:
    def test_quote_validation(self):
        with pytest.raises(DataError):
            OptionQuote(strike=-1.0, expiry_tau=1.0, kind="call", price=0.1)
        with pytest.raises(DataError):
            OptionQuote(strike=1.0, expiry_tau=1.0, kind="straddle", price=0.1)

    def test_config_validation(self):
        with pytest.raises(DataError):
            FourierConfig(alpha=-1.0)
        with pytest.raises(DataError):
            FourierConfig(n_points=1000)  # not a power of two
        assert FourierConfig(n_points=1024, lambda_max=100.0).grid_spacing == pytest.approx(
            100.0 / 1024
        )


class TestZeroVolDegenerate:
    def test_deterministic_model_prices_hockey_stick(self, table1):
        # same projection on both legs, deterministic rates: sigma = 0 limit
        a = [[0.7, 0.2], [0.2, 0.8]]
        dom = make_currency("D", a, 0.02, ZERO2)
        for_ = make_currency("F", a, 0.05, ZERO2)
        pair = FxPairSpec(dom, for_, 1.3)
        tau = 0.75
        fwd = pair.spot * np.exp((0.02 - 0.05) * tau)
        cfg = FourierConfig(alpha=1.5, lambda_max=8000.0, quad_tol=1e-6)
        for strike in (1.1, 1.45):
            got = price_call_fourier(pair, table1.params, strike, tau, cfg)
            want = np.exp(-0.02 * tau) * max(fwd - strike, 0.0)
            assert got == pytest.approx(want, abs=5e-5)


class TestFourierPricing:
    def test_fft_matches_quadrature_interior(self, table1, usd_eur):
        tau = 1.0
        cfg = FourierConfig()
        strikes, prices = price_grid_fft(usd_eur, table1.params, tau, cfg)
        fwd = model_forward(usd_eur, table1.params, tau)
        mask = (strikes > 0.75 * fwd) & (strikes < 1.35 * fwd)
        sel = np.flatnonzero(mask)[::12]  # thin out for runtime
        quad = price_calls_quadrature(
            usd_eur, table1.params, strikes[sel], tau, cfg
        )
        assert np.abs(prices[sel] - quad).max() < 1e-6

    def test_fft_alpha_robustness(self, table1, usd_eur):
        tau = 0.5
        ref = price_call_fourier(
            usd_eur, table1.params, usd_eur.spot, tau, FourierConfig(alpha=1.5)
        )
        for alpha in (0.75, 3.0):
            got = price_call_fourier(
                usd_eur, table1.params, usd_eur.spot, tau, FourierConfig(alpha=alpha)
            )
            assert got == pytest.approx(ref, abs=1e-6)

    def test_grid_monotone_and_convex_in_strike(self, table1, usd_eur):
        strikes, prices = price_grid_fft(usd_eur, table1.params, 1.0)
        fwd = model_forward(usd_eur, table1.params, 1.0)
        mask = (strikes > 0.7 * fwd) & (strikes < 1.4 * fwd)
        ps = prices[mask]
        ks = strikes[mask]
        assert np.all(np.diff(ps) <= 1e-9)
        # discrete convexity on the log-strike grid via second differences
        second = ps[2:] - 2 * ps[1:-1] + ps[:-2]
        # uneven strike spacing (log grid): check convexity via divided differences
        dd = np.diff(np.diff(ps) / np.diff(ks))
        assert dd.min() > -1e-7
        assert second is not None

    def test_prices_decrease_with_maturity_discounting_sane(self, table1, usd_eur):
        c = price_call_fourier(usd_eur, table1.params, usd_eur.spot, 1.0)
        assert 0.0 < c < usd_eur.spot * 1.5


class TestParityAndPrdc:
    def test_put_vanishes_as_strike_to_zero(self, table1, usd_eur):
        tau = 1.0
        strike = 1e-6
        call = price_call_fourier(
            usd_eur, table1.params, strike, tau, FourierConfig(lambda_max=400.0)
        )
        put = put_from_parity(call, usd_eur, table1.params, strike, tau)
        assert abs(put) < 1e-4

    def test_deterministic_rates_textbook_parity(self, table1):
        dom = make_currency("D", [[0.8, 0.3], [0.3, 0.9]], 0.02, ZERO2)
        for_ = make_currency("F", [[0.5, 0.1], [0.1, 0.6]], 0.04, ZERO2)
        pair = FxPairSpec(dom, for_, 1.2)
        tau, strike = 1.5, 1.25
        call = price_call_fourier(pair, table1.params, strike, tau)
        put = put_from_parity(call, pair, table1.params, strike, tau)
        want = call - pair.spot * np.exp(-0.04 * tau) + strike * np.exp(-0.02 * tau)
        assert put == pytest.approx(want, rel=1e-12)

    def test_moment_explosion_reported_as_damping_error(self, table1):
        # an aggressive damping level pushes omega = alpha+1 outside the strip
        # of regularity at this maturity; the probe must catch it cleanly
        from wishfx.errors import DampingError

        dom = make_currency("D", [[0.8, 0.3], [0.3, 0.9]], 0.02, ZERO2)
        for_ = make_currency("F", [[0.5, 0.1], [0.1, 0.6]], 0.04, ZERO2)
        pair = FxPairSpec(dom, for_, 1.2)
        with pytest.raises(DampingError):
            price_call_fourier(pair, table1.params, 1.25, 1.5, FourierConfig(alpha=11.0))

    def test_prdc_coupon_is_scaled_call(self, table1, usd_eur):
        tau, notional, c_dom, c_for, accrual = 1.0, 1.0, 0.10, 0.15, 0.5
        coupon = prdc_coupon_price(
            usd_eur, table1.params, tau, notional, c_dom, c_for, accrual
        )
        strike = usd_eur.spot * c_dom / c_for
        call = price_call_fourier(usd_eur, table1.params, strike, tau)
        want = accrual * notional * c_for / usd_eur.spot * call
        assert coupon == pytest.approx(want, rel=1e-12)

    def test_prdc_zero_domestic_coupon_gives_discounted_forward(self, table1, usd_eur):
        coupon = prdc_coupon_price(usd_eur, table1.params, 1.0, 1.0, 0.0, 0.15, 0.5)
        p_for = zcb_price(
            table1.currency("EUR"), table1.params, table1.params.sigma0.full, 1.0
        )
        want = 0.5 * 1.0 * 0.15 / usd_eur.spot * usd_eur.spot * p_for
        assert coupon == pytest.approx(want, rel=1e-10)
