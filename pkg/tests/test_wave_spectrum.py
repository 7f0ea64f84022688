import math

import numpy as np
import pytest

from hydrolink.wave_spectrum import (
    SpectrumParams,
    alpha_coefficient,
    directional_spreading,
    jonswap_2d,
    jonswap_3d,
    peak_frequency,
)

# Independent straight-from-the-formula oracle, written against the closed
# forms before the package implementation and kept scalar on purpose.


def oracle_alpha(u10, xf, g):
    return 0.076 * (u10 * u10 / (g * xf)) ** 0.22


def oracle_wp(u10, xf, g):
    return 22.0 * (g * g / (xf * u10)) ** (1.0 / 3.0)


def oracle_s2d(om, u10, xf, g, gamma, sig_lo, sig_hi):
    a = oracle_alpha(u10, xf, g)
    wp = oracle_wp(u10, xf, g)
    sig = sig_lo if om <= wp else sig_hi
    peak = math.exp(-((om - wp) ** 2) / (2.0 * (sig * wp) ** 2))
    return (a * g * g / om**5) * math.exp(-1.25 * (wp / om) ** 4) * gamma**peak


def oracle_spreading(om, th, u10, xf, g):
    if abs(th) > math.pi / 2:
        return 0.0
    wp = oracle_wp(u10, xf, g)
    decay = math.exp(-0.5 * (om / wp) ** 4)
    p = 0.5 + 0.82 * decay
    q = 0.32 * decay
    return (1.0 + p * math.cos(2 * th) + q * math.cos(4 * th)) / math.pi


PARAMS = SpectrumParams(wind_speed_u10=12.0, fetch_xf=2e4)


def random_params(rng):
    return SpectrumParams(
        wind_speed_u10=rng.uniform(3.0, 25.0),
        fetch_xf=rng.uniform(1e3, 1e6),
        gamma=rng.uniform(1.0, 5.0),
    )


class TestAlphaCoefficient:
    def test_reference_value(self):
        assert alpha_coefficient(PARAMS) == pytest.approx(0.01553, abs=1e-5)

    def test_unit_ratio(self):
        # U10^2 == g*xf makes the ratio 1 and the power law collapses
        p = SpectrumParams(wind_speed_u10=14.0, fetch_xf=14.0**2 / 9.81)
        assert alpha_coefficient(p) == pytest.approx(0.076, rel=1e-12)

    def test_wind_scaling(self):
        p2 = SpectrumParams(wind_speed_u10=24.0, fetch_xf=2e4)
        assert alpha_coefficient(p2) == pytest.approx(
            alpha_coefficient(PARAMS) * 4.0**0.22, rel=1e-12
        )

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            SpectrumParams(wind_speed_u10=-1.0, fetch_xf=2e4)
        with pytest.raises(ValueError):
            SpectrumParams(wind_speed_u10=12.0, fetch_xf=0.0)


class TestPeakFrequency:
    def test_reference_value(self):
        assert peak_frequency(PARAMS) == pytest.approx(1.622, abs=1e-3)

    def test_unit_ratio(self):
        xf = 500.0
        u10 = 9.81**2 / xf
        p = SpectrumParams(wind_speed_u10=u10, fetch_xf=xf)
        assert peak_frequency(p) == pytest.approx(22.0, rel=1e-12)

    def test_product_scaling(self):
        p4 = SpectrumParams(wind_speed_u10=12.0, fetch_xf=8e4)
        assert peak_frequency(p4) == pytest.approx(
            peak_frequency(PARAMS) / 4.0 ** (1.0 / 3.0), rel=1e-12
        )


class TestJonswap2d:
    def test_peak_closed_form(self):
        wp = peak_frequency(PARAMS)
        a = alpha_coefficient(PARAMS)
        expected = (a * 9.81**2 / wp**5) * math.exp(-1.25) * PARAMS.gamma
        assert jonswap_2d(wp, PARAMS) == pytest.approx(expected, rel=1e-12)

    def test_against_oracle_at_unity(self):
        got = jonswap_2d(1.0, PARAMS)
        want = oracle_s2d(1.0, 12.0, 2e4, 9.81, 3.3, 0.07, 0.09)
        assert got == pytest.approx(want, rel=1e-12)

    def test_gamma_one_is_base_shape(self):
        p = SpectrumParams(wind_speed_u10=12.0, fetch_xf=2e4, gamma=1.0)
        wp = peak_frequency(p)
        a = alpha_coefficient(p)
        for om in (0.8, wp, 3.1):
            base = (a * 9.81**2 / om**5) * math.exp(-1.25 * (wp / om) ** 4)
            assert jonswap_2d(om, p) == pytest.approx(base, rel=1e-12)

    def test_vanishes_at_extremes(self):
        wp = peak_frequency(PARAMS)
        s_peak = jonswap_2d(wp, PARAMS)
        assert jonswap_2d(0.01 * wp, PARAMS) < 1e-6 * s_peak
        assert jonswap_2d(100.0 * wp, PARAMS) < 1e-6 * s_peak

    def test_rejects_nonpositive_omega(self):
        with pytest.raises(ValueError):
            jonswap_2d(0.0, PARAMS)
        with pytest.raises(ValueError):
            jonswap_2d(-1.0, PARAMS)

    def test_argmax_at_peak_frequency(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            p = random_params(rng)
            wp = peak_frequency(p)
            grid = np.linspace(0.3 * wp, 4.0 * wp, 4000)
            dense = jonswap_2d(grid, p)
            i = int(np.argmax(dense))
            cell = grid[1] - grid[0]
            assert abs(grid[i] - wp) <= cell


class TestDirectionalSpreading:
    def test_peak_value_at_zero(self):
        wp = peak_frequency(PARAMS)
        p = 0.5 + 0.82 * math.exp(-0.5)
        q = 0.32 * math.exp(-0.5)
        want = (1.0 + p + q) / math.pi
        assert directional_spreading(wp, 0.0, PARAMS) == pytest.approx(want, rel=1e-12)

    def test_high_frequency_limit(self):
        wp = peak_frequency(PARAMS)
        for th in (0.0, 0.4, -1.1):
            got = directional_spreading(50.0 * wp, th, PARAMS)
            want = (1.0 + 0.5 * math.cos(2 * th)) / math.pi
            assert got == pytest.approx(want, rel=1e-9)

    def test_even_in_theta(self):
        rng = np.random.default_rng(11)
        om = rng.uniform(0.5, 5.0, size=200)
        th = rng.uniform(0.0, math.pi / 2, size=200)
        assert np.allclose(
            directional_spreading(om, th, PARAMS),
            directional_spreading(om, -th, PARAMS),
            rtol=0,
            atol=0,
        )

    def test_zero_outside_half_plane(self):
        assert directional_spreading(1.0, math.pi / 2 + 1e-9, PARAMS) == 0.0
        assert directional_spreading(1.0, -2.0, PARAMS) == 0.0

    def test_nonnegative_over_support(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            p = random_params(rng)
            wp = peak_frequency(p)
            om = rng.uniform(0.3 * wp, 10.0 * wp, size=200)
            th = rng.uniform(-math.pi / 2, math.pi / 2, size=200)
            assert np.all(directional_spreading(om, th, p) >= 0.0)

    def test_integrates_to_one_over_support(self):
        # 1/pi * [theta + p sin(2 th)/2 + q sin(4 th)/4] over [-pi/2, pi/2] = 1
        th = np.linspace(-math.pi / 2, math.pi / 2, 20001)
        for om in (0.9, 1.622, 4.0):
            g = directional_spreading(om, th, PARAMS)
            assert np.trapezoid(g, th) == pytest.approx(1.0, abs=1e-7)

    def test_wind_bearing_rotates_support(self):
        p = SpectrumParams(wind_speed_u10=12.0, fetch_xf=2e4, wind_bearing=1.0)
        base = SpectrumParams(wind_speed_u10=12.0, fetch_xf=2e4)
        assert directional_spreading(1.0, 1.3, p) == pytest.approx(
            directional_spreading(1.0, 0.3, base), rel=1e-12
        )
        assert directional_spreading(1.0, 1.0 + math.pi / 2 + 1e-6, p) == 0.0


class TestJonswap3d:
    def test_zero_outside_half_plane(self):
        assert jonswap_3d(1.0, 2.0, PARAMS) == 0.0

    def test_product_at_peak(self):
        wp = peak_frequency(PARAMS)
        want = jonswap_2d(wp, PARAMS) * directional_spreading(wp, 0.0, PARAMS)
        assert jonswap_3d(wp, 0.0, PARAMS) == pytest.approx(want, rel=1e-12)

    def test_theta_quadrature_recovers_2d(self):
        th = np.linspace(-math.pi / 2, math.pi / 2, 40001)
        for om in (0.9, 2.2):
            s3 = jonswap_3d(om, th, PARAMS)
            assert np.trapezoid(s3, th) == pytest.approx(jonswap_2d(om, PARAMS), rel=1e-6)


def test_oracle_agreement_bulk():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        p = random_params(rng)
        wp = oracle_wp(p.wind_speed_u10, p.fetch_xf, p.gravity_g)
        om = rng.uniform(0.2 * wp, 8.0 * wp)
        th = rng.uniform(-math.pi / 2, math.pi / 2)
        args = (p.wind_speed_u10, p.fetch_xf, p.gravity_g)
        s2 = oracle_s2d(om, *args, p.gamma, p.sigma_low, p.sigma_high)
        g = oracle_spreading(om, th, *args)
        assert jonswap_2d(om, p) == pytest.approx(s2, rel=1e-12)
        assert directional_spreading(om, th, p) == pytest.approx(g, rel=1e-12)
        assert jonswap_3d(om, th, p) == pytest.approx(s2 * g, rel=1e-12)
