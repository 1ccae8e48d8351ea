"""Master Stability Function machinery tests.

Long-horizon reproduction of the published thresholds lives in the acceptance
suite; here the engine contracts are exercised with short observation windows.
"""

import json

import numpy as np
import pytest

from syncforge.dynamics import OscillatorModel, model
from syncforge.msf import (
    LyapunovSettings,
    MsfCurve,
    curve_to_csv,
    default_lyapunov_settings,
    diffusive_feasibility,
    intervals_to_json,
    largest_lyapunov,
    msf_scan,
    negative_intervals,
    required_sigma,
    variational_rhs,
)


def frozen_linear_model():
    rates = np.array([-1.0, -2.0])
    return OscillatorModel(
        name="frozen_linear",
        n=2,
        f=lambda x: rates * x,
        jacobian=lambda x: np.diag(rates),
        coupling=np.zeros((2, 2)),
        f_network=lambda blocks: rates * blocks,
        x0=np.array([1.0, 1.0]),
    )


SHORT = LyapunovSettings(warmup_time=50.0, total_time=300.0)


class TestVariationalRhs:
    def test_eta_zero_is_plain_variational(self):
        vdp = model("van_der_pol")
        x = np.array([0.7, -1.1])
        z = np.array([0.3, 0.9])
        np.testing.assert_allclose(
            variational_rhs(vdp, x, 0.0, z), np.asarray(vdp.jacobian(x)) @ z, atol=1e-14
        )

    def test_zero_tangent_maps_to_zero(self):
        ross = model("rossler")
        out = variational_rhs(ross, np.array([1.0, 2.0, 3.0]), 2.5, np.zeros(3))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_vdp_hand_value(self):
        vdp = model("van_der_pol")
        out = variational_rhs(vdp, np.zeros(2), 1.0, np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [0.0, -2.0], atol=1e-15)

    def test_rejects_negative_eta(self):
        with pytest.raises(ValueError):
            variational_rhs(model("van_der_pol"), np.zeros(2), -0.1, np.zeros(2))


class TestLargestLyapunov:
    def test_frozen_linear_dominant_rate(self):
        est = largest_lyapunov(
            frozen_linear_model(), 0.0, LyapunovSettings(warmup_time=20.0, total_time=60.0)
        )
        assert est.exponent == pytest.approx(-1.0, abs=1e-3)
        assert est.convergence < 1e-6

    def test_vdp_neutral_at_eta_zero(self):
        est = largest_lyapunov(model("van_der_pol"), 0.0, SHORT)
        assert abs(est.exponent) <= 0.01

    def test_rossler_chaotic_at_eta_zero(self):
        est = largest_lyapunov(
            model("rossler"), 0.0, LyapunovSettings(warmup_time=300.0, total_time=2000.0)
        )
        assert est.exponent > 0.02

    def test_renormalization_invariance(self):
        vdp = model("van_der_pol")
        exps = [
            largest_lyapunov(
                vdp, 1.0,
                LyapunovSettings(warmup_time=100.0, total_time=500.0, renorm_interval=ri),
            ).exponent
            for ri in (0.5, 1.0, 2.0)
        ]
        assert max(exps) - min(exps) < 5e-3

    def test_seed_invariance(self):
        vdp = model("van_der_pol")
        exps = [
            largest_lyapunov(
                vdp, 1.0,
                LyapunovSettings(warmup_time=100.0, total_time=500.0, seed=seed),
            ).exponent
            for seed in range(5)
        ]
        assert max(exps) - min(exps) < 5e-3

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            LyapunovSettings(warmup_time=0.0, total_time=10.0)
        with pytest.raises(ValueError, match="several renormalization"):
            LyapunovSettings(warmup_time=1.0, total_time=1.0, renorm_interval=1.0)

    def test_default_settings(self):
        assert default_lyapunov_settings("van_der_pol").total_time == 2000.0
        assert default_lyapunov_settings("rossler").total_time == 20000.0
        with pytest.raises(ValueError):
            default_lyapunov_settings("duffing")


class TestMsfScan:
    def test_matches_pointwise_calls(self):
        vdp = model("van_der_pol")
        s = LyapunovSettings(warmup_time=20.0, total_time=50.0)
        grid = np.array([0.2, 0.6, 1.0])
        curve = msf_scan(vdp, grid, s)
        for eta, val in zip(grid, curve.values):
            assert largest_lyapunov(vdp, float(eta), s).exponent == pytest.approx(
                val, abs=1e-9
            )

    def test_numpy_fallback_agrees_with_kernel(self):
        vdp = model("van_der_pol")
        plain = OscillatorModel(
            name="vdp_plain",
            n=2,
            f=lambda y: np.array([y[1], -y[0] + y[1] * (1.0 - y[0] ** 2)]),
            jacobian=lambda y: np.array(
                [[0.0, 1.0], [-1.0 - 2.0 * y[0] * y[1], 1.0 - y[0] ** 2]]
            ),
            coupling=vdp.coupling,
            f_network=vdp.f_network,
            x0=vdp.x0,
        )
        s = LyapunovSettings(warmup_time=10.0, total_time=40.0)
        a = largest_lyapunov(vdp, 0.8, s).exponent
        b = largest_lyapunov(plain, 0.8, s).exponent
        assert a == pytest.approx(b, abs=1e-10)

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ValueError):
            msf_scan(model("van_der_pol"), np.array([0.2, 0.1]), SHORT)

    def test_monotone_negative_vdp_tail(self):
        # once past the crossing the vdp curve stays negative
        vdp = model("van_der_pol")
        s = LyapunovSettings(warmup_time=100.0, total_time=400.0)
        curve = msf_scan(vdp, np.arange(0.5, 10.1, 0.5), s)
        assert np.all(curve.values < 0.0)


class TestNegativeIntervals:
    def test_interpolated_crossings(self):
        out = negative_intervals(
            np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.5, -0.1, -0.2, 0.3])
        )
        assert len(out) == 1
        lo, hi = out[0]
        assert lo == pytest.approx(0.5 / 0.6)
        assert hi == pytest.approx(2.4)

    def test_all_negative_spans_hull(self):
        out = negative_intervals(np.array([1.0, 2.0, 4.0]), np.array([-1.0, -2.0, -0.5]))
        assert out == [(1.0, 4.0)]

    def test_all_positive_empty(self):
        assert negative_intervals(np.array([0.0, 1.0]), np.array([0.1, 0.2])) == []

    def test_accepts_curve_object(self):
        curve = MsfCurve(np.array([0.0, 1.0]), np.array([-1.0, -2.0]), [])
        assert negative_intervals(curve) == [(0.0, 1.0)]

    def test_nan_breaks_intervals(self):
        out = negative_intervals(
            np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
            np.array([-1.0, np.nan, -1.0, -1.0, 1.0]),
        )
        assert len(out) == 2
        assert out[0] == (0.0, 0.0)
        assert out[1][0] == 2.0 and out[1][1] == pytest.approx(3.5)


class TestDiffusiveArithmetic:
    def test_required_sigma_values(self):
        assert required_sigma(0.39, 64) == pytest.approx(161.887, abs=0.001)
        assert required_sigma(0.39, 2) == pytest.approx(0.195)

    def test_required_sigma_linear_in_threshold(self):
        assert required_sigma(0.78, 17) == pytest.approx(2.0 * required_sigma(0.39, 17))

    def test_feasibility_boundary_seven_eight(self):
        ok = diffusive_feasibility((0.19, 4.61), 7)
        assert ok.feasible
        assert ok.ratio == pytest.approx(19.1957, abs=1e-3)
        lo, hi = ok.sigma_range
        assert lo < hi
        bad = diffusive_feasibility((0.19, 4.61), 8)
        assert not bad.feasible
        assert bad.sigma_range is None
        assert bad.ratio == pytest.approx(25.2741, abs=1e-3)

    def test_two_agents_always_feasible(self):
        res = diffusive_feasibility((1.0, 10.0), 2)
        assert res.feasible and res.ratio == pytest.approx(1.0)

    def test_sigma_range_scales_spectrum_into_interval(self):
        from syncforge.synthesis import diffusive_spectrum

        res = diffusive_feasibility((0.19, 4.61), 5)
        lo, hi = res.sigma_range
        sigma = 0.5 * (lo + hi)
        lams = diffusive_spectrum(sigma, 5)[1:]
        assert lams.min() > 0.19 and lams.max() < 4.61


class TestExports:
    def test_curve_csv(self):
        curve = MsfCurve(np.array([0.0, 0.5]), np.array([0.25, -0.125]), [])
        assert curve_to_csv(curve) == "eta,msf\n0.0,0.25\n0.5,-0.125\n"

    def test_intervals_json(self):
        text = intervals_to_json([(0.19, 4.61)])
        assert json.loads(text) == [{"lo": 0.19, "hi": 4.61}]
