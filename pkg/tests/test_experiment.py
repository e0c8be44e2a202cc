import dataclasses
import math

import mpmath
import numpy as np
import pytest
from scipy.optimize import fsolve

from backaction.experiment import (
    HeatingModel,
    KerrCavity,
    cooling_curve,
    find_optimal_detuning,
    fit_heating_model,
    golden_section_max,
    solve_kerr_occupation,
    sweep_constant_circulating,
    sweep_constant_incident,
)
from backaction.io import load_config
from backaction.physics import (
    CODATA,
    CouplingParams,
    RegenerativeError,
    backaction_damping,
    backaction_prefactor,
    effective_temperature,
    incident_power,
    photon_number_from_circulating,
    photon_number_from_incident,
    TWO_PI,
)


@pytest.fixture
def kerr(device):
    return load_config().kerr


def all_positive_roots(P_i, d, K, kappa, omega_c):
    """Oracle: every positive real root of the Kerr self-consistency, via mpmath."""
    mpmath.mp.dps = 40
    drive = mpmath.mpf(P_i) * kappa / (mpmath.mpf(CODATA.hbar) * (omega_c + d))
    # n (kappa^2 + 4 (d + K n)^2) = drive, expanded in n
    coeffs = [4 * K**2, 8 * K * d, kappa**2 + 4 * mpmath.mpf(d) ** 2, -drive]
    roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
    return sorted(float(r.real) for r in roots
                  if abs(mpmath.im(r)) <= 1e-20 * abs(r) and r.real > 0)


class TestKerrOccupation:
    def test_linear_cavity_matches_closed_form(self, device):
        lin = KerrCavity.linear(device.cavity)
        for d in np.linspace(-3, 3, 13) * device.mech.omega_m:
            sol = solve_kerr_occupation(1e-7, d, lin)
            exact = photon_number_from_incident(1e-7, device.cavity.omega_c + d, d,
                                                device.cavity.kappa)
            assert sol.n_bar == pytest.approx(exact, rel=1e-14)
            assert not sol.multistable

    def test_zero_drive(self, kerr):
        assert solve_kerr_occupation(0.0, -1e6, kerr).n_bar == 0.0

    def test_small_kerr_limit(self, device):
        # The deviation is first order in K n / kappa, so the drive is chosen
        # to keep n below ~200 photons at every detuning.
        tiny = KerrCavity(1e-12 * device.cavity.kappa, device.cavity)
        for d in np.linspace(-3, 0, 7) * device.mech.omega_m:
            got = solve_kerr_occupation(1e-15, d, tiny).n_bar
            exact = photon_number_from_incident(1e-15, device.cavity.omega_c + d, d,
                                                device.cavity.kappa)
            assert got == pytest.approx(exact, rel=1e-9)

    def test_deviation_linear_in_kerr(self, device):
        d, P = -device.mech.omega_m, 1e-7
        exact = photon_number_from_incident(P, device.cavity.omega_c + d, d, device.cavity.kappa)
        errs = [solve_kerr_occupation(P, d, KerrCavity(K, device.cavity)).n_bar / exact - 1
                for K in (1e-6, 1e-7, 1e-8)]
        assert errs[0] / errs[1] == pytest.approx(10.0, rel=1e-3)
        assert errs[1] / errs[2] == pytest.approx(10.0, rel=1e-3)

    def test_self_consistency(self, device, kerr):
        k = device.cavity.kappa
        for P in (1e-8, 1e-7, 1e-6):
            for d in np.linspace(-3, 1, 9) * device.mech.omega_m:
                n = solve_kerr_occupation(P, d, kerr).n_bar
                drive = P * k / (CODATA.hbar * (device.cavity.omega_c + d))
                assert n == pytest.approx(drive / (k**2 + 4 * (d + kerr.K * n) ** 2), rel=1e-10)

    def test_fold_flag_against_all_roots_scan(self, device, kerr):
        k, wc = device.cavity.kappa, device.cavity.omega_c
        d = -3.0 * k
        powers = np.geomspace(1e-12, 1e-8, 400)
        flags, n_prev, jumps = [], None, 0
        for P in powers:
            sol = solve_kerr_occupation(P, d, kerr)
            roots = all_positive_roots(P, d, kerr.K, k, wc)
            assert sol.n_bar == pytest.approx(roots[0], rel=1e-8)
            assert sol.multistable == (len(roots) == 3)
            flags.append(sol.multistable)
            if n_prev is not None and sol.n_bar > 1.5 * n_prev:
                jumps += 1
                assert flags[-2] and not flags[-1]  # lower branch ends at the upper fold
            n_prev = sol.n_bar
        assert any(flags) and not flags[0] and not flags[-1]
        assert jumps == 1

    def test_negative_kerr_rejected(self, device):
        with pytest.raises(ValueError):
            KerrCavity(-1.0, device.cavity)


class TestConstantCirculatingSweep:
    def test_regime_of_red_and_blue_sidebands(self, device):
        wm, g0 = device.mech.omega_m, device.mech.gamma_m0 / TWO_PI
        s = sweep_constant_circulating(9e-7, np.array([-wm, wm]), device)
        assert 1.5 < s.gamma_m[0] / g0 < 2.5
        assert s.gamma_m[1] / g0 < 0.05

    def test_regenerative_rows_have_no_thermometry(self, device):
        wm = device.mech.omega_m
        s = sweep_constant_circulating(2e-6, np.linspace(-2, 2, 201) * wm, device)
        assert s.regenerative.any()
        assert np.all(np.isnan(s.T_m[s.regenerative]))
        assert np.all(np.isnan(s.m_bar[s.regenerative]))
        assert np.all(np.isfinite(s.T_m[~s.regenerative]))
        assert np.all(s.gamma_m[s.regenerative] < 0)

    def test_zero_coupling_is_flat(self, device):
        flat = dataclasses.replace(device, coupling=CouplingParams(0.0))
        s = sweep_constant_circulating(9e-7, np.linspace(-2, 2, 41) * device.mech.omega_m, flat)
        assert np.all(s.Omega == 0.0)
        assert np.all(s.gamma_m == device.mech.gamma_m0 / TWO_PI)

    def test_spring_shift_antisymmetric(self, device):
        # Fixed P_c gives n proportional to 1/omega_e^2, which is not mirror
        # symmetric; the shift per photon is.
        grid = np.linspace(-2, 2, 81) * device.mech.omega_m
        s = sweep_constant_circulating(9e-7, grid, device)
        per_photon = s.Omega / s.n_bar
        np.testing.assert_allclose(per_photon, -per_photon[::-1], rtol=1e-12,
                                   atol=1e-12 * np.abs(per_photon).max())

    def test_metadata_and_monotone_grid(self, device):
        s = sweep_constant_circulating(9e-7, [-1e6, 0.0, 1e6], device)
        assert s.metadata["mode"] == "const_circulating" and s.metadata["power"] == 9e-7
        with pytest.raises(ValueError):
            sweep_constant_circulating(9e-7, [0.0, 1.0, 0.5], device)
        with pytest.raises(ValueError):
            sweep_constant_circulating(0.0, [0.0], device)
        with pytest.raises(ValueError):
            sweep_constant_circulating(1e-7, [], device)

    def test_bit_reproducible(self, device):
        grid = np.linspace(-2, 2, 101) * device.mech.omega_m
        a = sweep_constant_circulating(9e-7, grid, device)
        b = sweep_constant_circulating(9e-7, grid[::-1], device)
        for c in a.COLUMNS:
            np.testing.assert_array_equal(getattr(a, c), getattr(b, c)[::-1])


class TestConstantIncidentSweep:
    def test_mode_consistency(self, device):
        wm = device.mech.omega_m
        d = -wm
        omega_e = device.cavity.omega_c + d
        n = photon_number_from_circulating(9e-7, omega_e)
        P_i = incident_power(n, omega_e, d, device.cavity.kappa)
        a = sweep_constant_circulating(9e-7, [d], device)
        b = sweep_constant_incident(P_i, [d], device)
        assert b.gamma_m[0] == pytest.approx(a.gamma_m[0], rel=1e-9)
        assert b.Omega[0] == pytest.approx(a.Omega[0], rel=1e-9)

    def test_small_kerr_sweep_matches_linear(self, device):
        grid = np.linspace(-3, -0.01, 60) * device.mech.omega_m
        tiny = KerrCavity(1e-12 * device.cavity.kappa, device.cavity)
        a = sweep_constant_incident(1e-15, grid, device)
        b = sweep_constant_incident(1e-15, grid, device, kerr=tiny)
        np.testing.assert_allclose(b.gamma_m, a.gamma_m, rtol=1e-9)
        np.testing.assert_allclose(b.n_bar, a.n_bar, rtol=1e-9)

    def test_argmax_moves_down_with_power(self, device, kerr):
        grid = np.linspace(-3, -0.01, 800) * device.mech.omega_m
        peaks = [sweep_constant_incident(P, grid, device, kerr).argmax_damping()
                 for P in np.geomspace(16e-9, 16e-9 * 10**0.8, 8)]
        assert np.all(np.diff(peaks) <= 0) and peaks[-1] < peaks[0]

    def test_branch_continuity(self, device, kerr):
        grid = np.linspace(-3, -0.01, 2000) * device.mech.omega_m
        s = sweep_constant_incident(1e-6, grid, device, kerr)
        ratio = s.n_bar[1:] / s.n_bar[:-1]
        jumps = np.flatnonzero(np.abs(np.log(ratio)) > 0.2)
        for j in jumps:
            assert s.multistable[j] or s.multistable[j + 1]


class TestOptimalDetuning:
    def test_linear_cavity_near_red_sideband(self, device):
        d = find_optimal_detuning(device, P_c=9e-7)
        grid = np.linspace(-3, 0, 300_001, endpoint=False) * device.mech.omega_m
        n = photon_number_from_circulating(9e-7, device.cavity.omega_c + grid)
        B = backaction_prefactor(n, device.coupling.g, device.x_zp)
        oracle = grid[np.argmax(backaction_damping(B, device.cavity.kappa,
                                                   device.mech.omega_m, grid))]
        assert abs(d - oracle) < 2e-3 * device.cavity.kappa
        assert abs(d / TWO_PI + 1.525e6) < 115e3
        assert abs(d + device.mech.omega_m) < device.cavity.kappa / 2

    def test_scale_invariance(self, device):
        a = find_optimal_detuning(device, P_c=1e-7)
        b = find_optimal_detuning(device, P_c=2e-7)
        assert abs(a - b) < 2e-3 * device.cavity.kappa

    def test_kerr_pushes_optimum_down(self, device, kerr):
        opts = [find_optimal_detuning(device, P_c=P, kerr=kerr) for P in np.geomspace(1e-7, 1e-5, 6)]
        assert np.all(np.diff(opts) < 0)

    def test_argument_validation(self, device):
        with pytest.raises(ValueError):
            find_optimal_detuning(device)
        with pytest.raises(ValueError):
            find_optimal_detuning(device, P_c=1e-7, n_grid=100)

    def test_golden_section(self):
        x = golden_section_max(lambda t: -(t - 0.3) ** 2, -1.0, 2.0, 1e-9)
        assert x == pytest.approx(0.3, abs=1e-9)


class TestCooling:
    powers = np.geomspace(46e-12, 7.3e-6, 12)

    def test_monotone_without_heating(self, device):
        c = cooling_curve(self.powers, device)
        assert np.all(np.diff(c.T_m) < 0)
        assert np.all(np.diff(c.m_bar) < 0)
        assert np.all(np.diff(c.gamma_m) > 0)

    def test_mixing_formula_exact(self, device):
        c = cooling_curve(self.powers, device)
        g0, T0, Tp = device.mech.gamma_m0 / TWO_PI, device.env.T_0, device.env.T_p
        expected = T0 * g0 / c.gamma_m + Tp * c.Gamma / c.gamma_m
        np.testing.assert_allclose(c.T_m, expected, rtol=1e-13)

    def test_thirty_fold_damping_without_heating_is_too_cold(self):
        # T_0 gamma_m0 / gamma_m with gamma_m = 30 gamma_m0 and T_p negligible.
        assert effective_temperature(1.0, 0.05, 29.0, 0.0) == pytest.approx(0.05 / 30)

    def test_radiation_damping_slope(self, device):
        P = np.geomspace(7.3e-7, 7.3e-6, 5)
        c = cooling_curve(P, device)
        slope = np.polyfit(np.log(P), np.log(c.gamma_m - device.mech.gamma_m0 / TWO_PI), 1)[0]
        assert slope == pytest.approx(1.0, abs=1e-3)

    def test_total_damping_slope_when_backaction_dominates(self, device):
        P = np.geomspace(1e-4, 1e-3, 5)
        c = cooling_curve(P, device)
        assert c.Gamma[0] > 100 * device.mech.gamma_m0 / TWO_PI
        slope = np.polyfit(np.log(P), np.log(c.gamma_m), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.01)

    def test_heating_identity_when_disabled(self):
        h = HeatingModel(alpha=5.0, eta=2.0, enabled=False)
        assert h.apply(1e-6, 0.05, 3.0) == (0.05, 3.0)
        with pytest.raises(ValueError):
            HeatingModel(alpha=-1.0)
        with pytest.raises(ValueError):
            HeatingModel(beta=0.0)

    def test_powers_validation(self, device):
        with pytest.raises(ValueError):
            cooling_curve([1e-7, 1e-8], device)
        with pytest.raises(ValueError):
            cooling_curve([0.0], device)

    def test_regenerative_guard(self, device, monkeypatch):
        # Unreachable through the optimiser; force a blue-sideband optimum.
        import backaction.experiment as exp
        monkeypatch.setattr(exp, "find_optimal_detuning",
                            lambda params, **kw: params.mech.omega_m)
        with pytest.raises(RegenerativeError):
            cooling_curve([1e-5], device)

    def test_noise_floor_column(self, device):
        from backaction.spectra import NoiseModel
        c = cooling_curve(self.powers, device, noise=NoiseModel(1e-28, 5e-8))
        assert np.all(np.diff(c.floor) < 0)
        assert np.all(np.isnan(cooling_curve(self.powers, device).floor))


class TestHeatingFit:
    P_top = 2.2e-5

    def test_matches_root_finder(self, device):
        h = fit_heating_model(self.P_top, device, beta=1.0)
        low = cooling_curve([46e-12], device)
        top = cooling_curve([self.P_top], device, heating=h)
        assert top.gamma_m[0] / (device.mech.gamma_m0 / TWO_PI) == pytest.approx(30.0, rel=1e-9)
        assert low.T_m[0] / top.T_m[0] == pytest.approx(5.0 * low.T_m[0] / device.env.T_0,
                                                          rel=1e-9)

        Gam = top.Gamma[0] * TWO_PI
        g0, T0, Tp = device.mech.gamma_m0, device.env.T_0, device.env.T_p

        def eqs(x):
            alpha, eta = x
            dT = alpha * self.P_top
            gm0 = g0 * (1 + eta * dT)
            Tm = ((T0 + dT) * gm0 + Tp * Gam) / (gm0 + Gam)
            return [(gm0 + Gam) / g0 - 30.0, T0 / Tm - 5.0]

        alpha, eta = fsolve(eqs, [h.alpha * 1.3, h.eta * 0.7], xtol=1e-13)
        assert h.alpha == pytest.approx(alpha, rel=1e-7)
        assert h.eta == pytest.approx(eta, rel=1e-7)

    def test_infeasible_at_lower_power(self, device):
        with pytest.raises(ValueError, match="cool"):
            fit_heating_model(7.3e-6, device)
        with pytest.raises(ValueError, match="exceeds"):
            fit_heating_model(1e-3, device)

    def test_beta_is_honoured(self, device):
        h = fit_heating_model(self.P_top, device, beta=2.0)
        h1 = fit_heating_model(self.P_top, device, beta=1.0)
        assert h.beta == 2.0
        assert h.alpha * self.P_top**2 == pytest.approx(h1.alpha * self.P_top, rel=1e-12)
