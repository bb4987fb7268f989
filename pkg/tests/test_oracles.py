import numpy as np
import pytest

from conftest import random_system
from gtib.errors import GtibError, SpectralDataError
from gtib.glme import solve
from gtib.oracles import (ChirpedSechParams, Dispersion, SolitonParams,
                          chirped_sech, darboux_multisoliton, dense_solve,
                          exact_soliton, forward_scatter,
                          multi_soliton_spectral_data, soliton_spectral_data)
from gtib.signals import uniform_grid
from gtib.spectral import Side


class TestExactSoliton:
    def test_peak_value(self):
        p = SolitonParams(eta=1.0)
        sig = exact_soliton(p, np.array([0.0]))
        assert sig.q[0] == pytest.approx(2.0)

    def test_fig1_profile(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        t = uniform_grid(-10, 10, 2000)
        sig = exact_soliton(p, t)
        assert np.max(np.abs(sig.q)) == pytest.approx(2.0, rel=1e-6)
        assert sig.q[1000] == pytest.approx(2.0 * np.exp(-0.8j), rel=1e-12)

    def test_magnitude_symmetric_about_center(self):
        p = SolitonParams(eta=0.7, xi=0.3, theta=0.2, delta=1.4)
        c = p.center
        offs = np.linspace(0.1, 3.0, 7)
        left = exact_soliton(p, c - offs).q
        right = exact_soliton(p, c + offs).q
        np.testing.assert_allclose(np.abs(left), np.abs(right), rtol=1e-12)

    def test_eta_positive_required(self):
        with pytest.raises(ValueError):
            SolitonParams(eta=-1.0)


class TestChirpedSech:
    def test_amplitude_at_zero(self):
        sig = chirped_sech(ChirpedSechParams(5.2, 4.0), np.array([0.0]))
        assert sig.q[0] == pytest.approx(5.2)

    def test_zero_chirp_real_and_even(self):
        t = np.linspace(-5, 5, 41)
        sig = chirped_sech(ChirpedSechParams(2.0, 0.0), t)
        assert np.all(sig.q.imag == 0)
        np.testing.assert_allclose(sig.q, sig.q[::-1], rtol=1e-13)

    def test_five_anomalous_eigenvalues(self):
        t = uniform_grid(-22.4, 22.4, 4096)
        sig = chirped_sech(ChirpedSechParams(5.2, 4.0), t)
        xi = np.linspace(-16, 16, 513)
        data = forward_scatter(sig, xi, Dispersion.ANOMALOUS, Side.LEFT,
                               eta_search_max=6.0)
        assert len(data.discrete) == 5
        etas = sorted(d.zeta.imag for d in data.discrete)
        np.testing.assert_allclose(etas, [0.3, 1.3, 2.3, 3.3, 4.3], atol=1e-6)
        assert max(abs(d.zeta.real) for d in data.discrete) < 1e-6


class TestDarboux:
    def test_one_soliton_matches_exact(self):
        p = SolitonParams(eta=1.3, xi=-0.4, theta=0.9, delta=0.7)
        t = uniform_grid(-10, 10, 500)
        for side in (Side.LEFT, Side.RIGHT):
            data = soliton_spectral_data(p, side)
            sig = darboux_multisoliton(data.discrete, t, side)
            ref = exact_soliton(p, t)
            np.testing.assert_allclose(sig.q, ref.q, rtol=0, atol=1e-10)

    def test_two_soliton_tails_match_isolated(self):
        pars = [SolitonParams(1.0, 0.5, 0.1, -16.0),
                SolitonParams(1.75, -1.4, 0.8, 16.0)]
        data = multi_soliton_spectral_data(pars, Side.LEFT)
        t = uniform_grid(-16.0, 0.0, 800)  # around the left soliton
        sig = darboux_multisoliton(data.discrete, t, Side.LEFT)
        iso = exact_soliton(pars[0], t)
        # far from the right soliton the signal is the left soliton alone,
        # up to the exponentially small interaction tail
        err = np.max(np.abs(sig.q - iso.q)) / np.max(np.abs(iso.q))
        assert err < 1e-4

    def test_coincident_eigenvalues_rejected(self):
        p = SolitonParams(eta=1.0)
        d = soliton_spectral_data(p, Side.LEFT).discrete
        with pytest.raises(GtibError):
            darboux_multisoliton(d + d, np.linspace(-1, 1, 10))

    def test_eight_soliton_peaks_and_round_trip(self):
        from gtib.oracles import positioned_soliton_train
        from gtib.scenarios import EIGHT_SOLITON_PARAMS
        data = positioned_soliton_train(list(EIGHT_SOLITON_PARAMS), Side.LEFT)
        # wider than the recovery grid so the tails clear the decay
        # precondition; fine enough for the 1e-8 eigenvalue contract
        t = uniform_grid(-32.0, 32.0, 16384)
        sig = darboux_multisoliton(data.discrete, t, Side.LEFT)
        mag = np.abs(sig.q)
        peaks = [k for k in range(1, mag.size - 1)
                 if mag[k] > mag[k - 1] and mag[k] > mag[k + 1] and mag[k] > 0.9]
        assert len(peaks) == 8
        xi = np.linspace(-8, 8, 257)
        back = forward_scatter(sig, xi, Dispersion.ANOMALOUS, Side.LEFT,
                               eta_search_max=2.0)
        assert len(back.discrete) == 8
        for w in data.discrete:
            f = min(back.discrete, key=lambda d: abs(d.zeta - w.zeta))
            assert abs(f.zeta - w.zeta) < 1e-8
            assert abs(f.norming - w.norming) < 1e-6 * abs(w.norming)


class TestForwardScatter:
    def test_zero_signal(self):
        t = uniform_grid(-5, 5, 64)
        sig = exact_soliton(SolitonParams(eta=1.0), t)
        sig.q[:] = 0
        data = forward_scatter(sig, np.linspace(-2, 2, 33), Dispersion.ANOMALOUS,
                               Side.LEFT)
        assert not data.discrete
        np.testing.assert_allclose(np.abs(data.continuous.values), 0, atol=1e-14)

    def test_soliton_eigenvalue_and_norming(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        t = uniform_grid(-12.8, 12.8, 4096)
        sig = exact_soliton(p, t)
        for side in (Side.LEFT, Side.RIGHT):
            data = forward_scatter(sig, np.linspace(-6, 6, 129),
                                   Dispersion.ANOMALOUS, side)
            assert len(data.discrete) == 1
            d = data.discrete[0]
            assert abs(d.zeta - (0.5 + 1.0j)) < 1e-8
            ref = soliton_spectral_data(p, side).discrete[0]
            assert abs(d.norming - ref.norming) < 1e-7 * abs(ref.norming)
            # reflectionless: continuous part at the numerical noise floor
            assert np.max(np.abs(data.continuous.values)) < 1e-6

    def test_non_decaying_rejected(self):
        t = uniform_grid(-3, 3, 128)
        sig = exact_soliton(SolitonParams(eta=0.5), t)  # edges ~ 0.2
        with pytest.raises(SpectralDataError):
            forward_scatter(sig, np.linspace(-2, 2, 17), Dispersion.ANOMALOUS,
                            Side.LEFT)

    def test_born_limit_pins_continuous_conventions(self):
        """Weak pulse: kernel from scattered data matches the Born formula."""
        from gtib.spectral import synthesize_kernel
        t = uniform_grid(-16.0, 16.0, 2048)
        q0 = 1e-3 * np.exp(-t ** 2) * np.exp(0.4j * t)
        from gtib.signals import RecoveredSignal
        sig = RecoveredSignal(t=t, q=q0)
        xi = np.linspace(-12, 12, 1537)
        # a weak pulse has no bound states, so both dispersions carry the
        # lower sign branch: q ~ +2 K_left(2t) = -2 conj(K_right(2t))
        for disp in (Dispersion.ANOMALOUS, Dispersion.NORMAL):
            for side in (Side.LEFT, Side.RIGHT):
                data = forward_scatter(sig, xi, disp, side)
                assert not data.discrete
                table = synthesize_kernel(data, -6.0, 0.25, 49)  # z in [-6, 6]
                z = table.z0 + table.dz * np.arange(table.n)
                tt = z / 2.0
                qb = np.interp(tt, t, q0.real) + 1j * np.interp(tt, t, q0.imag)
                if side is Side.LEFT:
                    approx = 2.0 * table.values
                else:
                    approx = -2.0 * np.conj(table.values)
                err = np.max(np.abs(approx - qb)) / np.max(np.abs(qb))
                assert err < 5e-4, (disp, side, err)

    def test_normal_dispersion_chirped_kernel_bounded(self):
        t = uniform_grid(-22.4, 22.4, 2048)
        sig = chirped_sech(ChirpedSechParams(5.2, 4.0), t)
        xi = np.linspace(-16, 16, 1025)
        data = forward_scatter(sig, xi, Dispersion.NORMAL, Side.LEFT)
        assert not data.discrete
        from gtib.spectral import kernel_left
        table = kernel_left(data, -60.0, 0.25, 481)  # z in [-60, 60]
        assert np.all(np.isfinite(table.values))
        assert not table.flags.any()


class TestDenseSolve:
    def test_zero_rhs(self):
        from conftest import make_table
        from gtib.glme import assemble
        from gtib.spectral import SignMode
        table = make_table(np.zeros(18))
        system = assemble(table, t=0.4, P=0.4, M=8, sign=SignMode.WITH_DISCRETE)
        sol = dense_solve(system)
        np.testing.assert_array_equal(sol.x1, 0)
        assert sol.q_at_t == 0

    def test_agrees_with_levinson_m8(self):
        rng = np.random.default_rng(17)
        system, _ = random_system(rng, 8)
        lev = solve(system)
        den = dense_solve(system)
        assert abs(lev.q_at_t - den.q_at_t) < 1e-12 * max(1.0, abs(den.q_at_t))

    def test_size_policy(self):
        rng = np.random.default_rng(1)
        system, _ = random_system(rng, 8)
        system.M = 513
        with pytest.raises(GtibError):
            dense_solve(system)

    def test_soliton_center_value(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        data = soliton_spectral_data(p, Side.LEFT)
        from gtib.glme import assemble
        from gtib.spectral import kernel_left
        h = 0.05
        M = 480
        z0 = -M * h - (M - 1) * h
        kernel = kernel_left(data, z0, h, 2 * M + 2)
        system = assemble(kernel, 0.0, M * h, M, data.sign_mode)
        q = dense_solve(system).q_at_t
        assert abs(q - 2.0 * np.exp(-0.8j)) < 5e-3  # O(h^2)
