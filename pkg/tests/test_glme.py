import numpy as np
import pytest

from conftest import make_table, random_system
from gtib import _levinson
from gtib.errors import CutRequiredError, KernelRangeError
from gtib.glme import (Direction, StopReason, assemble, extend_start, march,
                       solve, start_march)
from gtib.oracles import (SolitonParams, dense_solve, exact_soliton,
                          multi_soliton_spectral_data, soliton_spectral_data)
from gtib.signals import TimeGrid
from gtib.spectral import (Side, SignMode, kernel_left, kernel_right,
                           mirror_to_left, synthesize_kernel)


def soliton_march_setup(p, t_start, steps, tau, m0=1, side=Side.LEFT):
    """Kernel table and start system for a march across a soliton."""
    data = soliton_spectral_data(p, side)
    engine = data if side is Side.LEFT else mirror_to_left(data)
    h = 2.0 * tau
    t_engine = t_start if side is Side.LEFT else -t_start
    m_fin = m0 + steps
    z0 = 2.0 * t_engine - m0 * h - (m_fin - 1) * h
    kernel = synthesize_kernel(engine, z0, h, 2 * m_fin + 2)
    system = assemble(kernel, t_engine, m0 * h, m0, data.sign_mode)
    return data, kernel, system


class TestAssemble:
    def test_zero_kernel_zero_system(self):
        table = make_table(np.zeros(34))
        system = assemble(table, t=0.8, P=0.8, M=16, sign=SignMode.WITH_DISCRETE)
        np.testing.assert_array_equal(system.rhs, 0)
        np.testing.assert_array_equal(system.toeplitz_gen, 0)
        assert system.toeplitz_gen.size == 31
        assert system.rhs.size == 16

    def test_m1_closed_form(self):
        rng = np.random.default_rng(3)
        vals = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        table = make_table(vals, z0=0.0, dz=0.05)
        # base index 1: generator K(2t-P) = vals[1], rhs K(2t-P+h) = vals[2]
        t = 0.5 * (0.05 + 0.05)
        system = assemble(table, t=t, P=0.05, M=1, sign=SignMode.WITH_DISCRETE)
        sol = solve(system)
        h, w0, f1 = 0.05, vals[1], vals[2]
        det = 1.0 + h * h * abs(w0) ** 2
        y2 = f1 / det
        x1 = h * np.conj(w0) * f1 / det
        assert sol.x1[0] == pytest.approx(x1, rel=1e-14)
        assert sol.y2[0] == pytest.approx(y2, rel=1e-14)
        assert sol.q_at_t == pytest.approx(-2.0 * y2, rel=1e-14)

    def test_out_of_range_rejected(self):
        table = make_table(np.zeros(10))
        with pytest.raises(KernelRangeError):
            assemble(table, t=0.0, P=0.5, M=10, sign=SignMode.WITH_DISCRETE)

    def test_misaligned_rejected(self):
        table = make_table(np.zeros(40))
        with pytest.raises(KernelRangeError):
            assemble(table, t=0.5126, P=0.4, M=8, sign=SignMode.WITH_DISCRETE)

    def test_flagged_entry_requires_cut(self):
        vals = np.ones(34, complex)
        table = make_table(vals)
        table.flags[20] = True
        with pytest.raises(CutRequiredError):
            assemble(table, t=0.8, P=0.8, M=16, sign=SignMode.WITH_DISCRETE)
        # permissive assembly tolerates soft flags but never hard ones
        assemble(table, t=0.8, P=0.8, M=16, sign=SignMode.WITH_DISCRETE,
                 allow_flagged=True)
        table.hard[20] = True
        with pytest.raises(CutRequiredError):
            assemble(table, t=0.8, P=0.8, M=16, sign=SignMode.WITH_DISCRETE,
                     allow_flagged=True)

    def test_soliton_far_left_tiny(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        data = soliton_spectral_data(p, Side.LEFT)
        h = 0.05
        M = 64
        t = -20.0  # 2 eta t - delta = -40: |q| < 1e-10 by a wide margin
        z0 = 2 * t - M * h - (M - 1) * h
        kernel = kernel_left(data, z0, h, 2 * M + 2)
        system = assemble(kernel, t, M * h, M, data.sign_mode)
        assert np.max(np.abs(system.rhs)) < 1e-10
        assert abs(solve(system).q_at_t) < 1e-10


class TestSolve:
    def test_zero_rhs_zero_solution(self):
        # generators nonzero but rhs identically zero
        vals = np.zeros(34, complex)
        vals[:17] = 0.3 - 0.2j  # negative-side generators only
        table = make_table(vals)
        system = assemble(table, t=0.8, P=0.8, M=16, sign=SignMode.WITH_DISCRETE)
        assert np.max(np.abs(system.rhs)) == 0.0
        sol = solve(system)
        np.testing.assert_array_equal(sol.x1, 0)
        np.testing.assert_array_equal(sol.y2, 0)
        assert sol.q_at_t == 0

    @pytest.mark.parametrize("sign", [SignMode.WITH_DISCRETE,
                                      SignMode.CONTINUOUS_ONLY])
    def test_matches_dense_small_random(self, sign):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = int(rng.integers(1, 17))
            system, _ = random_system(rng, m, sign=sign)
            lev = solve(system)
            den = dense_solve(system)
            scale = max(np.max(np.abs(den.x1)), np.max(np.abs(den.y2)))
            assert np.max(np.abs(lev.x1 - den.x1)) < 1e-12 * scale
            assert np.max(np.abs(lev.y2 - den.y2)) < 1e-12 * scale

    def test_discrete_equation_residual(self):
        rng = np.random.default_rng(5)
        for m in (8, 24, 32):
            system, _ = random_system(rng, m)
            sol = solve(system)
            A, rhs = _levinson.materialize(system.kernel.values, system.base_off,
                                           system.h, system.sign.sigma, m)
            u = np.concatenate([sol.x1, sol.y2])
            res = np.abs(A @ u - rhs)
            bound = 1e-12 * (1.0 + np.linalg.norm(system.rhs))
            assert np.max(res) < bound

    def test_single_soliton_value_at_center(self):
        # q(0) = 2 eta e^{-i theta} for the standard test soliton
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        for tau, tol in ((0.02, 3e-3), (0.01, 8e-4)):
            steps = int(round(12.0 / tau))
            _, kernel, system = soliton_march_setup(p, -12.0, steps, tau,
                                                    m0=int(round(24.0 / (2 * tau))))
            state_sol, state = start_march(system, Direction.RIGHTWARD_LEFT_GLME,
                                           expected_steps=steps)
            res = march(state, kernel, steps)
            assert res.t[-1] == pytest.approx(0.0, abs=1e-9)
            expect = 2.0 * np.exp(-0.8j)
            assert abs(res.q[-1] - expect) < tol
            # O(h^2): quartering the error when tau halves is checked by the
            # two tolerances above

    def test_order_of_approximation(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        errs = []
        taus = [0.05, 0.025, 0.0125]
        for tau in taus:
            steps = int(round(13.0 / tau))
            _, kernel, system = soliton_march_setup(p, -12.0, steps, tau)
            _, state = start_march(system, expected_steps=steps)
            res = march(state, kernel, steps)
            exact = exact_soliton(p, res.t).q
            eps = np.abs(res.q - exact) / np.max(np.abs(exact))
            errs.append(np.sqrt(np.mean(eps ** 2)))
        slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
        assert 1.8 < slope < 2.2


class TestMarch:
    def test_zero_steps_returns_start_point(self):
        p = SolitonParams(eta=1.0)
        _, kernel, system = soliton_march_setup(p, -8.0, 4, 0.05)
        sol, state = start_march(system, expected_steps=4)
        res = march(state, kernel, 0)
        assert res.t.size == 1
        assert res.t[0] == pytest.approx(-8.0)
        assert res.q[0] == pytest.approx(sol.q_at_t)

    def test_march_matches_fresh_solves(self):
        p = SolitonParams(eta=1.0, xi=0.5, theta=0.8)
        steps = 10
        _, kernel, system = soliton_march_setup(p, -3.0, steps, 0.05, m0=40)
        _, state = start_march(system, expected_steps=steps)
        res = march(state, kernel, steps)
        for j in range(steps + 1):
            t_j = system.t + 0.5 * j * system.h
            fresh = assemble(kernel, t_j, system.P + j * system.h,
                             system.M + j, system.sign)
            q_ref = solve(fresh).q_at_t
            assert abs(res.q[j] - q_ref) <= 1e-10 * max(1.0, abs(q_ref))

    def test_generator_reuse_audit(self):
        """One march step consumes exactly two fresh table entries."""
        p = SolitonParams(eta=1.0)
        steps = 6
        _, kernel, system = soliton_march_setup(p, -6.0, steps, 0.05, m0=8)
        _, state = start_march(system, expected_steps=steps)
        used_before = set(range(state.base_off - (state.n - 1),
                                state.base_off + state.n + 1))
        for _ in range(steps):
            march(state, kernel, 1)
            used_now = set(range(state.base_off - (state.n - 1),
                                 state.base_off + state.n + 1))
            fresh = used_now - used_before
            assert len(fresh) == 2
            assert used_before <= used_now
            used_before = used_now

    def test_march_stops_at_flagged_entry(self):
        p = SolitonParams(eta=1.0)
        data = soliton_spectral_data(p, Side.LEFT)
        tau = 0.05
        h = 2 * tau
        steps = 200
        m_fin = 1 + steps
        z0 = 2 * (-2.0) - h - (m_fin - 1) * h
        kernel = kernel_left(data, z0, h, 2 * m_fin + 2)
        kernel.flags[:] = False
        kernel.flags[kernel.index_of(2 * (-2.0) + 40 * h)] = True
        system = assemble(kernel, -2.0, h, 1, data.sign_mode)
        _, state = start_march(system, expected_steps=steps)
        res = march(state, kernel, steps)
        assert res.stop_reason is StopReason.CUT_BOUNDARY
        assert res.steps_taken < steps

    def test_left_right_duality(self):
        """Right-side recovery equals the negated mirror of the left recovery."""
        p = SolitonParams(eta=1.1, xi=0.3, theta=0.4, delta=0.6)
        tau = 0.025
        steps = 160
        _, kernel_r, system_r = soliton_march_setup(p, 6.0, steps, tau,
                                                    side=Side.RIGHT)
        _, state_r = start_march(system_r, Direction.LEFTWARD_RIGHT_GLME,
                                 expected_steps=steps)
        res_r = march(state_r, kernel_r, steps)
        # mirrored left data recovers -q(-t)
        right = soliton_spectral_data(p, Side.RIGHT)
        mirrored = mirror_to_left(right)
        h = 2 * tau
        m_fin = 1 + steps
        z0 = 2 * (-6.0) - h - (m_fin - 1) * h
        kernel_l = kernel_left(mirrored, z0, h, 2 * m_fin + 2)
        system_l = assemble(kernel_l, -6.0, h, 1, mirrored.sign_mode)
        _, state_l = start_march(system_l, expected_steps=steps)
        res_l = march(state_l, kernel_l, steps)
        np.testing.assert_allclose(res_r.q, -res_l.q, rtol=0, atol=1e-10)
        np.testing.assert_allclose(res_r.t, -res_l.t, atol=1e-12)

    def test_right_system_dense_equivalence(self):
        """The mirrored engine solves the natural right-side block system."""
        p = SolitonParams(eta=0.9, xi=-0.2, theta=1.0, delta=-0.4)
        tau = 0.05
        h = 2 * tau
        M = 24
        t = 1.5
        right = soliton_spectral_data(p, Side.RIGHT)
        # natural right system: rho_d = K_r(2t + P + d h), d = -M..M
        dgrid = np.arange(-M, M + 1)
        rho_vals = kernel_right(right, 2 * t + M * h + dgrid[0] * h, h,
                                dgrid.size).values
        def rho_d(d):
            assert -M <= d <= M
            return rho_vals[d + M]
        E = np.eye(M)
        R = np.array([[rho_d(i - j) for j in range(M)] for i in range(M)])
        A = np.block([[E, -h * np.conj(R)], [h * R.T, E]])
        rhs = np.concatenate([np.zeros(M), -np.array([rho_d(-mm) for mm in range(1, M + 1)])])
        w1z2 = np.linalg.solve(A, rhs)
        q_dense = -2.0 * np.conj(w1z2[2 * M - 1])
        # engine path
        mirrored = mirror_to_left(right)
        z0 = 2 * (-t) - M * h - (M - 1) * h
        kernel_l = kernel_left(mirrored, z0, h, 2 * M + 2)
        system = assemble(kernel_l, -t, M * h, M, mirrored.sign_mode)
        q_engine = -solve(system).q_at_t
        assert q_engine == pytest.approx(q_dense, rel=1e-11)


class TestExtendStart:
    def test_extra_zero_identity(self):
        rng = np.random.default_rng(2)
        system, _ = random_system(rng, 8)
        assert extend_start(system, 0) is system

    def test_extension_covers_more_window(self):
        p = SolitonParams(eta=1.0)
        data = soliton_spectral_data(p, Side.LEFT)
        h = 0.1
        kernel = kernel_left(data, -30.0, h, 400)
        t = -2.0
        system = assemble(kernel, t, 8 * h, 8, data.sign_mode)
        bigger = extend_start(system, 8)
        assert bigger.M == 16
        assert bigger.P == pytest.approx(16 * h)
        assert bigger.t == t

    def test_worst_start_improves_with_extension(self):
        """Starting a march at the soliton center: extension shrinks the error."""
        p = SolitonParams(eta=1.0, xi=0.2, theta=0.1)
        tau = 0.025
        h = 2 * tau
        steps = 120  # march from the center out to t = 3
        m_plain = 10  # deliberately short window: P = 1, far too small at t = 0
        data = soliton_spectral_data(p, Side.LEFT)
        m_ext = m_plain + 200
        m_fin = m_ext + steps
        z0 = -m_ext * h - (m_fin - 1) * h
        kernel = kernel_left(data, z0, h, 2 * m_fin + 4)
        errors = {}
        for label, m0 in (("plain", m_plain), ("extended", m_ext)):
            system = assemble(kernel, 0.0, m0 * h, m0, data.sign_mode)
            if label == "extended":
                assert extend_start(assemble(kernel, 0.0, m_plain * h, m_plain,
                                             data.sign_mode), m_ext - m_plain).M == m0
            _, state = start_march(system, expected_steps=steps)
            res = march(state, kernel, steps)
            exact = exact_soliton(p, res.t).q
            eps = np.abs(res.q - exact) / np.max(np.abs(exact))
            errors[label] = np.sqrt(np.mean(eps ** 2))
        assert errors["extended"] < 0.1 * errors["plain"]
