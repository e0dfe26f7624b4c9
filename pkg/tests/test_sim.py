"""Integration: steppers, event handling, determinism, mode equivalences."""

from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import mtdcsim as m
from mtdcsim import _kernels
from mtdcsim.sim import discretize

from conftest import single_gen_system
from direct_rhs import direct_rhs, flatten, unflatten


def _run_kernel(kern_name, a, t_end, dt, x0, kernels=None):
    kernels = kernels or _kernels.KERNELS
    n_steps = int(round(t_end / dt))
    bounds = np.array([0, n_steps], dtype=np.int64)
    rec = np.array([0, n_steps], dtype=np.int64)
    out = np.empty((2, a.shape[0]))
    if kern_name == "exact_linear":
        phi, gam = discretize(a, dt)
        c = np.zeros((1, a.shape[0]))
        status = kernels["exact_linear"](phi, c, bounds, x0, rec, out)
    else:
        status = kernels["rk4_linear"](a, np.zeros((1, a.shape[0])), bounds, x0, dt, rec, out)
    assert status == -1
    return out[-1]


class TestSteppers:
    def test_rk4_matches_analytic_decay(self):
        """x' = -x integrated over 1 s lands on exp(-1) to fourth order."""
        final = _run_kernel("rk4_linear", np.array([[-1.0]]), 1.0, 0.01, np.array([1.0]))
        assert abs(final[0] - np.exp(-1.0)) < 1e-9

    def test_exact_matches_analytic_decay(self):
        final = _run_kernel("exact_linear", np.array([[-1.0]]), 1.0, 0.01, np.array([1.0]))
        assert abs(final[0] - np.exp(-1.0)) < 1e-12

    @pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba backend disabled")
    def test_backends_agree(self):
        rng = np.random.default_rng(2)
        a = -np.eye(4) + 0.3 * rng.standard_normal((4, 4))
        x0 = rng.standard_normal(4)
        got = _run_kernel("exact_linear", a, 2.0, 0.01, x0, kernels=_kernels.NUMBA_KERNELS)
        want = _run_kernel("exact_linear", a, 2.0, 0.01, x0, kernels=_kernels.NUMPY_KERNELS)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)

    def test_discretize_singular_matrix(self):
        """Zero-order hold must not require an invertible state matrix."""
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        phi, gam = discretize(a, 0.5)
        np.testing.assert_allclose(phi, [[1.0, 0.5], [0.0, 1.0]], atol=1e-14)
        np.testing.assert_allclose(gam, [[0.5, 0.125], [0.0, 0.5]], atol=1e-14)


class TestIntegrate:
    def test_zero_disturbance_stays_at_origin(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        traj = m.integrate(model, m.Scenario(t_end=1.0, dt=1e-3))
        np.testing.assert_array_equal(traj.states, np.zeros_like(traj.states))
        np.testing.assert_array_equal(traj.p_gen, np.zeros_like(traj.p_gen))

    def test_stable_decay_from_initial_state(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        rng = np.random.default_rng(0)
        x0 = 0.01 * rng.standard_normal(model.dim)
        traj = m.integrate(model, m.Scenario(t_end=200.0, dt=1e-2, record_every=100), x0=x0)
        assert np.linalg.norm(traj.states[-1]) < 1e-6 * np.linalg.norm(x0) + 1e-12

    def test_event_applied_at_first_step_boundary(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        scen = m.Scenario(t_end=1.0, dt=1e-3,
                          disturbances=(m.DisturbanceEvent(0.5001, 0, 0, -0.1),))
        traj = m.integrate(model, scen)
        assert np.all(traj.states[traj.times <= 0.501] == 0.0)
        assert np.any(traj.states[traj.times > 0.502] != 0.0)

    def test_determinism_bit_identical(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        scen = m.Scenario(t_end=2.0, dt=1e-3,
                          disturbances=(m.DisturbanceEvent(0.2, 0, 0, -0.1),))
        t1 = m.integrate(model, scen)
        t2 = m.integrate(model, scen)
        np.testing.assert_array_equal(t1.states, t2.states)

    def test_full_and_reduced_outputs_agree(self, two_area):
        net, areas, cfg = two_area
        full = m.assemble_resistive(net, areas, cfg, reduced=False)
        red = m.assemble_resistive(net, areas, cfg, reduced=True)
        scen = m.Scenario(t_end=5.0, dt=1e-3,
                          disturbances=(m.DisturbanceEvent(0.5, 1, 0, -0.2),))
        y_full = m.integrate(full, scen).outputs()
        y_red = m.integrate(red, scen).outputs()
        assert np.abs(y_full - y_red).max() < 1e-9

    def test_halving_dt_changes_terminal_state_negligibly(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        ev = (m.DisturbanceEvent(0.5, 0, 0, -0.2),)
        t1 = m.integrate(model, m.Scenario(t_end=5.0, dt=1e-3, disturbances=ev))
        t2 = m.integrate(model, m.Scenario(t_end=5.0, dt=5e-4, disturbances=ev))
        assert np.abs(t1.states[-1] - t2.states[-1]).max() < 1e-8

    def test_rk4_method_agrees_on_nonstiff_system(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        ev = (m.DisturbanceEvent(0.1, 0, 0, -0.1),)
        te = m.integrate(model, m.Scenario(t_end=2.0, dt=1e-3, disturbances=ev))
        tr = m.integrate(model, m.Scenario(t_end=2.0, dt=1e-3, disturbances=ev),
                         method=m.Method.RK4)
        assert np.abs(te.states[-1] - tr.states[-1]).max() < 1e-9

    def test_rk4_warns_on_stiff_step(self, paper_model_reduced):
        scen = m.Scenario(t_end=0.05, dt=1e-3,
                          disturbances=(m.DisturbanceEvent(0.0, 0, 1, -0.2),))
        with pytest.warns(UserWarning, match="rk4 step size unstable"):
            with pytest.raises(m.IntegrationError):
                m.integrate(paper_model_reduced, scen, method=m.Method.RK4)

    def test_record_every_decimation(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        traj = m.integrate(model, m.Scenario(t_end=1.0, dt=1e-3, record_every=100))
        np.testing.assert_allclose(np.diff(traj.times), 0.1)

    def test_derived_series_match_control_laws(self, two_area):
        """p_gen / p_inj columns reproduce the control-module evaluation."""
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        scen = m.Scenario(t_end=2.0, dt=1e-3,
                          disturbances=(m.DisturbanceEvent(0.2, 0, 0, -0.15),))
        traj = m.integrate(model, scen)
        k = traj.states.shape[0] // 2
        x = traj.states[k]
        lay = model.layout
        omega = np.concatenate([x[lay.sl("freq0")], x[lay.sl("freq1")]])
        p_gen, _ = m.gen_control_distributed(omega, x[lay.sl("gen_integral")], cfg)
        p_inj, _ = m.conv_control_distributed(
            omega, x[lay.sl("vdc")], x[lay.sl("conv_phase")], cfg)
        np.testing.assert_allclose(traj.p_gen[k], p_gen, atol=1e-13)
        np.testing.assert_allclose(traj.p_inj[k], p_inj, atol=1e-13)

    def test_scenario_validation(self):
        with pytest.raises(ValueError, match="dt"):
            m.Scenario(t_end=1.0, dt=0.05)
        with pytest.raises(ValueError, match="event time"):
            m.Scenario(t_end=1.0, disturbances=(m.DisturbanceEvent(2.0, 0, 0, 1.0),))


class TestNonlinearMode:
    def test_requires_full_model(self, two_area):
        net, areas, cfg = two_area
        red = m.assemble_resistive(net, areas, cfg, reduced=True)
        scen = m.Scenario(t_end=1.0, mode=m.CouplingMode.NONLINEAR)
        with pytest.raises(ValueError, match="full-coordinate"):
            m.integrate(red, scen)

    def test_against_reference_solver(self, two_area):
        """Independent oracle: adaptive RK on the scalar-equation right side."""
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        u = [[-0.2], [0.0]]
        scen = m.Scenario(t_end=4.0, dt=1e-3, mode=m.CouplingMode.NONLINEAR,
                          disturbances=(m.DisturbanceEvent(0.0, 0, 0, -0.2),))
        traj = m.integrate(model, scen)

        def rhs(_, x):
            state = unflatten(model.layout, x)
            return flatten(model.layout, direct_rhs(net, areas, cfg, state, u, mode="nonlinear"))

        ref = solve_ivp(rhs, (0.0, 4.0), np.zeros(model.dim), rtol=1e-11, atol=1e-12,
                        t_eval=[4.0])
        np.testing.assert_allclose(traj.states[-1], ref.y[:, -1], atol=1e-7)

    def test_voltage_collapse_aborts(self):
        net, areas, cfg = single_gen_system(1, variant=m.Variant.DEC_GEN_DEC_CONV,
                                            k_omega=1.0, k_v=1.0, k_droop=1.0, cap=1.0)
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        scen = m.Scenario(t_end=20.0, dt=1e-2, mode=m.CouplingMode.NONLINEAR,
                          disturbances=(m.DisturbanceEvent(0.0, 0, 0, -1.2),))
        with pytest.raises(m.IntegrationError, match="0.5"):
            m.integrate(model, scen)

    def test_reference_scenario_five_percent_band(self, paper_sc, paper_trajs):
        """Reference voltages stay close to nominal, so the two couplings
        produce nearly identical outputs."""
        model = m.assemble_resistive(paper_sc.net, paper_sc.areas, paper_sc.cfg,
                                     reduced=False)
        lin = paper_trajs[m.Variant.DIST_GEN_DIST_CONV]
        scen = replace(paper_sc.scenario, mode=m.CouplingMode.NONLINEAR)
        non = m.integrate(model, scen)
        band = np.abs(non.dc_voltages() - paper_sc.net.v_nom).max()
        assert band < 0.05
        scale = np.abs(lin.outputs()).max()
        assert np.abs(lin.outputs() - non.outputs()).max() <= 0.05 * scale

    def test_close_to_linear_within_small_band(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=False)
        ev = (m.DisturbanceEvent(0.2, 0, 0, -0.05),)
        lin = m.integrate(model, m.Scenario(t_end=5.0, dt=1e-3, disturbances=ev))
        non = m.integrate(model, m.Scenario(t_end=5.0, dt=1e-3, disturbances=ev,
                                            mode=m.CouplingMode.NONLINEAR))
        scale = np.abs(lin.outputs()).max()
        assert np.abs(lin.outputs() - non.outputs()).max() <= 0.05 * scale


class TestCompareVariants:
    def test_generation_spread_contrast(self, paper_trajs):
        """Only the fully distributed pairing equalizes the area totals."""
        spreads = {}
        for variant, traj in paper_trajs.items():
            offsets = traj.model.bus_offsets()
            totals = np.array([
                traj.p_gen[-1, off:off + traj.model.areas[i].n_buses].sum()
                for i, off in enumerate(offsets)])
            spreads[variant] = totals.max() - totals.min()
        assert spreads[m.Variant.DIST_GEN_DIST_CONV] < 1e-6
        assert spreads[m.Variant.DIST_GEN_DEC_CONV] > 1e-3
        assert spreads[m.Variant.DEC_GEN_DEC_CONV] > 1e-3

    def test_weighted_voltage_error_contrast(self, paper_trajs, paper_sc):
        """Distributed generation restores the weighted voltage error."""
        k_v = np.array(paper_sc.cfg.k_v)
        terminal = {}
        for variant, traj in paper_trajs.items():
            vdc = traj.states[-1, traj.model.layout.sl("vdc")]
            terminal[variant] = abs(k_v @ vdc)
        assert terminal[m.Variant.DIST_GEN_DIST_CONV] < 1e-6
        assert terminal[m.Variant.DIST_GEN_DEC_CONV] < 1e-6
        assert terminal[m.Variant.DEC_GEN_DEC_CONV] > 1e-3

    def test_three_pairings(self, two_area):
        net, areas, cfg = two_area
        out = m.compare_variants(net, areas, cfg, m.Scenario(t_end=1.0, dt=1e-3))
        assert set(out) == {m.Variant.DEC_GEN_DEC_CONV, m.Variant.DIST_GEN_DEC_CONV,
                            m.Variant.DIST_GEN_DIST_CONV}

    def test_zero_disturbance_identical(self, two_area):
        net, areas, cfg = two_area
        out = m.compare_variants(net, areas, cfg, m.Scenario(t_end=1.0, dt=1e-3))
        for traj in out.values():
            np.testing.assert_array_equal(traj.outputs(), np.zeros_like(traj.outputs()))


class TestLyapunovTrace:
    def test_zero_scenario_zero_trace(self, two_area):
        net, areas, cfg = two_area
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        trace = m.lyapunov_trace(model, m.Scenario(t_end=1.0, dt=1e-3))
        np.testing.assert_array_equal(trace.values, np.zeros_like(trace.values))

    def test_damped_configuration_monotone(self):
        net, areas, cfg = single_gen_system(3, gamma=4.0, k_phi=8.0)
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        scen = m.Scenario(t_end=30.0, dt=1e-3, record_every=10,
                          disturbances=(m.DisturbanceEvent(1.0, 0, 0, -0.2),))
        trace = m.lyapunov_trace(model, scen)
        assert trace.max_step_increase <= 1e-8
        assert trace.values[0] > trace.values[-1]

    def test_undamped_trace_still_produced(self):
        net, areas, cfg = single_gen_system(3, gamma=0.0, k_phi=8.0)
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        scen = m.Scenario(t_end=5.0, dt=1e-3, record_every=10,
                          disturbances=(m.DisturbanceEvent(1.0, 0, 0, -0.2),))
        trace = m.lyapunov_trace(model, scen)
        assert np.all(np.isfinite(trace.values))
