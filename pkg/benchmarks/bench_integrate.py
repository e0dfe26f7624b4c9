"""Benchmark the integration kernels: numba against the pure-numpy path.

Runs the bundled six-terminal scenario (45 s at 1 ms, 186 states, exact
stepping) and a smaller undamped chain system with the classical RK4
stepper. Usage:

    python benchmarks/bench_integrate.py [--repeat N]
"""

import argparse
import time

import numpy as np

import mtdcsim as m
from mtdcsim import _kernels
from mtdcsim.sim import _record_steps, _segments, discretize


def _prepare_exact(model, scenario):
    n_steps = int(round(scenario.t_end / scenario.dt))
    bounds, inputs = _segments(model, scenario, n_steps)
    rec = _record_steps(n_steps, scenario.record_every)
    phi, gam = discretize(model.a, scenario.dt)
    c_seg = np.ascontiguousarray(inputs @ model.b_dist.T @ gam.T)
    return phi, c_seg, bounds, rec


def _prepare_rk4(model, scenario):
    n_steps = int(round(scenario.t_end / scenario.dt))
    bounds, inputs = _segments(model, scenario, n_steps)
    rec = _record_steps(n_steps, scenario.record_every)
    bu = np.ascontiguousarray(inputs @ model.b_dist.T)
    return np.ascontiguousarray(model.a), bu, bounds, rec


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.NUMBA_ENABLED:
        raise SystemExit("numba backend unavailable (MTDCSIM_NUMBA=0 or numba missing); "
                         "nothing to compare")

    sc = m.load_config(m.reference_config_path())
    model = m.assemble_resistive(sc.net, sc.areas, sc.cfg, reduced=False)
    phi, c_seg, bounds, rec = _prepare_exact(model, sc.scenario)
    out = np.empty((rec.shape[0], model.dim))
    x0 = np.zeros(model.dim)

    print(f"exact stepper, {model.dim} states, {bounds[-1]} steps")
    # first call includes JIT compilation
    start = time.perf_counter()
    _kernels.NUMBA_KERNELS["exact_linear"](phi, c_seg, bounds, x0, rec, out)
    compile_time = time.perf_counter() - start
    t_numba = _time(lambda: _kernels.NUMBA_KERNELS["exact_linear"](
        phi, c_seg, bounds, x0, rec, out), args.repeat)
    t_numpy = _time(lambda: _kernels.NUMPY_KERNELS["exact_linear"](
        phi, c_seg, bounds, x0, rec, out), args.repeat)
    print(f"  numba : {t_numba * 1e3:9.1f} ms  (first call {compile_time:.2f} s incl. compile)")
    print(f"  numpy : {t_numpy * 1e3:9.1f} ms")
    print(f"  speedup x{t_numpy / t_numba:.2f}")

    net, areas, cfg = (
        m.MtdcNetwork(cap=(0.1,) * 4,
                      lines=tuple(m.DcLine(i, i + 1, 0.1, l=4e-4, c=0.01) for i in range(3))),
        tuple(m.AcArea(inertia=(2.0,)) for _ in range(4)),
        None,
    )
    cfg = m.ControllerConfig(
        k_droop=((4.0,),) * 4, k_droop_i=((2.0,),) * 4,
        k_omega=(10.0,) * 4, k_v=(4.0,) * 4,
        comm_eta=m.WeightedGraph(4, tuple((i, i + 1, 50.0) for i in range(3))),
        comm_phi=m.WeightedGraph(4, tuple((i, i + 1, 150.0) for i in range(3))),
        variant=m.Variant.DIST_GEN_DIST_CONV)
    small = m.assemble_resistive(net, areas, cfg, reduced=False)
    scen = m.Scenario(t_end=45.0, dt=1e-3, record_every=10,
                      disturbances=(m.DisturbanceEvent(1.0, 0, 0, -0.2),))
    a, bu, bounds, rec = _prepare_rk4(small, scen)
    out = np.empty((rec.shape[0], small.dim))
    x0 = np.zeros(small.dim)

    print(f"rk4 stepper, {small.dim} states, {bounds[-1]} steps")
    _kernels.NUMBA_KERNELS["rk4_linear"](a, bu, bounds, x0, scen.dt, rec, out)
    t_numba = _time(lambda: _kernels.NUMBA_KERNELS["rk4_linear"](
        a, bu, bounds, x0, scen.dt, rec, out), args.repeat)
    t_numpy = _time(lambda: _kernels.NUMPY_KERNELS["rk4_linear"](
        a, bu, bounds, x0, scen.dt, rec, out), args.repeat)
    print(f"  numba : {t_numba * 1e3:9.1f} ms")
    print(f"  numpy : {t_numpy * 1e3:9.1f} ms")
    print(f"  speedup x{t_numpy / t_numba:.2f}")


if __name__ == "__main__":
    main()
