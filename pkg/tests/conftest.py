"""Shared fixtures: the bundled six-terminal setup plus small synthetic grids."""

import numpy as np
import pytest

import mtdcsim as m


@pytest.fixture(scope="session")
def paper_sc():
    return m.load_config(m.reference_config_path())


@pytest.fixture(scope="session")
def paper_model_reduced(paper_sc):
    return m.assemble_resistive(paper_sc.net, paper_sc.areas, paper_sc.cfg, reduced=True)


@pytest.fixture(scope="session")
def paper_model_full(paper_sc):
    return m.assemble_resistive(paper_sc.net, paper_sc.areas, paper_sc.cfg, reduced=False)


@pytest.fixture(scope="session")
def paper_trajs(paper_sc):
    """The configured scenario under all three controller pairings."""
    return m.compare_variants(paper_sc.net, paper_sc.areas, paper_sc.cfg, paper_sc.scenario)


def single_gen_system(n_areas=2, gamma=0.0, variant=m.Variant.DIST_GEN_DIST_CONV,
                      k_phi=15.0, r=0.1, inertia=2.0, k_omega=10.0, k_v=4.0,
                      k_droop=4.0, k_droop_i=2.0, cap=0.1):
    """Chain-topology DC grid with identical single-generator areas."""
    lines = tuple(m.DcLine(i, i + 1, r, l=r * 4e-3, c=0.01) for i in range(n_areas - 1))
    net = m.MtdcNetwork(cap=(cap,) * n_areas, lines=lines)
    areas = tuple(m.AcArea(inertia=(inertia,)) for _ in range(n_areas))
    comm = tuple((ln.i, ln.j, 1.0 / ln.r) for ln in lines)
    cfg = m.ControllerConfig(
        k_droop=((k_droop,),) * n_areas,
        k_droop_i=((k_droop_i,),) * n_areas,
        k_omega=(k_omega,) * n_areas,
        k_v=(k_v,) * n_areas,
        comm_eta=m.WeightedGraph(n_areas, tuple((i, j, 5.0 * w) for i, j, w in comm)) if n_areas > 1 else m.WeightedGraph(1),
        comm_phi=m.WeightedGraph(n_areas, tuple((i, j, k_phi * w) for i, j, w in comm)) if n_areas > 1 else m.WeightedGraph(1),
        gamma=gamma,
        variant=variant,
    )
    return net, areas, cfg


@pytest.fixture
def two_area():
    return single_gen_system(2)


@pytest.fixture
def three_area():
    return single_gen_system(3, gamma=4.0, k_phi=8.0)


def random_stable_config(rng, min_decay=0.05):
    """Random connected MTDC grid with single-generator areas, retried
    until the reduced distributed/distributed loop decays at ``min_decay``."""
    while True:
        n = int(rng.integers(2, 5))
        edges = [(i, i + 1) for i in range(n - 1)]
        extra = [(i, j) for i in range(n) for j in range(i + 2, n)]
        rng.shuffle(extra)
        edges += extra[: int(rng.integers(0, len(extra) + 1))]
        lines = tuple(m.DcLine(i, j, float(rng.uniform(0.05, 0.5)), l=1e-3, c=0.01)
                      for i, j in edges)
        net = m.MtdcNetwork(cap=tuple(float(rng.uniform(0.05, 0.5)) for _ in range(n)),
                            lines=lines)
        areas = tuple(m.AcArea(inertia=(float(rng.uniform(2.0, 20.0)),)) for _ in range(n))
        k_phi = float(rng.uniform(1.0, 10.0))
        gamma = float(rng.choice([0.0, k_phi / 4.0 + rng.uniform(0.5, 2.0)]))
        cfg = m.ControllerConfig(
            k_droop=tuple((float(rng.uniform(0.5, 5.0)),) for _ in range(n)),
            k_droop_i=tuple((float(rng.uniform(0.2, 2.0)),) for _ in range(n)),
            k_omega=tuple(float(rng.uniform(5.0, 50.0)) for _ in range(n)),
            k_v=tuple(float(rng.uniform(1.0, 5.0)) for _ in range(n)),
            comm_eta=m.WeightedGraph(n, tuple((ln.i, ln.j, float(rng.uniform(1.0, 10.0)) / ln.r)
                                              for ln in lines)),
            comm_phi=m.WeightedGraph(n, tuple((ln.i, ln.j, k_phi / ln.r) for ln in lines)),
            gamma=gamma,
            variant=m.Variant.DIST_GEN_DIST_CONV,
        )
        model = m.assemble_resistive(net, areas, cfg, reduced=True)
        abscissa, stable = m.hurwitz(model)
        if stable and abscissa < -min_decay:
            return net, areas, cfg


def mixed_relative_error(got, want, floor=1.0):
    """Componentwise |got - want| / max(floor, |want|), maximized."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return float((np.abs(got - want) / np.maximum(floor, np.abs(want))).max())
