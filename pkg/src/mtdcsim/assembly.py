"""Closed-loop state-space assembly for every plant/controller combination.

States are stacked in a fixed, named order so serialized results stay
stable: per area the (optional) relative rotor angles then the per-bus
frequency deviations, then the DC voltage deviations, the per-area
generation integral states (distributed generation only), the converter
phase states (distributed converter control only), and finally the pi-link
segment currents and internal voltages.

Reduced coordinates drop the uniform component of each rotor-angle block
and of the converter phase block; those directions are unobservable from
the (frequency, DC voltage) output and, for the phase block, marginally
stable, so removing them leaves the input/output behavior unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .control import ControllerConfig, Variant
from .netgraph import laplacian, ones_complement, require_finite
from .plant import (
    AcArea,
    MtdcNetwork,
    PiLinkChain,
    ac_swing_matrices,
    mtdc_resistive_matrices,
    pi_link_matrices,
)

RESISTIVE = "resistive"
PI_LINK = "pi_link"


@dataclass(frozen=True)
class StateLayout:
    """Named, contiguous state blocks: tuple of (name, offset, length)."""

    blocks: tuple

    def __post_init__(self):
        off = 0
        names = set()
        for name, start, length in self.blocks:
            if start != off or length < 0:
                raise ValueError("layout blocks must be contiguous and cover the state")
            if name in names:
                raise ValueError(f"duplicate block name {name}")
            names.add(name)
            off += length
        object.__setattr__(self, "_index", {b[0]: (b[1], b[2]) for b in self.blocks})

    @property
    def dim(self) -> int:
        return sum(b[2] for b in self.blocks)

    def has(self, name: str) -> bool:
        return name in self._index

    def offset(self, name: str) -> int:
        return self._index[name][0]

    def length(self, name: str) -> int:
        return self._index[name][1]

    def sl(self, name: str) -> slice:
        start, length = self._index[name]
        return slice(start, start + length)

    def names(self) -> tuple:
        return tuple(b[0] for b in self.blocks)


@dataclass(frozen=True, eq=False)
class ClosedLoopModel:
    """Assembled linear dynamics dx/dt = a x + b_dist u.

    ``u`` carries one uncontrolled power deviation per generator bus
    (area-major order). ``output`` selects y = [frequency deviations;
    DC voltage deviations]. ``p_gen_selector`` / ``p_inj_selector``
    reconstruct the controller outputs from the state.
    """

    a: np.ndarray
    b_dist: np.ndarray
    output: np.ndarray
    layout: StateLayout
    variant: Variant
    reduced: bool
    plant: str
    net: MtdcNetwork
    areas: tuple
    cfg: ControllerConfig
    p_gen_selector: np.ndarray
    p_inj_selector: np.ndarray
    chain: PiLinkChain = None

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def total_buses(self) -> int:
        return sum(area.n_buses for area in self.areas)

    def freq_block(self, area: int) -> slice:
        return self.layout.sl(f"freq{area}")

    def conv_freq_indices(self) -> np.ndarray:
        """State indices of the converter-bus frequency deviations."""
        return np.array([self.layout.offset(f"freq{a}") for a in range(self.n_areas)])

    def bus_offsets(self) -> list:
        out, off = [], 0
        for area in self.areas:
            out.append(off)
            off += area.n_buses
        return out


def _check_structure(net: MtdcNetwork, areas, cfg: ControllerConfig):
    areas = tuple(areas)
    if len(areas) != net.n:
        raise ValueError("need exactly one AC area per converter node")
    if cfg.n_areas != net.n:
        raise ValueError("controller gain lists must match the converter count")
    if cfg.bus_counts != tuple(a.n_buses for a in areas):
        raise ValueError("per-bus gain lists must match the area bus counts")
    return areas


def _build_layout(areas, cfg: ControllerConfig, reduced: bool, chain: PiLinkChain = None) -> StateLayout:
    n = len(areas)
    blocks = []
    off = 0

    def add(name, length):
        nonlocal off
        blocks.append((name, off, length))
        off += length

    for i, area in enumerate(areas):
        nb = area.n_buses
        if nb >= 2:
            add(f"angle{i}", nb - 1 if reduced else nb)
        add(f"freq{i}", nb)
    add("vdc", n)
    if cfg.variant.distributed_gen:
        add("gen_integral", n)
    if cfg.variant.distributed_conv:
        add("conv_phase", n - 1 if reduced else n)
    if chain is not None:
        for q in range(1, chain.n_segments + 1):
            add(f"line_current{q}", chain.n_lines)
        for q in range(1, chain.n_segments):
            add(f"line_voltage{q}", chain.n_lines)
    return StateLayout(tuple(blocks))


def _assemble(net: MtdcNetwork, areas, cfg: ControllerConfig, reduced: bool,
              chain: PiLinkChain = None) -> ClosedLoopModel:
    n = net.n
    layout = _build_layout(areas, cfg, reduced, chain)
    dim = layout.dim
    total_buses = sum(a.n_buses for a in areas)
    a_mat = np.zeros((dim, dim))
    b_dist = np.zeros((dim, total_buses))
    p_gen = np.zeros((total_buses, dim))
    p_inj = np.zeros((n, dim))

    e_mat, l_r = mtdc_resistive_matrices(net)
    e_diag = np.diag(e_mat)
    v_nom = net.v_nom
    k_omega = np.array(cfg.k_omega)
    k_v = np.array(cfg.k_v)
    l_phi = laplacian(cfg.comm_phi) if cfg.variant.distributed_conv else None
    l_eta = laplacian(cfg.comm_eta) if cfg.variant.distributed_gen else None
    s_conv = ones_complement(n)
    vdc = layout.sl("vdc")
    conv_freq = [layout.offset(f"freq{i}") for i in range(n)]

    bus_off = 0
    for i, area in enumerate(areas):
        nb = area.n_buses
        m_inv = 1.0 / np.array(area.inertia)
        fq = layout.sl(f"freq{i}")
        fo = fq.start
        kd = np.array(cfg.k_droop[i])
        kdi = np.array(cfg.k_droop_i[i])

        # frequency rows: droop at every bus, converter gain at bus 0 only
        for k in range(nb):
            a_mat[fo + k, fo + k] -= m_inv[k] * kd[k]
        a_mat[fo, fo] -= m_inv[0] * k_omega[i]
        a_mat[fo, vdc.start + i] += m_inv[0] * k_v[i]

        if nb >= 2:
            _, l_ac, s_i = ac_swing_matrices(area)
            ang = layout.sl(f"angle{i}")
            cpl = l_ac @ s_i if reduced else l_ac
            a_mat[fq, ang] -= m_inv[:, None] * cpl
            a_mat[ang, fq] += s_i.T if reduced else np.eye(nb)

        if cfg.variant.distributed_gen:
            gi = layout.sl("gen_integral")
            ratio = k_v[i] / k_omega[i]
            a_mat[fq, gi.start + i] -= m_inv * ratio * kdi
            a_mat[gi.start + i, fq] += kdi
            p_gen[bus_off:bus_off + nb, gi.start + i] -= ratio * kdi

        if cfg.variant.distributed_conv:
            ph = layout.sl("conv_phase")
            row = (l_phi @ s_conv)[i] if reduced else l_phi[i]
            a_mat[fo, ph] -= m_inv[0] * row
            p_inj[i, ph] += row

        for k in range(nb):
            b_dist[fo + k, bus_off + k] = m_inv[k]
            p_gen[bus_off + k, fo + k] -= kd[k]
        p_inj[i, fo] += k_omega[i]
        p_inj[i, vdc.start + i] -= k_v[i]
        bus_off += nb

    # DC voltage rows: injections always, line coupling per plant model
    for i in range(n):
        a_mat[vdc.start + i, conv_freq[i]] += e_diag[i] * k_omega[i] / v_nom
    a_mat[vdc, vdc] -= e_diag[:, None] * (np.eye(n) * (k_v / v_nom))
    if cfg.variant.distributed_conv:
        ph = layout.sl("conv_phase")
        blk = l_phi @ s_conv if reduced else l_phi
        a_mat[vdc, ph] += e_diag[:, None] * blk / v_nom

    if chain is None:
        a_mat[vdc, vdc] -= e_diag[:, None] * l_r
    else:
        m_lines = chain.n_lines
        ell = chain.n_segments
        cur = [layout.sl(f"line_current{q}") for q in range(1, ell + 1)]
        vol = [layout.sl(f"line_voltage{q}") for q in range(1, ell)]
        a_mat[vdc, cur[0]] -= e_diag[:, None] * chain.d_in
        a_mat[vdc, cur[-1]] += e_diag[:, None] * chain.d_out
        l_inv = 1.0 / chain.l_seg
        for q in range(ell):
            a_mat[cur[q], cur[q]] -= np.diag(chain.r_seg * l_inv)
            if q == 0:
                a_mat[cur[q], vdc] += l_inv[:, None] * chain.d_in.T
            else:
                a_mat[cur[q], vol[q - 1]] += np.diag(l_inv)
            if q == ell - 1:
                a_mat[cur[q], vdc] -= l_inv[:, None] * chain.d_out.T
            else:
                a_mat[cur[q], vol[q]] -= np.diag(l_inv)
        for q in range(ell - 1):
            c_inv = 1.0 / chain.c_seg
            a_mat[vol[q], cur[q]] += np.diag(c_inv)
            a_mat[vol[q], cur[q + 1]] -= np.diag(c_inv)

    if cfg.variant.distributed_gen:
        gi = layout.sl("gen_integral")
        a_mat[gi, gi] -= l_eta

    if cfg.variant.distributed_conv:
        ph = layout.sl("conv_phase")
        gains = np.diag(k_omega / k_v)
        src = s_conv.T @ gains if reduced else gains
        for i in range(n):
            a_mat[ph, conv_freq[i]] += src[:, i]
        a_mat[ph, ph] -= cfg.gamma * np.eye(layout.length("conv_phase"))

    out = np.zeros((total_buses + n, dim))
    row = 0
    for i in range(n):
        fq = layout.sl(f"freq{i}")
        for k in range(fq.stop - fq.start):
            out[row, fq.start + k] = 1.0
            row += 1
    for i in range(n):
        out[row, vdc.start + i] = 1.0
        row += 1

    require_finite(a_mat, "state matrix")
    return ClosedLoopModel(
        a=a_mat,
        b_dist=b_dist,
        output=out,
        layout=layout,
        variant=cfg.variant,
        reduced=reduced,
        plant=RESISTIVE if chain is None else PI_LINK,
        net=net,
        areas=tuple(areas),
        cfg=cfg,
        p_gen_selector=p_gen,
        p_inj_selector=p_inj,
        chain=chain,
    )


def assemble_resistive(net: MtdcNetwork, areas, cfg: ControllerConfig,
                       reduced: bool = True) -> ClosedLoopModel:
    """Closed loop with the purely resistive DC line model."""
    areas = _check_structure(net, areas, cfg)
    return _assemble(net, areas, cfg, reduced, chain=None)


def assemble_pi_link(net: MtdcNetwork, areas, cfg: ControllerConfig,
                     reduced: bool = True, allow_multi_gen: bool = False) -> ClosedLoopModel:
    """Closed loop with dynamic pi-link DC lines.

    Multi-generator areas are rejected by default: the stability
    certificate covers single-generator areas only. Pass
    ``allow_multi_gen=True`` to compose them anyway (a warning notes the
    missing certificate).
    """
    areas = _check_structure(net, areas, cfg)
    if any(a.n_buses > 1 for a in areas):
        if not allow_multi_gen:
            raise ValueError("pi-link model supports single-generator areas only "
                             "(allow_multi_gen=True overrides)")
        warnings.warn("pi-link model with multi-generator areas has no stability certificate",
                      stacklevel=2)
    chain = pi_link_matrices(net)
    return _assemble(net, areas, cfg, reduced, chain=chain)


def reduction_matrix(model: ClosedLoopModel) -> np.ndarray:
    """Projection T from full to reduced coordinates (orthonormal rows).

    Identity on non-reducible blocks; the transpose of the ones-complement
    basis on each rotor-angle block and on the converter phase block, which
    drops exactly the uniform direction of each.
    """
    if model.reduced:
        raise ValueError("model is already reduced")
    red_layout = _build_layout(model.areas, model.cfg, True, model.chain)
    t_mat = np.zeros((red_layout.dim, model.dim))
    for name, start, length in model.layout.blocks:
        if name.startswith("angle"):
            s_i = ones_complement(length)
            t_mat[red_layout.sl(name), start:start + length] = s_i.T
        elif name == "conv_phase":
            s = ones_complement(length)
            t_mat[red_layout.sl(name), start:start + length] = s.T
        else:
            t_mat[red_layout.sl(name), start:start + length] = np.eye(length)
    return t_mat


def reduce_model(model: ClosedLoopModel) -> ClosedLoopModel:
    """Drop the unobservable uniform angle/phase directions.

    The kept directions evolve independently of the dropped ones, so the
    reduced model reproduces the output of the full model exactly.
    """
    t_mat = reduction_matrix(model)
    red_layout = _build_layout(model.areas, model.cfg, True, model.chain)
    return ClosedLoopModel(
        a=t_mat @ model.a @ t_mat.T,
        b_dist=t_mat @ model.b_dist,
        output=model.output @ t_mat.T,
        layout=red_layout,
        variant=model.variant,
        reduced=True,
        plant=model.plant,
        net=model.net,
        areas=model.areas,
        cfg=model.cfg,
        p_gen_selector=model.p_gen_selector @ t_mat.T,
        p_inj_selector=model.p_inj_selector @ t_mat.T,
        chain=model.chain,
    )


def disturbance_map(model: ClosedLoopModel, disturbances) -> np.ndarray:
    """Constant input vector from (area, bus, magnitude) power deviations.

    Multiple entries on one bus add up. A generation loss maps to a
    negative magnitude at that bus.
    """
    u = np.zeros(model.total_buses)
    offsets = model.bus_offsets()
    for area, bus, magnitude in disturbances:
        if not (0 <= area < model.n_areas):
            raise ValueError(f"unknown area {area}")
        if not (0 <= bus < model.areas[area].n_buses):
            raise ValueError(f"unknown bus {bus} in area {area}")
        u[offsets[area] + bus] += float(magnitude)
    return u


def baseline_disturbance(model: ClosedLoopModel) -> np.ndarray:
    """Constant per-bus power deviations configured on the areas themselves."""
    return np.concatenate([np.array(area.p_m) for area in model.areas])
