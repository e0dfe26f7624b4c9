"""Controller laws for generation and converter injections.

Generation control is a droop term plus, in the distributed form, a
consensus-filtered integral state per area. Converter control maps local
frequency and DC-voltage deviations to injected power, optionally with a
phase-emulation state exchanged over a communication graph.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .netgraph import WeightedGraph, connectivity


class Variant(enum.Enum):
    """Which of the generation/converter law pairs is active."""

    DIST_GEN_DIST_CONV = "dist_gen_dist_conv"
    DIST_GEN_DEC_CONV = "dist_gen_dec_conv"
    DEC_GEN_DIST_CONV = "dec_gen_dist_conv"
    DEC_GEN_DEC_CONV = "dec_gen_dec_conv"

    @property
    def distributed_gen(self) -> bool:
        return self in (Variant.DIST_GEN_DIST_CONV, Variant.DIST_GEN_DEC_CONV)

    @property
    def distributed_conv(self) -> bool:
        return self in (Variant.DIST_GEN_DIST_CONV, Variant.DEC_GEN_DIST_CONV)


class CouplingMode(enum.Enum):
    """Power/current conversion at the converters.

    LINEAR divides by the fixed nominal voltage; NONLINEAR divides by the
    instantaneous absolute voltage.
    """

    LINEAR = "linear"
    NONLINEAR = "nonlinear"


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and communication graphs for all controller laws.

    ``k_droop`` and ``k_droop_i`` are nested per-area, per-bus tuples;
    ``k_omega`` and ``k_v`` have one entry per converter. Communication
    graphs are required (and must be connected) only when the matching
    distributed law is selected.
    """

    k_droop: tuple
    k_droop_i: tuple
    k_omega: tuple
    k_v: tuple
    comm_eta: WeightedGraph = None
    comm_phi: WeightedGraph = None
    gamma: float = 0.0
    omega_ref: float = 1.0
    variant: Variant = Variant.DIST_GEN_DIST_CONV

    def __post_init__(self):
        k_droop = tuple(tuple(float(v) for v in area) for area in self.k_droop)
        k_droop_i = tuple(tuple(float(v) for v in area) for area in self.k_droop_i)
        k_omega = tuple(float(v) for v in self.k_omega)
        k_v = tuple(float(v) for v in self.k_v)
        object.__setattr__(self, "k_droop", k_droop)
        object.__setattr__(self, "k_droop_i", k_droop_i)
        object.__setattr__(self, "k_omega", k_omega)
        object.__setattr__(self, "k_v", k_v)
        n = len(k_omega)
        if len(k_v) != n or len(k_droop) != n or len(k_droop_i) != n:
            raise ValueError("per-converter gain lists must share one length")
        for a, (kd, kdi) in enumerate(zip(k_droop, k_droop_i)):
            if len(kd) != len(kdi):
                raise ValueError(f"area {a}: droop gain lists must share one length")
            if any(v < 0.0 for v in kd):
                raise ValueError(f"area {a}: droop gains must be >= 0")
            if any(v <= 0.0 for v in kdi):
                raise ValueError(f"area {a}: integral droop gains must be > 0")
        if any(v <= 0.0 for v in k_omega) or any(v <= 0.0 for v in k_v):
            raise ValueError("k_omega and k_v must be > 0")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.variant.distributed_gen:
            if self.comm_eta is None or self.comm_eta.n_nodes != n:
                raise ValueError("distributed generation law needs a comm_eta graph over the areas")
            if not connectivity(self.comm_eta):
                raise ValueError("comm_eta must be connected")
        if self.variant.distributed_conv:
            if self.comm_phi is None or self.comm_phi.n_nodes != n:
                raise ValueError("distributed converter law needs a comm_phi graph over the converters")
            if not connectivity(self.comm_phi):
                raise ValueError("comm_phi must be connected")

    @property
    def n_areas(self) -> int:
        return len(self.k_omega)

    @property
    def bus_counts(self) -> tuple:
        return tuple(len(kd) for kd in self.k_droop)

    def area_slices(self) -> list[slice]:
        out, off = [], 0
        for count in self.bus_counts:
            out.append(slice(off, off + count))
            off += count
        return out


@dataclass(frozen=True)
class CostWeights:
    """Quadratic cost weights: generation per area, voltage per converter."""

    f_p: tuple
    f_v: tuple

    def __post_init__(self):
        f_p = tuple(float(v) for v in self.f_p)
        f_v = tuple(float(v) for v in self.f_v)
        if len(f_p) != len(f_v):
            raise ValueError("f_p and f_v must share one length")
        if any(v <= 0.0 for v in f_p) or any(v <= 0.0 for v in f_v):
            raise ValueError("cost weights must be > 0")
        object.__setattr__(self, "f_p", f_p)
        object.__setattr__(self, "f_v", f_v)


@dataclass(frozen=True)
class GainSolution:
    """Result of matching controller gains to cost weights.

    The optimality condition ties the gains to the generation weights via
    k_v * k_droop_i / k_omega = 1 / f_p per area, with k_v = f_v. When all
    three gain families are supplied the residual is the worst per-area
    violation; otherwise the free family is solved for and residual is 0.
    """

    k_v: tuple
    k_omega: tuple
    k_droop_i: tuple
    residual: float
    implied_f_p: tuple
    implied_f_v: tuple


def gains_from_costs(costs: CostWeights, k_omega=None, k_droop_i=None) -> GainSolution:
    """Derive converter/integral gains from cost weights (or check them).

    ``k_v`` always equals ``f_v``. Exactly one of ``k_omega`` / ``k_droop_i``
    may be omitted (per-area scalars expected); it is then solved from
    k_v * k_droop_i = k_omega / f_p. Raises on non-positive implied gains.
    """
    n = len(costs.f_p)
    k_v = costs.f_v
    if k_omega is None and k_droop_i is None:
        raise ValueError("supply at least one of k_omega, k_droop_i")
    if k_omega is not None and len(tuple(k_omega)) != n:
        raise ValueError("k_omega length mismatch")
    if k_droop_i is not None and len(tuple(k_droop_i)) != n:
        raise ValueError("k_droop_i length mismatch")
    if k_droop_i is None:
        k_omega = tuple(float(v) for v in k_omega)
        k_droop_i = tuple(ko / (fp * fv) for ko, fp, fv in zip(k_omega, costs.f_p, k_v))
    elif k_omega is None:
        k_droop_i = tuple(float(v) for v in k_droop_i)
        k_omega = tuple(fp * fv * kdi for kdi, fp, fv in zip(k_droop_i, costs.f_p, k_v))
    else:
        k_omega = tuple(float(v) for v in k_omega)
        k_droop_i = tuple(float(v) for v in k_droop_i)
    if any(v <= 0.0 for v in k_omega) or any(v <= 0.0 for v in k_droop_i):
        raise ValueError("implied gains are not positive; cost weights infeasible")
    implied_f_p = tuple(ko / (kv * kdi) for ko, kv, kdi in zip(k_omega, k_v, k_droop_i))
    residual = max(abs(1.0 / fp - kv * kdi / ko)
                   for fp, kv, kdi, ko in zip(costs.f_p, k_v, k_droop_i, k_omega))
    return GainSolution(
        k_v=k_v,
        k_omega=k_omega,
        k_droop_i=k_droop_i,
        residual=residual,
        implied_f_p=implied_f_p,
        implied_f_v=k_v,
    )


def _split_by_area(vec: np.ndarray, cfg: ControllerConfig) -> list[np.ndarray]:
    vec = np.asarray(vec, dtype=float)
    if vec.shape[0] != sum(cfg.bus_counts):
        raise ValueError("per-bus vector length mismatch")
    return [vec[sl] for sl in cfg.area_slices()]


def _consensus(graph: WeightedGraph, values: np.ndarray) -> np.ndarray:
    """Edge-wise sum_j w_ij (x_i - x_j): exactly zero on uniform vectors."""
    out = np.zeros_like(values)
    if graph is not None:
        for i, j, w in graph.edges:
            diff = w * (values[i] - values[j])
            out[i] += diff
            out[j] -= diff
    return out


def gen_control_distributed(omega_hat, eta, cfg: ControllerConfig):
    """Distributed generation law: droop plus consensus-filtered integral.

    ``omega_hat`` concatenates the per-bus frequency deviations of all
    areas in index order; ``eta`` holds one integral state per area.
    Returns (per-bus generated power, per-area integral state derivative).
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape[0] != cfg.n_areas:
        raise ValueError("eta length must equal the area count")
    parts = _split_by_area(omega_hat, cfg)
    p_gen = []
    eta_dot = -_consensus(cfg.comm_eta, eta)
    for a, w in enumerate(parts):
        kd = np.array(cfg.k_droop[a])
        kdi = np.array(cfg.k_droop_i[a])
        ratio = cfg.k_v[a] / cfg.k_omega[a]
        p_gen.append(-kd * w - ratio * kdi * eta[a])
        eta_dot[a] += kdi @ w
    return np.concatenate(p_gen), eta_dot


def gen_control_decentralized(omega_hat, cfg: ControllerConfig) -> np.ndarray:
    """Droop-only generation law: per-bus -k_droop * frequency deviation."""
    parts = _split_by_area(omega_hat, cfg)
    return np.concatenate([-np.array(cfg.k_droop[a]) * w for a, w in enumerate(parts)])


def conv_control_distributed(omega_hat_conv, v_hat, phi, cfg: ControllerConfig):
    """Distributed converter law with a phase-emulation consensus state.

    All arguments are per-converter vectors; ``omega_hat_conv`` is the
    frequency deviation at each converter bus. Returns (injected power,
    phase state derivative).
    """
    w = np.asarray(omega_hat_conv, dtype=float)
    v = np.asarray(v_hat, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = cfg.n_areas
    if w.shape[0] != n or v.shape[0] != n or phi.shape[0] != n:
        raise ValueError("per-converter vector length mismatch")
    k_omega = np.array(cfg.k_omega)
    k_v = np.array(cfg.k_v)
    p_inj = k_omega * w - k_v * v + _consensus(cfg.comm_phi, phi)
    phi_dot = (k_omega / k_v) * w - cfg.gamma * phi
    return p_inj, phi_dot


def conv_control_decentralized(omega_hat_conv, v_hat, cfg: ControllerConfig) -> np.ndarray:
    """Communication-free converter law: frequency and voltage droop only."""
    w = np.asarray(omega_hat_conv, dtype=float)
    v = np.asarray(v_hat, dtype=float)
    if w.shape[0] != cfg.n_areas or v.shape[0] != cfg.n_areas:
        raise ValueError("per-converter vector length mismatch")
    return np.array(cfg.k_omega) * w - np.array(cfg.k_v) * v


def power_to_current(p_inj, v, v_nom: float, mode: CouplingMode = CouplingMode.LINEAR) -> np.ndarray:
    """Convert injected power to injected current.

    LINEAR divides by the nominal voltage ``v_nom``; NONLINEAR divides by
    the instantaneous absolute voltage ``v`` and rejects voltages below
    0.5 p.u. where the division becomes meaningless.
    """
    p_inj = np.asarray(p_inj, dtype=float)
    if mode is CouplingMode.LINEAR:
        return p_inj / v_nom
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) < 0.5):
        raise ValueError("nonlinear power/current conversion needs |V| >= 0.5 p.u.")
    return p_inj / v
