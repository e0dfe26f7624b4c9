"""Stability certificates, equilibrium computation, and optimality checks.

Two routes to a stability verdict are kept deliberately separate: the
spectral test (eigenvalues of the reduced closed loop) and the quadratic
certificate built from the proportionality and damping conditions on the
converter communication graph. The certificate is sufficient, never
necessary; the bundled six-terminal setup with zero phase damping is the
standard example that is spectrally stable without a certificate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .assembly import ClosedLoopModel, PI_LINK, assemble_resistive
from .control import ControllerConfig
from .netgraph import laplacian, ones_complement
from .plant import MtdcNetwork, ac_swing_matrices

HURWITZ_TOL = 1e-9
ASSUMPTION_TOL = 1e-9


class UnstableSystemError(RuntimeError):
    """Raised when an operation requires an asymptotically stable model."""


class CertificateClass(enum.Enum):
    LYAPUNOV_PROVEN = "LYAPUNOV_PROVEN"
    HURWITZ_ONLY = "HURWITZ_ONLY"
    MARGINAL = "MARGINAL"
    UNSTABLE = "UNSTABLE"


@dataclass(frozen=True)
class Assumption1Result:
    """Proportionality of the phase-consensus and conductance Laplacians."""

    holds: bool
    k_phi: float
    residual: float


@dataclass(frozen=True)
class Assumption2Result:
    """Phase damping against the bound k_phi / (4 v_nom)."""

    holds: bool
    bound: float
    gamma: float


@dataclass(frozen=True, eq=False)
class CertificateResult:
    q1: np.ndarray
    q2: np.ndarray
    q1_min_eig: float
    q2_min_eig: float
    schur_ok: bool


@dataclass(frozen=True, eq=False)
class StabilityReport:
    assumption1: Assumption1Result
    assumption2: Assumption2Result
    spectral_abscissa: float
    q1_min_eig: float
    q2_min_eig: float
    certificate: CertificateClass


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    """Steady state under a constant disturbance, with optimality residuals.

    ``kkt_gen_residual`` measures deviation of the weighted generation
    vector from a uniform multiplier of ones (best multiplier fitted by
    least squares); ``kkt_volt_residual`` is the weighted voltage-deviation
    sum; ``avg_freq_residual`` the integral-gain-weighted frequency sum.
    """

    x_star: np.ndarray
    omega_hat_star: np.ndarray
    v_hat_star: np.ndarray
    eta_star: np.ndarray
    phi_star: np.ndarray
    p_gen_star: np.ndarray
    p_inj_star: np.ndarray
    area_gen_totals: np.ndarray
    kkt_gen_residual: float
    kkt_volt_residual: float
    avg_freq_residual: float
    injection_balance: float
    cost_generation: float
    cost_voltage: float


@dataclass(frozen=True)
class SweepRow:
    scale: float
    is_hurwitz: bool
    max_abs_freq_dev: float
    kkt_gen_residual: float
    kkt_volt_residual: float


def check_assumption1(l_phi: np.ndarray, l_r: np.ndarray) -> Assumption1Result:
    """Best proportionality factor between two Laplacians and its residual.

    The factor minimizing the Frobenius misfit is <L_phi, L_r> / ||L_r||^2;
    the check holds when the remaining max-norm misfit is below 1e-9.
    """
    l_phi = np.asarray(l_phi, dtype=float)
    l_r = np.asarray(l_r, dtype=float)
    if l_phi.shape != l_r.shape:
        raise ValueError("Laplacians must share one shape")
    denom = float(np.sum(l_r * l_r))
    if denom == 0.0:
        raise ValueError("conductance Laplacian is zero; no proportionality factor exists")
    k_phi = float(np.sum(l_phi * l_r)) / denom
    residual = float(np.abs(l_phi - k_phi * l_r).max())
    return Assumption1Result(holds=residual < ASSUMPTION_TOL, k_phi=k_phi, residual=residual)


def check_assumption2(gamma: float, k_phi: float, v_nom: float) -> Assumption2Result:
    """Strict damping condition gamma > k_phi / (4 v_nom)."""
    if k_phi < 0.0:
        raise ValueError("k_phi must be >= 0")
    if v_nom <= 0.0:
        raise ValueError("v_nom must be > 0")
    bound = k_phi / (4.0 * v_nom)
    return Assumption2Result(holds=gamma > bound, bound=bound, gamma=gamma)


def spectral_abscissa(a: np.ndarray) -> tuple[float, bool]:
    """Largest eigenvalue real part and the strict (tolerance -1e-9) verdict."""
    try:
        eigs = np.linalg.eigvals(np.asarray(a, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigenvalue computation failed") from exc
    abscissa = float(eigs.real.max()) if eigs.size else -np.inf
    return abscissa, abscissa < -HURWITZ_TOL


def hurwitz(model: ClosedLoopModel) -> tuple[float, bool]:
    """Spectral abscissa of the reduced model and the strict stability verdict."""
    if not model.reduced:
        raise ValueError("hurwitz test expects the reduced model")
    return spectral_abscissa(model.a)


def _min_eig(mat: np.ndarray) -> float:
    if mat.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(mat).min())


def lyapunov_certificate(net: MtdcNetwork, areas, cfg: ControllerConfig) -> CertificateResult:
    """Build the two certificate blocks and test positive definiteness.

    The frequency/voltage block couples the converter gains with the
    converter-bus droop; its Schur complement is positive definite exactly
    when that droop is positive. The voltage/phase block requires the
    proportionality factor k_phi (distributed converter law) and is
    positive definite exactly when the damping exceeds k_phi / (4 v_nom).
    Raises when the proportionality check fails.
    """
    areas = tuple(areas)
    n = net.n
    k_omega = np.array(cfg.k_omega)
    k_v = np.array(cfg.k_v)
    droop_conv = np.array([cfg.k_droop[i][0] for i in range(n)])
    q1 = np.block([
        [np.diag(k_omega / k_v * (k_omega + 0.5 * droop_conv)), -np.diag(k_omega)],
        [-np.diag(k_omega), np.diag(k_v)],
    ])
    s = ones_complement(n)
    l_r = laplacian(net.conductance_graph())
    core = s.T @ l_r @ s
    if cfg.variant.distributed_conv:
        a1 = check_assumption1(laplacian(cfg.comm_phi), l_r)
        if not a1.holds:
            raise ValueError("certificate needs the phase graph proportional to the "
                             f"conductance graph (residual {a1.residual:.3g})")
        k_phi = a1.k_phi
        q2 = np.block([
            [net.v_nom * core, -0.5 * k_phi * core],
            [-0.5 * k_phi * core, cfg.gamma * k_phi * core],
        ])
        margin = cfg.gamma * k_phi - k_phi ** 2 / (4.0 * net.v_nom)
        schur_gamma = margin > ASSUMPTION_TOL * max(1.0, k_phi ** 2 / (4.0 * net.v_nom))
    else:
        q2 = net.v_nom * core
        schur_gamma = True
    schur_ok = bool(np.all(droop_conv > 0.0) and schur_gamma and
                    (core.size == 0 or _min_eig(core) > 0.0))
    return CertificateResult(
        q1=q1,
        q2=q2,
        q1_min_eig=_min_eig(q1),
        q2_min_eig=_min_eig(q2),
        schur_ok=schur_ok,
    )


def lyapunov_matrix(model: ClosedLoopModel, form: str = "energy") -> np.ndarray:
    """Quadratic form P with W(x) = x^T P x for the model's layout.

    ``form`` selects the line-current weighting of the pi-link terms:
    "energy" uses the segment inductances (the form that decreases along
    trajectories), "printed" their inverses (reported for comparison only).
    """
    if form not in ("energy", "printed"):
        raise ValueError("form must be 'energy' or 'printed'")
    layout = model.layout
    p = np.zeros((model.dim, model.dim))
    for i, area in enumerate(model.areas):
        weight = model.cfg.k_omega[i] / (2.0 * model.cfg.k_v[i])
        fq = layout.sl(f"freq{i}")
        p[fq, fq] += weight * np.diag(area.inertia)
        if layout.has(f"angle{i}"):
            ang = layout.sl(f"angle{i}")
            _, l_ac, s_i = ac_swing_matrices(area)
            stiff = s_i.T @ l_ac @ s_i if model.reduced else l_ac
            p[ang, ang] += weight * stiff
    vdc = layout.sl("vdc")
    p[vdc, vdc] += 0.5 * model.net.v_nom * np.diag(model.net.cap)
    if layout.has("gen_integral"):
        gi = layout.sl("gen_integral")
        p[gi, gi] += 0.5 * np.eye(model.n_areas)
    if layout.has("conv_phase"):
        ph = layout.sl("conv_phase")
        l_phi = laplacian(model.cfg.comm_phi)
        if model.reduced:
            s = ones_complement(model.n_areas)
            l_phi = s.T @ l_phi @ s
        p[ph, ph] += 0.5 * l_phi
    if model.plant == PI_LINK:
        chain = model.chain
        cur_weight = chain.l_seg if form == "energy" else 1.0 / chain.l_seg
        for q in range(1, chain.n_segments + 1):
            sl = layout.sl(f"line_current{q}")
            p[sl, sl] += 0.5 * model.net.v_nom * np.diag(cur_weight)
        for q in range(1, chain.n_segments):
            sl = layout.sl(f"line_voltage{q}")
            p[sl, sl] += 0.5 * model.net.v_nom * np.diag(chain.c_seg)
    return p


def lyapunov_value(state: np.ndarray, model: ClosedLoopModel, form: str = "energy") -> float:
    """Evaluate the candidate quadratic function at one state (>= 0)."""
    state = np.asarray(state, dtype=float)
    if state.shape[0] != model.dim:
        raise ValueError("state length does not match the model layout")
    p = lyapunov_matrix(model, form)
    return float(state @ p @ state)


def _cost_weights_per_bus(model: ClosedLoopModel, costs=None):
    """Per-bus generation weights and per-converter voltage weights.

    Without explicit costs the weights implied by the gains are used:
    f_p = k_omega / (k_v * k_droop_i) per bus, f_v = k_v.
    """
    cfg = model.cfg
    if costs is not None:
        f_p = np.concatenate([np.full(model.areas[i].n_buses, costs.f_p[i])
                              for i in range(model.n_areas)])
        f_v = np.array(costs.f_v, dtype=float)
        return f_p, f_v
    f_p = np.concatenate([
        cfg.k_omega[i] / (cfg.k_v[i] * np.array(cfg.k_droop_i[i]))
        for i in range(model.n_areas)])
    return f_p, np.array(cfg.k_v)


def equilibrium(model: ClosedLoopModel, u: np.ndarray, costs=None) -> EquilibriumReport:
    """Solve for the steady state under constant input and report residuals.

    Requires the reduced, asymptotically stable model: the full-coordinate
    state matrix is singular whenever phase or angle blocks are present.
    """
    if not model.reduced:
        raise ValueError("equilibrium needs the reduced model (full coordinates are singular)")
    abscissa, stable = hurwitz(model)
    if not stable:
        raise UnstableSystemError(
            f"no unique stable equilibrium: spectral abscissa {abscissa:.3g}")
    u = np.asarray(u, dtype=float)
    x_star = np.linalg.solve(model.a, -model.b_dist @ u)
    layout = model.layout
    omega_hat = np.concatenate([x_star[layout.sl(f"freq{i}")] for i in range(model.n_areas)])
    v_hat = x_star[layout.sl("vdc")]
    eta = x_star[layout.sl("gen_integral")] if layout.has("gen_integral") else None
    phi = None
    if layout.has("conv_phase"):
        phi = ones_complement(model.n_areas) @ x_star[layout.sl("conv_phase")]
    p_gen = model.p_gen_selector @ x_star
    p_inj = model.p_inj_selector @ x_star
    offsets = model.bus_offsets()
    totals = np.array([
        p_gen[offsets[i]:offsets[i] + model.areas[i].n_buses].sum()
        for i in range(model.n_areas)])
    f_p, f_v = _cost_weights_per_bus(model, costs)
    weighted = f_p * p_gen
    kkt_gen = float(np.abs(weighted - weighted.mean()).max())
    kkt_volt = float(abs(f_v @ v_hat))
    kdi = np.concatenate([np.array(model.cfg.k_droop_i[i]) for i in range(model.n_areas)])
    avg_freq = float(abs(kdi @ omega_hat))
    balance = float(abs(p_inj.sum() / model.net.v_nom))
    return EquilibriumReport(
        x_star=x_star,
        omega_hat_star=omega_hat,
        v_hat_star=v_hat,
        eta_star=eta,
        phi_star=phi,
        p_gen_star=p_gen,
        p_inj_star=p_inj,
        area_gen_totals=totals,
        kkt_gen_residual=kkt_gen,
        kkt_volt_residual=kkt_volt,
        avg_freq_residual=avg_freq,
        injection_balance=balance,
        cost_generation=float(0.5 * np.sum(f_p * p_gen ** 2)),
        cost_voltage=float(0.5 * np.sum(f_v * v_hat ** 2)),
    )


def stability_report(net: MtdcNetwork, areas, cfg: ControllerConfig) -> StabilityReport:
    """Assemble the reduced model and run both stability routes."""
    model = assemble_resistive(net, areas, cfg, reduced=True)
    abscissa, stable = hurwitz(model)
    a1 = a2 = None
    cert_result = None
    if cfg.variant.distributed_conv:
        a1 = check_assumption1(laplacian(cfg.comm_phi), laplacian(net.conductance_graph()))
        if a1.holds:
            a2 = check_assumption2(cfg.gamma, a1.k_phi, net.v_nom)
            cert_result = lyapunov_certificate(net, areas, cfg)
    else:
        cert_result = lyapunov_certificate(net, areas, cfg)
    proven = (cert_result is not None
              and cert_result.q1_min_eig > 0.0
              and cert_result.q2_min_eig > 0.0
              and (a1 is None or a1.holds)
              and (a2 is None or a2.holds))
    if proven:
        certificate = CertificateClass.LYAPUNOV_PROVEN
    elif abscissa > HURWITZ_TOL:
        certificate = CertificateClass.UNSTABLE
    elif stable:
        certificate = CertificateClass.HURWITZ_ONLY
    else:
        certificate = CertificateClass.MARGINAL
    return StabilityReport(
        assumption1=a1,
        assumption2=a2,
        spectral_abscissa=abscissa,
        q1_min_eig=cert_result.q1_min_eig if cert_result is not None else None,
        q2_min_eig=cert_result.q2_min_eig if cert_result is not None else None,
        certificate=certificate,
    )


def gain_limit_sweep(net: MtdcNetwork, areas, cfg: ControllerConfig,
                          u: np.ndarray, scales) -> tuple:
    """Equilibrium quality as the converter/integral gains grow jointly.

    Each scale multiplies ``k_omega`` and ``k_droop_i`` together, which
    keeps the implied generation cost weights fixed while shrinking
    ||(k_omega)^-1 k_v||. Requires positive phase damping; rows whose
    scaled system is not Hurwitz are flagged rather than fatal.
    """
    if cfg.gamma <= 0.0:
        raise ValueError("the gain-limit sweep needs gamma > 0")
    rows = []
    for scale in scales:
        scale = float(scale)
        if scale <= 0.0:
            raise ValueError("scales must be > 0")
        scaled = replace(
            cfg,
            k_omega=tuple(k * scale for k in cfg.k_omega),
            k_droop_i=tuple(tuple(k * scale for k in area) for area in cfg.k_droop_i),
        )
        model = assemble_resistive(net, areas, scaled, reduced=True)
        _, stable = hurwitz(model)
        if not stable:
            rows.append(SweepRow(scale, False, np.nan, np.nan, np.nan))
            continue
        rep = equilibrium(model, u)
        rows.append(SweepRow(
            scale=scale,
            is_hurwitz=True,
            max_abs_freq_dev=float(np.abs(rep.omega_hat_star).max()),
            kkt_gen_residual=rep.kkt_gen_residual,
            kkt_volt_residual=rep.kkt_volt_residual,
        ))
    return tuple(rows)
