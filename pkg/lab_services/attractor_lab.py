# -*- coding: utf-8 -*-
"""
吸引子实验模块
检验阻尼受迫 NLS 流的动力系统性质：能量平衡、衰减包络、吸收球、光滑化常数、
Ball 能量恒等式、弱连续性以及 ω-极限采样
"""

import logging
from datetime import datetime
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nls_services.experiment_config import DEFAULT_C_TOL
from nls_services.field_factory import modulated_field
from nls_services.norms import apply_framewise_half_derivative, mixed_linf_x_l2_t
from nls_services.solver import (
    SolverParams,
    StepDiagnostics,
    evolve,
    integrate,
    plane_wave_field,
    plane_wave_reference,
)
from nls_services.spectral_core import (
    ComplexField,
    Grid,
    SpaceTimeField,
    half_derivative_symbol,
    l2_norm,
)

logger = logging.getLogger(__name__)

# 快照质量上界 M₀²·(1 + CONFINEMENT_SLACK)
CONFINEMENT_SLACK = 1e-8


class AbsorbingBallReport(BaseModel):
    """吸收球进入时间报告"""
    m0: float = Field(ge=0, description="M₀ = 2‖f‖₂/γ")
    entry_time: Optional[float] = Field(description="进入并停留在球内的最早记录时刻；None 表示 T 内未进入")
    predicted_bound: float = Field(description="由衰减包络得到的进入时间上界")
    mass_series: List[Tuple[float, float]] = Field(description="(t, ‖u(t)‖₂) 序列")

    @property
    def entered(self) -> bool:
        return self.entry_time is not None

    def entry_label(self) -> str:
        return "never within T" if self.entry_time is None else repr(self.entry_time)


class BallIdentityReport(BaseModel):
    """Ball 能量恒等式残差"""
    tau: float = Field(ge=0)
    t: float
    lhs: float = Field(description="‖u(t)‖²")
    rhs: float = Field(description="e^{-2γτ}‖u(t-τ)‖² + 2∫₀^τ e^{-2γs} Re(f, u(t-s)) ds")
    residual: float = Field(ge=0)


class WeakContinuityReport(BaseModel):
    """弱连续性探针结果"""
    mode_list: List[int]
    pairing_gap: List[float] = Field(description="sup_t |(uⁿ(t) - u(t), φ)|")
    strong_gap: List[float] = Field(description="‖uⁿ(T) - u(T)‖₂")
    equicontinuity: List[float] = Field(description="t ↦ (uⁿ(t), φ) 的离散 Lipschitz 常数")


class OmegaLimitSample(BaseModel):
    """ω-极限采样结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    t_star: float
    snapshots: SpaceTimeField
    pairwise_dist: np.ndarray
    diameter: float = Field(ge=0)
    m0: float = Field(ge=0)
    entry_time: Optional[float]
    confined: bool = Field(description="所有快照是否都在半径 M₀ 的球内")


class SmoothingRow(BaseModel):
    scale: float
    norm: float
    fitted_c: float


class ConvergenceRow(BaseModel):
    dt: float
    error: float
    ratio: Optional[float] = None


# ==================== 能量平衡与衰减包络 ====================

def envelope_bound(t: np.ndarray, gamma: float, f_norm: float, u0_norm: float) -> np.ndarray:
    """e^{-γt}‖u₀‖² + (1 - e^{-γt})‖f‖²/γ²"""
    decay = np.exp(-gamma * t)
    return decay * u0_norm ** 2 + (-np.expm1(-gamma * t)) * f_norm ** 2 / gamma ** 2


def decay_envelope_check(diagnostics: Sequence[StepDiagnostics], gamma: float, f_norm: float,
                         u0_norm: float, dt: Optional[float] = None,
                         c_tol: float = DEFAULT_C_TOL) -> Tuple[float, bool]:
    """
    检查每个记录时刻 M(t) ≤ e^{-γt}M(0) + (1 - e^{-γt})‖f‖²/γ² + c_tol·dt²

    Returns:
        (最大的带符号违反量, 是否通过)
    """
    if gamma <= 0:
        raise ValueError("envelope requires damping")
    times = np.array([item.t for item in diagnostics])
    masses = np.array([item.mass for item in diagnostics])
    if dt is None:
        dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    tolerance = c_tol * dt ** 2
    violation = masses - envelope_bound(times, gamma, f_norm, u0_norm)
    max_violation = float(violation.max())
    ok = max_violation <= tolerance
    if not ok:
        worst = int(np.argmax(violation))
        logger.warning(f"衰减包络在 t={times[worst]} 被违反: {max_violation:.3e} > 容差 {tolerance:.3e}")
    return max_violation, bool(ok)


def absorbing_radius(gamma: float, f_norm: float) -> float:
    return 2.0 * f_norm / gamma


def absorbing_entry(diagnostics: Sequence[StepDiagnostics], gamma: float, f_norm: float) -> AbsorbingBallReport:
    """
    找到首个记录时刻，使此后所有记录的 ‖u‖ 都不超过 M₀

    预测上界：‖u₀‖ > M₀ 时 (1/γ)·ln(γ²‖u₀‖²/(3‖f‖²))，否则 0
    """
    if gamma <= 0:
        raise ValueError("absorbing ball requires damping")
    m0 = absorbing_radius(gamma, f_norm)
    times = np.array([item.t for item in diagnostics])
    norms = np.sqrt(np.array([item.mass for item in diagnostics]))
    inside = norms <= m0
    stays_inside = np.logical_and.accumulate(inside[::-1])[::-1]
    entry_time = float(times[int(np.argmax(stays_inside))]) if stays_inside.any() else None

    u0_norm = float(norms[0])
    if u0_norm <= m0:
        predicted = 0.0
    elif f_norm == 0.0:
        predicted = float("inf")
    else:
        predicted = float(np.log(gamma ** 2 * u0_norm ** 2 / (3.0 * f_norm ** 2)) / gamma)

    if entry_time is None:
        logger.info(f"吸收球: M₀={m0:.6e}，在 T={times[-1]} 内未进入")
    else:
        logger.info(f"吸收球: M₀={m0:.6e}, 进入时间={entry_time}, 预测上界={predicted}")
    return AbsorbingBallReport(
        m0=m0,
        entry_time=entry_time,
        predicted_bound=predicted,
        mass_series=list(zip(times.tolist(), norms.tolist())),
    )


def balance_convergence(u0: ComplexField, forcing: ComplexField, gamma: float, t_final: float,
                        dt_list: Sequence[float]) -> Tuple[List[ConvergenceRow], float]:
    """
    步长减半序列上的能量平衡残差 max|r|，以及标定的 c_tol = 10·max(max|r| / dt²)
    """
    rows: List[ConvergenceRow] = []
    constants = []
    for dt in dt_list:
        params = SolverParams(gamma=gamma, forcing=forcing, dt=dt, t_final=t_final, record_every=1)
        _, diagnostics = evolve(u0, params)
        worst = max(abs(item.balance_residual) for item in diagnostics)
        ratio = rows[-1].error / worst if rows and worst > 0 else None
        rows.append(ConvergenceRow(dt=dt, error=worst, ratio=ratio))
        constants.append(worst / dt ** 2)
        logger.info(f"能量平衡收敛: dt={dt}, max|r|={worst:.6e}, 比值={ratio}")
    return rows, 10.0 * max(constants)


def plane_wave_convergence(grid: Grid, gamma: float, a0: complex, mode_index: int, t_final: float,
                           dt_list: Sequence[float]) -> List[ConvergenceRow]:
    """平面波精确解上的末态 L² 误差与步长减半比值"""
    u0 = plane_wave_field(a0, mode_index, grid)
    reference = plane_wave_reference(a0, mode_index, grid, gamma, t_final)
    rows: List[ConvergenceRow] = []
    for dt in dt_list:
        params = SolverParams(gamma=gamma, forcing=ComplexField.zeros(grid), dt=dt, t_final=t_final)
        final, _ = evolve(u0, params)
        error = l2_norm(final.with_values(final.values - reference.values))
        ratio = rows[-1].error / error if rows and error > 0 else None
        rows.append(ConvergenceRow(dt=dt, error=error, ratio=ratio))
        logger.info(f"平面波收敛: dt={dt}, 误差={error:.6e}, 比值={ratio}")
    return rows


# ==================== 光滑化效应 ====================

def _free_flow_half_derivative(u0: ComplexField, t_final: float, dt_sample: float) -> SpaceTimeField:
    """D^{1/2}U(t)u₀ 在 t = j·dt_sample 上的取值"""
    grid = u0.grid
    n_frames = int(round(t_final / dt_sample)) + 1
    times = dt_sample * np.arange(n_frames)
    k2 = grid.wavenumbers ** 2
    spectrum = np.fft.fft(u0.values) * half_derivative_symbol(grid)
    data = np.fft.ifft(np.exp(1j * np.outer(times, k2)) * spectrum, axis=1)
    return SpaceTimeField.from_array(grid, dt_sample, data)


def kato_constant(u0: ComplexField, t_final: float, dt_sample: float) -> float:
    """线性光滑化估计的经验常数 ‖D^{1/2}U(t)u₀‖_{L^∞_x L²_T} / ‖u₀‖₂"""
    norm0 = l2_norm(u0)
    if norm0 == 0.0:
        return 0.0
    return mixed_linf_x_l2_t(_free_flow_half_derivative(u0, t_final, dt_sample)) / norm0


def smoothing_ratio(u0: ComplexField, t_final: float, scale_list: Sequence[float], dt: float = 1e-3,
                    record_every: int = 1, dealias: bool = False) -> List[SmoothingRow]:
    """
    对每个 λ 从 λ·u₀ 积分（γ = 0, f = 0），计算 N(λ) = ‖D^{1/2}u‖_{L^∞_x L²_T}
    以及 fitted_c = N(λ)/(λ‖u₀‖ + λ³‖u₀‖³)；λ = 0 时约定 fitted_c = 0
    """
    norm0 = l2_norm(u0)
    zero = ComplexField.zeros(u0.grid)
    rows = []
    for scale in scale_list:
        params = SolverParams(gamma=0.0, forcing=zero, dt=dt, t_final=t_final,
                              record_every=record_every, dealias=dealias)
        traj, _ = integrate(u0.with_values(scale * u0.values), params)
        norm = mixed_linf_x_l2_t(apply_framewise_half_derivative(traj))
        denominator = scale * norm0 + (scale * norm0) ** 3
        fitted = norm / denominator if denominator > 0 else 0.0
        rows.append(SmoothingRow(scale=scale, norm=norm, fitted_c=fitted))
        logger.info(f"光滑化比值: λ={scale}, N={norm:.6e}, c={fitted:.6e}")
    return rows


# ==================== Ball 能量恒等式 ====================

def _frame_index(traj: SpaceTimeField, t: float) -> int:
    position = (t - traj.t0) / traj.dt_sample
    index = int(round(position))
    if abs(position - index) > 1e-6 or index < 0 or index >= len(traj.frames):
        raise ValueError(
            f"time {t} outside the recorded window [{traj.t0}, {traj.t_final}] "
            f"or off the sampling lattice (dt_sample={traj.dt_sample})"
        )
    return index


def ball_energy_identity(traj: SpaceTimeField, gamma: float, f: ComplexField, t: float,
                         tau: float) -> BallIdentityReport:
    """
    ‖u(t)‖² = e^{-2γτ}‖u(t-τ)‖² + 2∫₀^τ e^{-2γs} Re(f, u(t-s)) ds

    外力项取正号（由能量等式的常数变易得到），积分在记录帧上用梯形公式
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    end = _frame_index(traj, t)
    start = _frame_index(traj, t - tau)

    lhs = l2_norm(traj.frames[end]) ** 2
    past = l2_norm(traj.frames[start]) ** 2
    integral = 0.0
    if end > start:
        indices = np.arange(start, end + 1)
        s = traj.times[end] - traj.times[indices]
        data = traj.as_array()[indices]
        pairings = np.real(data.conj() @ f.values) * f.grid.dx
        integrand = np.exp(-2.0 * gamma * s) * pairings
        weights = np.full(len(indices), traj.dt_sample)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        integral = float(np.sum(weights * integrand))
    rhs = float(np.exp(-2.0 * gamma * tau) * past + 2.0 * integral)
    residual = abs(lhs - rhs)
    logger.info(f"Ball 恒等式: t={t}, τ={tau}, lhs={lhs:.12e}, rhs={rhs:.12e}, 残差={residual:.3e}")
    return BallIdentityReport(tau=tau, t=t, lhs=lhs, rhs=rhs, residual=residual)


# ==================== 弱连续性 ====================

def pairing_modulus(traj: SpaceTimeField, phi: ComplexField) -> float:
    """max_j |(u(t_{j+1}) - u(t_j), φ)| / dt_sample"""
    if len(traj.frames) < 2:
        return 0.0
    values = traj.as_array() @ phi.values.conj() * phi.grid.dx
    return float(np.max(np.abs(np.diff(values))) / traj.dt_sample)


def _final_frame(traj: SpaceTimeField, u0: ComplexField, params: SolverParams) -> ComplexField:
    if abs(traj.t_final - params.t_final) <= 1e-9 * params.t_final:
        return traj.frames[-1]
    final, _ = evolve(u0, params)
    return final


def weak_continuity_probe(u0: ComplexField, g: ComplexField, phi: ComplexField, params: SolverParams,
                          mode_list: Sequence[int]) -> WeakContinuityReport:
    """
    u₀ⁿ = u₀ + e^{i k_n x}·g 弱收敛到 u₀ 但不强收敛；
    比较 sup_t |(uⁿ(t) - u(t), φ)| 与 ‖uⁿ(T) - u(T)‖₂
    """
    limit = params.grid.n_points / 4
    for n in mode_list:
        if abs(n) >= limit:
            raise ValueError(f"unresolved modulation: mode {n} needs |n| < {limit:g}")

    start_time = datetime.now()
    base_traj, _ = integrate(u0, params)
    base_final = _final_frame(base_traj, u0, params)
    base_pairings = base_traj.as_array() @ phi.values.conj() * phi.grid.dx

    pairing_gap, strong_gap, equicontinuity = [], [], []
    for n in mode_list:
        perturbed = u0.with_values(u0.values + modulated_field(g, n).values)
        traj, _ = integrate(perturbed, params)
        final = _final_frame(traj, perturbed, params)
        pairings = traj.as_array() @ phi.values.conj() * phi.grid.dx
        pairing_gap.append(float(np.max(np.abs(pairings - base_pairings))))
        strong_gap.append(l2_norm(final.with_values(final.values - base_final.values)))
        equicontinuity.append(pairing_modulus(traj, phi))
        logger.info(f"弱连续性: n={n}, 配对差={pairing_gap[-1]:.3e}, 强差={strong_gap[-1]:.3e}")

    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"弱连续性探针完成，耗时: {duration:.2f}秒")
    return WeakContinuityReport(
        mode_list=list(mode_list),
        pairing_gap=pairing_gap,
        strong_gap=strong_gap,
        equicontinuity=equicontinuity,
    )


# ==================== ω-极限采样 ====================

def _pairwise_distances(data: np.ndarray, dx: float) -> np.ndarray:
    difference = data[:, None, :] - data[None, :, :]
    return np.sqrt(np.sum(np.abs(difference) ** 2, axis=2) * dx)


def omega_limit_sample(u0: ComplexField, params: SolverParams, t_star: float, n_samples: int,
                       spacing: float) -> OmegaLimitSample:
    """
    记录 u(t_star + j·spacing), j = 0..n_samples-1，计算两两 L² 距离与直径

    f ≠ 0 时要求 t_star 不早于吸收球进入时间，并检查所有快照满足 ‖u‖² ≤ M₀²；
    f = 0 时吸收球退化为 {0}，不做这两项检查
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    grid = params.grid
    f_norm = l2_norm(params.forcing)
    steps_per_sample = spacing / params.dt
    if n_samples > 1 and abs(steps_per_sample - round(steps_per_sample)) > 1e-9 * steps_per_sample:
        raise ValueError(f"spacing {spacing} is not a multiple of dt {params.dt}")

    if t_star > 0:
        warmup = params.model_copy(update={"t_final": t_star, "record_every": 1})
        start, diagnostics = evolve(u0, warmup)
    else:
        start = u0
        diagnostics = [StepDiagnostics(t=0.0, mass=l2_norm(u0) ** 2, balance_residual=0.0,
                                       linf=float(np.abs(u0.values).max()))]

    if n_samples > 1:
        sampling = params.model_copy(update={
            "t_final": spacing * (n_samples - 1),
            "record_every": int(round(steps_per_sample)),
        })
        snapshots, tail = integrate(start, sampling)
        diagnostics = list(diagnostics) + [
            item.model_copy(update={"t": item.t + t_star}) for item in tail[1:]
        ]
        snapshots = SpaceTimeField(grid=grid, dt_sample=spacing, frames=snapshots.frames,
                                   t0=t_star, regime=snapshots.regime)
    else:
        snapshots = SpaceTimeField(grid=grid, dt_sample=spacing, frames=[start], t0=t_star)

    entry_time = None
    m0 = 0.0
    confined = True
    if params.gamma > 0:
        report = absorbing_entry(diagnostics, params.gamma, f_norm)
        m0, entry_time = report.m0, report.entry_time
        if f_norm > 0:
            if entry_time is None or t_star < entry_time:
                raise ValueError(
                    f"sampling before absorption: t_star={t_star}, entry time={report.entry_label()}"
                )
            masses = np.array([l2_norm(frame) ** 2 for frame in snapshots.frames])
            confined = bool(np.all(masses <= m0 ** 2 * (1.0 + CONFINEMENT_SLACK)))
            if not confined:
                logger.warning(f"ω-极限快照离开吸收球: max‖u‖²={masses.max():.6e} > M₀²={m0 ** 2:.6e}")

    distances = _pairwise_distances(snapshots.as_array(), grid.dx)
    diameter = float(distances.max())
    logger.info(f"ω-极限采样: t_star={t_star}, 样本数={n_samples}, 直径={diameter:.6e}")
    return OmegaLimitSample(
        t_star=t_star,
        snapshots=snapshots,
        pairwise_dist=distances,
        diameter=diameter,
        m0=m0,
        entry_time=entry_time,
        confined=confined,
    )


def cross_distance(sample_a: OmegaLimitSample, sample_b: OmegaLimitSample) -> float:
    """两组 ω-极限快照之间的最小 L² 距离"""
    a = sample_a.snapshots.as_array()
    b = sample_b.snapshots.as_array()
    difference = a[:, None, :] - b[None, :, :]
    dx = sample_a.snapshots.grid.dx
    return float(np.sqrt(np.min(np.sum(np.abs(difference) ** 2, axis=2)) * dx))

