# -*- coding: utf-8 -*-
"""
时间积分模块
用 Strang 分裂求解 u_t + γu + i u_xx + i|u|²u = f：
线性部分（色散 + 阻尼 + 外力）在傅里叶空间精确求解，非线性部分是逐点精确相位旋转
另外提供平面波精确解与 Duhamel 残差两个参考检验
"""

import logging
from datetime import datetime
from typing import List, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .spectral_core import (
    ComplexField,
    Grid,
    IncompatibleGridError,
    SpaceTimeField,
    TrajectoryRegime,
    dealias_mask,
    l2_norm,
    spectral_tail_ratio,
)

logger = logging.getLogger(__name__)

# 谱尾超过峰值的该比例时给出混叠警告
SPECTRAL_TAIL_WARNING = 1e-10


class IntegrationError(RuntimeError):
    """积分过程中出现非有限值"""

    def __init__(self, t: float, diagnostics: List["StepDiagnostics"]):
        super().__init__(f"blow-up or instability at t={t:.17g}")
        self.t = t
        self.diagnostics = diagnostics


class SolverParams(BaseModel):
    """求解参数"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    gamma: float = Field(ge=0, description="阻尼参数 γ")
    forcing: ComplexField = Field(description="与时间无关的外力 f")
    dt: float = Field(gt=0, description="时间步长")
    t_final: float = Field(gt=0, description="终止时间")
    record_every: int = Field(default=1, ge=1, description="每隔多少步记录一帧")
    dealias: bool = Field(default=False, description="是否使用 2/3 规则去混叠")

    @model_validator(mode="after")
    def _check_step(self) -> "SolverParams":
        if self.dt > self.t_final:
            raise ValueError(f"dt={self.dt} exceeds t_final={self.t_final}")
        return self

    @property
    def grid(self) -> Grid:
        return self.forcing.grid

    def forcing_is_zero(self) -> bool:
        return not np.any(self.forcing.values)


class StepDiagnostics(BaseModel):
    """单步诊断量"""
    t: float
    mass: float = Field(ge=0, description="‖u(t)‖²")
    balance_residual: float = Field(description="能量平衡式的离散残差")
    linf: float = Field(ge=0, description="max |u(x_j)|")


def _phi_coefficients(grid: Grid, gamma: float, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """返回 e^{Lh} 与 (e^{Lh} - 1)/L，L = i k² - γ；L = 0 时取极限 h"""
    k = grid.wavenumbers
    symbol = 1j * k * k - gamma
    decay = np.exp(symbol * h)
    forcing_weight = np.full(symbol.shape, h, dtype=np.complex128)
    nonzero = symbol != 0
    forcing_weight[nonzero] = np.expm1(symbol[nonzero] * h) / symbol[nonzero]
    return decay, forcing_weight


def linear_substep(u: ComplexField, params: SolverParams, h: float) -> ComplexField:
    """
    精确求解 u_t = -i u_xx - γu + f，时长 h

    每个模：û_k(h) = e^{(ik²-γ)h} û_k(0) + (e^{(ik²-γ)h} - 1)/(ik²-γ) · f̂_k
    """
    if h <= 0:
        raise ValueError(f"substep length must be positive, got {h}")
    if u.grid != params.grid:
        raise IncompatibleGridError()
    decay, forcing_weight = _phi_coefficients(u.grid, params.gamma, h)
    u_hat = np.fft.fft(u.values)
    if params.dealias:
        u_hat = u_hat * dealias_mask(u.grid)
    f_hat = np.fft.fft(params.forcing.values)
    return u.with_values(np.fft.ifft(decay * u_hat + forcing_weight * f_hat))


def nonlinear_substep(u: ComplexField, h: float) -> ComplexField:
    """u_t = -i|u|²u 的精确解：逐点相位旋转，模长不变"""
    return u.with_values(_rotate_phase(u.values, h))


def _rotate_phase(values: np.ndarray, h: float) -> np.ndarray:
    return values * np.exp(-1j * (values.real ** 2 + values.imag ** 2) * h)


class _StrangPropagator:
    """单条轨迹使用的 Strang 步进器，预先计算线性子流的系数"""

    def __init__(self, params: SolverParams):
        self.params = params
        self.grid = params.grid
        self._f_hat = np.fft.fft(params.forcing.values)
        self._mask = dealias_mask(self.grid) if params.dealias else None
        self._cache = {}

    def _coefficients(self, h: float) -> Tuple[np.ndarray, np.ndarray]:
        if h not in self._cache:
            decay, forcing_weight = _phi_coefficients(self.grid, self.params.gamma, h)
            self._cache[h] = (decay, forcing_weight * self._f_hat)
        return self._cache[h]

    def step(self, values: np.ndarray, h: float) -> np.ndarray:
        decay, forced = self._coefficients(h)
        values = _rotate_phase(values, 0.5 * h)
        u_hat = np.fft.fft(values)
        if self._mask is not None:
            u_hat *= self._mask
        values = np.fft.ifft(decay * u_hat + forced)
        return _rotate_phase(values, 0.5 * h)


def strang_step(u: ComplexField, params: SolverParams) -> ComplexField:
    """B(dt/2)·A(dt)·B(dt/2)，二阶分裂"""
    half = 0.5 * params.dt
    return nonlinear_substep(linear_substep(nonlinear_substep(u, half), params, params.dt), half)


def _step_schedule(params: SolverParams) -> List[float]:
    """等长步加最后一个缩短的步，保证恰好到达 t_final"""
    ratio = params.t_final / params.dt
    n_full = int(round(ratio))
    if abs(ratio - n_full) > 1e-9 * max(1.0, ratio):
        n_full = int(np.floor(ratio))
    remainder = params.t_final - n_full * params.dt
    steps = [params.dt] * n_full
    if remainder > 1e-9 * params.dt:
        steps.append(remainder)
    return steps


def _march(u0: ComplexField, params: SolverParams, keep_frames: bool):
    """逐步推进并收集诊断；keep_frames 为 False 时只保留末态"""
    if u0.grid != params.grid:
        raise IncompatibleGridError()

    start_time = datetime.now()
    grid = params.grid
    dx = grid.dx
    forcing = params.forcing.values
    gamma = params.gamma
    propagator = _StrangPropagator(params)
    steps = _step_schedule(params)
    logger.info(
        f"开始积分: n={grid.n_points}, L={grid.length}, γ={gamma}, dt={params.dt}, "
        f"T={params.t_final}, 步数={len(steps)}"
    )

    values = u0.values.copy()
    mass = float(np.sum(np.abs(values) ** 2) * dx)
    diagnostics = [StepDiagnostics(t=0.0, mass=mass, balance_residual=0.0, linf=float(np.abs(values).max()))]
    frames = [values.copy()]
    tail_warned = False
    t = 0.0

    for index, h in enumerate(steps, start=1):
        new_values = propagator.step(values, h)
        t_new = index * params.dt if h == params.dt else params.t_final
        if not np.all(np.isfinite(new_values)):
            logger.error(f"积分在 t={t_new} 出现非有限值，中止")
            raise IntegrationError(t_new, diagnostics)

        new_mass = float(np.sum(np.abs(new_values) ** 2) * dx)
        midpoint = 0.5 * (values + new_values)
        forcing_pairing = float(np.real(np.vdot(midpoint, forcing)) * dx)
        # d/dt‖u‖² + 2γ‖u‖² - 2Re(f, u) = 0 的离散残差
        residual = (new_mass - mass) / h + gamma * (mass + new_mass) - 2.0 * forcing_pairing
        diagnostics.append(StepDiagnostics(
            t=t_new, mass=new_mass, balance_residual=residual, linf=float(np.abs(new_values).max())
        ))

        if keep_frames and index % params.record_every == 0 and h == params.dt:
            frames.append(new_values.copy())
            if not tail_warned:
                ratio = spectral_tail_ratio(ComplexField(grid=grid, values=new_values))
                if ratio > SPECTRAL_TAIL_WARNING:
                    logger.warning(f"t={t_new} 谱尾比例 {ratio:.3e} 超过 {SPECTRAL_TAIL_WARNING:g}，可能存在混叠")
                    tail_warned = True
            logger.debug(f"记录帧 t={t_new}, mass={new_mass:.6e}")

        values, mass, t = new_values, new_mass, t_new

    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"积分完成: t={t}, 帧数={len(frames)}, 末态质量={mass:.6e}, 耗时: {duration:.2f}秒")
    return frames, diagnostics, values


def integrate(u0: ComplexField, params: SolverParams) -> Tuple[SpaceTimeField, List[StepDiagnostics]]:
    """
    从 t = 0 积分到 t_final，实现半群 S(t)

    Args:
        u0: 初值，必须与外力在同一网格
        params: 求解参数

    Returns:
        (SpaceTimeField, 逐步诊断列表)；帧只在采样格点 k·record_every·dt 上记录，
        因此 t_final 不在格点上时末态不在轨迹中（用 evolve 取末态）

    Raises:
        IntegrationError: 出现 NaN/Inf 时中止，携带已有诊断
    """
    frames, diagnostics, _ = _march(u0, params, keep_frames=True)
    regime = TrajectoryRegime(gamma=params.gamma, forcing_norm=l2_norm(params.forcing))
    trajectory = SpaceTimeField.from_array(
        params.grid, params.dt * params.record_every, np.array(frames), t0=0.0, regime=regime
    )
    return trajectory, diagnostics


def evolve(u0: ComplexField, params: SolverParams) -> Tuple[ComplexField, List[StepDiagnostics]]:
    """只保留 t_final 时刻的状态与逐步诊断"""
    _, diagnostics, values = _march(u0, params, keep_frames=False)
    return u0.with_values(values), diagnostics


def diagnostics_frame(diagnostics: List[StepDiagnostics]) -> pd.DataFrame:
    return pd.DataFrame(
        [item.model_dump() for item in diagnostics],
        columns=["t", "mass", "balance_residual", "linf"],
    )


def plane_wave_reference(a0: complex, mode_index: int, grid: Grid, gamma: float, t: float) -> ComplexField:
    """
    f = 0 时的精确平面波解 A(t)e^{ikx}

    γ > 0: A(t) = a0·e^{-γt}·exp(i[k²t - |a0|²(1 - e^{-2γt})/(2γ)])
    γ = 0: A(t) = a0·exp(i[k² - |a0|²]t)
    """
    k = 2.0 * np.pi * mode_index / grid.length
    intensity = abs(a0) ** 2
    if gamma > 0:
        nonlinear_phase = -intensity * (-np.expm1(-2.0 * gamma * t)) / (2.0 * gamma)
        amplitude = a0 * np.exp(-gamma * t) * np.exp(1j * (k * k * t + nonlinear_phase))
    else:
        amplitude = a0 * np.exp(1j * (k * k - intensity) * t)
    return ComplexField(grid=grid, values=amplitude * np.exp(1j * k * grid.x))


def plane_wave_field(a0: complex, mode_index: int, grid: Grid) -> ComplexField:
    return plane_wave_reference(a0, mode_index, grid, 0.0, 0.0)


def duhamel_residual(traj: SpaceTimeField, u0: ComplexField) -> float:
    """
    max_n ‖u(t_n) - U(t_n)u₀ + i∫₀^{t_n} U(t_n - s)|u|²u ds‖₂，时间积分用梯形公式

    只适用于 γ = 0, f = 0 的轨迹。利用 U(t_n - s) = U(t_n)U(-s)，
    先累积 ∫ U(-s)|u|²u ds，再整体作用 U(t_n)。
    """
    regime = traj.regime
    if regime is None or regime.gamma != 0.0 or regime.forcing_norm != 0.0:
        raise ValueError("duhamel_residual requires a trajectory with gamma=0 and f=0")
    if u0.grid != traj.grid:
        raise IncompatibleGridError()

    grid = traj.grid
    k2 = grid.wavenumbers ** 2
    data = traj.as_array()
    times = traj.times
    nonlinear_hat = np.fft.fft(np.abs(data) ** 2 * data, axis=1)
    pulled_back = np.exp(-1j * np.outer(times, k2)) * nonlinear_hat

    u0_hat = np.fft.fft(u0.values)
    accumulated = np.zeros(grid.n_points, dtype=np.complex128)
    worst = 0.0
    for n in range(len(times)):
        if n > 0:
            accumulated += 0.5 * (times[n] - times[n - 1]) * (pulled_back[n - 1] + pulled_back[n])
        predicted_hat = np.exp(1j * k2 * times[n]) * (u0_hat - 1j * accumulated)
        defect_hat = np.fft.fft(data[n]) - predicted_hat
        # Parseval（numpy 的 fft 不带 1/n）
        norm = np.sqrt(grid.length * np.sum(np.abs(defect_hat) ** 2)) / grid.n_points
        worst = max(worst, float(norm))
    return worst
